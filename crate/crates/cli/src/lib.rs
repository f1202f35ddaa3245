//! The `gangs` command line.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure,
//! 4 file system error.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gangs::baseline::{train_gan, GanStep};
use gangs::eval::{self, build_report};
use gangs::matrix_game::{self, solve_zero_sum, EXACT_TOL};
use gangs::pnm::{self, resume_neural, run_matrix, run_neural, Checkpoint};
use gangs::seed::{rng_from, tag};
use gangs::synth::write_labeled_csv;
use gangs::{MixedNetStrategy, MixedStrategy, NetworkParams};

pub use config::{Mode, RunConfig, RESOLVED_CONFIG};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<gangs::Error> for CliError {
    fn from(e: gangs::Error) -> Self {
        match e {
            gangs::Error::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<matrix_game::GameError> for CliError {
    fn from(e: matrix_game::GameError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "gangs", version, about = "Generative adversarial network games solved with Parallel Nash Memory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Neural PNM on a synthetic mixture; writes a checkpoint and a report.
    Pnm {
        #[command(flatten)]
        run: RunArgs,
        /// Continue the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Baseline alternating GAN training; writes both networks and a report.
    Gan {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Solve a zero-sum matrix game read from CSV.
    SolveMatrix {
        /// Matrix of the column player's payoffs, one row per line.
        matrix: PathBuf,
        #[arg(long, default_value_t = EXACT_TOL)]
        tol: f64,
    },
    /// PNM with exact best responses on a matrix game read from CSV.
    PnmMatrix {
        matrix: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Rebuild the report of a finished `pnm` or `gan` run.
    Eval {
        /// Run directory holding `resolved-config.toml`.
        run_dir: PathBuf,
        /// Report directory; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw labelled points from the configured mixture.
    SampleData {
        #[command(flatten)]
        run: RunArgs,
        #[arg(short = 'n', long, default_value_t = 1000)]
        count: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// PNM iteration cap.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Uniform fake points in classifier best responses.
    #[arg(long, value_enum)]
    pub uniform_fakes: Option<Switch>,
    /// Generator learning rate for best responses and GAN training.
    #[arg(long)]
    pub gen_lr: Option<f64>,
}

impl RunArgs {
    /// Loads the config file, if any, and applies the flags on top.
    pub fn resolve(&self, mode: Mode) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.mode = mode;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(n) = self.max_iters {
            cfg.pnm.max_iterations = n;
        }
        if let Some(u) = self.uniform_fakes {
            cfg.pnm.rbbr.uniform_fakes = u == Switch::On;
        }
        if let Some(lr) = self.gen_lr {
            cfg.pnm.rbbr.gen_learning_rate = Some(lr);
            cfg.gan.gen_opt.learning_rate = lr;
        }
        cfg.resolved()
    }
}

/// Runs one command, writing human-readable progress to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let text = match cli.command {
        Command::Pnm { run, resume } => cmd_pnm(&run.resolve(Mode::Pnm)?, resume)?,
        Command::Gan { run } => cmd_gan(&run.resolve(Mode::Gan)?)?,
        Command::SolveMatrix { matrix, tol } => cmd_solve(&matrix, tol)?,
        Command::PnmMatrix { matrix, run } => cmd_pnm_matrix(&matrix, &run.resolve(Mode::PnmMatrix)?)?,
        Command::Eval { run_dir, out } => cmd_eval(&run_dir, out.as_deref())?,
        Command::SampleData { run, count } => cmd_sample(&run.resolve(Mode::SampleData)?, count)?,
    };
    out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
}

fn mix(m: &MixedStrategy) -> String {
    m.probs().iter().map(|p| format!("{p:.6}")).collect::<Vec<_>>().join(" ")
}

fn checkpoint_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("checkpoint")
}

fn report_and_emit(cfg: &RunConfig, gens: &MixedNetStrategy, clfs: &MixedNetStrategy, history: &[pnm::IterationRecord], dir: &Path) -> Result<String, CliError> {
    let spec = cfg.spec()?;
    let report = build_report(&spec, gens, clfs, history, &cfg.eval, &mut rng_from(cfg.seed, &[tag::EVAL]))?;
    eval::emit(&report, dir)?;
    let c = &report.coverage;
    let disp = report.dispersion.map_or("n/a".to_string(), |d| format!("{d:.4}"));
    Ok(format!(
        "modes hit {}/{}  high-quality fraction {:.4}  mode dispersion {disp}\nreport written to {}\n",
        c.modes_hit,
        c.total_modes,
        c.high_quality_fraction,
        dir.display()
    ))
}

fn cmd_pnm(cfg: &RunConfig, resume: bool) -> Result<String, CliError> {
    let spec = cfg.spec()?;
    cfg.write_resolved(&cfg.out_dir)?;
    let ckpt = checkpoint_dir(cfg);
    let outcome = if resume {
        resume_neural(&spec, &cfg.pnm, &ckpt)?
    } else {
        run_neural(&spec, &cfg.pnm, Some(&ckpt))?
    };
    let st = &outcome.state;
    let mut text = String::from("iter     u_brs  subgame_value  rows cols accepted\n");
    for r in &st.history {
        let _ = writeln!(text, "{:>4} {:>9.4} {:>14.4} {:>5} {:>4} {}", r.iteration, r.u_brs, r.subgame_value, r.rows, r.cols, r.accepted);
    }
    let _ = writeln!(text, "{}", if outcome.certified { "resource-bounded equilibrium certified" } else { "iteration cap reached" });
    text += &report_and_emit(cfg, &st.gen_mixture()?, &st.clf_mixture()?, &st.history, &cfg.out_dir)?;
    Ok(text)
}

fn gan_history_csv(history: &[GanStep]) -> String {
    let mut s = String::from("step,clf_loss,gen_loss\n");
    for h in history {
        let _ = writeln!(s, "{},{},{}", h.step, h.clf_loss, h.gen_loss);
    }
    s
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn cmd_gan(cfg: &RunConfig) -> Result<String, CliError> {
    let spec = cfg.spec()?;
    cfg.write_resolved(&cfg.out_dir)?;
    let outcome = train_gan(&spec, &cfg.gan, &mut rng_from(cfg.seed, &[tag::GAN]))?;
    outcome.gen.save(&cfg.out_dir.join("generator.params"))?;
    outcome.clf.save(&cfg.out_dir.join("classifier.params"))?;
    write(&cfg.out_dir.join("gan_history.csv"), &gan_history_csv(&outcome.history))?;
    let last = outcome.history.last();
    let mut text = String::new();
    if let Some(h) = last {
        let _ = writeln!(text, "{} rounds  final classifier loss {:.4}  generator loss {:.4}", h.step + 1, h.clf_loss, h.gen_loss);
    }
    text += &report_and_emit(cfg, &MixedNetStrategy::pure(outcome.gen), &MixedNetStrategy::pure(outcome.clf), &[], &cfg.out_dir)?;
    Ok(text)
}

fn cmd_solve(path: &Path, tol: f64) -> Result<String, CliError> {
    let game = matrix_game::read_csv(path)?;
    let r = solve_zero_sum(&game, tol)?;
    Ok(format!(
        "value {}\nrow mix {}\ncolumn mix {}\nexploitability {:e}\n",
        r.value,
        mix(&r.row_mix),
        mix(&r.col_mix),
        r.exploitability
    ))
}

fn cmd_pnm_matrix(path: &Path, cfg: &RunConfig) -> Result<String, CliError> {
    let game = matrix_game::read_csv(path)?;
    let out = run_matrix(&game, &cfg.pnm)?;
    let (rows, cols) = out.state.full_mixes(game.rows(), game.cols())?;
    let gap = matrix_game::exploitability(&game, &rows, &cols)?;
    let mut text = format!(
        "iterations {}\nsubgame {}x{}\nvalue {}\nrow mix {}\ncolumn mix {}\nexploitability {:e}\n",
        out.state.history.len(),
        out.state.gens.len(),
        out.state.clfs.len(),
        out.state.value,
        mix(&rows),
        mix(&cols),
        gap
    );
    if !out.certified {
        text += "iteration cap reached before certification\n";
    }
    Ok(text)
}

fn cmd_eval(run_dir: &Path, out: Option<&Path>) -> Result<String, CliError> {
    let cfg = RunConfig::load(&run_dir.join(RESOLVED_CONFIG))?;
    let dest = out.unwrap_or(run_dir);
    match cfg.mode {
        Mode::Pnm => {
            let state = Checkpoint::open(&run_dir.join("checkpoint")).load(&cfg.pnm)?;
            report_and_emit(&cfg, &state.gen_mixture()?, &state.clf_mixture()?, &state.history, dest)
        }
        Mode::Gan => {
            let gen = NetworkParams::load(&run_dir.join("generator.params"))?;
            let clf = NetworkParams::load(&run_dir.join("classifier.params"))?;
            report_and_emit(&cfg, &MixedNetStrategy::pure(gen), &MixedNetStrategy::pure(clf), &[], dest)
        }
        m => Err(CliError::Config(format!("{} holds a {m:?} run, which has no report", run_dir.display()))),
    }
}

fn cmd_sample(cfg: &RunConfig, count: usize) -> Result<String, CliError> {
    let mixture = cfg.spec()?.data;
    let (points, labels) = mixture.sample_labeled(count, &mut rng_from(cfg.seed, &[tag::REAL_SET]));
    fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::Io(format!("{}: {e}", cfg.out_dir.display())))?;
    cfg.write_resolved(&cfg.out_dir)?;
    let path = cfg.out_dir.join("samples.csv");
    write_labeled_csv(&points, &labels, &path)?;
    Ok(format!("{count} points written to {}\n", path.display()))
}
