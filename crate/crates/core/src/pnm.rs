//! Parallel Nash Memory.
//!
//! The loop keeps a growing subgame of every strategy discovered so far and
//! a mixed equilibrium of it. Each iteration asks both players' oracles for a
//! response to the opponent's equilibrium mixture, prices the responses
//! against the subgame, and adds them when the test finds a gain.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gang::{measured_mean, GangSpec, MixedNetStrategy, DEFAULT_CELL_SAMPLES};
use crate::matrix_game::{self, MixedStrategy, PayoffMatrix, Player, EXACT_TOL, SIMULATED_TOL};
use crate::neural::NetworkParams;
use crate::rbbr::{self, RbbrConfig};
use crate::seed::{self, tag};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "GANGS_THREADS";

/// Worker threads allowed by `GANGS_THREADS`, else the available cores.
pub fn thread_budget() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Where best responses come from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum OracleKind {
    /// Gradient-trained networks.
    #[default]
    Neural,
    /// Exact best responses in a known finite game.
    ExactMatrix(PayoffMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PnmConfig {
    pub max_iterations: usize,
    #[serde(skip)]
    pub oracle: OracleKind,
    pub rbbr: RbbrConfig,
    /// Monte Carlo samples per payoff-matrix cell.
    pub cell_samples: usize,
    pub seed: u64,
    /// Discard responses whose combined test payoff is not positive.
    pub ignore_non_positive_tests: bool,
}

impl Default for PnmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 15,
            oracle: OracleKind::Neural,
            rbbr: RbbrConfig::default(),
            cell_samples: DEFAULT_CELL_SAMPLES,
            seed: 0,
            ignore_non_positive_tests: true,
        }
    }
}

impl PnmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Invalid("max_iterations must be at least 1".into()));
        }
        if self.cell_samples == 0 {
            return Err(Error::Invalid("cell_samples must be at least 1".into()));
        }
        self.rbbr.validate()
    }
}

/// One completed PNM iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `u_G(new G, μ_C) + u_C(μ_G, new C)`.
    pub u_brs: f64,
    /// What `μ_G` earns against the new classifier.
    pub gen_security: f64,
    /// What `μ_C` earns against the new generator.
    pub clf_security: f64,
    /// Subgame value after the iteration, classifier perspective.
    pub subgame_value: f64,
    pub accepted: bool,
    pub gen_added: bool,
    pub clf_added: bool,
    pub rows: usize,
    pub cols: usize,
    pub wall_ms: u64,
}

/// Strategy lists, their payoff matrix and its current equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct PnmState<G, C> {
    pub gens: Vec<G>,
    pub clfs: Vec<C>,
    pub subgame: PayoffMatrix,
    pub row_mix: MixedStrategy,
    pub col_mix: MixedStrategy,
    pub value: f64,
    pub history: Vec<IterationRecord>,
}

pub type NeuralState = PnmState<NetworkParams, NetworkParams>;
pub type MatrixState = PnmState<usize, usize>;

impl<G, C> PnmState<G, C> {
    fn single(gen: G, clf: C, cell: f64) -> Result<Self> {
        Ok(Self {
            gens: vec![gen],
            clfs: vec![clf],
            subgame: PayoffMatrix::from_flat(1, 1, vec![cell])?,
            row_mix: MixedStrategy::pure(1, 0),
            col_mix: MixedStrategy::pure(1, 0),
            value: cell,
            history: Vec::new(),
        })
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.subgame.rows(), self.subgame.cols())
    }
}

impl NeuralState {
    pub fn gen_mixture(&self) -> Result<MixedNetStrategy> {
        MixedNetStrategy::from_support(&self.gens, &self.row_mix)
    }

    pub fn clf_mixture(&self) -> Result<MixedNetStrategy> {
        MixedNetStrategy::from_support(&self.clfs, &self.col_mix)
    }
}

impl MatrixState {
    /// The equilibrium mixtures spread over the full game's strategies.
    pub fn full_mixes(&self, rows: usize, cols: usize) -> Result<(MixedStrategy, MixedStrategy)> {
        Ok((spread(&self.gens, &self.row_mix, rows)?, spread(&self.clfs, &self.col_mix, cols)?))
    }
}

fn spread(indices: &[usize], mix: &MixedStrategy, n: usize) -> Result<MixedStrategy> {
    let mut p = vec![0.0; n];
    for (&i, w) in indices.iter().zip(mix.probs()) {
        if i >= n {
            return Err(matrix_game::GameError::IndexOutOfRange { what: "strategy", index: i, size: n }.into());
        }
        p[i] += w;
    }
    Ok(MixedStrategy::new(p)?)
}

/// Payoffs of a candidate pair against the current strategy lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Cells {
    /// New generator against every listed classifier, then against the new one.
    pub row: Vec<f64>,
    /// Every listed generator against the new classifier.
    pub col: Vec<f64>,
}

/// Best-response and payoff source for one flavour of PNM.
pub trait Oracle {
    type Gen: Clone + PartialEq;
    type Clf: Clone + PartialEq;

    /// Exact oracles deduplicate responses and stop once the test fails.
    fn exact(&self) -> bool;

    fn solver_tol(&self) -> f64;

    /// The starting pair and its payoff cell.
    fn initial(&mut self) -> Result<(Self::Gen, Self::Clf, f64)>;

    fn best_responses(&mut self, state: &PnmState<Self::Gen, Self::Clf>) -> Result<(Self::Gen, Self::Clf)>;

    fn evaluate(&mut self, state: &PnmState<Self::Gen, Self::Clf>, gen: &Self::Gen, clf: &Self::Clf) -> Result<Cells>;

    /// Called after the state took (some of) the last evaluated pair.
    fn commit(&mut self, gen_added: bool, clf_added: bool);
}

pub fn initialize<O: Oracle>(oracle: &mut O) -> Result<PnmState<O::Gen, O::Clf>> {
    let (g, c, cell) = oracle.initial()?;
    PnmState::single(g, c, cell)
}

/// Runs one test-and-augment step and returns its record.
pub fn iterate<O: Oracle>(state: &mut PnmState<O::Gen, O::Clf>, oracle: &mut O, cfg: &PnmConfig) -> Result<IterationRecord> {
    let start = Instant::now();
    let (gen, clf) = oracle.best_responses(state)?;
    let cells = oracle.evaluate(state, &gen, &clf)?;
    let (n, m) = state.dims();
    if cells.row.len() != m + 1 || cells.col.len() != n {
        return Err(Error::Invalid(format!(
            "oracle returned {}/{} cells for a {n}x{m} subgame",
            cells.row.len(),
            cells.col.len()
        )));
    }
    let gen_response = -dot(state.col_mix.probs(), &cells.row[..m]);
    let clf_response = dot(state.row_mix.probs(), &cells.col);
    let u_brs = gen_response + clf_response;

    let exact = oracle.exact();
    let gen_new = !(exact && state.gens.contains(&gen));
    let clf_new = !(exact && state.clfs.contains(&clf));
    let threshold = if exact { oracle.solver_tol() } else { 0.0 };
    let failed_test = u_brs <= threshold;
    let accepted = (gen_new || clf_new) && !(cfg.ignore_non_positive_tests && failed_test);

    let (mut gen_added, mut clf_added) = (false, false);
    if accepted {
        let new_col = clf_new.then_some(&cells.col[..]);
        let new_row = gen_new.then(|| if clf_new { &cells.row[..] } else { &cells.row[..m] });
        state.subgame.augment(new_row, new_col)?;
        if gen_new {
            state.gens.push(gen);
        }
        if clf_new {
            state.clfs.push(clf);
        }
        gen_added = gen_new;
        clf_added = clf_new;
        oracle.commit(gen_added, clf_added);
        let sol = matrix_game::solve_zero_sum(&state.subgame, oracle.solver_tol())?;
        state.row_mix = sol.row_mix;
        state.col_mix = sol.col_mix;
        state.value = sol.value;
    }
    let (rows, cols) = state.dims();
    let record = IterationRecord {
        iteration: state.history.len(),
        u_brs,
        gen_security: -clf_response,
        clf_security: -gen_response,
        subgame_value: state.value,
        accepted,
        gen_added,
        clf_added,
        rows,
        cols,
        wall_ms: start.elapsed().as_millis() as u64,
    };
    state.history.push(record.clone());
    Ok(record)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Final state of a run.
#[derive(Debug, Clone)]
pub struct PnmOutcome<G, C> {
    pub state: PnmState<G, C>,
    /// The last test found no gain, so the final mixtures are a
    /// resource-bounded equilibrium.
    pub certified: bool,
}

/// Iterates from `state` until `cfg.max_iterations` records exist, or, for
/// exact oracles, until a test fails. `after` sees every new record.
pub fn run_from<O, F>(mut state: PnmState<O::Gen, O::Clf>, oracle: &mut O, cfg: &PnmConfig, mut after: F) -> Result<PnmOutcome<O::Gen, O::Clf>>
where
    O: Oracle,
    F: FnMut(&PnmState<O::Gen, O::Clf>, &IterationRecord) -> Result<()>,
{
    cfg.validate()?;
    let threshold = if oracle.exact() { oracle.solver_tol() } else { 0.0 };
    let mut certified = state.history.last().is_some_and(|r| r.u_brs <= threshold);
    if oracle.exact() && certified {
        return Ok(PnmOutcome { state, certified });
    }
    while state.history.len() < cfg.max_iterations {
        let record = iterate(&mut state, oracle, cfg)?;
        after(&state, &record)?;
        certified = record.u_brs <= threshold || (oracle.exact() && !record.gen_added && !record.clf_added);
        if oracle.exact() && certified {
            break;
        }
    }
    Ok(PnmOutcome { state, certified })
}

pub fn run<O: Oracle>(oracle: &mut O, cfg: &PnmConfig) -> Result<PnmOutcome<O::Gen, O::Clf>> {
    let state = initialize(oracle)?;
    run_from(state, oracle, cfg, |_, _| Ok(()))
}

/// Exact best responses in a fully known matrix game.
#[derive(Debug, Clone)]
pub struct MatrixOracle<'a> {
    game: &'a PayoffMatrix,
}

impl<'a> MatrixOracle<'a> {
    pub fn new(game: &'a PayoffMatrix) -> Self {
        Self { game }
    }
}

impl Oracle for MatrixOracle<'_> {
    type Gen = usize;
    type Clf = usize;

    fn exact(&self) -> bool {
        true
    }

    fn solver_tol(&self) -> f64 {
        EXACT_TOL
    }

    fn initial(&mut self) -> Result<(usize, usize, f64)> {
        Ok((0, 0, self.game.entry(0, 0)))
    }

    fn best_responses(&mut self, state: &MatrixState) -> Result<(usize, usize)> {
        let (row_full, col_full) = state.full_mixes(self.game.rows(), self.game.cols())?;
        let (g, _) = matrix_game::best_response(self.game, &col_full, Player::Row)?;
        let (c, _) = matrix_game::best_response(self.game, &row_full, Player::Column)?;
        Ok((g, c))
    }

    fn evaluate(&mut self, state: &MatrixState, gen: &usize, clf: &usize) -> Result<Cells> {
        let mut row: Vec<f64> = state.clfs.iter().map(|&j| self.game.entry(*gen, j)).collect();
        row.push(self.game.entry(*gen, *clf));
        let col = state.gens.iter().map(|&i| self.game.entry(i, *clf)).collect();
        Ok(Cells { row, col })
    }

    fn commit(&mut self, _: bool, _: bool) {}
}

/// Double-oracle solve of a known game.
pub fn run_matrix(game: &PayoffMatrix, cfg: &PnmConfig) -> Result<PnmOutcome<usize, usize>> {
    run(&mut MatrixOracle::new(game), cfg)
}

/// Gradient-trained oracles with common-random-number payoff cells.
///
/// One real sample set serves every classifier and each accepted generator
/// owns one fake set, both drawn from seeds derived from the run seed, so
/// frozen cells never change and every new cell is comparable to old ones.
pub struct NeuralOracle<'a> {
    spec: &'a GangSpec,
    rbbr: RbbrConfig,
    seed: u64,
    cell_samples: usize,
    threads: usize,
    reals: Array2<f64>,
    fakes: Vec<Array2<f64>>,
    real_terms: Vec<f64>,
    pending: Option<(Array2<f64>, f64)>,
}

impl<'a> NeuralOracle<'a> {
    pub fn new(spec: &'a GangSpec, cfg: &PnmConfig) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        let reals = spec.sample_real(cfg.cell_samples, &mut seed::rng_from(cfg.seed, &[tag::REAL_SET]));
        Ok(Self {
            spec,
            rbbr: cfg.rbbr.clone(),
            seed: cfg.seed,
            cell_samples: cfg.cell_samples,
            threads: thread_budget(),
            reals,
            fakes: Vec::new(),
            real_terms: Vec::new(),
            pending: None,
        })
    }

    /// Overrides the `GANGS_THREADS` budget.
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    /// Rebuilds the sample caches for a state loaded from a checkpoint.
    pub fn restore(&mut self, state: &NeuralState) -> Result<()> {
        self.fakes.clear();
        self.real_terms.clear();
        for (i, g) in state.gens.iter().enumerate() {
            let f = self.fake_set(i, g)?;
            self.fakes.push(f);
        }
        for c in &state.clfs {
            let r = measured_mean(&self.spec.phi, c, self.reals.view())?;
            self.real_terms.push(r);
        }
        Ok(())
    }

    fn fake_set(&self, index: usize, gen: &NetworkParams) -> Result<Array2<f64>> {
        let mut rng = seed::rng_from(self.seed, &[tag::FAKE_SET, index as u64]);
        let z = self.spec.noise.sample(self.cell_samples, &mut rng);
        Ok(gen.forward(z.view())?)
    }

    fn respond(&self, gen_mix: &MixedNetStrategy, clf_mix: &MixedNetStrategy, warm: Option<(&NetworkParams, &NetworkParams)>, iteration: usize) -> Result<(NetworkParams, NetworkParams)> {
        let spec = self.spec;
        let cfg = &self.rbbr;
        let it = iteration as u64;
        let gen_job = || {
            let mut rng = seed::rng_from(self.seed, &[tag::RBBR_GEN, it]);
            match warm {
                Some((g, _)) => rbbr::train_generator_rbbr_from(spec, clf_mix, cfg, g.clone(), &mut rng),
                None => rbbr::train_generator_rbbr(spec, clf_mix, cfg, &mut rng),
            }
        };
        let clf_job = || {
            let mut rng = seed::rng_from(self.seed, &[tag::RBBR_CLF, it]);
            match warm {
                Some((_, c)) => rbbr::train_classifier_rbbr_from(spec, gen_mix, cfg, c.clone(), &mut rng),
                None => rbbr::train_classifier_rbbr(spec, gen_mix, cfg, &mut rng),
            }
        };
        if self.threads > 1 {
            std::thread::scope(|s| {
                let g = s.spawn(gen_job);
                let c = clf_job();
                let g = g.join().map_err(|_| Error::Invalid("generator oracle thread panicked".into()))?;
                Ok((g?, c?))
            })
        } else {
            Ok((gen_job()?, clf_job()?))
        }
    }
}

impl Oracle for NeuralOracle<'_> {
    type Gen = NetworkParams;
    type Clf = NetworkParams;

    fn exact(&self) -> bool {
        false
    }

    fn solver_tol(&self) -> f64 {
        SIMULATED_TOL
    }

    /// A generator trained against a random classifier and a classifier
    /// trained against a random generator.
    fn initial(&mut self) -> Result<(NetworkParams, NetworkParams, f64)> {
        let random_clf = NetworkParams::init(&self.spec.classifier, &mut seed::rng_from(self.seed, &[tag::INIT_OPPONENT, 0]));
        let random_gen = NetworkParams::init(&self.spec.generator, &mut seed::rng_from(self.seed, &[tag::INIT_OPPONENT, 1]));
        let clf_mix = MixedNetStrategy::pure(random_clf);
        let gen_mix = MixedNetStrategy::pure(random_gen);
        let g = rbbr::train_generator_rbbr(self.spec, &clf_mix, &self.rbbr, &mut seed::rng_from(self.seed, &[tag::INIT_GEN]))?;
        let c = rbbr::train_classifier_rbbr(self.spec, &gen_mix, &self.rbbr, &mut seed::rng_from(self.seed, &[tag::INIT_CLF]))?;
        let fakes = self.fake_set(0, &g)?;
        let real = measured_mean(&self.spec.phi, &c, self.reals.view())?;
        let cell = real - measured_mean(&self.spec.phi, &c, fakes.view())?;
        self.fakes = vec![fakes];
        self.real_terms = vec![real];
        Ok((g, c, cell))
    }

    fn best_responses(&mut self, state: &NeuralState) -> Result<(NetworkParams, NetworkParams)> {
        let gen_mix = state.gen_mixture()?;
        let clf_mix = state.clf_mixture()?;
        let warm = match (self.rbbr.warm_start, state.gens.last(), state.clfs.last()) {
            (true, Some(g), Some(c)) => Some((g, c)),
            _ => None,
        };
        self.respond(&gen_mix, &clf_mix, warm, state.history.len())
    }

    fn evaluate(&mut self, state: &NeuralState, gen: &NetworkParams, clf: &NetworkParams) -> Result<Cells> {
        let phi = &self.spec.phi;
        let fakes = self.fake_set(state.gens.len(), gen)?;
        let real = measured_mean(phi, clf, self.reals.view())?;
        let mut row = Vec::with_capacity(state.clfs.len() + 1);
        for (c, r) in state.clfs.iter().zip(&self.real_terms) {
            row.push(r - measured_mean(phi, c, fakes.view())?);
        }
        row.push(real - measured_mean(phi, clf, fakes.view())?);
        let mut col = Vec::with_capacity(state.gens.len());
        for f in &self.fakes {
            col.push(real - measured_mean(phi, clf, f.view())?);
        }
        self.pending = Some((fakes, real));
        Ok(Cells { row, col })
    }

    fn commit(&mut self, gen_added: bool, clf_added: bool) {
        if let Some((fakes, real)) = self.pending.take() {
            if gen_added {
                self.fakes.push(fakes);
            }
            if clf_added {
                self.real_terms.push(real);
            }
        }
    }
}

/// Neural PNM run, checkpointed into `checkpoint` when given.
pub fn run_neural(spec: &GangSpec, cfg: &PnmConfig, checkpoint: Option<&Path>) -> Result<PnmOutcome<NetworkParams, NetworkParams>> {
    let mut oracle = NeuralOracle::new(spec, cfg)?;
    let state = initialize(&mut oracle)?;
    let ckpt = checkpoint.map(Checkpoint::create).transpose()?;
    if let Some(c) = &ckpt {
        c.save(&state, cfg)?;
    }
    run_from(state, &mut oracle, cfg, |s, r| match &ckpt {
        Some(c) => c.record(s, r, cfg),
        None => Ok(()),
    })
}

/// Continues a checkpointed neural run up to `cfg.max_iterations`.
pub fn resume_neural(spec: &GangSpec, cfg: &PnmConfig, dir: &Path) -> Result<PnmOutcome<NetworkParams, NetworkParams>> {
    let ckpt = Checkpoint::open(dir);
    let state = ckpt.load(cfg)?;
    let mut oracle = NeuralOracle::new(spec, cfg)?;
    oracle.restore(&state)?;
    run_from(state, &mut oracle, cfg, |s, r| ckpt.record(s, r, cfg))
}

/// On-disk run state: `gens/NNNN.params`, `clfs/NNNN.params`, `subgame.csv`,
/// `state.json` and `history.jsonl` (one record per line).
#[derive(Debug, Clone)]
pub struct Checkpoint {
    dir: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    seed: u64,
    gens: usize,
    clfs: usize,
    iterations: usize,
    row_mix: Vec<f64>,
    col_mix: Vec<f64>,
    value: f64,
}

impl Checkpoint {
    /// Prepares `dir` for a fresh run, clearing any earlier history.
    pub fn create(dir: &Path) -> Result<Self> {
        for sub in ["gens", "clfs"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let hist = dir.join("history.jsonl");
        File::create(&hist).map_err(|e| Error::io(&hist, e))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    /// An existing checkpoint; nothing is touched until [`Checkpoint::load`].
    pub fn open(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn params_path(&self, sub: &str, i: usize) -> PathBuf {
        self.dir.join(sub).join(format!("{i:04}.params"))
    }

    fn save(&self, state: &NeuralState, cfg: &PnmConfig) -> Result<()> {
        for (sub, list) in [("gens", &state.gens), ("clfs", &state.clfs)] {
            for (i, p) in list.iter().enumerate() {
                let path = self.params_path(sub, i);
                if !path.exists() {
                    p.save(&path)?;
                }
            }
        }
        matrix_game::write_csv(&state.subgame, &self.dir.join("subgame.csv"))?;
        let file = StateFile {
            seed: cfg.seed,
            gens: state.gens.len(),
            clfs: state.clfs.len(),
            iterations: state.history.len(),
            row_mix: state.row_mix.probs().to_vec(),
            col_mix: state.col_mix.probs().to_vec(),
            value: state.value,
        };
        let path = self.dir.join("state.json");
        let tmp = self.dir.join("state.json.tmp");
        let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Invalid(e.to_string()))?;
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    fn record(&self, state: &NeuralState, record: &IterationRecord, cfg: &PnmConfig) -> Result<()> {
        let path = self.dir.join("history.jsonl");
        let mut f = OpenOptions::new().append(true).create(true).open(&path).map_err(|e| Error::io(&path, e))?;
        let line = serde_json::to_string(record).map_err(|e| Error::Invalid(e.to_string()))?;
        writeln!(f, "{line}").map_err(|e| Error::io(&path, e))?;
        self.save(state, cfg)
    }

    pub fn load(&self, cfg: &PnmConfig) -> Result<NeuralState> {
        let path = self.dir.join("state.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let file: StateFile = serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))?;
        if file.seed != cfg.seed {
            return Err(Error::Invalid(format!("checkpoint seed {} differs from configured seed {}", file.seed, cfg.seed)));
        }
        let gens = (0..file.gens).map(|i| NetworkParams::load(&self.params_path("gens", i))).collect::<Result<Vec<_>>>()?;
        let clfs = (0..file.clfs).map(|i| NetworkParams::load(&self.params_path("clfs", i))).collect::<Result<Vec<_>>>()?;
        let subgame = matrix_game::read_csv(&self.dir.join("subgame.csv"))?;
        if subgame.rows() != gens.len() || subgame.cols() != clfs.len() {
            return Err(Error::Invalid("checkpoint matrix does not match its strategy lists".into()));
        }
        let hist_path = self.dir.join("history.jsonl");
        let f = File::open(&hist_path).map_err(|e| Error::io(&hist_path, e))?;
        let mut history = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&hist_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: IterationRecord = serde_json::from_str(&line).map_err(|e| Error::parse(&hist_path, i + 1, e.to_string()))?;
            history.push(r);
        }
        // A crash between the history append and the state write leaves one
        // record too many.
        history.truncate(file.iterations);
        if history.len() != file.iterations {
            return Err(Error::Invalid("checkpoint history is shorter than its state".into()));
        }
        Ok(PnmState {
            gens,
            clfs,
            subgame,
            row_mix: MixedStrategy::new(file.row_mix)?,
            col_mix: MixedStrategy::new(file.col_mix)?,
            value: file.value,
            history,
        })
    }
}
