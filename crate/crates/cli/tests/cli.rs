use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gangs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gangs"))
        .args(args)
        .env("GANGS_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Small networks and few iterations so a full neural run takes seconds.
const TINY: &str = r#"
[gang.generator]
layer_sizes = [2, 8, 2]
activations = ["relu", "linear"]

[gang.classifier]
layer_sizes = [2, 8, 1]
activations = ["relu", "sigmoid"]

[pnm]
max_iterations = 2
cell_samples = 200

[pnm.rbbr.opt]
iterations = 20
batch_size = 32

[gan.gen_opt]
iterations = 30

[eval]
samples = 300
resolution = 6
"#;

fn tiny_config(dir: &Path) -> String {
    let p = dir.join("tiny.toml");
    fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn solve_matrix_prints_value_and_uniform_mixes_for_rps() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rps.csv");
    fs::write(&p, "# rows=3 cols=3 convention=u_C\n0,-1,1\n1,0,-1\n-1,1,0\n").unwrap();
    let o = gangs(&["solve-matrix", p.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    let value: f64 = s.lines().next().unwrap().strip_prefix("value ").unwrap().parse().unwrap();
    assert!(value.abs() <= 1e-12);
    assert!(s.contains("row mix 0.333333 0.333333 0.333333"), "{s}");
    assert!(s.contains("column mix 0.333333 0.333333 0.333333"), "{s}");
}

#[test]
fn pnm_matrix_finds_the_pennies_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("mp.csv");
    fs::write(&p, "# rows=2 cols=2 convention=u_C\n1,-1\n-1,1\n").unwrap();
    let o = gangs(&["pnm-matrix", p.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    assert!(s.contains("row mix 0.500000 0.500000"), "{s}");
    assert!(s.contains("subgame 2x2"), "{s}");
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gangs(&["frobnicate"]).status.code(), Some(2));
    let missing = dir.path().join("none.csv");
    assert_eq!(gangs(&["solve-matrix", missing.to_str().unwrap()]).status.code(), Some(4));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[pnm]\nnot_a_key = 1\n").unwrap();
    let o = gangs(&["pnm", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not_a_key"));
    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "# rows=2 cols=2 convention=u_C\n1,2\n3\n").unwrap();
    assert_ne!(gangs(&["solve-matrix", ragged.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn pnm_run_emits_report_checkpoint_and_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("run");
    let o = gangs(&["pnm", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "3"]);
    assert!(o.status.success(), "{o:?}");
    for f in ["coverage.csv", "modes.csv", "series.csv", "surface.csv", "samples.csv", "convergence.svg", "scatter.svg", "resolved-config.toml"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert!(out.join("checkpoint/state.json").is_file());
    let resolved = fs::read_to_string(out.join("resolved-config.toml")).unwrap();
    assert!(resolved.contains("seed = 3"), "{resolved}");

    // The resolved file alone reproduces the run.
    let again = dir.path().join("again");
    let o = gangs(&["pnm", "--config", out.join("resolved-config.toml").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    for f in ["coverage.csv", "series.csv", "surface.csv", "samples.csv"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f} differs");
    }

    // Rebuilding the report from the checkpoint gives the same files.
    let re = dir.path().join("re");
    let o = gangs(&["eval", out.to_str().unwrap(), "--out", re.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    for f in ["coverage.csv", "series.csv", "samples.csv"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(re.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn resume_extends_a_checkpointed_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let full = dir.path().join("full");
    let part = dir.path().join("part");
    assert!(gangs(&["pnm", "--config", &cfg, "--out", full.to_str().unwrap(), "--max-iters", "3"]).status.success());
    assert!(gangs(&["pnm", "--config", &cfg, "--out", part.to_str().unwrap(), "--max-iters", "1"]).status.success());
    let o = gangs(&["pnm", "--config", &cfg, "--out", part.to_str().unwrap(), "--max-iters", "3", "--resume"]);
    assert!(o.status.success(), "{o:?}");
    for f in ["series.csv", "samples.csv", "surface.csv"] {
        assert_eq!(fs::read(full.join(f)).unwrap(), fs::read(part.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn gan_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = gangs(&["gan", "--config", &cfg, "--out", d.to_str().unwrap(), "--seed", "11"]);
        assert!(o.status.success(), "{o:?}");
    }
    for f in ["gan_history.csv", "coverage.csv", "samples.csv", "surface.csv", "generator.params"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let o = gangs(&["eval", a.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
}

#[test]
fn sample_data_writes_labelled_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let o = gangs(&["sample-data", "--out", out.to_str().unwrap(), "-n", "50"]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("x,y,component"));
    assert_eq!(text.lines().count(), 51);
}
