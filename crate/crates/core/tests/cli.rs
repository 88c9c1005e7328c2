use std::path::Path;
use std::process::{Command, Output};

fn sgdhess(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgdhess"))
        .args(args)
        .current_dir(dir)
        .env_remove("SGDHESS_OUT_DIR")
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

const NOISELESS: &str = r#"
seed = 1
horizon = 300

[problem]
kind = "quadratic"
dim = 6
condition_number = 10.0

[optimizer]
algorithm = "sgdhess"
schedule = "manual"
eta = 0.02
alpha = 0.3
"#;

#[test]
fn check_quadratic_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = sgdhess(&["check", "quadratic"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    assert!(s.contains("[PASS]") && !s.contains("[FAIL]"), "{s}");
}

#[test]
fn check_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    for p in ["separable", "logistic", "rosenbrock", "mlp"] {
        let out = sgdhess(&["check", p], dir.path());
        assert_eq!(out.status.code(), Some(0), "{p}: {}", text(&out.stdout));
    }
    let out = sgdhess(&["check", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("unknown problem"));
}

#[test]
fn run_noiseless_quadratic_tracks_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("q.toml");
    std::fs::write(&cfg, NOISELESS).unwrap();
    let out = sgdhess(&["run", cfg.to_str().unwrap(), "--out", "res", "--plot"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("res/trace.csv")).unwrap();
    let trace = sgdhess::harness::parse_trace_csv(&csv).unwrap();
    assert_eq!(trace.len(), 300);
    assert!(trace.iter().all(|r| r.err_norm <= 1e-12), "max err {:?}", trace.iter().map(|r| r.err_norm).fold(0.0, f64::max));
    assert!(dir.path().join("res/trace.svg").exists());

    let (summary, echoed) = sgdhess::harness::read_summary_json(&dir.path().join("res/summary.json")).unwrap();
    let mut expected = sgdhess::harness::RunConfig::from_toml(NOISELESS).unwrap();
    expected.output.dir = Some("res".into());
    expected.output.plot = Some("trace.svg".into());
    assert_eq!(echoed, expected);
    assert_eq!((summary.grad_calls, summary.hvp_calls), (300, 300));
}

#[test]
fn seed_and_iterate_flags_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("q.toml");
    std::fs::write(&cfg, NOISELESS).unwrap();
    let out = sgdhess(&["run", cfg.to_str().unwrap(), "--seed", "99", "--iterate", "uniform", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let (s, c) = sgdhess::harness::read_summary_json(&dir.path().join("o/summary.json")).unwrap();
    assert_eq!(s.seed, 99);
    assert_eq!(c.iterate_mode, sgdhess::harness::IterateMode::UniformRandom);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("q.toml");
    std::fs::write(&cfg, NOISELESS).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sgdhess"))
        .args(["run", cfg.to_str().unwrap()])
        .current_dir(dir.path())
        .env("SGDHESS_OUT_DIR", dir.path().join("envdir"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("envdir/trace.csv").exists());
}

#[test]
fn malformed_config_reports_field_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, NOISELESS.replace("alpha = 0.3", "alpah = 0.3")).unwrap();
    let out = sgdhess(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("alpah") && err.contains("line"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sgdhess(&["bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(sgdhess(&["run"], dir.path()).status.code(), Some(1));
    assert_eq!(sgdhess(&["check", "quadratic", "--nope"], dir.path()).status.code(), Some(1));
    assert_eq!(sgdhess(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("d.toml");
    let diverging = NOISELESS
        .replace("eta = 0.02", "eta = 10.0")
        .replace("alpha = 0.3", "alpha = 1.0")
        .replace("horizon = 300", "horizon = 5000");
    std::fs::write(&cfg, diverging).unwrap();
    let out = sgdhess(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("t="));
}

#[test]
fn tune_prints_all_three_tunings() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.toml");
    std::fs::write(
        &c,
        "delta = 1.0\nlipschitz_l = 1.0\nsigma_g = 1.0\nsigma_h = 0.0\nrho = 1.0\ngrad_bound_g = 1.0\n",
    )
    .unwrap();
    let out = sgdhess(&["tune", c.to_str().unwrap(), "--horizon", "1e6"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    assert!(s.contains("alpha = 1.0000000000e-4"), "{s}");
    assert!(s.contains("eta = 4.6415888336e-4"), "{s}");
    assert!(s.contains("clipped:") && s.contains("adaptive:"), "{s}");
}

#[test]
fn sweep_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(
        &cfg,
        "seed = 0\nhorizon = 10\n[problem]\nkind = \"separable\"\ndim = 4\nsigma_g = 1.0\nsigma_h = 0.5\n[optimizer]\nalgorithm = \"sgdhess\"\n",
    )
    .unwrap();
    let out = sgdhess(&["sweep", cfg.to_str().unwrap(), "--horizons", "1e2,1e3,3e3", "--seeds", "2", "--out", "sw"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("slope avg |grad F|^2"));
    let rows = std::fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 7);

    let mut paths = Vec::new();
    for t in ["100", "1000", "3000"] {
        let o = format!("r{t}");
        let text_cfg = std::fs::read_to_string(&cfg).unwrap().replace("horizon = 10", &format!("horizon = {t}"));
        let c = dir.path().join(format!("{t}.toml"));
        std::fs::write(&c, text_cfg).unwrap();
        assert_eq!(sgdhess(&["run", c.to_str().unwrap(), "--out", &o], dir.path()).status.code(), Some(0));
        paths.push(format!("{o}/summary.json"));
    }
    let mut args = vec!["report"];
    args.extend(paths.iter().map(String::as_str));
    let out = sgdhess(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    assert!(s.contains("holds") && s.contains("separable / sgdhess"), "{s}");
}
