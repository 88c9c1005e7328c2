//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 numerical abort.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::harness::{
    bound_report, check_problem, emit_plot, fit_rate, read_summary_json, run, seed_list, sweep, write_summary_json,
    write_trace_csv, IterateMode, RunConfig, RunSummary,
};
use crate::oracle::AssumptionConstants;
use crate::problems::ProblemConfig;
use crate::schedules::{theorem1_bound, theorem3_bound, ScheduleParams};

#[derive(Parser, Debug)]
#[command(name = "sgdhess", version, about = "Hessian-corrected momentum SGD: runs, sweeps and checks")]
struct Cli {
    /// Override the run seed (for `sweep`, the first seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write an SVG plot.
    #[arg(long, global = true)]
    plot: bool,
    /// Returned iterate.
    #[arg(long, global = true, value_enum)]
    iterate: Option<IterateArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum IterateArg {
    Uniform,
    Last,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment from a TOML config.
    Run { config: PathBuf },
    /// Finite-difference and invariant checks for a named problem.
    Check {
        /// quadratic, separable, logistic, rosenbrock or mlp
        problem: String,
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
    /// Repeat a config over horizons and seeds and fit the rate.
    Sweep {
        config: PathBuf,
        /// Comma-separated horizons; `1e3` style is accepted.
        #[arg(long, value_delimiter = ',', value_parser = parse_horizon, default_value = "1e3,1e4,1e5")]
        horizons: Vec<usize>,
        /// Number of seeds.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
    },
    /// Print the tuned schedule constants for an assumption-constants TOML file.
    Tune {
        constants: PathBuf,
        #[arg(long, default_value = "1e4", value_parser = parse_horizon)]
        horizon: usize,
    },
    /// Bound reports and a slope table for summary JSON files.
    Report {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
}

fn parse_horizon(s: &str) -> std::result::Result<usize, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: `{s}`"))?;
    if v >= 1.0 && v.fract() == 0.0 && v <= 1e15 {
        Ok(v as usize)
    } else {
        Err(format!("horizon must be a positive integer, got `{s}`"))
    }
}

/// Parses `args` (including the program name) and executes; returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn load_config(cli: &Cli, path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = Some(dir.clone());
    }
    if let Some(m) = cli.iterate {
        cfg.iterate_mode = match m {
            IterateArg::Uniform => IterateMode::UniformRandom,
            IterateArg::Last => IterateMode::Last,
        };
    }
    if cli.plot && cfg.output.plot.is_none() {
        cfg.output.plot = Some("trace.svg".into());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_config(cli, config)?;
            let result = run(&cfg)?;
            let trace_path = cfg.output.trace_path();
            write_trace_csv(&trace_path, &result.trace)?;
            write_summary_json(&cfg.output.summary_path(), &result.summary, &cfg)?;
            if let Some(p) = cfg.output.plot_path() {
                emit_plot(&p, &result.trace, &["true_grad_norm", "err_norm", "est_norm"])?;
            }
            print_summary(out, &result.summary).map_err(io_err)?;
            let rep = bound_report(&result.summary, &result.summary.schedule, &result.summary.constants);
            writeln!(out, "{rep}").map_err(io_err)?;
            writeln!(out, "wrote {}", trace_path.display()).map_err(io_err)?;
            Ok(0)
        }
        Command::Check { problem, points } => {
            let pc = ProblemConfig::by_name(problem).ok_or_else(|| {
                Error::Config(format!("unknown problem `{problem}`; expected one of {:?}", ProblemConfig::NAMES))
            })?;
            let spec = pc.build()?;
            let rep = check_problem(&spec, cli.seed.unwrap_or(0), *points)?;
            write!(out, "{rep}").map_err(io_err)?;
            Ok(if rep.passed() { 0 } else { 1 })
        }
        Command::Sweep {
            config,
            horizons,
            seeds,
        } => {
            let cfg = load_config(cli, config)?;
            let res = sweep(&cfg, horizons, &seed_list(cfg.seed, *seeds))?;
            let dir = cfg.output.dir();
            let mut csv = String::from("horizon,seed,avg_sq_grad_norm,avg_grad_norm,final_grad_norm\n");
            for r in &res.runs {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.horizon,
                    r.seed,
                    crate::harness::format_g17(r.avg_sq_grad_norm),
                    crate::harness::format_g17(r.avg_grad_norm),
                    crate::harness::format_g17(r.final_grad_norm)
                ));
            }
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let csv_path = dir.join("sweep.csv");
            std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
            let json_path = dir.join("sweep.json");
            let json = serde_json::json!({
                "per_horizon": res.per_horizon,
                "sq_grad_fit": res.sq_grad_fit,
                "grad_fit": res.grad_fit,
                "config": cfg,
            });
            std::fs::write(&json_path, format!("{json:#}\n")).map_err(|e| Error::io(&json_path, e))?;

            writeln!(out, "{:>10} {:>6} {:>14} {:>12} {:>14} {:>12}", "T", "seeds", "avg|g|^2", "stderr", "avg|g|", "stderr")
                .map_err(io_err)?;
            for h in &res.per_horizon {
                writeln!(
                    out,
                    "{:>10} {:>6} {:>14.6e} {:>12.3e} {:>14.6e} {:>12.3e}",
                    h.horizon, h.seeds, h.mean_sq_grad_norm, h.stderr_sq_grad_norm, h.mean_grad_norm, h.stderr_grad_norm
                )
                .map_err(io_err)?;
            }
            for (name, fit) in [("avg |grad F|^2", &res.sq_grad_fit), ("avg |grad F|", &res.grad_fit)] {
                match fit {
                    Some(f) => writeln!(out, "slope {name}: {:.4} (r^2 {:.4})", f.slope, f.r_squared),
                    None => writeln!(out, "slope {name}: needs >= 3 horizons"),
                }
                .map_err(io_err)?;
            }
            writeln!(out, "wrote {}", csv_path.display()).map_err(io_err)?;
            Ok(0)
        }
        Command::Tune { constants, horizon } => {
            let text = std::fs::read_to_string(constants).map_err(|e| Error::io(constants, e))?;
            let consts: AssumptionConstants = toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", constants.display())))?;
            consts.validate()?;
            print_tune(out, &consts, *horizon).map_err(io_err)?;
            Ok(0)
        }
        Command::Report { summaries } => {
            let mut loaded: Vec<RunSummary> = Vec::new();
            for p in summaries {
                let (s, _) = read_summary_json(p)?;
                let rep = bound_report(&s, &s.schedule, &s.constants);
                writeln!(out, "{}: {rep}", p.display()).map_err(io_err)?;
                loaded.push(s);
            }
            print_slopes(out, &loaded).map_err(io_err)?;
            Ok(0)
        }
    }
}

fn print_summary(out: &mut dyn Write, s: &RunSummary) -> std::io::Result<()> {
    writeln!(
        out,
        "{} / {} T={} seed={}: avg|g|^2 {:.6e}, avg|g| {:.6e}, final loss {:.6e}, grads {}, hvps {}",
        s.problem,
        s.algorithm.name(),
        s.horizon,
        s.seed,
        s.avg_sq_grad_norm,
        s.avg_grad_norm,
        s.final_loss,
        s.grad_calls,
        s.hvp_calls
    )
}

fn print_tune(out: &mut dyn Write, c: &AssumptionConstants, horizon: usize) -> std::io::Result<()> {
    let t1 = ScheduleParams::theorem1(c, horizon);
    let (rate_c, k) = (t1.rate_c.unwrap_or(f64::NAN), t1.k.unwrap_or(f64::NAN));
    writeln!(out, "T = {horizon}")?;
    writeln!(out, "clipped:    K = {k:.10e}  C = {rate_c:.10e}  G = {:.10e}", c.grad_bound_g)?;
    writeln!(out, "            eta_1 = {:.10e}  alpha_1 = {:.10e}", t1.eta_at(1), t1.alpha_before(2))?;
    if let Ok(b) = theorem1_bound(rate_c, k, c.grad_bound_g, c.delta, horizon) {
        writeln!(out, "            bound on avg |grad F|^2 = {b:.10e}")?;
    }
    match ScheduleParams::normalized(c, horizon) {
        Ok(n) => writeln!(
            out,
            "normalized: alpha = {:.10e}  eta = {:.10e}",
            n.alpha.unwrap_or(f64::NAN),
            n.eta.unwrap_or(f64::NAN)
        )?,
        Err(e) => writeln!(out, "normalized: {e}")?,
    }
    let a = ScheduleParams::adaptive(c, horizon);
    let (ac, aw) = (a.adaptive_c.unwrap_or(f64::NAN), a.adaptive_w.unwrap_or(f64::NAN));
    writeln!(out, "adaptive:   c = {ac:.10e}  w = {aw:.10e}  eta_1 = {:.10e}", ac / aw.cbrt())?;
    if let Ok(b) = theorem3_bound(ac, aw, k, c.grad_bound_g, c.delta, c.sigma_g, horizon) {
        writeln!(out, "            bound on avg |grad F| = {b:.10e}")?;
    }
    Ok(())
}

fn print_slopes(out: &mut dyn Write, runs: &[RunSummary]) -> std::io::Result<()> {
    let mut groups: Vec<(String, Vec<&RunSummary>)> = Vec::new();
    for r in runs {
        let key = format!("{} / {}", r.problem, r.algorithm.name());
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    writeln!(out, "{:<32} {:>8} {:>16} {:>16}", "group", "runs", "slope avg|g|^2", "slope avg|g|")?;
    for (key, rs) in groups {
        let sq: Vec<(f64, f64)> = rs.iter().map(|r| (r.horizon as f64, r.avg_sq_grad_norm)).collect();
        let g: Vec<(f64, f64)> = rs.iter().map(|r| (r.horizon as f64, r.avg_grad_norm)).collect();
        let show = |p: &[(f64, f64)]| fit_rate(p).map(|f| format!("{:.4}", f.slope)).unwrap_or_else(|_| "n/a".into());
        writeln!(out, "{key:<32} {:>8} {:>16} {:>16}", rs.len(), show(&sq), show(&g))?;
    }
    Ok(())
}
