//! Experiment orchestration: configured runs, traces against exact gradients,
//! rate fits, estimator comparisons, bound reports and file outputs.

mod analysis;
mod check;
mod config;
mod output;
mod run;
mod sweep;

pub use analysis::{
    bound_report, compare_estimators, fit_rate, mean_sq_error, sign_test, BoundKind, BoundReport, Comparison, RateFit,
};
pub use check::{check_problem, random_point, CheckLine, CheckReport, GRAD_TOL, HVP_TOL};
pub use config::{IterateMode, OptimizerConfig, OutputConfig, RunConfig, OUT_DIR_ENV};
pub use output::{
    column, emit_plot, format_g17, parse_trace_csv, plot_svg, read_summary_json, summary_json, trace_to_csv,
    write_summary_json, write_trace_csv, CSV_HEADER,
};
pub use run::{run, run_oracle, select_index, select_iterate, RunOutput, RunSettings, RunStats, RunSummary, TraceRecord};
pub use sweep::{seed_list, sweep, HorizonStats, SweepResult};
