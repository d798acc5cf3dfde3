//! Closed-loop experiments: wind profiles, simulation, metrics, CSV/SVG output
//! and configuration files.

mod config;
mod emit;
mod metrics;
mod sim;
mod wind;

pub use config::{apply_entries, load_config, parse_entries};
pub use emit::{
    emit, error_comparison_plot, line_plot, metrics_table, read_csv, read_csv_file, run_plots, write_csv,
    write_csv_file, Series, CSV_HEADER,
};
pub use metrics::{compute_metrics, Metrics, VIOLATION_TOL};
pub use sim::{run_experiment, simulate, ExperimentConfig, ExperimentResult, SimLog, SimRecord};
pub use wind::{generate_wind, TurbulenceParams, WindKind, WindProfile, MAX_PROFILE_WIND, STEP_LEVELS};
