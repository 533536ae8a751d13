//! Ground-truth registry simulation and Monte Carlo scoring of the estimators.

pub mod config;
pub mod generate;
pub mod presets;
pub mod run;
pub mod summary;

pub use config::{IntervalMethod, SimConfig, SimDocument, SimSetting, SimStudy, StratumSpec};
pub use generate::{generate_replicate, Replicate};
pub use run::{
    run_replicate, run_setting, run_study, EstimatorOutcome, ReplicateOutcome, SettingOutcomes,
};
pub use summary::{
    monte_carlo_summary, summarize_study, write_summary_csv, EstimatorSummary, IntervalSummary,
    MonteCarloSummary, StudySummary,
};
