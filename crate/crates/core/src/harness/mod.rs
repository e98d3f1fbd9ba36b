//! Metrics, experiment orchestration and result files.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod output;

pub use config::{parse_config_text, read_config, ExperimentConfig, RawConfig, Scale};
pub use experiment::{
    run_experiment, run_experiment_on, run_repeat, summarize, ExperimentOutput, MetricsRow,
    PreparedEnv, RunFailure, RunOutcome, SummaryRow,
};
pub use metrics::{evaluate_learned, policy_agreement, policy_agreement_with_ties, ExpertReference};
pub use output::{emit_outputs, parse_metrics_csv, parse_summary_csv, resummarize};
