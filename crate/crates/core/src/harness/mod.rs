//! Experiment configuration, execution, metrics and reports.

mod compare;
mod config;
mod metrics;
mod oracle;
mod run;

pub use compare::{compare_convergence, ConvergenceInput, ConvergenceReport, ConvergenceSummary};
pub use config::{AgentKind, ExperimentConfig, JammerSpec, Overrides, Scale};
pub use metrics::{
    manifest_path, metrics_records, read_manifest, read_metrics_csv, run_experiment,
    write_metrics_csv, write_outputs, EpisodeMetrics, HopRecord, Manifest, MetricsRecord, RowType,
    COLUMNS, SCHEMA_VERSION,
};
pub use oracle::{random_fh_oracle, OracleReport};
pub use run::{
    normalized_throughput, normalized_throughput_counts, run_trial, run_trials, ExperimentResult,
    TrialResult, JAMMER_SEED_OFFSET,
};
