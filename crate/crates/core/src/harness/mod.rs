//! Experiment orchestration: configuration, the end-to-end pipeline, and
//! report generation.

pub mod aggregate;
pub mod config;
pub mod report;
pub mod run;

pub use aggregate::{aggregate, quantile, AggregateResult, EmptySeries};
pub use config::{ConfigError, ExperimentConfig, ModelKind, Strategy};
pub use report::{emit_report, MetricRow, ReportError, ReportInputs};
pub use run::{
    run_experiment, train_and_predict, ConditionRuns, ExperimentResults, HarnessError, Plan, RunManifest, Stage,
};
