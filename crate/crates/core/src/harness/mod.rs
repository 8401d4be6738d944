//! Scenario study, survey ingestion and summary metrics.

pub mod ingest;
pub mod metrics;
pub mod scenario;

pub use ingest::{ingest, IngestOptions, RawRespondent, RepairAudit, SensitivityTransform};
pub use metrics::{bonferroni_mse_compare, summarize_errors, Comparison, ErrorSummary};
pub use scenario::{
    all_scenarios, run_scenario, ScenarioBootstrap, ScenarioConfig, ScenarioResult,
};
