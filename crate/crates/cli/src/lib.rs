//! Library side of the `ipelicit` command: configuration, dataset ingestion,
//! campaign runner, synthetic study, exports and the mock endpoint.

pub mod campaign;
pub mod config;
pub mod export;
pub mod ingest;
pub mod mock;
pub mod scoring;
pub mod server;
pub mod study;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("dataset line {line}: {message}")]
    SchemaViolation { line: usize, message: String },
    #[error("dataset: {0}")]
    DatasetParse(String),
    #[error("output file {} already exists (use `campaign resume`)", .0.display())]
    OutputExists(PathBuf),
    #[error("corrupt output: {0}")]
    Corrupt(String),
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("{} record(s) failed; {} written, {} skipped", .0.failed, .0.written, .0.skipped)]
    PartialCampaign(campaign::CampaignReport),
    #[error(transparent)]
    Core(#[from] ipelicit_core::Error),
    #[error(transparent)]
    Elicit(#[from] ipelicit_elicit::ElicitError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
