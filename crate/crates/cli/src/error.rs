use std::path::PathBuf;

use thiserror::Error;

/// Every failure a subcommand can report. Each class maps to its own exit
/// code so scripts can tell configuration problems from data problems.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("store: {0}")]
    Store(#[from] qpc_core::StoreError),
    #[error("jsonl: {0}")]
    Jsonl(#[from] qpc_core::jsonl::JsonlError),
    #[error("llmio: {0}")]
    Llm(#[from] qpc_llmio::LlmError),
    #[error("{stage}: {failed} request(s) failed; see {report}")]
    Partial {
        stage: &'static str,
        failed: usize,
        report: PathBuf,
    },
    #[error("genmethods: {0}")]
    Gen(#[from] qpc_core::genmethods::GenError),
    #[error("verifier: {0}")]
    Verifier(#[from] qpc_core::verifier::VerifierError),
    #[error("gate: {0}")]
    Gate(#[from] qpc_core::gate::GateError),
    #[error("fluency: {0}")]
    Fluency(#[from] qpc_core::fluency::FluencyError),
    #[error("weights: {0}")]
    Weights(#[from] qpc_core::weights::WeightError),
    #[error("bok: {0}")]
    Bok(#[from] qpc_core::bok::BokError),
    #[error("reward: {0}")]
    Reward(#[from] qpc_core::reward::RewardError),
    #[error("data: {0}")]
    Data(String),
    #[error("replay: digests differ: {0}")]
    ReplayMismatch(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code. 2 is left to the argument parser for usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Io { .. } | CliError::Store(_) | CliError::Jsonl(_) => 4,
            CliError::Llm(_) | CliError::Partial { .. } => 5,
            CliError::Gate(_) => 6,
            CliError::Gen(_)
            | CliError::Verifier(_)
            | CliError::Fluency(_)
            | CliError::Weights(_)
            | CliError::Bok(_)
            | CliError::Reward(_)
            | CliError::Data(_) => 7,
            CliError::ReplayMismatch(_) => 8,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
