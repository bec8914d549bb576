//! Chat-completions client, offline mocks and batch generation.

mod batch;
mod client;
mod config;
mod mock;

use thiserror::Error;

pub use batch::{generate_batch, read_generations, read_progress, write_generations, BatchError, BatchSummary, GenerationRecord, RecordError};
pub use client::{parse_chat_response, Backoff, Completer, Completion, HttpCompleter};
pub use config::{EndpointConfig, RedactedEndpoint, Secret};
pub use mock::{extract_snapshot, mock_complete, MockCompleter, MockMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("authentication failed (HTTP {status})")]
    Auth { status: u16, attempts: u32 },
    #[error("gave up after {attempts} attempts (last: {last_error})")]
    ExhaustedRetries { attempts: u32, last_status: Option<u16>, last_error: String },
    #[error("malformed response body: {message}")]
    MalformedResponse { message: String, attempts: u32 },
    #[error("request rejected with HTTP {status}: {body}")]
    Rejected { status: u16, body: String, attempts: u32 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
    #[error("prompt has no input snapshot")]
    SnapshotNotFound,
}

impl LlmError {
    pub fn kind(&self) -> &'static str {
        match self {
            LlmError::Auth { .. } => "auth",
            LlmError::ExhaustedRetries { .. } => "exhausted_retries",
            LlmError::MalformedResponse { .. } => "malformed_response",
            LlmError::Rejected { .. } => "rejected",
            LlmError::Transport(_) => "transport",
            LlmError::InvalidConfig(_) => "invalid_config",
            LlmError::SnapshotNotFound => "snapshot_not_found",
        }
    }

    /// Requests made before this error surfaced.
    pub fn attempts(&self) -> u32 {
        match self {
            LlmError::ExhaustedRetries { attempts, .. }
            | LlmError::Auth { attempts, .. }
            | LlmError::MalformedResponse { attempts, .. }
            | LlmError::Rejected { attempts, .. } => *attempts,
            LlmError::InvalidConfig(_) | LlmError::SnapshotNotFound => 0,
            LlmError::Transport(_) => 1,
        }
    }

    /// Stamps the attempt number on errors that end a call early.
    pub(crate) fn at_attempt(mut self, n: u32) -> LlmError {
        if let LlmError::Auth { attempts, .. } | LlmError::MalformedResponse { attempts, .. } | LlmError::Rejected { attempts, .. } =
            &mut self
        {
            *attempts = n;
        }
        self
    }
}
