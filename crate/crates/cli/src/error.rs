use std::fmt::Display;

use tabinstruct::config::ConfigError;
use tabinstruct::instruct::BuildError;
use tabinstruct::llm::{BatchError, LlmError};
use tabinstruct::metadata::MetadataError;
use tabinstruct::pipeline::PipelineError;
use tabinstruct::registry::RegistryError;
use tabinstruct::report::ReportError;
use tabinstruct::table::TableError;
use tabinstruct::utility::UtilityError;

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_IO: u8 = 2;

/// A failure with its exit code, printed to stderr as one JSON object.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn validation(kind: &'static str, message: impl Display) -> CliError {
        CliError { code: EXIT_VALIDATION, kind, message: message.to_string() }
    }

    pub fn io(kind: &'static str, message: impl Display) -> CliError {
        CliError { code: EXIT_IO, kind, message: message.to_string() }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind, "message": self.message, "exit_code": self.code } }).to_string()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io("io", e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::io("config_io", e),
            ConfigError::Parse { .. } => CliError::validation("config", e),
        }
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        match e {
            TableError::Io { .. } => CliError::io("io", e),
            _ => CliError::validation("table", e),
        }
    }
}

impl From<RegistryError> for CliError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::Io { .. } | RegistryError::Table { source: TableError::Io { .. }, .. } => CliError::io("registry_io", e),
            _ => CliError::validation("registry", e),
        }
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Registry(r) => r.into(),
            BuildError::Table(t) => t.into(),
            BuildError::Io { .. } => CliError::io("io", e),
            BuildError::InsufficientRows { .. } => CliError::validation("insufficient_rows", e),
            _ => CliError::validation("build", e),
        }
    }
}

impl From<MetadataError> for CliError {
    fn from(e: MetadataError) -> Self {
        match e {
            MetadataError::PromptTooLarge { .. } => CliError::validation("prompt_too_large", e),
            MetadataError::Sidecar { .. } => CliError::io("metadata_io", e),
            _ => CliError::validation("metadata", e),
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::InvalidConfig(_) => CliError::validation("endpoint_config", e),
            _ => CliError::io(e.kind(), e),
        }
    }
}

impl From<BatchError> for CliError {
    fn from(e: BatchError) -> Self {
        match e {
            BatchError::DuplicateKey(_) => CliError::validation("duplicate_record", e),
            BatchError::Io { .. } => CliError::io("io", e),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Registry(r) => r.into(),
            PipelineError::Build(b) => b.into(),
            PipelineError::Batch(b) => b.into(),
            PipelineError::Io { .. } => CliError::io("io", e),
            PipelineError::UnknownDataset(_) => CliError::validation("unknown_dataset", e),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io { .. } => CliError::io("io", e),
            _ => CliError::validation("schema_mismatch", e),
        }
    }
}

impl From<UtilityError> for CliError {
    fn from(e: UtilityError) -> Self {
        CliError::validation("utility", e)
    }
}
