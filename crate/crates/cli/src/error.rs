use elicit_core::ceg::CegError;
use elicit_core::elicitation::ElicitError;
use elicit_core::flow::FlowError;
use elicit_core::mdm::MdmError;
use elicit_core::GraphError;
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid document: {0}")]
    Document(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("{0}")]
    Usage(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("stale sequence number {given}, session is at {current}")]
    Conflict { given: u64, current: u64 },
    #[error("stored session {0} does not replay: {1}")]
    Corrupt(String, String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ceg(#[from] CegError),
    #[error(transparent)]
    Mdm(#[from] MdmError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Elicit(#[from] ElicitError),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), message: e.to_string() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Document(_) => "document",
            CliError::Csv(_) => "csv",
            CliError::Usage(_) => "usage",
            CliError::NotFound(_) => "not_found",
            CliError::Conflict { .. } => "conflict",
            CliError::Corrupt(..) => "corrupt_store",
            CliError::Graph(_) => "graph",
            CliError::Ceg(_) => "ceg",
            CliError::Mdm(_) => "mdm",
            CliError::Flow(_) => "flow",
            CliError::Elicit(_) => "elicitation",
        }
    }

    /// Usage errors exit 2, everything else 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut body = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            CliError::Conflict { given, current } => {
                body["given_seq"] = json!(given);
                body["current_seq"] = json!(current);
            }
            CliError::Elicit(ElicitError::OrientationRequired { options, .. }) => {
                body["options"] = json!(options);
            }
            CliError::Flow(FlowError::DisconnectedResult(sites)) => {
                body["stranded"] = json!(sites);
            }
            CliError::Mdm(MdmError::Invalid(violations)) => {
                body["violations"] = json!(violations);
            }
            _ => {}
        }
        json!({ "error": body })
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
