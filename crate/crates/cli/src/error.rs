use std::fmt;
use std::path::Path;

/// Failure reported as a single JSON line on stderr.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl fmt::Display) -> Self {
        Self { kind, message: message.to_string() }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        Self::new("config", message)
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::new("io", format!("{}: {e}", path.display()))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind, "message": self.message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

macro_rules! from_error {
    ($($ty:ty => $kind:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::new($kind, e)
            }
        })*
    };
}

from_error! {
    dextron_core::traj::TrajError => "trajectory",
    dextron_core::env::EnvError => "environment",
    dextron_core::mcsearch::SearchError => "search",
    dextron_core::learn::LearnError => "training",
    dextron_core::learn::CheckpointError => "checkpoint",
    dextron_core::successmodel::SmError => "success-model",
}
