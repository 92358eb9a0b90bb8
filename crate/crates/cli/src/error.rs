use std::path::PathBuf;

use lagns_core::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] lagns_core::Error),
    #[error("invalid configuration for `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("no manifest.json in {0}")]
    MissingManifest(PathBuf),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("{what}: {message}")]
    Io { what: String, message: String },
    /// The experiment ran but some of its checks exceeded their thresholds.
    #[error("checks failed: {0}")]
    ChecksFailed(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config { key: key.into(), reason: reason.into() }
    }

    pub fn io(what: impl Into<String>, e: impl std::fmt::Display) -> Self {
        CliError::Io { what: what.into(), message: e.to_string() }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            CliError::Core(e) => e.class(),
            CliError::Config { .. } | CliError::MissingManifest(_) | CliError::UnknownSuite(_) => {
                ErrorClass::Validation
            }
            CliError::Io { .. } | CliError::ChecksFailed(_) => ErrorClass::Internal,
        }
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.class())
    }

    /// Variant name, for machine-readable reports.
    pub fn name(&self) -> String {
        match self {
            CliError::Core(e) => {
                let dbg = format!("{e:?}");
                dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("").to_string()
            }
            CliError::Config { .. } => "InvalidConfig".into(),
            CliError::MissingManifest(_) => "MissingManifest".into(),
            CliError::UnknownSuite(_) => "UnknownSuite".into(),
            CliError::Io { .. } => "Io".into(),
            CliError::ChecksFailed(_) => "ChecksFailed".into(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "error": self.name(),
            "class": class_name(self.class()),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Config { key, .. } = self {
            v["key"] = key.clone().into();
        }
        if let CliError::Core(lagns_core::Error::InvalidConfig { key, .. }) = self {
            v["key"] = key.clone().into();
        }
        v
    }
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Validation => 2,
        ErrorClass::Smallness => 3,
        ErrorClass::NonConvergence => 4,
        ErrorClass::Internal => 5,
    }
}

pub fn class_name(class: ErrorClass) -> &'static str {
    match class {
        ErrorClass::Validation => "validation",
        ErrorClass::Smallness => "smallness",
        ErrorClass::NonConvergence => "non-convergence",
        ErrorClass::Internal => "internal",
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
