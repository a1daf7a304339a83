use std::fmt;

use crate::phy::PhyId;

/// One diagnostic produced while validating a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    /// Dotted path of the offending field, e.g. `round.ntx`.
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("payload of {len} bytes exceeds the {max}-byte maximum of {phy}")]
    PayloadTooLarge { phy: PhyId, len: usize, max: usize },

    #[error("channel hopping sequence is empty")]
    EmptySequence,

    #[error("invalid round configuration: {0}")]
    ConfigInvalid(String),

    #[error("extension hook violated round invariants: {0}")]
    HookViolation(String),

    #[error("invalid multi-PHY pattern: {0}")]
    PatternInvalid(String),

    #[error("late-ratio report has no expected sources")]
    NoSources,

    #[error("invalid scenario:\n{}", format_fields(.0))]
    ScenarioInvalid(Vec<FieldError>),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_fields(fields: &[FieldError]) -> String {
    fields.iter().map(|f| format!("  - {f}")).collect::<Vec<_>>().join("\n")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
