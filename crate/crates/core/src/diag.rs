//! Structured warnings shared by the parsers and the pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Info,
    Warning,
    Error,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Info => "INFO",
            Level::Warning => "WARN",
            Level::Error => "ERROR",
        })
    }
}

/// One diagnostic record. `row` and `column` are 1-based and refer to the
/// input document the diagnostic came from (CSV record / column, OBJ line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub level: Level,
    pub code: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub column: Option<usize>,
    pub message: String,
    /// Close matches for an unrecognized name, best first.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub suggestions: Vec<String>,
}

impl Diagnostic {
    pub fn warning(code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            level: Level::Warning,
            code: code.to_string(),
            row: None,
            column: None,
            message: message.into(),
            suggestions: Vec::new(),
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            level: Level::Error,
            ..Diagnostic::warning(code, message)
        }
    }

    pub fn at(mut self, row: Option<usize>, column: Option<usize>) -> Self {
        self.row = row;
        self.column = column;
        self
    }
}

/// Formats as the single-line stderr form `LEVEL code message`.
impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.level, self.code)?;
        match (self.row, self.column) {
            (Some(r), Some(c)) => write!(f, "[row {r}, column {c}] ")?,
            (Some(r), None) => write!(f, "[row {r}] ")?,
            (None, Some(c)) => write!(f, "[column {c}] ")?,
            (None, None) => {}
        }
        f.write_str(&self.message)
    }
}
