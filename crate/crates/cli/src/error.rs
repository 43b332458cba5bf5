use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gcx_core::Error),

    #[error("invalid {}: {message}", fields.join(", "))]
    Validation { fields: Vec<String>, message: String },

    #[error("graph edit distance gave up: {0}")]
    Exceeded(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn validation(field: &str, message: impl Into<String>) -> Self {
        CliError::Validation { fields: vec![field.to_string()], message: message.into() }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Validation { .. } => "validation",
            CliError::Exceeded(_) => "exceeded",
        }
    }

    /// Body shared by `--json` output and HTTP errors.
    pub fn to_json(&self) -> serde_json::Value {
        let fields = match self {
            CliError::Validation { fields, .. } => fields.clone(),
            _ => Vec::new(),
        };
        serde_json::json!({ "error": self.code(), "message": self.to_string(), "fields": fields })
    }

    /// Process exit status; each error family gets its own.
    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "input" | "validation" | "unsupported_layer" => 2,
            "capacity" => 3,
            "format" | "json" => 4,
            "training" => 5,
            "empty_concept" | "empty_report" => 6,
            "version" => 7,
            "hash_mismatch" => 8,
            "missing_file" => 9,
            "not_found" => 10,
            "exceeded" => 12,
            _ => 1,
        }
    }
}
