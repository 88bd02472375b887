use thiserror::Error;

/// CLI-level errors, categorized so the exit code and message prefix tell
/// the caller what went wrong.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Io(_) => 4,
            CliError::Numeric(_) => 5,
        }
    }
}

impl From<conformal_pinn::Error> for CliError {
    fn from(e: conformal_pinn::Error) -> Self {
        use conformal_pinn::Error as E;
        match e {
            E::InvalidConfig(m) => CliError::Config(m),
            E::ShapeMismatch { .. } => CliError::Config(e.to_string()),
            E::Parse(m) => CliError::Parse(m),
            E::NonFinite { .. } | E::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            E::Io(io) => CliError::Io(io),
        }
    }
}
