use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the range where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Every sample sits on the flat part of a saturating influence function.
    #[error("influence function saturated{}: {advice}", context_suffix(.context))]
    Saturation { context: Option<String>, advice: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" ({c})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn saturation() -> Self {
        Error::Saturation {
            context: None,
            advice: "decrease alpha so that fewer samples reach the flat branch".into(),
        }
    }

    /// Attaches a location (coordinate, candidate index, ...) to a saturation
    /// or numeric error. Other variants pass through untouched.
    pub fn within(self, what: impl Into<String>) -> Self {
        match self {
            Error::Saturation { context: None, advice } => Error::Saturation {
                context: Some(what.into()),
                advice,
            },
            Error::Numeric(msg) => Error::Numeric(format!("{}: {msg}", what.into())),
            other => other,
        }
    }
}
