use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cope_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl CliError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code classification: 2 for validation problems (inputs, files,
    /// parameters), 3 for numerical failures arising from the data.
    pub fn exit_code(&self) -> u8 {
        use cope_core::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::Design(_) | E::ZeroVariance { .. } | E::EmptyBoundary | E::InvalidField(_) => 3,
                _ => 2,
            },
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
