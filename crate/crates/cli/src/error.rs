use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dncboot::Error),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("could not parse config: {0}")]
    ConfigSyntax(#[from] toml::de::Error),

    #[error("bad --set override `{0}`: expected key=value")]
    Override(String),

    #[error("{path}: row {row}: {message}")]
    Data {
        path: PathBuf,
        row: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;
