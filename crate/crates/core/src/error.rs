use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("partition count {parts} does not divide sample size {n}")]
    Indivisible { n: usize, parts: usize },

    #[error("cholesky factorization failed after jitter levels {attempted:?}")]
    Factorization { attempted: Vec<f64> },

    #[error("partition {partition}: {source}")]
    Partition {
        partition: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("need at least {required} bootstrap replicates for alpha = {alpha}, got {replicates}")]
    Resolution {
        replicates: usize,
        required: usize,
        alpha: f64,
    },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
