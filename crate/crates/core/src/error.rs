use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate {coord} = {value} lies outside the kernel domain")]
    Domain { coord: usize, value: f64 },

    #[error("metric entry at coordinate {coord} is not positive ({value})")]
    Metric { coord: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("instance generation failed: {0}")]
    Instance(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iter: usize) -> Self {
        Error::AtIteration {
            iter,
            source: Box::new(self),
        }
    }
}
