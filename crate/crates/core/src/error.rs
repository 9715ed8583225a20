use thiserror::Error;

/// Errors surfaced by the pipeline modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("data: {0}")]
    Data(String),

    #[error("regression: {0}")]
    Regression(String),

    #[error("insufficient observations: n={n} <= m={m}")]
    InsufficientObservations { n: usize, m: usize },

    #[error("degenerate subset: no features selected")]
    DegenerateSubset,

    #[error("undefined R2: response has zero total sum of squares")]
    UndefinedR2,

    #[error("empty archive")]
    EmptyArchive,

    #[error("no informative Pareto member: all adjusted R2 values are non-positive")]
    NoInformativeMember,

    #[error("identical samples")]
    IdenticalSamples,

    #[error("stats: {0}")]
    Stats(String),

    #[error("report: {0}")]
    Report(String),
}

pub type Result<T> = std::result::Result<T, Error>;
