use thiserror::Error;

/// Errors raised by the bandit library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The bandit model is degenerate for the requested operation
    /// (e.g. tied best arms in best-arm identification).
    #[error("degenerate model: {0}")]
    Degenerate(String),

    /// A documented precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The requested point set is empty.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An iterative solver did not certify its tolerance within its budget.
    /// The best iterate found so far is carried along.
    #[error("{what} did not converge: gap {gap:.3e} after {iterations} iterations")]
    Convergence {
        what: &'static str,
        gap: f64,
        iterations: usize,
        value: f64,
        weights: Vec<f64>,
    },

    /// A search ran past its cap.
    #[error("search cap exceeded: {0}")]
    CapExceeded(String),

    /// An exhaustive grid would be too large to evaluate.
    #[error("grid too large: {nodes} nodes (limit {limit})")]
    GridTooLarge { nodes: f64, limit: f64 },

    /// Invalid experiment configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than by a failure at
    /// run time. The CLI maps the two classes to different exit codes.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Degenerate(_)
                | Error::Precondition(_)
                | Error::Config(_)
                | Error::Toml(_)
                | Error::Infeasible(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
