use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative order {0} is not supported (expected 0..=4)")]
    UnsupportedOrder(u32),

    #[error("divided differences need 2 or 3 nodes, got {0}")]
    UnsupportedNodes(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root solver did not converge after {iterations} iterations; bracket [{lo}, {hi}]")]
    Convergence { iterations: usize, lo: f64, hi: f64 },

    #[error("chatter: impact gap {gap:e} at t = {time} violates the positive-gap condition")]
    Chatter { time: f64, gap: f64 },

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("quadrature did not reach tolerance {requested:e} (achieved {achieved:e})")]
    Accuracy { requested: f64, achieved: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("orbit not certified: {0}")]
    NotCertified(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
