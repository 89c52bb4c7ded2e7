use thiserror::Error;

/// Errors produced by the solvers and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("blow-up at t = {time}: sup norm {sup} exceeds guard {limit}")]
    BlowUp { time: f64, sup: f64, limit: f64 },

    #[error("no bounded bootstrap: 27*C*eps^2 = {discriminant} >= 4")]
    NoBootstrapRoot { discriminant: f64 },

    #[error(
        "state needs {required} amplitudes, budget is {budget}; \
         try N <= {max_particles} at n = {points}, or n <= {max_points} at N = {particles}"
    )]
    MemoryBudget {
        required: u128,
        budget: usize,
        points: usize,
        particles: usize,
        max_particles: usize,
        max_points: usize,
    },
}

impl Error {
    /// Whether the error stems from the numerical evolution rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BlowUp { .. } | Error::NonFinite { .. })
    }

    pub fn is_resource(&self) -> bool {
        matches!(self, Error::MemoryBudget { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
