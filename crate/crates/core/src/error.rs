use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed model: {0}")]
    Parse(String),

    #[error("invalid model: {0}")]
    Validation(#[from] ValidationError),

    #[error("eps = {eps} outside the model range [0, {eps_max}]")]
    EpsOutOfRange { eps: f64, eps_max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The taboo system `I - jP(rho)` has no convergent Neumann series, so the
    /// hitting functionals are infinite.
    #[error("moment functional is infinite for target {target} at rho = {rho}: {reason}")]
    NotFinite {
        target: usize,
        rho: f64,
        reason: String,
    },

    #[error("unperturbed taboo matrix is not invertible: {0}")]
    SingularAtZero(String),

    #[error("characteristic equation has no root (finite up to rho = {delta_proxy}): {reason}")]
    NoRoot { delta_proxy: f64, reason: String },

    #[error("series tail not certified at n_max = {n_max}: {reason}")]
    TailNotCertified { n_max: usize, reason: String },

    #[error("polynomial fit is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },
}

/// First violated model invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("row {i} sums to {sum} at eps = {eps} (expected 1)")]
    RowSum { i: usize, eps: f64, sum: f64 },

    #[error("Q[{i}][{j}]({k}) = {value} at eps = {eps} is outside [0, 1]")]
    EntryRange {
        i: usize,
        j: usize,
        k: usize,
        eps: f64,
        value: f64,
    },

    #[error("entry ({i}, {j}, {k}) is out of bounds for n_states = {n_states}, k_max = {k_max}")]
    IndexOutOfBounds {
        i: usize,
        j: usize,
        k: usize,
        n_states: usize,
        k_max: usize,
    },

    #[error("entry ({i}, {j}, {k}) appears more than once")]
    DuplicateEntry { i: usize, j: usize, k: usize },

    #[error("entry ({i}, {j}, {k}) has a non-finite or empty coefficient list")]
    BadCoefficients { i: usize, j: usize, k: usize },

    #[error("{0}")]
    Header(String),
}
