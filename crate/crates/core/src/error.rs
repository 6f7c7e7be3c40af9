use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical consistency error: {0}")]
    NumericalConsistency(String),

    #[error("negative density {value:e} at node ({i}, {j})")]
    Negativity { value: f64, i: usize, j: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field role {found} where {expected} was required")]
    RoleMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("Hamiltonian term of total degree {0} is unsupported")]
    UnsupportedDegree(u32),

    #[error("Ermakov integration failed at t = {t}: b = {b}")]
    IntegrationFailure { t: f64, b: f64 },

    #[error("characteristic escaped the bounding box at (q, p) = ({q}, {p})")]
    Escape { q: f64, p: f64 },

    #[error("mean energy {mean} is below the reference energy {e0}")]
    InconsistentE0 { mean: f64, e0: f64 },
}
