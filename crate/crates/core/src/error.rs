use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// The displacement equation has a vanishing denominator at `r = r_c`.
    #[error("degenerate steady-state denominator: r = {r} is within {tol:e} of r_c = {r_c}")]
    DegenerateDenominator { r: f64, r_c: f64, tol: f64 },

    #[error("branch index {index} out of range: {count} branch(es) found")]
    BranchIndex { index: usize, count: usize },

    #[error("steady-state branch residual {residual:e} exceeds tolerance {tol:e}")]
    BranchResidual { residual: f64, tol: f64 },

    #[error("no stationary state: linear model is {verdict} (max Re λ = {max_re:e})")]
    NoStationaryState { verdict: &'static str, max_re: f64 },

    #[error("singular frequency ω = {omega}: -iω is within {distance:e} of a drift eigenvalue")]
    SingularFrequency { omega: f64, distance: f64 },

    #[error("quadrature did not converge after {panels} panels: estimate {estimate:e} ± {error_bound:e}")]
    Accuracy {
        estimate: f64,
        error_bound: f64,
        panels: usize,
    },

    #[error("Lyapunov solve failed: {0}")]
    Lyapunov(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("Fock truncation {dim_cav}x{dim_mech}: {reason}")]
    FockDimension {
        dim_cav: usize,
        dim_mech: usize,
        reason: &'static str,
    },

    #[error("degenerate steady state of the Liouvillian: {0}")]
    Degeneracy(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: f64, constraint: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            constraint,
        }
    }
}
