use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration blew up at t = {time}")]
    Blowup { time: f64 },

    #[error("trigonometric polynomial has all-zero coefficients")]
    DegeneratePolynomial,

    /// `|H_uu|` at `u = pi` is too small to divide by; see
    /// [`crate::conditions::degeneracy_order`].
    #[error("degenerate denominator: |H_uu| = {value:e} is below {threshold:e}")]
    DegenerateDenominator { value: f64, threshold: f64 },

    #[error("search produced a non-finite objective at perturbation {perturbation:?}")]
    NonFiniteObjective { perturbation: Vec<f64> },
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
