use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    Validation(String),

    #[error("{func}: argument out of domain ({msg})")]
    Domain { func: &'static str, msg: String },

    #[error("gamma function pole at x = {0}")]
    Pole(f64),

    #[error("Frobenius recursion is resonant at nu = {nu}: the two indicial exponents differ by an integer and the potential is non-zero")]
    Resonance { nu: f64 },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("series truncation estimate {estimate:e} too large at x = {x}; shrink the point or raise the order")]
    Truncation { x: f64, estimate: f64 },

    #[error("integration step underflow at x = {x}; seed from the Frobenius series instead")]
    StepUnderflow { x: f64 },

    #[error("connection matrix ill-conditioned (cond = {cond:e})")]
    Conditioning { cond: f64 },

    #[error("connection coefficients unstable under matching-point halving ({0})")]
    Unstable(String),

    #[error("far-field seed at x = {x} is not in the decaying regime")]
    TurningPoint { x: f64 },

    #[error("lambda = {lambda} collides with an eigenvalue (|W| = {wronskian:e})")]
    EigenvalueCollision { lambda: f64, wronskian: f64 },

    #[error("Krein function pole at z = {z} (beta vanishes)")]
    KreinPole { z: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("spectrum: {0}")]
    Spectrum(String),

    #[error("insufficient spectrum: {0}")]
    InsufficientSpectrum(String),

    #[error("series algebra: {0}")]
    Series(String),

    #[error("fit: {0}")]
    Fit(String),
}

impl Error {
    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Domain { .. } | Error::Pole(_) | Error::Resonance { .. }
        )
    }
}
