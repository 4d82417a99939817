use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
///
/// Variants split into two families: input/validation problems (bad
/// dimensions, out-of-domain parameters, malformed files) and numerical
/// failures (truncation overflow, divergent series, singular weights,
/// integrator drift). [`Error::is_numerical`] reports the family, which the
/// CLI maps onto its exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("Fock index {index} outside truncated space of dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("index {value} beyond supported maximum {max}")]
    IndexRange { value: usize, max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("truncation error in {context}: measure {measure:e} exceeds limit {limit:e}")]
    Truncation {
        context: &'static str,
        measure: f64,
        limit: f64,
    },

    #[error(
        "singular reconstruction weight at s={s}, gamma*t={gamma_t}, nbar={nbar}: \
         denominator {denominator:e}"
    )]
    SingularWeight {
        s: f64,
        gamma_t: f64,
        nbar: f64,
        denominator: f64,
    },

    #[error(
        "weighted series diverges: |chi * Gamma_nbar| = {chi_gamma_abs} >= 1 \
         (partial sum {partial_sum})"
    )]
    NonConvergent {
        chi_gamma_abs: f64,
        partial_sum: f64,
    },

    #[error(
        "weighted-sum tail estimate {tail_estimate:e} exceeds threshold {threshold:e} \
         (partial sum {partial_sum})"
    )]
    TailAboveThreshold {
        tail_estimate: f64,
        threshold: f64,
        partial_sum: f64,
    },

    #[error("integration accuracy: trace drift {drift:e} exceeds {limit:e} over {steps} steps")]
    IntegrationAccuracy {
        drift: f64,
        limit: f64,
        steps: usize,
    },

    #[error("aliasing: {n_samples} samples cannot resolve m_max = {m_max} (need more than {bound})")]
    Aliasing {
        n_samples: usize,
        m_max: usize,
        bound: usize,
    },

    #[error("numerical overflow in {0}")]
    Overflow(&'static str),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl Error {
    /// True for errors produced by the numerics (convergence, truncation,
    /// conditioning) as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Truncation { .. }
                | Error::SingularWeight { .. }
                | Error::NonConvergent { .. }
                | Error::TailAboveThreshold { .. }
                | Error::IntegrationAccuracy { .. }
                | Error::Aliasing { .. }
                | Error::Overflow(_)
        )
    }
}
