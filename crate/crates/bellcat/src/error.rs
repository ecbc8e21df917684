use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A truncated series hit its term cap before the tail estimate fell
    /// below tolerance.
    #[error("truncated series did not converge: {0}")]
    TruncationNotConverged(String),

    #[error("adaptive quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    /// The Gaussian phase-space kernel has no finite Wigner transform
    /// (non positive definite quadratic block).
    #[error("kernel is not integrable: {0}")]
    NonintegrableKernel(String),

    /// sum_k K_k^dag K_k deviated from the identity on the truncated space.
    #[error("Kraus completeness violated: residual {residual:.3e} with {terms} terms")]
    CompletenessViolated { residual: f64, terms: usize },

    #[error("Fock cutoff {got} too small, need at least {need}")]
    CutoffTooSmall { got: usize, need: usize },

    #[error("step count insufficient: {0}")]
    StepCountInsufficient(String),

    #[error("no sign change in [{lo}, {hi}]: f(lo) = {f_lo:.6e}, f(hi) = {f_hi:.6e}")]
    NoCrossing { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("scan is not monotone near {at}: {detail}")]
    NotMonotone { at: f64, detail: String },

    #[error("value {value} exceeds the CHSH quantum bound 2*sqrt(2)")]
    BoundViolated { value: f64 },

    #[error("bad configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
