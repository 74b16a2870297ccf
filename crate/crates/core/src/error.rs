use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures raised by graph analysis, gain synthesis, simulation and
/// post-processing. Numeric payloads are reported in `f64` regardless of
/// the scalar type used for the computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("follower subgraph is not weakly connected")]
    NotWeaklyConnected,

    #[error("grounded matrix is numerically singular (smallest singular value {0:e})")]
    SingularGroundedMatrix(f64),

    #[error("no positive diagonal scaling certifies the grounded matrix (best eta {0:e})")]
    CertificateFailure(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "pair (A, B) is not stabilizable: eigenvalue {re}{im:+}i is unstable and uncontrollable"
    )]
    NotStabilizable { re: f64, im: f64 },

    #[error(
        "Riccati iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    RiccatiNonConvergence { iterations: usize, residual: f64 },

    #[error("Riccati certificate failed: residual eigenvalue {residual:e} exceeds {bound:e}")]
    RiccatiCertificate { residual: f64, bound: f64 },

    #[error("closed-loop matrix is not Hurwitz (largest real part {0:e})")]
    ClosedLoopUnstable(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dynamic trigger variable of follower {agent} lost positivity at t = {time} (value {value:e}); reduce the step size")]
    PhiNonPositive { agent: usize, time: f64, value: f64 },

    #[error("trajectory contains no samples")]
    EmptyTrajectory,

    #[error("could not bracket the root of the inter-event equation")]
    BracketFailure,
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
