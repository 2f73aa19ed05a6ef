//! Error taxonomy shared by the library and the CLI.
//!
//! Two broad classes matter to callers: *validation* errors (bad parameters,
//! malformed configuration, unsupported model/operation combinations) and
//! *numeric* errors (a certified tolerance that cannot be met, an iteration
//! cap that fired, a resource cap). The CLI maps the first class to exit
//! code 1 and the second to exit code 2, so the split is part of the
//! observable contract, not just taste.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed its precondition. Always names the offending key.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Merton calibration has no real volatility: r − α − (e^β − 1) ≤ 0.
    #[error(
        "no martingale volatility: r - alpha - (e^beta - 1) = {margin} <= 0; \
         the jump compensator already exceeds the discount rate"
    )]
    NoMartingaleVolatility { margin: f64 },

    /// Closed-form bounds or brackets were requested outside their regime,
    /// e.g. drift ᵗαμ ≤ 0 with r ≤ (ᵗαμ)²/(2δ²).
    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    /// The operation is only defined for a subset of the model families.
    #[error("`{op}` is not implemented for {model} models")]
    UnsupportedModel { op: &'static str, model: &'static str },

    /// A region violated a structural requirement (e.g. +-closedness or
    /// `0 ∉ H` for the lattice identities).
    #[error("invalid region: {0}")]
    InvalidRegion(String),

    /// Certified series truncation needs more terms than the configured cap.
    #[error(
        "series truncation cannot be certified: {required} terms needed for \
         tol={tol:e}, cap is n_max={n_max}"
    )]
    TruncationCap { required: usize, n_max: usize, tol: f64 },

    /// A grid operation received fields on mismatched grids.
    #[error("grid shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An iteration failed to converge or produced a non-finite value.
    /// Signals a bug or a genuinely infeasible tolerance, never silently
    /// degraded output.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A requested computation exceeds a memory/size cap.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Configuration file errors (parse failures, missing keys). The message
    /// names the offending key or section.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Process exit code the CLI should use for this error:
    /// 1 for validation problems, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::NoMartingaleVolatility { .. }
            | Error::InvalidRegime(_)
            | Error::UnsupportedModel { .. }
            | Error::InvalidRegion(_)
            | Error::ShapeMismatch(_)
            | Error::Config(_) => 1,
            Error::TruncationCap { .. } | Error::Numeric(_) | Error::Resource(_) => 2,
        }
    }
}
