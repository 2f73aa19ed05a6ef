//! Perpetual Bermudan option payoffs on log-Lévy baskets.
//!
//! The library is organized around the first-entry problem for a log-Lévy
//! basket `X` into a half-space exercise region `G = γ + H`: the expected
//! discount factor at entry, its generating function ξ(q,s), and the
//! American–Bermudan continuity correction
//!
//! ```text
//! ρ(s)(γ) = exp( − Σ_{n≥1} e^{−rns}/n · P⁰{ X_ns ∈ H } )
//! ```
//!
//! evaluated three independent ways so each can serve as an oracle for the
//! others:
//!
//! * [`wh_series`] — the Feller/Wiener–Hopf series over one-dimensional
//!   marginals, with certified geometric truncation tails, closed-form
//!   regime bounds, and exact lattice-walk enumeration oracles;
//! * [`montecarlo`] — path simulation of the first-entry time, including a
//!   coupled two-mesh estimator whose mean is the continuity correction;
//! * [`operator_grid`] — the discounted Gaussian convolution operator on a
//!   truncated grid: Neumann-series pricing, value iteration for exercise
//!   regions, fixed-point residuals, symbol bounds and derivative checks.
//!
//! [`levy_models`] defines the increment laws (Black–Scholes basket, Merton
//! jump diffusion, lattice walk), [`regions`] the half-space regions and
//! payoffs, [`scaling_fit`] the log-log scaling-exponent estimation, and
//! [`config`] the TOML run configuration shared with the CLI.

pub mod config;
pub mod error;
pub mod levy_models;
pub mod montecarlo;
pub mod operator_grid;
pub mod regions;
pub mod scaling_fit;
pub mod wh_series;

pub use error::Error;

/// Library-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

/// Standard normal cumulative distribution function.
///
/// Evaluated through the complementary error function, which keeps the
/// absolute error at the few-ulp level (≲ 1e−16) across the whole real
/// line — in particular in the far tails where `0.5*(1+erf)` would lose
/// all precision. Downstream truncation budgets assume |abs error| ≤ 1e−15.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}
