//! Increment laws for the supported log-price processes.
//!
//! Three families are implemented:
//!
//! * [`BlackScholesBasket`] — `d` independent geometric-Brownian log prices
//!   with per-asset volatilities σᵢ and the risk-neutral drift
//!   μᵢ = r − σᵢ²/2 baked in, so exp(Xᵢ,ₜ − rt) is a martingale;
//! * [`MertonJumpDiffusion`] — one-dimensional jump diffusion
//!   Xₜ = X₀ + αt + βZₜ + σBₜ with a unit-rate Poisson process Z and fixed
//!   jump size β > 0;
//! * [`LatticeWalk`] — a finitely supported walk on ℤ^d, used as an exact
//!   enumeration oracle for identities that hold for any process with
//!   stationary independent increments.
//!
//! All evaluators are pure; samplers take a caller-owned RNG so concurrent
//! use just needs one generator per worker.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::Error;
use crate::normal_cdf;
use crate::Result;

/// Default certified truncation tolerance for the Merton Poisson mixture.
pub const DEFAULT_MIXTURE_TOL: f64 = 1e-12;

/// Risk-neutral drift of a Black–Scholes log price: μ = r − σ²/2.
pub fn bs_drift(r: f64, sigma: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("discount rate must be > 0, got {r}"),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("volatility must be > 0, got {sigma}"),
        });
    }
    Ok(r - 0.5 * sigma * sigma)
}

/// The unique σ > 0 making exp(Xₜ − rt) a martingale for the jump diffusion
/// with linear drift α, unit-rate jumps of size β and discount rate r:
/// the martingale identity 1 = E⁰[exp(α − r + σ²/2 + Z₁β-ish)] solves to
/// σ = sqrt(2(r − α − (e^β − 1))).
pub fn merton_calibrate_sigma(r: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("discount rate must be > 0, got {r}"),
        });
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("jump size must be finite and >= 0, got {beta}"),
        });
    }
    let margin = r - alpha - (beta.exp() - 1.0);
    if margin <= 0.0 {
        return Err(Error::NoMartingaleVolatility { margin });
    }
    Ok((2.0 * margin).sqrt())
}

/// `d`-dimensional Black–Scholes basket under the risk-neutral measure.
#[derive(Debug, Clone, PartialEq)]
pub struct BlackScholesBasket {
    dim: usize,
    sigma: Vec<f64>,
    r: f64,
    mu: Vec<f64>,
}

impl BlackScholesBasket {
    /// Builds the basket, deriving the martingale drift μᵢ = r − σᵢ²/2.
    pub fn new(sigma: Vec<f64>, r: f64) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "need at least one volatility".into(),
            });
        }
        let mu = sigma
            .iter()
            .map(|&s| bs_drift(r, s))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { dim: sigma.len(), sigma, r, mu })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
}

/// One-dimensional Merton jump diffusion with positive jumps of fixed size.
///
/// The jump intensity is pinned at 1 per unit time; the only calibration
/// freedom is σ, and the `calibrated` flag records whether the stored σ
/// satisfies the martingale identity to 1e−12.
#[derive(Debug, Clone, PartialEq)]
pub struct MertonJumpDiffusion {
    alpha: f64,
    beta: f64,
    sigma: f64,
    r: f64,
    jump_rate: f64,
    calibrated: bool,
}

impl MertonJumpDiffusion {
    /// Martingale residual tolerance below which a model counts as calibrated.
    const CALIBRATION_TOL: f64 = 1e-12;

    /// Builds a calibrated model by solving the martingale identity for σ.
    pub fn calibrated(r: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::validate_beta(beta)?;
        let sigma = merton_calibrate_sigma(r, alpha, beta)?;
        Ok(Self { alpha, beta, sigma, r, jump_rate: 1.0, calibrated: true })
    }

    /// Builds a model with an explicitly supplied σ; `calibrated` is set
    /// from the closed-form martingale residual, not taken on trust.
    pub fn with_sigma(r: f64, alpha: f64, beta: f64, sigma: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: format!("discount rate must be > 0, got {r}"),
            });
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("diffusion volatility must be > 0, got {sigma}"),
            });
        }
        Self::validate_beta(beta)?;
        let mut model =
            Self { alpha, beta, sigma, r, jump_rate: 1.0, calibrated: false };
        model.calibrated = model.martingale_residual().abs() <= Self::CALIBRATION_TOL;
        Ok(model)
    }

    fn validate_beta(beta: f64) -> Result<()> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("jump size must be finite and > 0, got {beta}"),
            });
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn jump_rate(&self) -> f64 {
        self.jump_rate
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    /// Closed-form martingale residual E[exp(X₁ − r)] − 1
    /// = exp(α − r + σ²/2 + (e^β − 1)·jump_rate) − 1.
    pub fn martingale_residual(&self) -> f64 {
        (self.alpha - self.r
            + 0.5 * self.sigma * self.sigma
            + (self.beta.exp() - 1.0) * self.jump_rate)
            .exp()
            - 1.0
    }
}

/// Finitely supported random walk on ℤ^d.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWalk {
    dim: usize,
    steps: Vec<(Vec<i64>, f64)>,
}

impl LatticeWalk {
    /// Probabilities must be nonnegative and sum to 1 within 1e−15·|steps|.
    pub fn new(steps: Vec<(Vec<i64>, f64)>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidParameter {
                name: "steps",
                reason: "need at least one step".into(),
            });
        }
        let dim = steps[0].0.len();
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "steps",
                reason: "step points must have dimension >= 1".into(),
            });
        }
        let mut total = 0.0;
        for (point, prob) in &steps {
            if point.len() != dim {
                return Err(Error::InvalidParameter {
                    name: "steps",
                    reason: format!(
                        "inconsistent dimensions: {} vs {}",
                        point.len(),
                        dim
                    ),
                });
            }
            if !(*prob >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "steps",
                    reason: format!("negative probability {prob} for {point:?}"),
                });
            }
            total += prob;
        }
        if (total - 1.0).abs() > 1e-15 * steps.len() as f64 {
            return Err(Error::InvalidParameter {
                name: "steps",
                reason: format!("probabilities sum to {total}, expected 1"),
            });
        }
        Ok(Self { dim, steps })
    }

    /// The standard ±1 walk on ℤ with equal probabilities.
    pub fn symmetric_pm1() -> Self {
        Self::new(vec![(vec![1], 0.5), (vec![-1], 0.5)])
            .expect("static step table is valid")
    }

    /// The 2-d walk with steps ±e₁, ±e₂, each with probability ¼.
    pub fn diagonal_2d() -> Self {
        Self::new(vec![
            (vec![1, 0], 0.25),
            (vec![-1, 0], 0.25),
            (vec![0, 1], 0.25),
            (vec![0, -1], 0.25),
        ])
        .expect("static step table is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> &[(Vec<i64>, f64)] {
        &self.steps
    }

    /// One step drawn by inverting the CDF of the (small) step table.
    pub fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> &[i64] {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (point, prob) in &self.steps {
            acc += prob;
            if u < acc {
                return point;
            }
        }
        // Rounding in the partial sums can leave u above the accumulated
        // total; the last step takes the remainder.
        &self.steps.last().expect("validated non-empty").0
    }
}

/// Any of the supported increment laws.
#[derive(Debug, Clone, PartialEq)]
pub enum LevyModel {
    BlackScholes(BlackScholesBasket),
    Merton(MertonJumpDiffusion),
    Lattice(LatticeWalk),
}

impl LevyModel {
    pub fn dim(&self) -> usize {
        match self {
            LevyModel::BlackScholes(m) => m.dim(),
            LevyModel::Merton(_) => 1,
            LevyModel::Lattice(m) => m.dim(),
        }
    }

    /// Discount rate, for the families that carry one.
    pub fn rate(&self) -> Option<f64> {
        match self {
            LevyModel::BlackScholes(m) => Some(m.r()),
            LevyModel::Merton(m) => Some(m.r()),
            LevyModel::Lattice(_) => None,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            LevyModel::BlackScholes(_) => "black-scholes",
            LevyModel::Merton(_) => "merton",
            LevyModel::Lattice(_) => "lattice",
        }
    }
}

/// Smallest Poisson-mixture truncation order K for intensity `t` such that
/// the certified tail bound e^{−t} t^{K+1}/(K+1)! · 1/(1 − t/(K+2)) is ≤ tol.
///
/// The bound is the first omitted term times the geometric majorant of the
/// ratios t/(K+2), t²/((K+2)(K+3)), …, valid once K + 2 > t.
pub fn poisson_truncation_order(t: f64, tol: f64) -> Result<usize> {
    if !(t > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("need t > 0 and tol > 0, got t={t}, tol={tol}"),
        });
    }
    // Work with the log of the first omitted term to dodge overflow; the
    // factorial log accumulates incrementally.
    let mut log_term = -t + t.ln(); // k = 0: ln(e^{−t} t)
    let mut k = 0usize;
    loop {
        if (k + 2) as f64 > t {
            let bound = log_term.exp() / (1.0 - t / (k + 2) as f64);
            if bound <= tol {
                return Ok(k);
            }
        }
        k += 1;
        log_term += t.ln() - ((k + 1) as f64).ln();
        if k > 100_000_000 {
            return Err(Error::Numeric(format!(
                "Poisson truncation for t={t} did not certify below tol={tol}"
            )));
        }
    }
}

/// Certified tail bound of the Poisson mixture truncated after order K.
pub fn poisson_tail_bound(t: f64, k: usize) -> f64 {
    let mut log_term = -t + ((k + 1) as f64) * t.ln();
    for j in 1..=(k + 1) {
        log_term -= (j as f64).ln();
    }
    if (k + 2) as f64 > t {
        log_term.exp() / (1.0 - t / (k + 2) as f64)
    } else {
        f64::INFINITY
    }
}

/// P⁰{Xₜ < level} for the one-dimensional continuous families.
///
/// Black–Scholes: Φ((level − μt)/(σ√t)). Merton: the Poisson mixture
/// Σ_k e^{−t}tᵏ/k! · Φ((level − αt − βk)/(σ√t)), truncated with the
/// certified tail bound of [`poisson_truncation_order`] at `mixture_tol`.
///
/// Because the laws are absolutely continuous, `< level` and `≤ level`
/// coincide; lattice walks (where they differ) are not supported here.
pub fn marginal_prob_below(
    model: &LevyModel,
    level: f64,
    t: f64,
    mixture_tol: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("time must be > 0, got {t}"),
        });
    }
    match model {
        LevyModel::BlackScholes(m) => {
            if m.dim() != 1 {
                return Err(Error::InvalidParameter {
                    name: "dim",
                    reason: format!(
                        "marginal_prob_below needs a 1-d model, got dim {}",
                        m.dim()
                    ),
                });
            }
            let z = (level - m.mu()[0] * t) / (m.sigma()[0] * t.sqrt());
            Ok(normal_cdf(z))
        }
        LevyModel::Merton(m) => {
            let k_max = poisson_truncation_order(t, mixture_tol)?;
            let sig_sqrt_t = m.sigma() * t.sqrt();
            // Poisson weights by recurrence; mixture summed lowest order
            // first, which is also largest-weight first for small t.
            let mut weight = (-t).exp();
            let mut acc = 0.0;
            for k in 0..=k_max {
                if k > 0 {
                    weight *= t / k as f64;
                }
                let z = (level - m.alpha() * t - m.beta() * k as f64) / sig_sqrt_t;
                acc += weight * normal_cdf(z);
            }
            Ok(acc)
        }
        LevyModel::Lattice(_) => Err(Error::UnsupportedModel {
            op: "marginal_prob_below",
            model: "lattice",
        }),
    }
}

/// One draw from the law of X_s − X₀.
///
/// Black–Scholes: μᵢs + σᵢ√s·Zᵢ per component. Merton: αs + σ√s·Z + β·N
/// with N ~ Poisson(s). Lattice walks take one step of the table per mesh
/// point; `s` only has to be positive, it does not rescale the step law.
///
/// Every draw is determined by the RNG state, so (seed, stream) fully
/// determines a stream of increments.
pub fn sample_increment<R: Rng + ?Sized>(
    model: &LevyModel,
    s: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: format!("mesh must be > 0, got {s}"),
        });
    }
    match model {
        LevyModel::BlackScholes(m) => {
            let sqrt_s = s.sqrt();
            Ok((0..m.dim())
                .map(|i| {
                    let z: f64 = StandardNormal.sample(rng);
                    m.mu()[i] * s + m.sigma()[i] * sqrt_s * z
                })
                .collect())
        }
        LevyModel::Merton(m) => {
            let z: f64 = StandardNormal.sample(rng);
            let jumps = Poisson::new(s * m.jump_rate())
                .expect("s > 0 checked above")
                .sample(rng);
            Ok(vec![m.alpha() * s + m.sigma() * s.sqrt() * z + m.beta() * jumps])
        }
        LevyModel::Lattice(w) => {
            Ok(w.sample_step(rng).iter().map(|&c| c as f64).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bs_drift_examples() {
        assert_eq!(bs_drift(0.5, 1.0).unwrap(), 0.0);
        assert!((bs_drift(0.05, 0.2).unwrap() - 0.03).abs() < 1e-16);
        assert!((bs_drift(0.05, 1.0).unwrap() + 0.45).abs() < 1e-16);
        assert!(bs_drift(-0.1, 1.0).is_err());
        assert!(bs_drift(0.1, 0.0).is_err());
    }

    #[test]
    fn merton_calibration_matches_root_finder() {
        // Independent oracle: bisect the closed-form martingale residual
        // exp(alpha - r + sigma^2/2 + (e^beta - 1)) - 1 in sigma.
        let residual = |sigma: f64| {
            (0.0f64 - 2.0 + 0.5 * sigma * sigma + (1.0f64.exp() - 1.0)).exp() - 1.0
        };
        let (mut lo, mut hi) = (1e-8, 10.0);
        assert!(residual(lo) < 0.0 && residual(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        let sigma = merton_calibrate_sigma(2.0, 0.0, 1.0).unwrap();
        assert!(
            (sigma - root).abs() < 1e-12,
            "calibrated sigma {sigma} vs bisection root {root}"
        );
        // Frozen value of sqrt(2(2 - (e - 1))).
        assert!((sigma - 0.750_623_969_162_929_1).abs() < 1e-12);
    }

    #[test]
    fn merton_calibration_error_cases() {
        // 0.05 < e - 1: the jump compensator alone breaks the martingale.
        match merton_calibrate_sigma(0.05, 0.0, 1.0) {
            Err(Error::NoMartingaleVolatility { margin }) => assert!(margin < 0.0),
            other => panic!("expected NoMartingaleVolatility, got {other:?}"),
        }
        // Jump-free limit collapses to the Black–Scholes mu = 0 case.
        let sigma = merton_calibrate_sigma(1.0, 0.0, 0.0).unwrap();
        assert!((sigma - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn merton_calibrated_flag_tracks_residual() {
        let good = MertonJumpDiffusion::calibrated(2.0, 0.0, 1.0).unwrap();
        assert!(good.is_calibrated());
        assert!(good.martingale_residual().abs() <= 1e-12);

        let off = MertonJumpDiffusion::with_sigma(2.0, 0.0, 1.0, 0.9).unwrap();
        assert!(!off.is_calibrated());

        let exact =
            MertonJumpDiffusion::with_sigma(2.0, 0.0, 1.0, good.sigma()).unwrap();
        assert!(exact.is_calibrated());
    }

    #[test]
    fn marginal_prob_below_bs() {
        // Symmetric case: driftless Brownian motion has median 0.
        let m = LevyModel::BlackScholes(
            BlackScholesBasket::new(vec![1.0], 0.5).unwrap(),
        );
        for &t in &[0.01, 1.0, 7.3] {
            assert_eq!(marginal_prob_below(&m, 0.0, t, 1e-12).unwrap(), 0.5);
        }
        // mu = 0.5, sigma = 1, t = 1 at level 0: Phi(-0.5).
        let m = LevyModel::BlackScholes(
            BlackScholesBasket::new(vec![1.0], 1.0).unwrap(),
        );
        let p = marginal_prob_below(&m, 0.0, 1.0, 1e-12).unwrap();
        assert!((p - 0.308_537_538_725_986_94).abs() < 1e-14);
    }

    #[test]
    fn marginal_prob_below_merton_matches_bruteforce_mixture() {
        // alpha = 0, beta = 1, sigma = 2, t = 1, level = 0:
        // sum_k e^{-1}/k! Phi(-k/2), brute-forced to k = 50.
        let mut expect = 0.0;
        let mut weight = (-1.0f64).exp();
        for k in 0..=50 {
            if k > 0 {
                weight /= k as f64;
            }
            expect += weight * normal_cdf(-(k as f64) / 2.0);
        }
        let m = LevyModel::Merton(
            MertonJumpDiffusion::with_sigma(0.5, 0.0, 1.0, 2.0).unwrap(),
        );
        let p = marginal_prob_below(&m, 0.0, 1.0, 1e-12).unwrap();
        assert!(
            (p - expect).abs() < 1e-12,
            "mixture {p} vs brute force {expect}"
        );
    }

    #[test]
    fn merton_mixture_truncation_is_certified() {
        // Doubling the truncation order must move the result by less than
        // the certified tail bound of the shorter sum.
        for &t in &[0.05, 1.0, 8.0, 40.0] {
            let tol = 1e-10;
            let k = poisson_truncation_order(t, tol).unwrap();
            let bound = poisson_tail_bound(t, k);
            assert!(bound <= tol, "bound {bound} > tol {tol} at t={t}");

            let mix = |orders: usize| {
                let mut weight = (-t).exp();
                let mut acc = 0.0;
                for j in 0..=orders {
                    if j > 0 {
                        weight *= t / j as f64;
                    }
                    acc += weight * normal_cdf(-0.3 * j as f64 + 0.1);
                }
                acc
            };
            let short = mix(k);
            let long = mix(2 * k + 8);
            assert!(
                (short - long).abs() <= bound,
                "t={t}: |{short} - {long}| > certified {bound}"
            );
        }
    }

    #[test]
    fn sample_increment_bs_moments() {
        let m = LevyModel::BlackScholes(
            BlackScholesBasket::new(vec![1.0], 0.5).unwrap(),
        );
        let s = 0.25;
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut sum, mut sum_sq, mut sum_exp) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = sample_increment(&m, s, &mut rng).unwrap()[0];
            sum += x;
            sum_sq += x * x;
            // Martingale property: E[exp(X_s - r s)] = 1.
            sum_exp += (x - 0.5 * s).exp();
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let mart = sum_exp / n as f64;
        // mu = 0 here, so the mean is 0 with std sqrt(s/n).
        assert!(mean.abs() < 4.0 * (s / n as f64).sqrt(), "mean {mean}");
        assert!((var / s - 1.0).abs() < 0.01, "variance ratio {}", var / s);
        // Std of exp(sigma sqrt(s) Z) is about sqrt(e^s - 1) ≈ 0.53 sqrt(s).
        let se = ((s.exp() - 1.0) / n as f64).sqrt();
        assert!((mart - 1.0).abs() < 4.0 * se, "martingale avg {mart}");
    }

    #[test]
    fn sample_increment_merton_martingale() {
        let model = MertonJumpDiffusion::calibrated(2.0, 0.0, 1.0).unwrap();
        let m = LevyModel::Merton(model);
        let s = 0.5;
        let n = 400_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sum_exp = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = sample_increment(&m, s, &mut rng).unwrap()[0];
            let v = (x - 2.0 * s).exp();
            sum_exp += v;
            sum_sq += v * v;
        }
        let mean = sum_exp / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - 1.0).abs() < 4.0 * se,
            "martingale avg {mean} (se {se})"
        );
    }

    #[test]
    fn sample_increment_lattice_support_and_frequencies() {
        let w = LatticeWalk::symmetric_pm1();
        let m = LevyModel::Lattice(w);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut plus = 0u32;
        for _ in 0..n {
            let x = sample_increment(&m, 1.0, &mut rng).unwrap();
            assert!(x == vec![1.0] || x == vec![-1.0], "support violation: {x:?}");
            if x[0] > 0.0 {
                plus += 1;
            }
        }
        let freq = plus as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((freq - 0.5).abs() < 4.0 * se, "frequency {freq}");
    }

    #[test]
    fn lattice_walk_validation() {
        assert!(LatticeWalk::new(vec![]).is_err());
        assert!(LatticeWalk::new(vec![(vec![1], 0.7), (vec![-1], 0.2)]).is_err());
        assert!(LatticeWalk::new(vec![(vec![1], 1.2), (vec![-1], -0.2)]).is_err());
        assert!(LatticeWalk::new(vec![(vec![1], 0.5), (vec![1, 0], 0.5)]).is_err());
    }

    #[test]
    fn marginal_prob_below_is_monotone_in_level_and_continuous_in_t() {
        let m = LevyModel::Merton(
            MertonJumpDiffusion::calibrated(2.0, 0.1, 0.7).unwrap(),
        );
        let mut prev = 0.0;
        for i in 0..60 {
            let level = -3.0 + 0.1 * i as f64;
            let p = marginal_prob_below(&m, level, 0.8, 1e-12).unwrap();
            assert!(p >= prev, "not monotone at level {level}");
            prev = p;
        }
        // Continuity in t: small steps in t move the probability little.
        let mut last = marginal_prob_below(&m, 0.0, 0.5, 1e-12).unwrap();
        for i in 1..=40 {
            let t = 0.5 + i as f64 * 1e-3;
            let p = marginal_prob_below(&m, 0.0, t, 1e-12).unwrap();
            assert!((p - last).abs() < 5e-3, "jump at t={t}");
            last = p;
        }
    }
}
