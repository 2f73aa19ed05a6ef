//! Fluctuation-identity series for first entry into a half-space.
//!
//! For a walk X with step law F sampled on the mesh s, a half-space H that
//! is closed under addition together with its complement, and q ∈ (0, 1),
//! the zero-frequency Wiener–Hopf factorisation gives
//!
//! ```text
//!   −ln(1 − ξ(q, s)) = Σ_{n≥1} qⁿ/n · P⁰{X_{ns} ∈ H},
//! ```
//!
//! where ξ(q, s) = E⁰[q^τ] is the generating function of the first entry
//! step τ into H. With q = e^{−rs} this yields the discounted entry payoff
//! and its complement
//!
//! ```text
//!   ρ(s) = 1 − ξ(e^{−rs}, s) = exp(−Σ_{n≥1} e^{−rns}/n · P⁰{X_{ns} ∈ H}),
//! ```
//!
//! the quantity this crate spends most of its time evaluating. Everything
//! here reduces to summing that series with a certified truncation error:
//! the marginals P⁰{X_{ns} ∈ H} come from closed forms (Gaussian), from
//! certified Poisson mixtures (jump diffusion), or from exact convolution
//! powers (lattice walks, in [`lattice`]).

use crate::error::Error;
use crate::levy_models::{marginal_prob_below, LevyModel};
use crate::normal_cdf;
use crate::regions::HalfSpaceRegion;
use crate::Result;

pub mod lattice;

pub use lattice::{
    lattice_n_step_masses, lattice_rq_recursion, wiener_hopf_zero_freq_check,
    LatticeMeasure, LatticeMeasureSequence, WienerHopfCheck,
};

/// Truncation policy for the series evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    /// Certified absolute truncation error on the log-series.
    pub tol: f64,
    /// Hard cap on summed terms; exceeding it is an error, not a silent
    /// truncation.
    pub n_max: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self { tol: 1e-12, n_max: 50_000_000 }
    }
}

impl SeriesConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("tolerance must be finite and > 0, got {}", self.tol),
            });
        }
        if self.n_max == 0 {
            return Err(Error::InvalidParameter {
                name: "n_max",
                reason: "term cap must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// A certified series evaluation: the value, how many terms were summed,
/// and a rigorous bound on everything left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub n_terms: usize,
    pub tail_bound: f64,
}

/// Compensated (Kahan) accumulator. The log-series can run to ~10⁶ terms
/// of similar magnitude; naive summation would lose more than the
/// truncation tolerance we certify.
#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Number of terms after which the crude tail Σ_{n>N} qⁿ/n ≤ tol is
/// guaranteed, i.e. the smallest N with q^{N+1}/((N+1)(1−q)) ≤ tol implied
/// by q^{N+1}/(1−q) ≤ tol.
pub fn truncation_terms(q: f64, tol: f64) -> usize {
    // Smallest N with N + 1 ≥ ln(tol(1−q))/ln(q).
    let n = ((tol * (1.0 - q)).ln() / q.ln() - 1.0).ceil();
    if n.is_finite() && n >= 1.0 {
        n as usize
    } else {
        1
    }
}

/// Rigorous bound on the omitted tail Σ_{n>N} qⁿ/n · pₙ for pₙ ≤ 1:
/// q^{N+1}/((N+1)(1−q)).
pub fn series_tail_bound(q: f64, n_terms: usize) -> f64 {
    let np1 = (n_terms + 1) as f64;
    (np1 * q.ln()).exp() / (np1 * (1.0 - q))
}

fn validate_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: format!("discount factor must lie in (0, 1), got {q}"),
        });
    }
    Ok(())
}

fn validate_mesh(s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: format!("mesh must be finite and > 0, got {s}"),
        });
    }
    Ok(s)
}

/// The series identities need H and its complement closed under addition
/// with 0 ∉ H, which for half-spaces means the boundary passes through the
/// functional origin.
fn validate_series_region(region: &HalfSpaceRegion, dim: usize) -> Result<()> {
    if region.dim() != dim {
        return Err(Error::InvalidRegion(format!(
            "region dimension {} does not match model dimension {dim}",
            region.dim()
        )));
    }
    if !region.is_through_origin() {
        return Err(Error::InvalidRegion(
            "series identities need a half-space through the origin: \
             t(alpha)·gamma must be 0"
                .into(),
        ));
    }
    Ok(())
}

/// Sums Σ qⁿ/n · pₙ with certified truncation.
///
/// `prob` supplies pₙ = P⁰{X_{ns} ∈ H} ∈ [0, 1]. When `nonincreasing` is
/// promised by the caller the loop may stop early with the sharper tail
/// pₙ · q^{n+1}/((n+1)(1−q)); otherwise it runs until the crude tail with
/// pₙ ≤ 1 certifies. `extra_tail` accounts for per-term evaluation error
/// (the jump-diffusion mixtures are themselves truncated) and is added to
/// the reported bound.
fn log_sum_with<P>(
    q: f64,
    cfg: &SeriesConfig,
    mut prob: P,
    nonincreasing: bool,
    extra_tail: f64,
) -> Result<SeriesValue>
where
    P: FnMut(usize) -> Result<f64>,
{
    validate_q(q)?;
    cfg.validate()?;
    let log_q = q.ln();
    let mut acc = Kahan::default();
    let mut n = 0usize;
    loop {
        n += 1;
        if n > cfg.n_max {
            return Err(Error::TruncationCap {
                required: truncation_terms(q, cfg.tol),
                n_max: cfg.n_max,
                tol: cfg.tol,
            });
        }
        let p = prob(n)?;
        debug_assert!(
            (-1e-12..=1.0 + 1e-12).contains(&p),
            "probability out of range at n={n}: {p}"
        );
        // qⁿ via exp(n ln q): no cumulative rounding drift over 10⁶ terms,
        // unlike repeated multiplication.
        let q_n = ((n as f64) * log_q).exp();
        acc.add(q_n / (n as f64) * p);

        let crude = series_tail_bound(q, n);
        if crude <= cfg.tol {
            return Ok(SeriesValue {
                value: acc.value(),
                n_terms: n,
                tail_bound: crude + extra_tail,
            });
        }
        if nonincreasing {
            let sharp = p * crude;
            if sharp <= cfg.tol {
                return Ok(SeriesValue {
                    value: acc.value(),
                    n_terms: n,
                    tail_bound: sharp + extra_tail,
                });
            }
        }
    }
}

/// Reduces a basket against the half-space functional α to an effective
/// one-dimensional Gaussian: returns (m, δ) with m = ᵗαμ and
/// δ = sqrt(Σᵢ (αᵢσᵢ)²), so that ᵗαX_t ~ N(mt, δ²t).
pub fn reduce_dim(alpha: &[f64], mu: &[f64], sigma: &[f64]) -> Result<(f64, f64)> {
    if alpha.len() != mu.len() || alpha.len() != sigma.len() {
        return Err(Error::ShapeMismatch(format!(
            "alpha, mu, sigma must share a dimension; got {}, {}, {}",
            alpha.len(),
            mu.len(),
            sigma.len()
        )));
    }
    let m = alpha.iter().zip(mu).map(|(a, u)| a * u).sum();
    let delta_sq: f64 = alpha.iter().zip(sigma).map(|(a, s)| (a * s).powi(2)).sum();
    if !(delta_sq > 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: "the functional must see nonzero volatility: \
                     sum (alpha_i sigma_i)^2 is 0"
                .into(),
        });
    }
    Ok((m, delta_sq.sqrt()))
}

/// P⁰{ᵗαX_{ns} < 0} for the reduced Gaussian: Φ(−m√(ns)/δ).
fn gaussian_halfspace_prob(m: f64, delta: f64, ns: f64) -> f64 {
    normal_cdf(-m * ns.sqrt() / delta)
}

/// The log-series Σ_{n≥1} qⁿ/n · P⁰{X_{ns} ∈ H} with certified truncation.
///
/// For lattice walks the mesh `s` is inert (one lattice step per mesh
/// point); the marginals are exact convolution powers.
pub fn log_sum(
    model: &LevyModel,
    region: &HalfSpaceRegion,
    s: f64,
    q: f64,
    cfg: &SeriesConfig,
) -> Result<SeriesValue> {
    validate_series_region(region, model.dim())?;
    match model {
        LevyModel::BlackScholes(bs) => {
            let s = validate_mesh(s)?;
            let (m, delta) = reduce_dim(region.alpha(), bs.mu(), bs.sigma())?;
            log_sum_with(
                q,
                cfg,
                |n| Ok(gaussian_halfspace_prob(m, delta, n as f64 * s)),
                m >= 0.0,
                0.0,
            )
        }
        LevyModel::Merton(_) => {
            let s = validate_mesh(s)?;
            let a = region.alpha()[0];
            // Mixture truncation error per term, folded into the certified
            // tail: Σ qⁿ/n · ε ≤ ε · (−ln(1−q)).
            let mix_tol = cfg.tol * 1e-2;
            let mix_budget = mix_tol * (-(1.0 - q).ln());
            log_sum_with(
                q,
                cfg,
                |n| {
                    let p = marginal_prob_below(model, 0.0, n as f64 * s, mix_tol)?;
                    Ok(if a > 0.0 { p } else { 1.0 - p })
                },
                false,
                mix_budget,
            )
        }
        LevyModel::Lattice(walk) => lattice::lattice_log_sum(walk, region, q, cfg),
    }
}

/// ξ(q, s) = E⁰[q^τ] = 1 − exp(−log_sum), the discounted first-entry
/// transform. Lies in [0, 1) for q ∈ (0, 1).
pub fn xi(
    model: &LevyModel,
    region: &HalfSpaceRegion,
    s: f64,
    q: f64,
    cfg: &SeriesConfig,
) -> Result<SeriesValue> {
    let ls = log_sum(model, region, s, q, cfg)?;
    Ok(SeriesValue {
        value: -(-ls.value).exp_m1(),
        n_terms: ls.n_terms,
        tail_bound: ls.tail_bound,
    })
}

/// ρ(s) = exp(−Σ e^{−rns}/n · P⁰{X_{ns} ∈ H}), evaluated at q = e^{−rs}
/// with r taken from the model.
///
/// The interpretation of ρ(s) as the short-mesh correction factor relies
/// on closed-form two-sided bounds that force ρ(s) → 0 as s ↓ 0; those
/// bounds exist for Gaussian functionals only when ᵗαμ ≥ 0 or
/// r > (ᵗαμ)²/(2δ²), so Gaussian models outside that regime are rejected
/// rather than silently evaluated (see [`rho_bounds`]).
pub fn rho(
    model: &LevyModel,
    region: &HalfSpaceRegion,
    s: f64,
    cfg: &SeriesConfig,
) -> Result<SeriesValue> {
    let r = model.rate().ok_or(Error::UnsupportedModel {
        op: "rho",
        model: "lattice",
    })?;
    if let LevyModel::BlackScholes(bs) = model {
        validate_series_region(region, model.dim())?;
        let (m, delta) = reduce_dim(region.alpha(), bs.mu(), bs.sigma())?;
        check_gaussian_regime(r, m, delta)?;
    }
    let s = validate_mesh(s)?;
    let q = (-r * s).exp();
    let ls = log_sum(model, region, s, q, cfg)?;
    Ok(SeriesValue {
        value: (-ls.value).exp(),
        n_terms: ls.n_terms,
        tail_bound: ls.tail_bound,
    })
}

/// ρ(s) for the reduced one-dimensional Gaussian functional (m, δ):
/// the same series as [`rho`] after [`reduce_dim`].
pub fn rho_reduced(
    m: f64,
    delta: f64,
    r: f64,
    s: f64,
    cfg: &SeriesConfig,
) -> Result<SeriesValue> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("discount rate must be > 0, got {r}"),
        });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("functional volatility must be > 0, got {delta}"),
        });
    }
    check_gaussian_regime(r, m, delta)?;
    let s = validate_mesh(s)?;
    let q = (-r * s).exp();
    let ls = log_sum_with(
        q,
        cfg,
        |n| Ok(gaussian_halfspace_prob(m, delta, n as f64 * s)),
        m >= 0.0,
        0.0,
    )?;
    Ok(SeriesValue {
        value: (-ls.value).exp(),
        n_terms: ls.n_terms,
        tail_bound: ls.tail_bound,
    })
}

fn check_gaussian_regime(r: f64, m: f64, delta: f64) -> Result<()> {
    if m < 0.0 {
        let a = m * m / (2.0 * delta * delta);
        if r <= a {
            return Err(Error::InvalidRegime(format!(
                "need r > (t(alpha)mu)^2/(2 delta^2) when t(alpha)mu < 0; \
                 r = {r}, threshold = {a}"
            )));
        }
    }
    Ok(())
}

/// Closed-form two-sided bounds on ρ(s) for the reduced Gaussian
/// functional (m, δ), with a = m²/(2δ²):
///
/// * m ≥ 0:  (1 − e^{−s(r+a)})^{1/2} ≤ ρ(s) ≤ (1 − e^{−s(r+2a)})^{1/(2√2)};
/// * m < 0:  (1 − e^{−s(r−a)})^{1/√2} ≤ ρ(s) ≤ (1 − e^{−s(r+a)})^{1/2},
///   requiring r > a.
///
/// At m = 0 the lower bound is ρ(s) exactly. The bounds pin the small-s
/// scaling exponent inside the brackets reported by
/// [`crate::scaling_fit::regime_bracket`].
pub fn rho_bounds(r: f64, m: f64, delta: f64, s: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("discount rate must be > 0, got {r}"),
        });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("functional volatility must be > 0, got {delta}"),
        });
    }
    let s = validate_mesh(s)?;
    let a = m * m / (2.0 * delta * delta);
    let base = |rate: f64| -> f64 { -(-s * rate).exp_m1() };
    if m >= 0.0 {
        let lower = base(r + a).sqrt();
        let upper = base(r + 2.0 * a).powf(0.5 / std::f64::consts::SQRT_2);
        Ok((lower, upper))
    } else {
        check_gaussian_regime(r, m, delta)?;
        let lower = base(r - a).powf(std::f64::consts::FRAC_1_SQRT_2);
        let upper = base(r + a).sqrt();
        Ok((lower, upper))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_models::{
        merton_calibrate_sigma, BlackScholesBasket, LatticeWalk, MertonJumpDiffusion,
    };
    use proptest::prelude::*;

    fn bs_model(sigma: Vec<f64>, r: f64) -> LevyModel {
        LevyModel::BlackScholes(BlackScholesBasket::new(sigma, r).unwrap())
    }

    /// Driftless closed form: ρ(s) = (1 − e^{−rs})^{1/2} and
    /// ξ = 1 − ρ through the complement identity.
    #[test]
    fn driftless_gaussian_matches_closed_form() {
        // mu = r − σ²/2 = 0 needs r = σ²/2.
        let model = bs_model(vec![2.0f64.sqrt()], 1.0);
        let region = HalfSpaceRegion::left_halfline();
        let cfg = SeriesConfig::default();
        for &s in &[0.5, 0.05, 0.004] {
            let rho_v = rho(&model, &region, s, &cfg).unwrap();
            // r = 1 here, so q = e^{−s}.
            let expect = (-(-s).exp_m1()).sqrt();
            assert!(
                (rho_v.value - expect).abs() < 1e-11,
                "s={s}: rho {} vs closed form {expect}",
                rho_v.value
            );
            let xi_v = xi(&model, &region, s, (-s).exp(), &cfg).unwrap();
            assert!(
                (xi_v.value + rho_v.value - 1.0).abs() < 1e-13,
                "complement identity broken at s={s}"
            );
            assert!(rho_v.tail_bound <= cfg.tol * 1.01);
        }
    }

    #[test]
    fn long_series_stays_accurate() {
        // Small r·s forces ~10⁵ terms; compensated summation keeps the
        // result within 1e−11 of the closed form.
        let model = bs_model(vec![2.0f64.sqrt()], 1.0);
        let region = HalfSpaceRegion::left_halfline();
        let cfg = SeriesConfig::default();
        let s = 2.5e-4;
        let got = rho(&model, &region, s, &cfg).unwrap();
        let expect = (-(-s).exp_m1()).sqrt();
        assert!(got.n_terms > 80_000, "expected a long series, got {}", got.n_terms);
        assert!(
            (got.value - expect).abs() < 1e-11,
            "rho {} vs {expect} ({} terms)",
            got.value,
            got.n_terms
        );
    }

    #[test]
    fn reduce_dim_examples() {
        let (m, d) = reduce_dim(&[1.0, 1.0], &[0.5, 0.5], &[1.0, 1.0]).unwrap();
        assert_eq!(m, 1.0);
        assert!((d - 2.0f64.sqrt()).abs() < 1e-15);

        let (m, d) =
            reduce_dim(&[1.0, 2.0, -1.0], &[0.12, 0.22, -0.305], &[0.6, 0.4, 1.1])
                .unwrap();
        assert!((m - (0.12 + 0.44 + 0.305)).abs() < 1e-15);
        assert!((d - (0.36f64 + 0.64 + 1.21).sqrt()).abs() < 1e-15);

        assert!(reduce_dim(&[1.0], &[0.0, 0.0], &[1.0]).is_err());
        assert!(reduce_dim(&[0.0, 0.0], &[0.1, 0.1], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn basket_reduction_is_exact() {
        // A 3-d basket and its reduced 1-d functional must give the same
        // series to within the truncation tolerance.
        let sigma = vec![0.6, 0.4, 1.1];
        let r = 0.3;
        let model = bs_model(sigma.clone(), r);
        let alpha = vec![1.0, 2.0, -1.0];
        let region =
            HalfSpaceRegion::new(vec![0.0, 0.0, 0.0], alpha.clone(), true).unwrap();
        let cfg = SeriesConfig::default();
        let mu: Vec<f64> = sigma.iter().map(|s| r - 0.5 * s * s).collect();
        let (m, delta) = reduce_dim(&alpha, &mu, &sigma).unwrap();
        for &s in &[0.02, 0.3] {
            let full = rho(&model, &region, s, &cfg).unwrap();
            let reduced = rho_reduced(m, delta, r, s, &cfg).unwrap();
            assert!(
                (full.value - reduced.value).abs() < 1e-13,
                "s={s}: {} vs {}",
                full.value,
                reduced.value
            );
        }
    }

    #[test]
    fn gamma_translation_along_boundary_is_inert() {
        // Moving the anchor within the boundary hyperplane leaves the
        // series unchanged — the set H itself does not move.
        let model = bs_model(vec![0.5, 0.7], 0.4);
        let cfg = SeriesConfig::default();
        let r1 = HalfSpaceRegion::new(vec![0.0, 0.0], vec![1.0, -1.0], true).unwrap();
        let r2 = HalfSpaceRegion::new(vec![3.0, 3.0], vec![1.0, -1.0], true).unwrap();
        let a = rho(&model, &r1, 0.1, &cfg).unwrap();
        let b = rho(&model, &r2, 0.1, &cfg).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn off_origin_region_is_rejected() {
        let model = bs_model(vec![1.0], 0.5);
        let region = HalfSpaceRegion::new(vec![1.0], vec![1.0], true).unwrap();
        match rho(&model, &region, 0.1, &SeriesConfig::default()) {
            Err(Error::InvalidRegion(msg)) => {
                assert!(msg.contains("origin"), "unhelpful message: {msg}")
            }
            other => panic!("expected InvalidRegion, got {other:?}"),
        }
    }

    #[test]
    fn truncation_cap_is_an_error() {
        let model = bs_model(vec![1.0], 0.5);
        let region = HalfSpaceRegion::left_halfline();
        let cfg = SeriesConfig { tol: 1e-12, n_max: 10 };
        match rho(&model, &region, 0.1, &cfg) {
            Err(Error::TruncationCap { required, n_max, .. }) => {
                assert_eq!(n_max, 10);
                assert!(required > 10);
            }
            other => panic!("expected TruncationCap, got {other:?}"),
        }
    }

    #[test]
    fn invalid_regime_is_rejected() {
        // m = r − σ²/2 = −0.45, a = m²/2 ≈ 0.101 > r = 0.05.
        let model = bs_model(vec![1.0], 0.05);
        let region = HalfSpaceRegion::left_halfline();
        match rho(&model, &region, 0.1, &SeriesConfig::default()) {
            Err(Error::InvalidRegime(_)) => {}
            other => panic!("expected InvalidRegime, got {other:?}"),
        }
        // rho_bounds enforces the same threshold.
        assert!(rho_bounds(0.05, -0.45, 1.0, 0.1).is_err());
        assert!(rho_bounds(0.12, -0.45, 1.0, 0.1).is_ok());
    }

    #[test]
    fn rho_bounds_bracket_and_driftless_exactness() {
        let cfg = SeriesConfig::default();
        // m = 0: the lower bound IS rho.
        let (lo, hi) = rho_bounds(1.0, 0.0, 2.0f64.sqrt(), 0.07).unwrap();
        let rho_v = rho_reduced(0.0, 2.0f64.sqrt(), 1.0, 0.07, &cfg).unwrap().value;
        // The series itself carries its certified truncation error.
        assert!((lo - rho_v).abs() < 2.0 * cfg.tol);
        assert!(hi >= rho_v);

        // Drifted cases bracket the series value strictly.
        for &(r, m, delta, s) in &[
            (0.5, 0.45, 0.316, 0.05),
            (0.5, 0.45, 0.316, 0.4),
            (0.5, -0.2, 1.18, 0.05),
            (2.0, 1.3, 0.7, 0.01),
        ] {
            let (lo, hi) = rho_bounds(r, m, delta, s).unwrap();
            let v = rho_reduced(m, delta, r, s, &cfg).unwrap().value;
            assert!(
                lo <= v + 1e-12 && v <= hi + 1e-12,
                "bracket [{lo}, {hi}] misses rho {v} at (r={r}, m={m})"
            );
            assert!(lo < hi);
        }
    }

    #[test]
    fn merton_series_against_direct_summation() {
        // Independent oracle: sum the series directly with brute-force
        // Poisson mixtures (fixed 80 orders) and crude truncation.
        let model = LevyModel::Merton(
            MertonJumpDiffusion::calibrated(2.0, 0.1, 0.8).unwrap(),
        );
        let region = HalfSpaceRegion::left_halfline();
        let s: f64 = 0.05;
        let q = (-2.0 * s).exp();
        let cfg = SeriesConfig::default();
        let got = xi(&model, &region, s, q, &cfg).unwrap();

        let sigma = merton_calibrate_sigma(2.0, 0.1, 0.8).unwrap();
        let n_terms = truncation_terms(q, 1e-13);
        let mut ls: f64 = 0.0;
        for n in 1..=n_terms {
            let t = n as f64 * s;
            let mut p = 0.0;
            let mut w = (-t).exp();
            for k in 0..=80 {
                if k > 0 {
                    w *= t / k as f64;
                }
                p += w * normal_cdf((-0.1 * t - 0.8 * k as f64) / (sigma * t.sqrt()));
            }
            ls += q.powi(n as i32) / n as f64 * p;
        }
        let expect = -(-ls).exp_m1();
        assert!(
            (got.value - expect).abs() < 1e-10,
            "xi {} vs direct {expect}",
            got.value
        );
    }

    #[test]
    fn truncation_term_count_certifies() {
        for &(q, tol) in &[(0.5, 1e-12), (0.99, 1e-10), (0.999999, 1e-8)] {
            let n = truncation_terms(q, tol);
            assert!(series_tail_bound(q, n) <= tol, "q={q}");
            // One fewer term must not certify at the crude (p ≤ 1) level
            // via the N-formula bound q^{N+1}/(1−q).
            if n > 1 {
                let crude_prev = ((n as f64) * q.ln()).exp() / (1.0 - q);
                assert!(crude_prev > tol, "q={q}: formula not minimal");
            }
        }
    }

    proptest! {
        /// ξ ∈ (0, 1) and ρ = 1 − ξ across random valid Gaussian setups.
        #[test]
        fn xi_in_unit_interval_and_complement_identity(
            r in 0.05f64..1.5,
            sigma in 0.3f64..2.0,
            s in 0.01f64..0.5,
        ) {
            let m = r - 0.5 * sigma * sigma;
            // Stay inside the regime covered by the bounds.
            prop_assume!(m >= 0.0 || r > m * m / (2.0 * sigma * sigma));
            let model = bs_model(vec![sigma], r);
            let region = HalfSpaceRegion::left_halfline();
            let cfg = SeriesConfig::default();
            let q = (-r * s).exp();
            let xi_v = xi(&model, &region, s, q, &cfg).unwrap().value;
            let rho_v = rho(&model, &region, s, &cfg).unwrap().value;
            prop_assert!(xi_v > 0.0 && xi_v < 1.0);
            prop_assert!((xi_v + rho_v - 1.0).abs() < 1e-14);
        }

        /// The log-series is increasing in q (more weight on every term).
        #[test]
        fn log_sum_monotone_in_q(
            q1 in 0.05f64..0.9,
            bump in 0.01f64..0.09,
        ) {
            let model = bs_model(vec![1.0], 0.5);
            let region = HalfSpaceRegion::left_halfline();
            let cfg = SeriesConfig::default();
            let a = log_sum(&model, &region, 0.1, q1, &cfg).unwrap().value;
            let b = log_sum(&model, &region, 0.1, q1 + bump, &cfg).unwrap().value;
            prop_assert!(b > a);
        }
    }

    #[test]
    fn lattice_dispatch_reaches_lattice_path() {
        // xi() on a lattice model must agree with the dedicated lattice
        // transform; detailed lattice tests live in the submodule.
        let model = LevyModel::Lattice(LatticeWalk::symmetric_pm1());
        let region = HalfSpaceRegion::left_halfline();
        let cfg = SeriesConfig::default();
        let q = 0.5;
        let via_enum = xi(&model, &region, 1.0, q, &cfg).unwrap();
        // Catalan generating function of the first passage time.
        let expect = (1.0 - (1.0 - q * q).sqrt()) / q;
        assert!(
            (via_enum.value - expect).abs() < 1e-12,
            "{} vs {expect}",
            via_enum.value
        );
    }

    #[test]
    fn rho_rejects_lattice_models() {
        let model = LevyModel::Lattice(LatticeWalk::symmetric_pm1());
        let region = HalfSpaceRegion::left_halfline();
        match rho(&model, &region, 1.0, &SeriesConfig::default()) {
            Err(Error::UnsupportedModel { op, model }) => {
                assert_eq!(op, "rho");
                assert_eq!(model, "lattice");
            }
            other => panic!("expected UnsupportedModel, got {other:?}"),
        }
    }
}
