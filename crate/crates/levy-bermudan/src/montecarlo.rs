//! Monte Carlo estimators for first-entry prices on a fixed mesh.
//!
//! All estimators share one reproducibility contract: path i is driven by
//! `ChaCha8Rng::seed_from_u64(seed)` on stream i (one stream per
//! antithetic pair), and partial sums are reduced in a fixed chunk order.
//! Results are therefore bit-identical across runs *and* across thread
//! counts — parallelism only changes who computes each chunk, never what
//! is summed in which order.
//!
//! Truncation is explicit: paths run to the horizon N = ⌈ln(1/tol)/(rs)⌉,
//! beyond which the missed mass is worth at most sup g · e^{−rsN}; that
//! bound is reported, not hidden.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::Error;
use crate::levy_models::LevyModel;
use crate::regions::{HalfSpaceRegion, Payoff};
use crate::Result;

/// Tuning knobs for the estimators. The defaults match the library-wide
/// truncation policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    /// Horizon truncation tolerance: paths are cut once the remaining
    /// discounted mass is below this fraction of sup g.
    pub horizon_tol: f64,
    /// Antithetic pairing of the Gaussian component (jump counts are
    /// shared within a pair). Costs nothing, halves variance for the
    /// smooth part.
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { horizon_tol: 1e-10, antithetic: true }
    }
}

/// A Monte Carlo price with its full accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceEstimate {
    pub value: f64,
    /// Standard error over pair means (0 for degenerate immediate
    /// exercise).
    pub stderr: f64,
    /// Paths actually simulated (0 when the start point pays immediately).
    pub n_paths: u64,
    /// Step horizon after which paths were truncated.
    pub horizon_steps: u64,
    /// Rigorous bound on the truncation bias: sup g · e^{−r·s·horizon}.
    pub truncation_bias_bound: f64,
    pub seed: u64,
    pub method: &'static str,
}

/// Pairs per reduction chunk. Fixed so the floating-point reduction order
/// does not depend on the rayon thread count.
const PAIRS_PER_CHUNK: u64 = 1024;

fn validate_common(s: f64, n_paths: u64, cfg: &McConfig) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: format!("mesh must be finite and > 0, got {s}"),
        });
    }
    if n_paths < 2 || n_paths % 2 != 0 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            reason: format!(
                "paths are simulated in pairs; need an even count >= 2, got {n_paths}"
            ),
        });
    }
    if !(cfg.horizon_tol > 0.0 && cfg.horizon_tol < 1.0) {
        return Err(Error::InvalidParameter {
            name: "horizon_tol",
            reason: format!("must lie in (0, 1), got {}", cfg.horizon_tol),
        });
    }
    Ok(())
}

fn require_rate(model: &LevyModel, op: &'static str) -> Result<f64> {
    model.rate().ok_or(Error::UnsupportedModel { op, model: "lattice" })
}

/// N = ⌈ln(1/tol)/(r·s)⌉: beyond N steps the discount alone caps the
/// contribution at tol · sup g.
fn horizon_steps(r: f64, s: f64, tol: f64) -> u64 {
    ((1.0 / tol).ln() / (r * s)).ceil() as u64
}

/// One mesh step of the (continuous) increment law, advancing an
/// antithetic pair in lockstep with shared draws.
enum Stepper {
    Gaussian { mu_s: Vec<f64>, sig_sqrt_s: Vec<f64> },
    Merton { drift_s: f64, sig_sqrt_s: f64, beta: f64, poisson: Poisson<f64> },
}

impl Stepper {
    fn build(model: &LevyModel, s: f64, op: &'static str) -> Result<Self> {
        match model {
            LevyModel::BlackScholes(m) => Ok(Stepper::Gaussian {
                mu_s: m.mu().iter().map(|u| u * s).collect(),
                sig_sqrt_s: m.sigma().iter().map(|v| v * s.sqrt()).collect(),
            }),
            LevyModel::Merton(m) => Ok(Stepper::Merton {
                drift_s: m.alpha() * s,
                sig_sqrt_s: m.sigma() * s.sqrt(),
                beta: m.beta(),
                poisson: Poisson::new(s * m.jump_rate())
                    .expect("s > 0 is validated"),
            }),
            LevyModel::Lattice(_) => {
                Err(Error::UnsupportedModel { op, model: "lattice" })
            }
        }
    }

    /// Advances both paths of a pair. With antithetic pairing path B sees
    /// the negated Gaussian draws (and the same jump counts); otherwise it
    /// consumes fresh draws from the same stream.
    fn advance(
        &self,
        rng: &mut ChaCha8Rng,
        xa: &mut [f64],
        xb: &mut [f64],
        antithetic: bool,
    ) {
        match self {
            Stepper::Gaussian { mu_s, sig_sqrt_s } => {
                for i in 0..xa.len() {
                    let z: f64 = StandardNormal.sample(rng);
                    xa[i] += mu_s[i] + sig_sqrt_s[i] * z;
                    let zb: f64 = if antithetic {
                        -z
                    } else {
                        StandardNormal.sample(rng)
                    };
                    xb[i] += mu_s[i] + sig_sqrt_s[i] * zb;
                }
            }
            Stepper::Merton { drift_s, sig_sqrt_s, beta, poisson } => {
                let jumps = poisson.sample(rng);
                let z: f64 = StandardNormal.sample(rng);
                xa[0] += drift_s + sig_sqrt_s * z + beta * jumps;
                let (zb, jb) = if antithetic {
                    (-z, jumps)
                } else {
                    (StandardNormal.sample(rng), poisson.sample(rng))
                };
                xb[0] += drift_s + sig_sqrt_s * zb + beta * jb;
            }
        }
    }
}

/// Chunk-ordered parallel mean/stderr over pair values. `pair_value(i)`
/// must depend only on i (it seeds its own RNG stream), which is what
/// makes the estimate independent of the thread count.
fn run_pairs<F>(n_pairs: u64, pair_value: F) -> (f64, f64)
where
    F: Fn(u64) -> f64 + Sync,
{
    let n_chunks = n_pairs.div_ceil(PAIRS_PER_CHUNK);
    let partials: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * PAIRS_PER_CHUNK;
            let hi = ((chunk + 1) * PAIRS_PER_CHUNK).min(n_pairs);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for pair in lo..hi {
                let v = pair_value(pair);
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();

    // Sequential compensated fold in chunk order: identical regardless of
    // how the chunks were scheduled.
    let (mut sum, mut c1) = (0.0, 0.0);
    let (mut sum_sq, mut c2) = (0.0, 0.0);
    for (a, b) in partials {
        let y = a - c1;
        let t = sum + y;
        c1 = (t - sum) - y;
        sum = t;
        let y = b - c2;
        let t = sum_sq + y;
        c2 = (t - sum_sq) - y;
        sum_sq = t;
    }
    let n = n_pairs as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

fn pair_rng(seed: u64, pair: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair);
    rng
}

/// Simulates one antithetic pair to first entry and returns the mean of
/// the two discounted payoffs. `eval(x, n)` prices an entry at step n ≥ 1.
#[allow(clippy::too_many_arguments)]
fn entry_pair_mean<E>(
    stepper: &Stepper,
    region: &HalfSpaceRegion,
    x0: &[f64],
    horizon: u64,
    antithetic: bool,
    rng: &mut ChaCha8Rng,
    eval: &E,
) -> f64
where
    E: Fn(&[f64], u64) -> f64,
{
    let mut xa = x0.to_vec();
    let mut xb = x0.to_vec();
    let mut va: Option<f64> = None;
    let mut vb: Option<f64> = None;
    for n in 1..=horizon {
        stepper.advance(rng, &mut xa, &mut xb, antithetic);
        if va.is_none() && region.contains(&xa) {
            va = Some(eval(&xa, n));
        }
        if vb.is_none() && region.contains(&xb) {
            vb = Some(eval(&xb, n));
        }
        if va.is_some() && vb.is_some() {
            break;
        }
    }
    0.5 * (va.unwrap_or(0.0) + vb.unwrap_or(0.0))
}

/// Estimates ξ(e^{−rs}, s) = E⁰[e^{−rsτ}] by direct simulation of the
/// first entry time τ into `region`, starting on the boundary anchor γ.
/// Only entries at steps n ≥ 1 count.
pub fn estimate_xi(
    model: &LevyModel,
    region: &HalfSpaceRegion,
    s: f64,
    n_paths: u64,
    seed: u64,
    cfg: &McConfig,
) -> Result<PriceEstimate> {
    validate_common(s, n_paths, cfg)?;
    let r = require_rate(model, "estimate_xi")?;
    if region.dim() != model.dim() {
        return Err(Error::InvalidRegion(format!(
            "region dimension {} does not match model dimension {}",
            region.dim(),
            model.dim()
        )));
    }
    let stepper = Stepper::build(model, s, "estimate_xi")?;
    let horizon = horizon_steps(r, s, cfg.horizon_tol);
    let x0 = region.gamma().to_vec();
    let antithetic = cfg.antithetic;
    let rs = r * s;

    let (value, stderr) = run_pairs(n_paths / 2, |pair| {
        let mut rng = pair_rng(seed, pair);
        entry_pair_mean(
            &stepper,
            region,
            &x0,
            horizon,
            antithetic,
            &mut rng,
            &|_x, n| (-rs * n as f64).exp(),
        )
    });

    Ok(PriceEstimate {
        value,
        stderr,
        n_paths,
        horizon_steps: horizon,
        truncation_bias_bound: (-rs * horizon as f64).exp(),
        seed,
        method: "mc",
    })
}

/// Prices V(x₀) = E^{x₀}[e^{−rsτ} g(X_{sτ})] for first entry into the
/// exercise region G. A start point already in G pays g(x₀) with no
/// simulation at all.
#[allow(clippy::too_many_arguments)]
pub fn estimate_price(
    model: &LevyModel,
    region: &HalfSpaceRegion,
    payoff: &Payoff,
    s: f64,
    x0: &[f64],
    n_paths: u64,
    seed: u64,
    cfg: &McConfig,
) -> Result<PriceEstimate> {
    validate_common(s, n_paths, cfg)?;
    let r = require_rate(model, "estimate_price")?;
    if x0.len() != model.dim() || region.dim() != model.dim() {
        return Err(Error::ShapeMismatch(format!(
            "x0 has dimension {}, region {}, model {}",
            x0.len(),
            region.dim(),
            model.dim()
        )));
    }
    if !payoff.bound().is_finite() {
        return Err(Error::InvalidParameter {
            name: "payoff",
            reason: "payoff must be bounded".into(),
        });
    }
    if region.contains(x0) {
        return Ok(PriceEstimate {
            value: payoff.eval(x0),
            stderr: 0.0,
            n_paths: 0,
            horizon_steps: 0,
            truncation_bias_bound: 0.0,
            seed,
            method: "mc",
        });
    }
    let stepper = Stepper::build(model, s, "estimate_price")?;
    let horizon = horizon_steps(r, s, cfg.horizon_tol);
    let antithetic = cfg.antithetic;
    let rs = r * s;

    let (value, stderr) = run_pairs(n_paths / 2, |pair| {
        let mut rng = pair_rng(seed, pair);
        entry_pair_mean(
            &stepper,
            region,
            x0,
            horizon,
            antithetic,
            &mut rng,
            &|x, n| (-rs * n as f64).exp() * payoff.eval(x),
        )
    });

    Ok(PriceEstimate {
        value,
        stderr,
        n_paths,
        horizon_steps: horizon,
        truncation_bias_bound: payoff.bound() * (-rs * horizon as f64).exp(),
        seed,
        method: "mc",
    })
}

/// Couples the mesh s to its refinement t = s/m on identical paths and
/// estimates E[e^{−rτ_t}] − E[e^{−rτ_s}] = ρ(s) − ρ(t) + o(1): the coarse
/// walk is the every-m-th subsequence of the fine walk, so the coarse
/// entry time can never precede the fine one — each sample is ≥ 0
/// pathwise, which is what kills the variance of the difference.
pub fn estimate_rho_coupled(
    model: &LevyModel,
    region: &HalfSpaceRegion,
    s: f64,
    refinement: u32,
    n_paths: u64,
    seed: u64,
    cfg: &McConfig,
) -> Result<PriceEstimate> {
    validate_common(s, n_paths, cfg)?;
    if refinement < 2 {
        return Err(Error::InvalidParameter {
            name: "refinement",
            reason: format!("need m >= 2 fine steps per coarse step, got {refinement}"),
        });
    }
    let r = require_rate(model, "estimate_rho_coupled")?;
    if region.dim() != model.dim() {
        return Err(Error::InvalidRegion(format!(
            "region dimension {} does not match model dimension {}",
            region.dim(),
            model.dim()
        )));
    }
    let m = refinement as u64;
    let t = s / m as f64;
    let stepper = Stepper::build(model, t, "estimate_rho_coupled")?;
    let coarse_horizon = horizon_steps(r, s, cfg.horizon_tol);
    let fine_horizon = coarse_horizon * m;
    let x0 = region.gamma().to_vec();
    let antithetic = cfg.antithetic;
    let rt = r * t;
    let rs = r * s;

    let (value, stderr) = run_pairs(n_paths / 2, |pair| {
        let mut rng = pair_rng(seed, pair);
        let mut xa = x0.clone();
        let mut xb = x0.clone();
        // (fine entry step, coarse entry step) per path, when seen.
        let mut fa: Option<u64> = None;
        let mut fb: Option<u64> = None;
        let mut ca: Option<u64> = None;
        let mut cb: Option<u64> = None;
        for n in 1..=fine_horizon {
            stepper.advance(&mut rng, &mut xa, &mut xb, antithetic);
            let coarse_k = if n % m == 0 { Some(n / m) } else { None };
            if fa.is_none() && region.contains(&xa) {
                fa = Some(n);
            }
            if fb.is_none() && region.contains(&xb) {
                fb = Some(n);
            }
            if let Some(k) = coarse_k {
                if ca.is_none() && region.contains(&xa) {
                    ca = Some(k);
                    debug_assert!(
                        fa.is_some_and(|nf| nf <= k * m),
                        "coarse entry without prior fine entry"
                    );
                }
                if cb.is_none() && region.contains(&xb) {
                    cb = Some(k);
                    debug_assert!(fb.is_some_and(|nf| nf <= k * m));
                }
            }
            if ca.is_some() && cb.is_some() {
                break;
            }
        }
        let path = |f: Option<u64>, c: Option<u64>| -> f64 {
            let fine = f.map_or(0.0, |n| (-rt * n as f64).exp());
            let coarse = c.map_or(0.0, |k| (-rs * k as f64).exp());
            debug_assert!(fine - coarse >= 0.0, "coupling violated");
            fine - coarse
        };
        0.5 * (path(fa, ca) + path(fb, cb))
    });

    Ok(PriceEstimate {
        value,
        stderr,
        n_paths,
        horizon_steps: fine_horizon,
        // Both terms are truncated at the same physical time s·coarse_horizon.
        truncation_bias_bound: 2.0 * (-rs * coarse_horizon as f64).exp(),
        seed,
        method: "mc-coupled",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_models::{BlackScholesBasket, LatticeWalk};
    use crate::wh_series::{self, SeriesConfig};

    fn bs(sigma: f64, r: f64) -> LevyModel {
        LevyModel::BlackScholes(BlackScholesBasket::new(vec![sigma], r).unwrap())
    }

    fn left() -> HalfSpaceRegion {
        HalfSpaceRegion::left_halfline()
    }

    #[test]
    fn xi_estimate_matches_series_driftless() {
        // r = 0.5, sigma = 1 gives mu = 0 and the closed form
        // xi = 1 − (1 − e^{−rs})^{1/2}.
        let model = bs(1.0, 0.5);
        let s = 0.1;
        let est =
            estimate_xi(&model, &left(), s, 40_000, 11, &McConfig::default())
                .unwrap();
        let expect = 1.0 - (1.0 - (-0.05f64).exp()).sqrt();
        assert!(
            (est.value - expect).abs() < 4.0 * est.stderr,
            "mc {} ± {} vs series {expect}",
            est.value,
            est.stderr
        );
        assert!(est.stderr > 0.0);
        assert!(est.truncation_bias_bound <= 1e-10);
    }

    #[test]
    fn xi_estimate_matches_series_with_drift() {
        let model = bs(0.1f64.sqrt(), 0.5); // mu = 0.45
        let region = left();
        let s: f64 = 0.05;
        let cfg = SeriesConfig::default();
        let q = (-0.5 * s).exp();
        let series = wh_series::xi(&model, &region, s, q, &cfg).unwrap().value;
        let est =
            estimate_xi(&model, &region, s, 40_000, 5, &McConfig::default())
                .unwrap();
        assert!(
            (est.value - series).abs() < 4.0 * est.stderr,
            "mc {} ± {} vs series {series}",
            est.value,
            est.stderr
        );
    }

    #[test]
    fn estimates_are_bit_reproducible_and_seed_sensitive() {
        let model = bs(1.0, 0.5);
        let cfg = McConfig::default();
        let a = estimate_xi(&model, &left(), 0.1, 2_000, 42, &cfg).unwrap();
        let b = estimate_xi(&model, &left(), 0.1, 2_000, 42, &cfg).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        let c = estimate_xi(&model, &left(), 0.1, 2_000, 43, &cfg).unwrap();
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let model = bs(1.0, 0.5);
        let cfg = McConfig::default();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| estimate_xi(&model, &left(), 0.1, 6_000, 9, &cfg))
            .unwrap();
        let quad = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| estimate_xi(&model, &left(), 0.1, 6_000, 9, &cfg))
            .unwrap();
        assert_eq!(single.value.to_bits(), quad.value.to_bits());
        assert_eq!(single.stderr.to_bits(), quad.stderr.to_bits());
    }

    #[test]
    fn price_immediate_exercise_short_circuits() {
        let model = bs(1.0, 0.5);
        let payoff = Payoff::constant(0.7).unwrap();
        let est = estimate_price(
            &model,
            &left(),
            &payoff,
            0.1,
            &[-0.5],
            10_000,
            1,
            &McConfig::default(),
        )
        .unwrap();
        assert_eq!(est.value, 0.7);
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.n_paths, 0);
        assert_eq!(est.truncation_bias_bound, 0.0);
    }

    #[test]
    fn price_from_boundary_matches_xi_for_unit_barrier() {
        // Constant payoff 1 on G makes the price from gamma equal to xi.
        let model = bs(1.0, 0.5);
        let payoff = Payoff::constant(1.0).unwrap();
        let cfg = McConfig::default();
        let price = estimate_price(
            &model,
            &left(),
            &payoff,
            0.1,
            &[0.0],
            20_000,
            17,
            &cfg,
        )
        .unwrap();
        let xi = estimate_xi(&model, &left(), 0.1, 20_000, 17, &cfg).unwrap();
        // Identical seeds and dynamics: the two runs see the same paths.
        assert_eq!(price.value.to_bits(), xi.value.to_bits());
    }

    #[test]
    fn coupled_estimator_is_nonnegative_and_below_rho() {
        let model = bs(1.0, 0.5);
        let s = 0.1;
        let cfg = McConfig::default();
        let est = estimate_rho_coupled(&model, &left(), s, 8, 10_000, 3, &cfg)
            .unwrap();
        // Pathwise coupling makes every sample >= 0.
        assert!(est.value > 0.0);
        // The mean estimates rho(s) − rho(s/8) < rho(s).
        let rho_s = (1.0 - (-0.05f64).exp()).sqrt();
        assert!(est.value < rho_s);
        assert_eq!(est.method, "mc-coupled");
        assert_eq!(est.horizon_steps % 8, 0);
    }

    #[test]
    fn coupled_estimator_converges_to_mesh_difference() {
        // E[estimate] = rho(s) − rho(s/m) exactly (up to horizon bias);
        // check against the driftless closed forms at m = 4.
        let model = bs(1.0, 0.5);
        let s = 0.1;
        let est = estimate_rho_coupled(
            &model,
            &left(),
            s,
            4,
            60_000,
            21,
            &McConfig::default(),
        )
        .unwrap();
        let rho = |mesh: f64| (1.0 - (-0.5 * mesh).exp()).sqrt();
        let expect = rho(s) - rho(s / 4.0);
        assert!(
            (est.value - expect).abs() < 4.0 * est.stderr,
            "coupled {} ± {} vs closed form {expect}",
            est.value,
            est.stderr
        );
    }

    #[test]
    fn parameter_validation() {
        let model = bs(1.0, 0.5);
        let cfg = McConfig::default();
        assert!(matches!(
            estimate_xi(&model, &left(), 0.1, 999, 0, &cfg),
            Err(Error::InvalidParameter { name: "n_paths", .. })
        ));
        assert!(matches!(
            estimate_xi(&model, &left(), -0.1, 1000, 0, &cfg),
            Err(Error::InvalidParameter { name: "s", .. })
        ));
        assert!(matches!(
            estimate_rho_coupled(&model, &left(), 0.1, 1, 1000, 0, &cfg),
            Err(Error::InvalidParameter { name: "refinement", .. })
        ));
        let lattice = LevyModel::Lattice(LatticeWalk::symmetric_pm1());
        assert!(matches!(
            estimate_xi(&lattice, &left(), 1.0, 1000, 0, &cfg),
            Err(Error::UnsupportedModel { model: "lattice", .. })
        ));
    }

    #[test]
    fn non_antithetic_mode_still_reproducible_and_consistent() {
        let model = bs(1.0, 0.5);
        let cfg = McConfig { antithetic: false, ..Default::default() };
        let a = estimate_xi(&model, &left(), 0.1, 20_000, 100, &cfg).unwrap();
        let b = estimate_xi(&model, &left(), 0.1, 20_000, 100, &cfg).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let expect = 1.0 - (1.0 - (-0.05f64).exp()).sqrt();
        assert!((a.value - expect).abs() < 4.0 * a.stderr);
    }
}
