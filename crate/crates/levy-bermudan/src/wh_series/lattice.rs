//! Exact lattice-walk oracles for the fluctuation identities.
//!
//! A finitely supported walk on ℤ^d admits exact (rational-arithmetic-free
//! but fp-exact for dyadic step probabilities) computation of both sides
//! of the zero-frequency Wiener–Hopf identity:
//!
//! * the first-entry side, via the restriction recursion
//!   Q₀ = δ₀,  R_{n+1} = (Q_n ∗ F)|_H,  Q_{n+1} = (Q_n ∗ F)|_{H^c},
//!   so R_n(ℤ^d) = P⁰{τ_H = n} and Q_n(ℤ^d) = P⁰{τ_H > n};
//! * the marginal side, via plain convolution powers F^{∗n} and their
//!   mass on H.
//!
//! Comparing 1 − Σ qⁿ R_n(ℤ^d) against exp(−Σ qⁿ/n · F^{∗n}(H)) checks the
//! identity through two code paths that share nothing but the step table.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::levy_models::LatticeWalk;
use crate::regions::HalfSpaceRegion;
use crate::Result;

use super::{series_tail_bound, truncation_terms, Kahan, SeriesConfig, SeriesValue};

/// Finitely supported measure on ℤ^d. A BTreeMap keeps iteration order —
/// and therefore every floating-point reduction — deterministic.
pub type LatticeMeasure = BTreeMap<Vec<i64>, f64>;

/// Budget on predicted work for convolution loops; beyond this the request
/// is refused as a resource error rather than left to thrash.
const COST_CAP: f64 = 4e9;

/// The paired restriction measures (R_n, Q_n) up to a step horizon.
#[derive(Debug, Clone)]
pub struct LatticeMeasureSequence {
    /// R_n for n = 0..=n_max; R_0 is the empty measure.
    r_measures: Vec<LatticeMeasure>,
    /// Q_n for n = 0..=n_max; Q_0 = δ₀.
    q_measures: Vec<LatticeMeasure>,
}

impl LatticeMeasureSequence {
    pub fn r_measures(&self) -> &[LatticeMeasure] {
        &self.r_measures
    }

    pub fn q_measures(&self) -> &[LatticeMeasure] {
        &self.q_measures
    }

    pub fn n_max(&self) -> usize {
        self.r_measures.len() - 1
    }

    /// P⁰{τ = n} for n = 1..=n_max.
    pub fn entry_probabilities(&self) -> Vec<f64> {
        self.r_measures[1..].iter().map(total_mass).collect()
    }

    /// P⁰{τ > n_max}: the surviving mass.
    pub fn survival_probability(&self) -> f64 {
        total_mass(self.q_measures.last().expect("sequence never empty"))
    }

    /// Worst deviation of Σ_{k≤n} R_k(ℤ^d) + Q_n(ℤ^d) from 1 over all n.
    pub fn max_mass_defect(&self) -> f64 {
        let mut entered = 0.0;
        let mut worst: f64 = 0.0;
        for n in 0..self.r_measures.len() {
            entered += total_mass(&self.r_measures[n]);
            let defect = (entered + total_mass(&self.q_measures[n]) - 1.0).abs();
            worst = worst.max(defect);
        }
        worst
    }

    /// ξ_N(q) = Σ_{n≤n_max} qⁿ · P⁰{τ = n}, the truncated entry transform.
    pub fn first_passage_gf(&self, q: f64) -> f64 {
        let log_q = q.ln();
        let mut acc = Kahan::default();
        for (n, r) in self.r_measures.iter().enumerate().skip(1) {
            acc.add(((n as f64) * log_q).exp() * total_mass(r));
        }
        acc.value()
    }
}

/// Both sides of the zero-frequency identity with certified truncation
/// tails, as produced by [`wiener_hopf_zero_freq_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WienerHopfCheck {
    pub q: f64,
    pub n_max: usize,
    /// 1 − Σ_{n≤N} qⁿ P{τ = n}, the first-entry side.
    pub lhs: f64,
    /// exp(−Σ_{n≤N} qⁿ/n · F^{∗n}(H)), the marginal side.
    pub rhs: f64,
    pub gap: f64,
    /// Bound on the lhs truncation: q^{N+1} · P{τ > N}.
    pub lhs_tail: f64,
    /// Bound on the rhs truncation: rhs · (1 − exp(−q^{N+1}/((N+1)(1−q)))).
    pub rhs_tail: f64,
    /// Worst mass-conservation defect seen in the recursion.
    pub mass_defect: f64,
}

fn total_mass(m: &LatticeMeasure) -> f64 {
    let mut acc = Kahan::default();
    for &v in m.values() {
        acc.add(v);
    }
    acc.value()
}

fn convolve_step(measure: &LatticeMeasure, walk: &LatticeWalk) -> LatticeMeasure {
    let mut out = LatticeMeasure::new();
    for (point, &mass) in measure {
        for (step, prob) in walk.steps() {
            let target: Vec<i64> =
                point.iter().zip(step).map(|(a, b)| a + b).collect();
            *out.entry(target).or_insert(0.0) += mass * prob;
        }
    }
    out
}

fn validate_lattice_region(walk: &LatticeWalk, region: &HalfSpaceRegion) -> Result<()> {
    if region.dim() != walk.dim() {
        return Err(Error::InvalidRegion(format!(
            "region dimension {} does not match walk dimension {}",
            region.dim(),
            walk.dim()
        )));
    }
    if !region.is_through_origin() {
        return Err(Error::InvalidRegion(
            "lattice identities need a half-space through the origin: \
             t(alpha)·gamma must be 0"
                .into(),
        ));
    }
    if !region.strict() {
        return Err(Error::InvalidRegion(
            "lattice half-space must be strict so that 0 is excluded; \
             note {x: t(alpha)x <= -1} equals {x: t(alpha)x < 0} when the \
             functional takes integer values"
                .into(),
        ));
    }
    debug_assert!(!region.contains_lattice(&vec![0; walk.dim()]));
    Ok(())
}

/// Refuses convolution runs whose predicted work exceeds [`COST_CAP`].
/// The support after n steps is at most ∏ⱼ(2·n·maxⱼ + 1) points, so total
/// work is bounded by n_max · support(n_max) · |steps|.
fn check_cost(walk: &LatticeWalk, n_max: usize) -> Result<()> {
    let mut support = 1f64;
    for axis in 0..walk.dim() {
        let max_step = walk
            .steps()
            .iter()
            .map(|(p, _)| p[axis].unsigned_abs())
            .max()
            .unwrap_or(0);
        support *= 2.0 * n_max as f64 * max_step as f64 + 1.0;
    }
    let cost = n_max as f64 * support * walk.steps().len() as f64;
    if cost > COST_CAP {
        return Err(Error::Resource(format!(
            "lattice convolution horizon n_max={n_max} predicts ~{cost:.1e} \
             operations (cap {COST_CAP:.0e}); lower n_max, q, or the dimension"
        )));
    }
    Ok(())
}

/// Runs the restriction recursion up to `n_max` steps.
pub fn lattice_rq_recursion(
    walk: &LatticeWalk,
    region: &HalfSpaceRegion,
    n_max: usize,
) -> Result<LatticeMeasureSequence> {
    if n_max == 0 {
        return Err(Error::InvalidParameter {
            name: "n_max",
            reason: "need at least one step".into(),
        });
    }
    validate_lattice_region(walk, region)?;
    check_cost(walk, n_max)?;

    let mut r_measures = vec![LatticeMeasure::new()];
    let mut q_measures = vec![LatticeMeasure::from([(vec![0i64; walk.dim()], 1.0)])];

    for n in 0..n_max {
        let pushed = convolve_step(&q_measures[n], walk);
        let mut entered = LatticeMeasure::new();
        let mut alive = LatticeMeasure::new();
        for (point, mass) in pushed {
            if region.contains_lattice(&point) {
                entered.insert(point, mass);
            } else {
                alive.insert(point, mass);
            }
        }
        r_measures.push(entered);
        q_measures.push(alive);
    }
    Ok(LatticeMeasureSequence { r_measures, q_measures })
}

/// F^{∗n}(H) for n = 1..=n_max via plain convolution powers — no
/// restriction, so this is an independent second route to the identity.
pub fn lattice_n_step_masses(
    walk: &LatticeWalk,
    region: &HalfSpaceRegion,
    n_max: usize,
) -> Result<Vec<f64>> {
    if n_max == 0 {
        return Err(Error::InvalidParameter {
            name: "n_max",
            reason: "need at least one step".into(),
        });
    }
    validate_lattice_region(walk, region)?;
    check_cost(walk, n_max)?;

    let mut law = LatticeMeasure::from([(vec![0i64; walk.dim()], 1.0)]);
    let mut masses = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        law = convolve_step(&law, walk);
        let mut acc = Kahan::default();
        for (point, &mass) in &law {
            if region.contains_lattice(point) {
                acc.add(mass);
            }
        }
        masses.push(acc.value());
    }
    Ok(masses)
}

/// Evaluates both sides of −ln(1 − ξ(q)) = Σ qⁿ/n · F^{∗n}(H) truncated at
/// `n_max`, with certified tails for each side.
pub fn wiener_hopf_zero_freq_check(
    walk: &LatticeWalk,
    region: &HalfSpaceRegion,
    q: f64,
    n_max: usize,
) -> Result<WienerHopfCheck> {
    super::validate_q(q)?;
    let seq = lattice_rq_recursion(walk, region, n_max)?;
    let masses = lattice_n_step_masses(walk, region, n_max)?;

    let lhs = 1.0 - seq.first_passage_gf(q);
    let log_q = q.ln();
    let mut acc = Kahan::default();
    for (idx, &p) in masses.iter().enumerate() {
        let n = (idx + 1) as f64;
        acc.add((n * log_q).exp() / n * p);
    }
    let rhs = (-acc.value()).exp();

    // Σ_{n>N} qⁿ P{τ=n} ≤ q^{N+1} Σ_{n>N} P{τ=n} ≤ q^{N+1} P{τ>N}.
    let lhs_tail =
        (((n_max + 1) as f64) * log_q).exp() * seq.survival_probability();
    let rhs_tail = rhs * (-(-series_tail_bound(q, n_max)).exp_m1());

    Ok(WienerHopfCheck {
        q,
        n_max,
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        lhs_tail,
        rhs_tail,
        mass_defect: seq.max_mass_defect(),
    })
}

/// The log-series for a lattice walk, truncated at the certified term
/// count for (q, cfg.tol). Fails fast if the cap or cost budget is hit.
pub(super) fn lattice_log_sum(
    walk: &LatticeWalk,
    region: &HalfSpaceRegion,
    q: f64,
    cfg: &SeriesConfig,
) -> Result<SeriesValue> {
    super::validate_q(q)?;
    cfg.validate()?;
    let n_terms = truncation_terms(q, cfg.tol);
    if n_terms > cfg.n_max {
        return Err(Error::TruncationCap {
            required: n_terms,
            n_max: cfg.n_max,
            tol: cfg.tol,
        });
    }
    let masses = lattice_n_step_masses(walk, region, n_terms)?;
    let log_q = q.ln();
    let mut acc = Kahan::default();
    for (idx, &p) in masses.iter().enumerate() {
        let n = (idx + 1) as f64;
        acc.add((n * log_q).exp() / n * p);
    }
    Ok(SeriesValue {
        value: acc.value(),
        n_terms,
        tail_bound: series_tail_bound(q, n_terms),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm1() -> LatticeWalk {
        LatticeWalk::symmetric_pm1()
    }

    fn left() -> HalfSpaceRegion {
        HalfSpaceRegion::left_halfline()
    }

    /// Entry-time law of the ±1 walk: P{τ = 2k+1} = Cat(k)/2^{2k+1},
    /// zero at even times. All values are dyadic, hence fp-exact.
    #[test]
    fn pm1_entry_probabilities_are_catalan() {
        let seq = lattice_rq_recursion(&pm1(), &left(), 9).unwrap();
        let probs = seq.entry_probabilities();
        let expect = [
            0.5,        // n=1
            0.0,        // n=2
            1.0 / 8.0,  // n=3: Cat(1)/2^3
            0.0,
            1.0 / 16.0, // n=5: Cat(2)/2^5 = 2/32
            0.0,
            5.0 / 128.0, // n=7: Cat(3)/2^7
            0.0,
            7.0 / 256.0, // n=9: Cat(4)/2^9 = 14/512
        ];
        for (n, (&got, &want)) in probs.iter().zip(&expect).enumerate() {
            assert_eq!(got, want, "P(tau = {})", n + 1);
        }
        assert_eq!(seq.max_mass_defect(), 0.0, "dyadic masses must be exact");
    }

    #[test]
    fn first_passage_gf_matches_catalan_generating_function() {
        // xi(q) = (1 − sqrt(1 − q²))/q for the ±1 walk.
        let seq = lattice_rq_recursion(&pm1(), &left(), 2000).unwrap();
        for &q in &[0.1, 0.3, 0.5, 0.9] {
            let got = seq.first_passage_gf(q);
            let expect = (1.0 - (1.0 - q * q).sqrt()) / q;
            assert!(
                (got - expect).abs() < 1e-12,
                "q={q}: gf {got} vs closed form {expect}"
            );
        }
        // Frozen: 1 − xi(1/2) = sqrt(3) − 1.
        let complement = 1.0 - seq.first_passage_gf(0.5);
        assert!((complement - 0.732_050_807_568_877_2).abs() < 1e-14);
    }

    #[test]
    fn n_step_masses_match_binomial_enumeration() {
        // P{S_n < 0} = (1 − P{S_n = 0})/2 with P{S_2m = 0} = C(2m, m)/4^m.
        let masses = lattice_n_step_masses(&pm1(), &left(), 40).unwrap();
        let mut central = 1.0; // C(0,0)/4^0
        for (idx, &p) in masses.iter().enumerate() {
            let n = idx + 1;
            if n % 2 == 0 {
                let m = (n / 2) as f64;
                // C(2m, m)/4^m = C(2m−2, m−1)/4^{m−1} · (2m−1)/(2m).
                central *= (2.0 * m - 1.0) / (2.0 * m);
                let expect = 0.5 * (1.0 - central);
                assert!((p - expect).abs() < 1e-15, "n={n}: {p} vs {expect}");
            } else {
                // Odd-step walk is never at 0, so P{S_n < 0} is exactly ½.
                assert!((p - 0.5).abs() < 1e-15, "n={n}: {p} vs 1/2");
            }
        }
    }

    #[test]
    fn log_sum_matches_central_binomial_closed_form() {
        // Σ qⁿ/n·P{S_n<0} = −½ln(1−q) + ½ln((1 + sqrt(1−q²))/2), from
        // Σ_m C(2m,m) xᵐ/m = −2 ln((1 + sqrt(1−4x))/2) at x = q²/4.
        let cfg = SeriesConfig::default();
        for &q in &[0.3, 0.5, 0.8] {
            let got = lattice_log_sum(&pm1(), &left(), q, &cfg).unwrap();
            let expect = -0.5 * (1.0 - q).ln()
                + 0.5 * ((1.0 + (1.0 - q * q).sqrt()) / 2.0).ln();
            assert!(
                (got.value - expect).abs() < 1e-12,
                "q={q}: log sum {} vs {expect}",
                got.value
            );
        }
    }

    #[test]
    fn wiener_hopf_check_certifies_on_pm1() {
        for &q in &[0.3, 0.5, 0.9] {
            let check = wiener_hopf_zero_freq_check(&pm1(), &left(), q, 200).unwrap();
            assert!(
                check.gap <= check.lhs_tail + check.rhs_tail + 1e-12,
                "q={q}: gap {} exceeds certified {} + {}",
                check.gap,
                check.lhs_tail,
                check.rhs_tail
            );
            assert!(check.mass_defect <= 1e-14);
        }
        let check = wiener_hopf_zero_freq_check(&pm1(), &left(), 0.5, 200).unwrap();
        assert!((check.lhs - 0.732_050_807_568_877_2).abs() < 1e-9);
        assert!((check.rhs - 0.732_050_807_568_877_2).abs() < 1e-9);
    }

    /// The 2-d walk with steps ±e₁, ±e₂ projected onto x₁ + x₂ is exactly
    /// the ±1 walk, so entry laws into {x₁ + x₂ ≤ −1} coincide with the
    /// 1-d Catalan law.
    #[test]
    fn diagonal_2d_projects_to_pm1() {
        let walk2 = LatticeWalk::diagonal_2d();
        let region2 =
            HalfSpaceRegion::new(vec![0.0, 0.0], vec![1.0, 1.0], true).unwrap();
        let seq2 = lattice_rq_recursion(&walk2, &region2, 60).unwrap();
        let seq1 = lattice_rq_recursion(&pm1(), &left(), 60).unwrap();
        for (n, (p2, p1)) in seq2
            .entry_probabilities()
            .iter()
            .zip(seq1.entry_probabilities())
            .enumerate()
        {
            assert!(
                (p2 - p1).abs() < 1e-14,
                "entry law differs at n={}: {p2} vs {p1}",
                n + 1
            );
        }
        assert!(seq2.max_mass_defect() <= 1e-14);
    }

    #[test]
    fn region_validation_errors() {
        // Non-strict boundary through the origin would put 0 in H.
        let closed = HalfSpaceRegion::new(vec![0.0], vec![1.0], false).unwrap();
        assert!(matches!(
            lattice_rq_recursion(&pm1(), &closed, 5),
            Err(Error::InvalidRegion(_))
        ));
        // Off-origin anchor breaks +-closure of the complement.
        let shifted = HalfSpaceRegion::new(vec![2.0], vec![1.0], true).unwrap();
        assert!(matches!(
            lattice_n_step_masses(&pm1(), &shifted, 5),
            Err(Error::InvalidRegion(_))
        ));
        // Dimension mismatch.
        let region2 =
            HalfSpaceRegion::new(vec![0.0, 0.0], vec![1.0, 1.0], true).unwrap();
        assert!(matches!(
            lattice_rq_recursion(&pm1(), &region2, 5),
            Err(Error::InvalidRegion(_))
        ));
    }

    #[test]
    fn oversized_requests_are_refused() {
        let walk2 = LatticeWalk::diagonal_2d();
        let region2 =
            HalfSpaceRegion::new(vec![0.0, 0.0], vec![1.0, 1.0], true).unwrap();
        match lattice_rq_recursion(&walk2, &region2, 2_000_000) {
            Err(Error::Resource(msg)) => assert!(msg.contains("n_max")),
            other => panic!("expected Resource, got {other:?}"),
        }
        // Through lattice_log_sum the same guard trips via q near 1.
        let cfg = SeriesConfig::default();
        assert!(matches!(
            lattice_log_sum(&walk2, &region2, 0.999_999, &cfg),
            Err(Error::Resource(_) | Error::TruncationCap { .. })
        ));
    }

    #[test]
    fn asymmetric_walk_conserves_mass() {
        // Probabilities 1/3 and 2/3 are not dyadic, so this exercises real
        // rounding in the recursion.
        let walk = LatticeWalk::new(vec![
            (vec![2], 1.0 / 3.0),
            (vec![-1], 2.0 / 3.0),
        ])
        .unwrap();
        let seq = lattice_rq_recursion(&walk, &left(), 400).unwrap();
        assert!(
            seq.max_mass_defect() <= 1e-14,
            "defect {}",
            seq.max_mass_defect()
        );
        let check = wiener_hopf_zero_freq_check(&walk, &left(), 0.7, 400).unwrap();
        assert!(
            check.gap <= check.lhs_tail + check.rhs_tail + 1e-12,
            "gap {} vs tails {} + {}",
            check.gap,
            check.lhs_tail,
            check.rhs_tail
        );
    }
}
