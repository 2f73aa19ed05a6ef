//! Exercise regions and payoffs.
//!
//! The solvers in this crate need regions that are closed under addition
//! together with their complements, which forces half-spaces through the
//! anchor point: H = {x : ᵗα(x − γ) < 0} (strict) or ≤ 0. The anchor γ is
//! also the natural start point for first-entry simulations — the process
//! starts on the boundary, one step away from H in distribution.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Half-space H = {x : ᵗα(x − γ) < 0}, or ≤ 0 when `strict` is false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceRegion {
    gamma: Vec<f64>,
    alpha: Vec<f64>,
    strict: bool,
}

impl HalfSpaceRegion {
    pub fn new(gamma: Vec<f64>, alpha: Vec<f64>, strict: bool) -> Result<Self> {
        if gamma.len() != alpha.len() {
            return Err(Error::InvalidRegion(format!(
                "gamma has dimension {}, alpha has dimension {}",
                gamma.len(),
                alpha.len()
            )));
        }
        if gamma.is_empty() {
            return Err(Error::InvalidRegion("dimension must be >= 1".into()));
        }
        if !alpha.iter().any(|&a| a != 0.0) {
            return Err(Error::InvalidRegion(
                "normal vector alpha must be nonzero".into(),
            ));
        }
        if gamma.iter().chain(alpha.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidRegion(
                "gamma and alpha must be finite".into(),
            ));
        }
        Ok(Self { gamma, alpha, strict })
    }

    /// Half-line (−∞, 0) in one dimension: γ = 0, α = 1, strict.
    pub fn left_halfline() -> Self {
        Self::new(vec![0.0], vec![1.0], true).expect("static region is valid")
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn strict(&self) -> bool {
        self.strict
    }

    /// Signed functional ᵗα(x − γ); negative inside H.
    pub fn excess(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let mut acc = 0.0;
        for i in 0..x.len() {
            acc += self.alpha[i] * (x[i] - self.gamma[i]);
        }
        acc
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let e = self.excess(x);
        if self.strict {
            e < 0.0
        } else {
            e <= 0.0
        }
    }

    /// Membership for lattice points, evaluated through the same functional.
    pub fn contains_lattice(&self, x: &[i64]) -> bool {
        let xf: Vec<f64> = x.iter().map(|&c| c as f64).collect();
        self.contains(&xf)
    }

    /// Whether the region is anchored at the origin of its functional,
    /// i.e. ᵗαγ = 0. Together with strictness this is what makes both H
    /// and its complement closed under addition and keeps 0 out of H.
    pub fn is_through_origin(&self) -> bool {
        let c: f64 = self
            .alpha
            .iter()
            .zip(&self.gamma)
            .map(|(a, g)| a * g)
            .sum();
        c.abs() <= 1e-12
    }
}

/// Checks closure under addition of a set and of its complement on a
/// sampled list of pairs: for x, y in the set, x + y must stay in the set,
/// and likewise outside. Returns false at the first violated pair.
///
/// This is a sampled check, not a proof — it exists to catch sets that are
/// *not* +-closed (like a ball), where violations are easy to sample.
pub fn plus_closed_check<F>(in_set: F, pairs: &[(Vec<f64>, Vec<f64>)]) -> bool
where
    F: Fn(&[f64]) -> bool,
{
    for (x, y) in pairs {
        let sum: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a + b).collect();
        let (px, py, ps) = (in_set(x), in_set(y), in_set(&sum));
        if px && py && !ps {
            return false;
        }
        if !px && !py && ps {
            return false;
        }
    }
    true
}

/// 1-based index of the first path point lying in the region, if any.
///
/// `path` holds the points after the start, i.e. `path[k]` is the position
/// after k + 1 steps, so the returned index is the entry *step count*.
pub fn first_entry_step(region: &HalfSpaceRegion, path: &[Vec<f64>]) -> Option<usize> {
    path.iter()
        .position(|x| region.contains(x))
        .map(|idx| idx + 1)
}

/// Payoff kind: what is paid at the entry point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PayoffKind {
    /// (K − e^{x₁})⁺ on the first coordinate of the log price.
    Put { strike: f64 },
    /// Constant payoff c ≥ 0 (a rebate/barrier-style claim).
    Constant { level: f64 },
}

/// Bounded payoff g, optionally masked to a region (g·χ_G).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payoff {
    kind: PayoffKind,
    mask: Option<HalfSpaceRegion>,
}

impl Payoff {
    pub fn put(strike: f64) -> Result<Self> {
        if !(strike > 0.0) || !strike.is_finite() {
            return Err(Error::InvalidParameter {
                name: "strike",
                reason: format!("strike must be finite and > 0, got {strike}"),
            });
        }
        Ok(Self { kind: PayoffKind::Put { strike }, mask: None })
    }

    pub fn constant(level: f64) -> Result<Self> {
        if !(level >= 0.0) || !level.is_finite() {
            return Err(Error::InvalidParameter {
                name: "level",
                reason: format!("level must be finite and >= 0, got {level}"),
            });
        }
        Ok(Self { kind: PayoffKind::Constant { level }, mask: None })
    }

    /// Restricts the payoff to `region`: outside it the payoff is 0.
    pub fn masked(mut self, region: HalfSpaceRegion) -> Self {
        self.mask = Some(region);
        self
    }

    pub fn kind(&self) -> &PayoffKind {
        &self.kind
    }

    pub fn mask(&self) -> Option<&HalfSpaceRegion> {
        self.mask.as_ref()
    }

    /// Pointwise payoff value.
    pub fn eval(&self, x: &[f64]) -> f64 {
        if let Some(mask) = &self.mask {
            if !mask.contains(x) {
                return 0.0;
            }
        }
        match &self.kind {
            PayoffKind::Put { strike } => (strike - x[0].exp()).max(0.0),
            PayoffKind::Constant { level } => *level,
        }
    }

    /// Uniform bound sup g — the strike for a put, the level for a constant.
    pub fn bound(&self) -> f64 {
        match &self.kind {
            PayoffKind::Put { strike } => *strike,
            PayoffKind::Constant { level } => *level,
        }
    }
}
