//! TOML run configuration: `[model]`, `[region]`, `[payoff]`, `[run]`.
//!
//! Parsing is strict — unknown keys are rejected so a typo cannot
//! silently fall back to a default — and every builder error names the
//! offending key.

use serde::Deserialize;

use crate::error::Error;
use crate::levy_models::{BlackScholesBasket, LatticeWalk, LevyModel, MertonJumpDiffusion};
use crate::montecarlo::McConfig;
use crate::regions::{HalfSpaceRegion, Payoff};
use crate::scaling_fit::ScalingGrid;
use crate::wh_series::SeriesConfig;
use crate::Result;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub region: Option<RegionSection>,
    pub payoff: Option<PayoffSection>,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// "black-scholes", "merton", or "lattice".
    pub kind: String,
    /// Per-asset volatilities (black-scholes).
    pub sigma: Option<Vec<f64>>,
    /// Discount rate (black-scholes, merton).
    pub r: Option<f64>,
    /// Deterministic drift of the jump-diffusion exponent (merton).
    pub alpha: Option<f64>,
    /// Jump size (merton).
    pub beta: Option<f64>,
    /// Explicit jump-diffusion volatility; omitted ⇒ the calibrated one.
    pub merton_sigma: Option<f64>,
    /// Lattice steps (lattice).
    pub steps: Option<Vec<StepSection>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSection {
    pub point: Vec<i64>,
    pub prob: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub strict: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffSection {
    /// "put" or "constant".
    pub kind: String,
    pub strike: Option<f64>,
    pub level: Option<f64>,
    /// Restrict the payoff to the exercise region (χ_G·g).
    pub mask: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub s: Option<f64>,
    pub s_values: Option<Vec<f64>>,
    pub q: Option<f64>,
    pub n_paths: Option<u64>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub n_max: Option<usize>,
    /// Coarse-to-fine refinement factor for the coupled estimator.
    pub refinement: Option<u32>,
    pub x0: Option<Vec<f64>>,
    pub horizon_tol: Option<f64>,
    pub antithetic: Option<bool>,
    pub grid_lo: Option<Vec<f64>>,
    pub grid_hi: Option<Vec<f64>>,
    pub grid_cells: Option<Vec<usize>>,
    pub s_max: Option<f64>,
    pub factor: Option<f64>,
    pub n_points: Option<usize>,
    pub fit_points: Option<usize>,
    pub slope_tol: Option<f64>,
}

fn missing(section: &'static str, key: &'static str, why: &str) -> Error {
    Error::Config(format!("[{section}] {key}: {why}"))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn build_model(&self) -> Result<LevyModel> {
        let m = &self.model;
        match m.kind.as_str() {
            "black-scholes" | "bs" => {
                let sigma = m
                    .sigma
                    .clone()
                    .ok_or_else(|| missing("model", "sigma", "required for kind \"black-scholes\""))?;
                let r = m
                    .r
                    .ok_or_else(|| missing("model", "r", "required for kind \"black-scholes\""))?;
                Ok(LevyModel::BlackScholes(BlackScholesBasket::new(sigma, r)?))
            }
            "merton" => {
                let r = m
                    .r
                    .ok_or_else(|| missing("model", "r", "required for kind \"merton\""))?;
                let alpha = m
                    .alpha
                    .ok_or_else(|| missing("model", "alpha", "required for kind \"merton\""))?;
                let beta = m
                    .beta
                    .ok_or_else(|| missing("model", "beta", "required for kind \"merton\""))?;
                let mj = match m.merton_sigma {
                    Some(sigma) => MertonJumpDiffusion::with_sigma(r, alpha, beta, sigma)?,
                    None => MertonJumpDiffusion::calibrated(r, alpha, beta)?,
                };
                Ok(LevyModel::Merton(mj))
            }
            "lattice" => {
                let steps = m
                    .steps
                    .as_ref()
                    .ok_or_else(|| missing("model", "steps", "required for kind \"lattice\""))?;
                let walk = LatticeWalk::new(
                    steps.iter().map(|s| (s.point.clone(), s.prob)).collect(),
                )?;
                Ok(LevyModel::Lattice(walk))
            }
            other => Err(Error::Config(format!(
                "[model] kind: unknown model \"{other}\" (expected black-scholes, merton, or lattice)"
            ))),
        }
    }

    /// The configured region, or the left half-line when the model is
    /// one-dimensional and no `[region]` section was given.
    pub fn build_region(&self, model_dim: usize) -> Result<HalfSpaceRegion> {
        match &self.region {
            Some(sec) => {
                HalfSpaceRegion::new(sec.gamma.clone(), sec.alpha.clone(), sec.strict.unwrap_or(true))
            }
            None if model_dim == 1 => Ok(HalfSpaceRegion::left_halfline()),
            None => Err(Error::Config(format!(
                "[region]: required for a {model_dim}-dimensional model"
            ))),
        }
    }

    pub fn build_payoff(&self, region: &HalfSpaceRegion) -> Result<Payoff> {
        let sec = self
            .payoff
            .as_ref()
            .ok_or_else(|| Error::Config("[payoff]: section required for this command".into()))?;
        let base = match sec.kind.as_str() {
            "put" => {
                let strike = sec
                    .strike
                    .ok_or_else(|| missing("payoff", "strike", "required for kind \"put\""))?;
                Payoff::put(strike)?
            }
            "constant" => {
                let level = sec
                    .level
                    .ok_or_else(|| missing("payoff", "level", "required for kind \"constant\""))?;
                Payoff::constant(level)?
            }
            other => {
                return Err(Error::Config(format!(
                    "[payoff] kind: unknown payoff \"{other}\" (expected put or constant)"
                )))
            }
        };
        Ok(if sec.mask.unwrap_or(false) {
            base.masked(region.clone())
        } else {
            base
        })
    }

    /// Series tolerance / truncation settings; `tol_flag` (the CLI `--tol`)
    /// overrides the `[run] tol` key.
    pub fn series_config(&self, tol_flag: Option<f64>) -> SeriesConfig {
        let mut cfg = SeriesConfig::default();
        if let Some(t) = tol_flag.or(self.run.tol) {
            cfg.tol = t;
        }
        if let Some(n) = self.run.n_max {
            cfg.n_max = n;
        }
        cfg
    }

    pub fn mc_config(&self) -> McConfig {
        let mut cfg = McConfig::default();
        if let Some(t) = self.run.horizon_tol {
            cfg.horizon_tol = t;
        }
        if let Some(a) = self.run.antithetic {
            cfg.antithetic = a;
        }
        cfg
    }

    pub fn scaling_grid(&self) -> ScalingGrid {
        let mut g = ScalingGrid::default();
        if let Some(v) = self.run.s_max {
            g.s_max = v;
        }
        if let Some(v) = self.run.factor {
            g.factor = v;
        }
        if let Some(v) = self.run.n_points {
            g.n_points = v;
        }
        if let Some(v) = self.run.fit_points {
            g.fit_points = v;
        }
        g
    }

    /// Mesh values for series commands: `s_values` if given, else `s`.
    pub fn mesh_values(&self) -> Result<Vec<f64>> {
        if let Some(v) = &self.run.s_values {
            if v.is_empty() {
                return Err(missing("run", "s_values", "must be non-empty when given"));
            }
            return Ok(v.clone());
        }
        self.run
            .s
            .map(|s| vec![s])
            .ok_or_else(|| missing("run", "s", "mesh required (set s or s_values)"))
    }

    /// The seed for stochastic commands; `seed_flag` (the CLI `--seed`)
    /// overrides the `[run] seed` key.
    pub fn seed(&self, seed_flag: Option<u64>) -> Result<u64> {
        seed_flag
            .or(self.run.seed)
            .ok_or_else(|| missing("run", "seed", "required for stochastic commands"))
    }
}
