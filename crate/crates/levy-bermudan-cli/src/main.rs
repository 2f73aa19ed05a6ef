//! Command-line driver: loads a TOML run configuration, dispatches to the
//! library, and writes CSV/JSON outputs.
//!
//! Determinism contract: identical (config, seed, flags) produce
//! byte-identical output files — floats are serialized with the shortest
//! round-trip representation, JSON keys are sorted, the Monte Carlo
//! reduction order is independent of `--threads`, and no timestamps or
//! paths are embedded in any output.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;

use levy_bermudan::config::RunConfig;
use levy_bermudan::levy_models::{LatticeWalk, LevyModel};
use levy_bermudan::montecarlo;
use levy_bermudan::operator_grid::{
    fixed_point_residual, neumann_price, DiscountKernel, Grid, GridField,
};
use levy_bermudan::regions::HalfSpaceRegion;
use levy_bermudan::scaling_fit::scaling_report;
use levy_bermudan::wh_series::{self, reduce_dim, rho_bounds, wiener_hopf_zero_freq_check};
use levy_bermudan::Error;

/// println! that tolerates a closed stdout (e.g. piping into `head`)
/// instead of panicking mid-run.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "levy-bermudan",
    version,
    about = "Perpetual Bermudan continuity corrections on log-Lévy baskets",
    after_help = "Exit codes: 0 success, 1 validation/config error, 2 numeric failure.\n\
                  Randomness: ChaCha8 keyed by (seed, path-pair index); identical\n\
                  (config, seed) reruns produce byte-identical outputs at any --threads."
)]
struct Cli {
    /// TOML run configuration ([model], [region], [payoff], [run]).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for stochastic commands; overrides `[run] seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Directory for output files (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Worker threads for Monte Carlo (default: all cores). Results do
    /// not depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Series truncation tolerance / grid stopping tolerance; overrides
    /// `[run] tol`.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Continuity correction ρ(s) per mesh, with regime bounds where the
    /// model admits them. Writes rho.csv.
    Rho,
    /// Verifies the first-passage identity (1−ξ_H)(1−ξ_{H^c}) = 1−q per
    /// mesh. Writes xi_check.csv and xi_check.json.
    XiCheck,
    /// Monte Carlo first-entry price from a start point. Writes price.csv.
    Price,
    /// Coupled-mesh Monte Carlo estimate of ρ(s). Writes rho_mc.csv.
    RhoMc,
    /// Grid convolution solve of the first-entry value field. Writes
    /// grid_solve.csv and grid_solve.json.
    GridSolve,
    /// Scaling exponent of ρ(s) as s ↓ 0 against its regime bracket.
    /// Writes scaling.csv and scaling.json.
    Scaling,
    /// Exact lattice check of the zero-frequency Wiener–Hopf identity;
    /// without --config, runs the symmetric ±1 walk at q = 0.5. Writes
    /// lattice_oracle.json.
    LatticeOracle,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return ExitCode::from(if ok { 0 } else { 1 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: configuring {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<Error>()
                .map(|le| le.exit_code() as u8)
                .unwrap_or(1);
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))?;
    match cli.command {
        Command::Rho => cmd_rho(cli),
        Command::XiCheck => cmd_xi_check(cli),
        Command::Price => cmd_price(cli),
        Command::RhoMc => cmd_rho_mc(cli),
        Command::GridSolve => cmd_grid_solve(cli),
        Command::Scaling => cmd_scaling(cli),
        Command::LatticeOracle => cmd_lattice_oracle(cli),
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required for this command".into()))?;
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    Ok(RunConfig::from_toml_str(&text)?)
}

fn require<T>(value: Option<T>, key: &'static str) -> anyhow::Result<T> {
    value.ok_or_else(|| Error::Config(format!("[run] {key}: required for this command")).into())
}

/// Shortest round-trip decimal representation.
fn num(v: f64) -> String {
    format!("{v}")
}

fn write_output(cli: &Cli, name: &str, content: &str) -> anyhow::Result<()> {
    let path = cli.out.join(name);
    fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    say!("wrote {}", path.display());
    Ok(())
}

fn write_json(cli: &Cli, name: &str, doc: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    write_output(cli, name, &text)
}

/// Closed-form regime bounds for models that admit them (Gaussian
/// baskets); jump-diffusion rows leave the bound columns empty.
fn regime_bounds(
    model: &LevyModel,
    region: &HalfSpaceRegion,
    s: f64,
) -> anyhow::Result<Option<(f64, f64)>> {
    match model {
        LevyModel::BlackScholes(bs) => {
            let (m, delta) = reduce_dim(region.alpha(), bs.mu(), bs.sigma())?;
            Ok(Some(rho_bounds(bs.r(), m, delta, s)?))
        }
        _ => Ok(None),
    }
}

fn bound_cells(bounds: Option<(f64, f64)>) -> (String, String) {
    match bounds {
        Some((lo, hi)) => (num(lo), num(hi)),
        None => (String::new(), String::new()),
    }
}

fn cmd_rho(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let model = cfg.build_model()?;
    let region = cfg.build_region(model.dim())?;
    let series = cfg.series_config(cli.tol);
    let mut csv = String::from("s,rho,lower_bound,upper_bound,n_terms,tail_bound\n");
    for &s in &cfg.mesh_values()? {
        let rho = wh_series::rho(&model, &region, s, &series)?;
        let (lo, hi) = bound_cells(regime_bounds(&model, &region, s)?);
        writeln!(
            csv,
            "{},{},{lo},{hi},{},{}",
            num(s),
            num(rho.value),
            rho.n_terms,
            num(rho.tail_bound)
        )?;
        say!(
            "s={} rho={} (terms={}, tail<={})",
            num(s),
            num(rho.value),
            rho.n_terms,
            num(rho.tail_bound)
        );
    }
    write_output(cli, "rho.csv", &csv)
}

fn cmd_xi_check(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let model = cfg.build_model()?;
    let region = cfg.build_region(model.dim())?;
    let r = model.rate().ok_or(Error::UnsupportedModel {
        op: "xi-check",
        model: "lattice (use lattice-oracle)",
    })?;
    // The complementary half-space: H^c up to the null boundary set.
    let complement = HalfSpaceRegion::new(
        region.gamma().to_vec(),
        region.alpha().iter().map(|a| -a).collect(),
        false,
    )?;
    let series = cfg.series_config(cli.tol);
    let mut csv = String::from("s,rho,lower_bound,upper_bound,n_terms,tail_bound\n");
    let mut entries = Vec::new();
    let mut all_pass = true;
    for &s in &cfg.mesh_values()? {
        let q = (-r * s).exp();
        let xi_h = wh_series::xi(&model, &region, s, q, &series)?;
        let xi_c = wh_series::xi(&model, &complement, s, q, &series)?;
        let rho = wh_series::rho(&model, &region, s, &series)?;
        // Exact identity: marginal probabilities of H and H^c sum to 1
        // term by term, so the log-series sum to −ln(1−q).
        let gap = ((1.0 - xi_h.value) * (1.0 - xi_c.value) - (1.0 - q)).abs();
        let gap_bound =
            (1.0 - q) * ((xi_h.tail_bound + xi_c.tail_bound).exp_m1() + 1e-12);
        let pass = gap <= gap_bound;
        all_pass &= pass;
        let (lo, hi) = bound_cells(regime_bounds(&model, &region, s)?);
        writeln!(
            csv,
            "{},{},{lo},{hi},{},{}",
            num(s),
            num(rho.value),
            rho.n_terms,
            num(rho.tail_bound)
        )?;
        say!(
            "s={} xi={} identity_gap={} (bound {}) {}",
            num(s),
            num(xi_h.value),
            num(gap),
            num(gap_bound),
            if pass { "ok" } else { "FAIL" }
        );
        entries.push(json!({
            "s": s,
            "q": q,
            "xi": xi_h.value,
            "complement_xi": xi_c.value,
            "rho": rho.value,
            "identity_gap": gap,
            "gap_bound": gap_bound,
            "pass": pass,
        }));
    }
    write_output(cli, "xi_check.csv", &csv)?;
    write_json(
        cli,
        "xi_check.json",
        &json!({
            "identity": "(1-xi_H)(1-xi_Hc) = 1-q",
            "meshes": entries,
            "all_pass": all_pass,
        }),
    )?;
    if !all_pass {
        return Err(Error::Numeric(
            "first-passage identity violated beyond certified tails".into(),
        )
        .into());
    }
    Ok(())
}

fn estimate_csv(est: &montecarlo::PriceEstimate) -> String {
    format!(
        "value,stderr,n_paths,horizon_steps,bias_bound,seed\n{},{},{},{},{},{}\n",
        num(est.value),
        num(est.stderr),
        est.n_paths,
        est.horizon_steps,
        num(est.truncation_bias_bound),
        est.seed
    )
}

fn cmd_price(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let model = cfg.build_model()?;
    let region = cfg.build_region(model.dim())?;
    let payoff = cfg.build_payoff(&region)?;
    let s = require(cfg.run.s, "s")?;
    let n_paths = require(cfg.run.n_paths, "n_paths")?;
    let seed = cfg.seed(cli.seed)?;
    let x0 = cfg
        .run
        .x0
        .clone()
        .unwrap_or_else(|| region.gamma().to_vec());
    let est = montecarlo::estimate_price(
        &model,
        &region,
        &payoff,
        s,
        &x0,
        n_paths,
        seed,
        &cfg.mc_config(),
    )?;
    say!(
        "value={} stderr={} (paths={}, horizon={}, bias<={}, seed={})",
        num(est.value),
        num(est.stderr),
        est.n_paths,
        est.horizon_steps,
        num(est.truncation_bias_bound),
        est.seed
    );
    write_output(cli, "price.csv", &estimate_csv(&est))
}

fn cmd_rho_mc(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let model = cfg.build_model()?;
    let region = cfg.build_region(model.dim())?;
    let s = require(cfg.run.s, "s")?;
    let n_paths = require(cfg.run.n_paths, "n_paths")?;
    let seed = cfg.seed(cli.seed)?;
    let refinement = cfg.run.refinement.unwrap_or(2);
    let est = montecarlo::estimate_rho_coupled(
        &model,
        &region,
        s,
        refinement,
        n_paths,
        seed,
        &cfg.mc_config(),
    )?;
    let series = wh_series::rho(&model, &region, s, &cfg.series_config(cli.tol))?;
    say!(
        "rho_mc={} stderr={} (refinement={}, series rho={} at t->0 limit)",
        num(est.value),
        num(est.stderr),
        refinement,
        num(series.value)
    );
    write_output(cli, "rho_mc.csv", &estimate_csv(&est))
}

fn cmd_grid_solve(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let model = cfg.build_model()?;
    let bs = match &model {
        LevyModel::BlackScholes(bs) => bs,
        _ => {
            return Err(Error::UnsupportedModel {
                op: "grid-solve",
                model: model.family_name(),
            }
            .into())
        }
    };
    for &sg in bs.sigma() {
        if (sg - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!(
                    "the grid kernel tabulates unit per-axis variance; rescale \
                     coordinates so every sigma is 1, got {sg}"
                ),
            }
            .into());
        }
    }
    let region = cfg.build_region(model.dim())?;
    let payoff = cfg.build_payoff(&region)?;
    let s = require(cfg.run.s, "s")?;
    let d = model.dim();
    let lo = cfg.run.grid_lo.clone().unwrap_or_else(|| vec![-4.0; d]);
    let hi = cfg.run.grid_hi.clone().unwrap_or_else(|| vec![4.0; d]);
    let cells = match cfg.run.grid_cells.clone() {
        Some(c) => c,
        // Default resolution h ≤ √s/8, rounded up to an even count so no
        // cell center sits exactly on a through-origin boundary.
        None => lo
            .iter()
            .zip(&hi)
            .map(|(&a, &b)| {
                let n = ((b - a) / (s.sqrt() / 8.0)).ceil() as usize;
                n + n % 2
            })
            .collect(),
    };
    let grid = Grid::new(lo, hi, cells)?;
    let kernel = DiscountKernel::new(grid.clone(), s, bs.mu().to_vec(), bs.r())?;
    let g = GridField::from_payoff(grid.clone(), &payoff);
    let tol = cli.tol.or(cfg.run.tol).unwrap_or(1e-9);
    let sol = neumann_price(&kernel, &region, &g, tol)?;
    let residual = fixed_point_residual(&sol.field, &kernel, &region)?;

    let mut csv = String::new();
    for j in 1..=d {
        write!(csv, "x{j},")?;
    }
    csv.push_str("value\n");
    for (i, &v) in sol.field.values().iter().enumerate() {
        for c in grid.center_point(i) {
            write!(csv, "{},", num(c))?;
        }
        writeln!(csv, "{}", num(v))?;
    }
    write_output(cli, "grid_solve.csv", &csv)?;

    let mut doc = json!({
        "s": s,
        "r": bs.r(),
        "discount": kernel.discount(),
        "eps_dom": kernel.eps_dom(),
        "tol": tol,
        "iterations": sol.iterations,
        "last_term_norm": sol.last_term_norm,
        "series_tail_bound": sol.tail_bound,
        "residual": residual,
        "n_cells": grid.n_cells(),
        "cell_widths": grid.cell_widths(),
    });
    if let Some((x, v)) = sol.field.value_at_first_positive_center() {
        doc["boundary_cell"] = json!({ "x": x, "value": v });
    }
    say!(
        "solved in {} iterations; residual={} eps_dom={}",
        sol.iterations,
        num(residual),
        num(kernel.eps_dom())
    );
    write_json(cli, "grid_solve.json", &doc)
}

fn cmd_scaling(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let model = cfg.build_model()?;
    let region = cfg.build_region(model.dim())?;
    let grid = cfg.scaling_grid();
    let series = cfg.series_config(cli.tol);
    let report = scaling_report(&model, &region, &grid, &series)?;
    let slope_tol = cfg.run.slope_tol.unwrap_or(0.03);
    let slope_ok = report.slope_within(slope_tol);
    let pass = slope_ok && report.ratio_increasing;

    let mut csv = String::from("s,rho,lower,upper\n");
    for (&s, &rho) in report.s_values.iter().zip(&report.rho_values) {
        let (lo, hi) = bound_cells(regime_bounds(&model, &region, s)?);
        writeln!(csv, "{},{},{lo},{hi}", num(s), num(rho))?;
    }
    write_output(cli, "scaling.csv", &csv)?;

    say!(
        "slope={} r2={} bracket=[{}, {}] {}",
        num(report.fit.slope),
        num(report.fit.r_squared),
        num(report.bracket.0),
        num(report.bracket.1),
        if pass { "ok" } else { "FAIL" }
    );
    write_json(
        cli,
        "scaling.json",
        &json!({
            "slope": report.fit.slope,
            "intercept": report.fit.intercept,
            "r_squared": report.fit.r_squared,
            "bracket": [report.bracket.0, report.bracket.1],
            "slope_tol": slope_tol,
            "slope_within_bracket": slope_ok,
            "ratio_increasing": report.ratio_increasing,
            "pass": pass,
            "s_max": grid.s_max,
            "factor": grid.factor,
            "n_points": grid.n_points,
            "fit_points": grid.fit_points,
        }),
    )
}

fn cmd_lattice_oracle(cli: &Cli) -> anyhow::Result<()> {
    let (walk, region, q, n_max) = match &cli.config {
        Some(_) => {
            let cfg = load_config(cli)?;
            let model = cfg.build_model()?;
            let walk = match model {
                LevyModel::Lattice(w) => w,
                _ => {
                    return Err(Error::Config(
                        "[model] kind: lattice-oracle requires kind = \"lattice\"".into(),
                    )
                    .into())
                }
            };
            let region = cfg.build_region(walk.dim())?;
            let q = cfg.run.q.unwrap_or(0.5);
            // Default horizons keep the exact recursion at desk scale.
            let n_max = cfg
                .run
                .n_max
                .unwrap_or(if walk.dim() == 1 { 200 } else { 60 });
            (walk, region, q, n_max)
        }
        None => (
            LatticeWalk::symmetric_pm1(),
            HalfSpaceRegion::left_halfline(),
            0.5,
            200,
        ),
    };
    let check = wiener_hopf_zero_freq_check(&walk, &region, q, n_max)?;
    let pass = check.gap <= check.lhs_tail + check.rhs_tail + 1e-12;
    say!(
        "lhs={} rhs={} gap={} (tails {} + {}) {}",
        num(check.lhs),
        num(check.rhs),
        num(check.gap),
        num(check.lhs_tail),
        num(check.rhs_tail),
        if pass { "ok" } else { "FAIL" }
    );
    write_json(
        cli,
        "lattice_oracle.json",
        &json!({
            "q": check.q,
            "n_max": check.n_max,
            "lhs": check.lhs,
            "rhs": check.rhs,
            "gap": check.gap,
            "lhs_tail": check.lhs_tail,
            "rhs_tail": check.rhs_tail,
            "mass_defect": check.mass_defect,
            "pass": pass,
        }),
    )?;
    if !pass {
        return Err(Error::Numeric(
            "lattice identity gap exceeds certified truncation tails".into(),
        )
        .into());
    }
    Ok(())
}
