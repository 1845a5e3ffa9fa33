//! Torus experiments: stationarity and `E[f_N] = 1`, the L_p trend of
//! `f_N`, and the law of the time-reversed environment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Check, GammaChoice, Outcome, Series, WeightsConfig};
use crate::accel::{GammaMethod, LambdaShape};
use crate::cuts::kappa_lambda;
use crate::env::sample_torus_env;
use crate::error::Result;
use crate::rng;
use crate::stats::{mean_and_se, EstimateReport};
use crate::torus::{
    batch_env_seed, lp_norm_estimate, reversal_law_check, reversed_env, sample_densities, stationary_distribution,
};

/// Largest tolerated `‖πP − π‖_∞`.
pub const STATIONARY_TOL: f64 = 1e-12;
/// Largest tolerated generator balance residual of π̃.
pub const BALANCE_TOL: f64 = 1e-10;
/// Largest tolerated entry difference after reversing twice.
pub const INVOLUTION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusDensityConfig {
    pub weight_sets: Vec<WeightsConfig>,
    pub torus_sizes: Vec<usize>,
    pub lambda: LambdaShape,
    /// Environments per (weights, N) pair.
    pub environments: u64,
    pub max_z: f64,
    /// The L_p trend phase; omitted from a configuration file, it keeps
    /// its defaults.
    pub lp: Option<LpTrendConfig>,
}

impl Default for TorusDensityConfig {
    fn default() -> Self {
        TorusDensityConfig {
            weight_sets: vec![
                WeightsConfig::new(2, &[0.6, 0.3, 0.4, 0.2]),
                WeightsConfig::new(3, &[0.5, 0.3, 0.4, 0.2, 0.3, 0.4]),
            ],
            torus_sizes: vec![3, 4, 5],
            lambda: LambdaShape::Pair,
            environments: 10_000,
            max_z: 5.0,
            lp: Some(LpTrendConfig::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct DensityCell {
    d: usize,
    n: usize,
    mean_f: f64,
    se: f64,
    z: f64,
    max_stationary_residual: f64,
    max_balance_residual: f64,
}

/// Solves π on every sampled torus and checks stationarity, generator
/// balance of π̃ and `E[f_N] = 1`.
pub fn torus_density(cfg: &TorusDensityConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("torus-density", seed);
    let mut cells = Vec::new();
    let mut worst_stationary: f64 = 0.0;
    let mut worst_balance: f64 = 0.0;
    for wc in &cfg.weight_sets {
        let w = wc.weights()?;
        let lambda = cfg.lambda.build(w.d())?;
        let mut series = Vec::new();
        for &n in &cfg.torus_sizes {
            let cell_seed = rng::derive_seed(seed, &[w.d() as u64, n as u64]);
            let samples = sample_densities(&w, n, &lambda, GammaMethod::default(), cfg.environments, cell_seed)?;
            let f: Vec<f64> = samples.iter().map(|s| s.f_n).collect();
            let (mean, se) = mean_and_se(&f)?;
            let z = (mean - 1.0) / se;
            let stat = samples.iter().map(|s| s.stationary_residual).fold(0.0, f64::max);
            let bal = samples.iter().map(|s| s.balance_residual).fold(0.0, f64::max);
            worst_stationary = worst_stationary.max(stat);
            worst_balance = worst_balance.max(bal);
            out.check(Check::below(format!("mean_f_z_d{}_n{n}", w.d()), z.abs(), cfg.max_z));
            out.report(
                EstimateReport::new(
                    "mean_f_n",
                    mean,
                    mean - 1.96 * se,
                    mean + 1.96 * se,
                    cfg.environments,
                    cell_seed,
                )?
                .with_meta("d", w.d())
                .with_meta("N", n)
                .with_meta("alpha", w.alpha())
                .with_meta("lambda", cfg.lambda.to_string())
                .with_verdict(z.abs() < cfg.max_z),
            );
            series.push((n as f64, mean));
            cells.push(DensityCell {
                d: w.d(),
                n,
                mean_f: mean,
                se,
                z,
                max_stationary_residual: stat,
                max_balance_residual: bal,
            });
        }
        out.series
            .push(Series::new(&format!("mean_f_d{}", w.d()), "N", "mean_f_N", series));
    }
    out.check(Check::at_most(
        "max_stationary_residual",
        worst_stationary,
        STATIONARY_TOL,
    ));
    out.check(Check::at_most("max_balance_residual", worst_balance, BALANCE_TOL));
    out.table("density_cells", &cells);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpTrendConfig {
    pub weights: WeightsConfig,
    pub lambda: LambdaShape,
    pub torus_sizes: Vec<usize>,
    pub p: f64,
    pub environments: u64,
    pub gamma: GammaChoice,
    /// Largest tolerated ratio of the largest to the smallest estimate.
    pub max_ratio: f64,
}

impl Default for LpTrendConfig {
    fn default() -> Self {
        LpTrendConfig {
            weights: WeightsConfig::new(3, &[0.18, 0.09, 0.09, 0.06, 0.09, 0.09]),
            lambda: LambdaShape::Diamond(2),
            torus_sizes: vec![3, 4, 5, 6],
            p: 1.2,
            environments: 200,
            gamma: GammaChoice::MonteCarlo,
            max_ratio: 3.0,
        }
    }
}

/// `E[f_N^p]` across torus sizes; the gate bounds the spread of the raw
/// estimates.
pub fn lp_trend(cfg: &LpTrendConfig, seed: u64) -> Result<Outcome> {
    let w = cfg.weights.weights()?;
    let lambda = cfg.lambda.build(w.d())?;
    let kl = kappa_lambda(&w, &lambda)?;
    let mut out = Outcome::new("torus-density", seed);
    let mut raw = Vec::new();
    let mut wins = Vec::new();
    let mut rows = Vec::new();
    for &n in &cfg.torus_sizes {
        let cell_seed = rng::derive_seed(seed, &[rng::lane::SAMPLES, n as u64]);
        let est = lp_norm_estimate(
            &w,
            n,
            cfg.p,
            &lambda,
            cfg.gamma.method(cell_seed),
            cfg.environments,
            cell_seed,
        )?;
        raw.push((n as f64, est.raw.estimate));
        wins.push((n as f64, est.winsorized.estimate));
        out.report(est.raw.with_meta("kappa_lambda", kl.value));
        out.report(est.winsorized);
        rows.extend(est.rows);
    }
    let hi = raw.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = raw.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    out.check(Check::below("lp_max_min_ratio", hi / lo, cfg.max_ratio));
    out.check(Check::new(
        "lp_order_below_kappa_lambda",
        kl.value,
        format!("> p = {}", cfg.p),
        kl.value > cfg.p,
    ));
    out.series.push(Series::new("lp_raw", "N", "mean_f_N_pow_p", raw));
    out.series
        .push(Series::new("lp_winsorized", "N", "mean_f_N_pow_p", wins));
    out.cut_table("kappa_lambda", &kl, w.d());
    out.table("density_rows", &rows);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReversalConfig {
    pub weights: WeightsConfig,
    pub n: usize,
    pub environments: u64,
    pub max_z: f64,
    /// Environments reversed twice for the involution check.
    pub involution_environments: u64,
}

impl Default for ReversalConfig {
    fn default() -> Self {
        ReversalConfig {
            weights: WeightsConfig::new(2, &[0.6, 0.3, 0.4, 0.2]),
            n: 3,
            environments: 50_000,
            max_z: 5.0,
            involution_environments: 200,
        }
    }
}

/// Law of `ω̌(0, ·)` against Dirichlet(α̌), and `(ω̌)̌ = ω`.
pub fn reversal_check(cfg: &ReversalConfig, seed: u64) -> Result<Outcome> {
    let w = cfg.weights.weights()?;
    let mut out = Outcome::new("reversal-check", seed);
    let law = reversal_law_check(&w, cfg.n, cfg.environments, seed)?;
    let max_z = law.estimate;
    if let Some(zs) = law.metadata.get("z_scores").and_then(|v| v.as_array()) {
        let points = zs
            .iter()
            .enumerate()
            .map(|(i, z)| (i as f64, z.as_f64().unwrap_or(f64::NAN)))
            .collect();
        out.series.push(Series::new("z_scores", "moment_index", "z", points));
    }
    out.check(Check::below("reversal_max_abs_z", max_z, cfg.max_z));
    out.report(law);

    let inv_seed = rng::derive_seed(seed, &[rng::lane::ENVIRONMENT]);
    let worst = (0..cfg.involution_environments)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let env = sample_torus_env(&w, cfg.n, batch_env_seed(inv_seed, i))?;
            let pi = stationary_distribution(&env)?;
            let rev = reversed_env(&env, &pi)?;
            let pi_rev = stationary_distribution(&rev)?;
            let back = reversed_env(&rev, &pi_rev)?;
            Ok(env
                .sites()
                .iter()
                .zip(back.sites())
                .flat_map(|(a, b)| a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.check(Check::at_most("double_reversal_max_deviation", worst, INVOLUTION_TOL));
    out.report(
        EstimateReport::new(
            "double_reversal_max_deviation",
            worst,
            worst,
            worst,
            cfg.involution_environments,
            inv_seed,
        )?
        .with_verdict(worst <= INVOLUTION_TOL),
    );
    Ok(out)
}
