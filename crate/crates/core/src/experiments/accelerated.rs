//! Experiments on the accelerated walk: the velocity and the tail of
//! excursions over unit time windows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Check, GammaChoice, Outcome, Series, WeightsConfig};
use crate::accel::LambdaShape;
use crate::cuts::kappa_lambda;
use crate::env::{LatticeEnvironment, Weights};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::rng::{self, lane};
use crate::stats::velocity_estimate;
use crate::walk::{excursion_max, run_accelerated, GammaCache, Trajectory, WalkStreams};

fn accelerated_replicas(
    w: &Weights<f64>,
    lambda: LambdaShape,
    gamma: GammaChoice,
    replicas: u64,
    horizon: f64,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let lambda = lambda.build(w.d())?;
    let method = gamma.method(seed);
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let env = LatticeEnvironment::new(w.clone(), rng::derive_seed(seed, &[lane::ENVIRONMENT, i]));
            let mut cache = GammaCache::new(&env, &lambda, method.for_environment(i));
            let mut streams = WalkStreams::new(rng::derive_seed(seed, &[lane::REPLICA, i]));
            run_accelerated(&env, &mut cache, horizon, Site::ORIGIN, &mut streams)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VelocityConfig {
    pub weights: WeightsConfig,
    pub lambda: LambdaShape,
    pub replicas: u64,
    pub horizon: f64,
    pub gamma: GammaChoice,
}

impl Default for VelocityConfig {
    fn default() -> Self {
        VelocityConfig {
            weights: WeightsConfig::new(3, &[0.18, 0.09, 0.09, 0.06, 0.09, 0.09]),
            lambda: LambdaShape::Diamond(2),
            replicas: 20,
            horizon: 2000.0,
            gamma: GammaChoice::MonteCarlo,
        }
    }
}

/// `X_T / T` over replicas: the drift axis must be positive and every
/// other axis compatible with 0.
pub fn velocity(cfg: &VelocityConfig, seed: u64) -> Result<Outcome> {
    let w = cfg.weights.weights()?;
    let d = w.d();
    let kl = kappa_lambda(&w, &cfg.lambda.build(d)?)?;
    let trajs = accelerated_replicas(&w, cfg.lambda, cfg.gamma, cfg.replicas, cfg.horizon, seed)?;
    let finals = trajs
        .iter()
        .map(|t| {
            t.position_at(cfg.horizon)
                .map(|x| x.coords(d).iter().map(|&c| c as f64).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let reports = velocity_estimate(&finals, cfg.horizon, rng::derive_seed(seed, &[lane::BOOTSTRAP]))?;

    let mut out = Outcome::new("velocity", seed);
    for (axis, r) in reports.iter().enumerate() {
        if axis == 0 {
            out.check(Check::new("velocity_axis_1_ci_low", r.ci_low, "> 0", r.ci_low > 0.0));
        } else {
            out.check(Check::new(
                format!("velocity_axis_{}_contains_zero", axis + 1),
                r.estimate,
                format!("CI [{:.4}, {:.4}] contains 0", r.ci_low, r.ci_high),
                r.contains(0.0),
            ));
        }
    }
    let jumps: Vec<(f64, f64)> = trajs
        .iter()
        .enumerate()
        .map(|(i, t)| (i as f64, t.steps() as f64))
        .collect();
    out.series.push(Series::new("jumps", "replica", "jump_count", jumps));
    out.series.push(Series::new(
        "final_axis_1",
        "replica",
        "x1_over_horizon",
        finals
            .iter()
            .enumerate()
            .map(|(i, x)| (i as f64, x[0] / cfg.horizon))
            .collect(),
    ));
    if let Some(first) = trajs.first() {
        out.series.push(Series::new(
            "path_axis_1",
            "t",
            "x1",
            sample_path(first, cfg.horizon, 1000)?,
        ));
    }
    out.cut_table("kappa_lambda", &kl, d);
    for r in reports {
        out.report(
            r.with_meta("alpha", w.alpha())
                .with_meta("lambda", cfg.lambda.to_string())
                .with_meta("kappa_lambda", kl.value),
        );
    }
    Ok(out)
}

fn sample_path(t: &Trajectory, horizon: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    (0..=points)
        .map(|k| {
            let s = horizon * k as f64 / points as f64;
            Ok((s, t.position_at(s)?.coord(0) as f64))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcursionsConfig {
    pub weights: WeightsConfig,
    pub lambda: LambdaShape,
    pub replicas: u64,
    /// Continuous horizon per replica; each contributes `⌊horizon⌋` windows.
    pub horizon: f64,
    pub gamma: GammaChoice,
    /// Number of successive tail ratios that must decrease.
    pub ratios: u32,
}

impl Default for ExcursionsConfig {
    fn default() -> Self {
        ExcursionsConfig {
            weights: WeightsConfig::new(3, &[0.18, 0.09, 0.09, 0.06, 0.09, 0.09]),
            lambda: LambdaShape::Diamond(2),
            replicas: 10,
            horizon: 1000.0,
            gamma: GammaChoice::MonteCarlo,
            ratios: 4,
        }
    }
}

/// Radius of the ball around the origin containing Λ used for the
/// thresholds `2kR_Λ`; a single site fits in the ball of radius 1/2.
pub fn ball_radius(linf_radius: u64) -> f64 {
    if linf_radius == 0 {
        0.5
    } else {
        linf_radius as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct TailRow {
    k: u32,
    threshold: f64,
    count: u64,
    probability: f64,
}

/// Empirical `P(D ≥ 2kR_Λ)` over unit windows of the accelerated walk
/// along `e₁`; the successive ratios must strictly decrease.
pub fn excursions(cfg: &ExcursionsConfig, seed: u64) -> Result<Outcome> {
    let w = cfg.weights.weights()?;
    let lambda = cfg.lambda.build(w.d())?;
    let radius = ball_radius(lambda.radius());
    if cfg.ratios == 0 {
        return Err(Error::Config("at least one ratio is needed".into()));
    }
    let trajs = accelerated_replicas(&w, cfg.lambda, cfg.gamma, cfg.replicas, cfg.horizon, seed)?;
    let windows = cfg.horizon.floor() as u64;
    let mut maxima = Vec::with_capacity((windows * cfg.replicas) as usize);
    for t in &trajs {
        for n in 0..windows {
            maxima.push(excursion_max(t, 0, n as f64)?);
        }
    }
    let total = maxima.len() as f64;
    let rows: Vec<TailRow> = (1..=cfg.ratios + 1)
        .map(|k| {
            let threshold = 2.0 * k as f64 * radius;
            let count = maxima.iter().filter(|&&m| m >= threshold).count() as u64;
            TailRow {
                k,
                threshold,
                count,
                probability: count as f64 / total,
            }
        })
        .collect();
    let ratios: Vec<f64> = rows.windows(2).map(|r| r[1].probability / r[0].probability).collect();

    let mut out = Outcome::new("excursions", seed);
    for row in &rows[..cfg.ratios as usize] {
        out.check(Check::new(
            format!("tail_count_k{}", row.k),
            row.count as f64,
            "> 0",
            row.count > 0,
        ));
    }
    for (k, pair) in ratios.windows(2).enumerate() {
        out.check(Check::new(
            format!("ratio_decreasing_k{}", k + 2),
            pair[1],
            format!("< {}", pair[0]),
            pair[1] < pair[0],
        ));
    }
    out.series.push(Series::new(
        "tail",
        "k",
        "probability",
        rows.iter().map(|r| (r.k as f64, r.probability)).collect(),
    ));
    out.series.push(Series::new(
        "ratio",
        "k",
        "successive_ratio",
        ratios.iter().enumerate().map(|(k, r)| ((k + 1) as f64, *r)).collect(),
    ));
    out.table("tail", &rows);
    out.table("ratios", &ratios);
    out.table("windows", maxima.len());
    Ok(out)
}
