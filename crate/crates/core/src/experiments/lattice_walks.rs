//! Experiments on the discrete walk in a lattice environment: the Θ₀ tail,
//! the tail of γ, directional transience, the displacement exponent and the
//! renewal structure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{geometric_grid, Check, Outcome, Series, WeightsConfig};
use crate::accel::{gamma_exact, CemeteryGraph, LambdaShape};
use crate::cuts::{beta_min, kappa, lattice_edge_alpha, DEFAULT_SIZE_CAP};
use crate::env::{LatticeEnvironment, Weights};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::rng::{self, lane};
use crate::stats::{
    geometric_fit, hill_sweep, least_squares, median, moment_stabilization, oscillation_check, replica_median,
    tail_index_hill, transience_check, EstimateReport, SignSummary, DEFAULT_RECENCY,
};
use crate::walk::{
    closed_form_theta_tail, exit_time_from, run_discrete, walk_discrete_with, HittingTracker, WalkStreams,
};

/// Environment of replica `i` in replica group `group`.
fn replica_env(w: &Weights<f64>, seed: u64, group: u64, i: u64) -> LatticeEnvironment {
    LatticeEnvironment::new(w.clone(), rng::derive_seed(seed, &[lane::ENVIRONMENT, group, i]))
}

/// Walk streams of replica `i` in replica group `group`.
fn replica_streams(seed: u64, group: u64, i: u64) -> WalkStreams {
    WalkStreams::new(rng::derive_seed(seed, &[lane::REPLICA, group, i]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaTailConfig {
    pub weights: WeightsConfig,
    pub walks: u64,
    pub levels: Vec<u64>,
    pub max_z: f64,
}

impl Default for ThetaTailConfig {
    fn default() -> Self {
        ThetaTailConfig {
            weights: WeightsConfig::new(2, &[1.0, 1.0, 1.0, 1.0]),
            walks: 1_000_000,
            levels: vec![2, 3, 4, 5, 6],
            max_z: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct ThetaRow {
    n: u64,
    monte_carlo: f64,
    closed_form: f64,
    se: f64,
    z: f64,
}

/// Fraction of annealed walks still alternating inside `{0, e₁}` after `n`
/// steps, i.e. `P(Θ₀ > n)`, against the closed-form Gamma ratio.
pub fn theta_tail(cfg: &ThetaTailConfig, seed: u64) -> Result<Outcome> {
    let w = cfg.weights.weights()?;
    if cfg.levels.is_empty() {
        return Err(Error::Config("theta-tail needs at least one level".into()));
    }
    let max_level = *cfg.levels.iter().max().expect("nonempty");
    let levels = cfg.levels.clone();
    let counts = (0..cfg.walks)
        .into_par_iter()
        .map(|i| -> Result<Vec<u64>> {
            let env = replica_env(&w, seed, 0, i);
            let mut streams = replica_streams(seed, 0, i);
            let traj = run_discrete(&env, max_level, Site::ORIGIN, &mut streams.moves)?;
            let theta = exit_time_from(&traj, 0, 0);
            Ok(levels.iter().map(|&n| theta.is_none_or(|t| t > n) as u64).collect())
        })
        .try_reduce(
            || vec![0; levels.len()],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
        )?;
    let mut out = Outcome::new("theta-tail", seed);
    let mut rows = Vec::new();
    let nw = cfg.walks as f64;
    for (&n, &c) in cfg.levels.iter().zip(&counts) {
        let p_hat = c as f64 / nw;
        let exact = closed_form_theta_tail(&w, n);
        let se = (exact * (1.0 - exact) / nw).sqrt();
        let z = (p_hat - exact) / se;
        out.check(Check::below(format!("theta_tail_z_n{n}"), z.abs(), cfg.max_z));
        out.report(
            EstimateReport::new(
                format!("theta_tail_n{n}"),
                p_hat,
                p_hat - 1.96 * se,
                p_hat + 1.96 * se,
                cfg.walks,
                seed,
            )?
            .with_meta("n", n)
            .with_meta("closed_form", exact)
            .with_meta("alpha", w.alpha())
            .with_verdict(z.abs() < cfg.max_z),
        );
        rows.push(ThetaRow {
            n,
            monte_carlo: p_hat,
            closed_form: exact,
            se,
            z,
        });
    }
    out.series.push(Series::new(
        "monte_carlo",
        "n",
        "tail",
        rows.iter().map(|r| (r.n as f64, r.monte_carlo)).collect(),
    ));
    out.series.push(Series::new(
        "closed_form",
        "n",
        "tail",
        rows.iter().map(|r| (r.n as f64, r.closed_form)).collect(),
    ));
    out.table("theta_tail", &rows);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaTailConfig {
    pub weights: WeightsConfig,
    pub lambda: LambdaShape,
    pub samples: u64,
    pub hill_low: f64,
    pub hill_high: f64,
}

impl Default for GammaTailConfig {
    fn default() -> Self {
        GammaTailConfig {
            weights: WeightsConfig::new(2, &[0.3, 0.1, 0.3, 0.1]),
            lambda: LambdaShape::Pair,
            samples: 100_000,
            hill_low: 0.8,
            hill_high: 1.2,
        }
    }
}

/// Hill estimate of the tail index of γ over independent environments,
/// with moment stabilization below and above it.
pub fn gamma_tail(cfg: &GammaTailConfig, seed: u64) -> Result<Outcome> {
    let w = cfg.weights.weights()?;
    let lambda = cfg.lambda.build(w.d())?;
    let graph = CemeteryGraph::contract(&lambda);
    let beta = beta_min(
        &graph,
        &lattice_edge_alpha(&w, &lambda),
        lambda.origin(),
        DEFAULT_SIZE_CAP,
    )?;
    let samples: Vec<f64> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| gamma_exact(&replica_env(&w, seed, 0, i), &Site::ORIGIN, &lambda))
        .collect::<Result<_>>()?;

    let mut out = Outcome::new("gamma-tail", seed);
    let sweep = hill_sweep(&samples)?;
    let central = sweep
        .central()
        .clone()
        .with_seed(seed)
        .with_meta("beta_min", beta.value);
    out.check(Check::within(
        "hill_tail_index",
        central.estimate,
        cfg.hill_low,
        cfg.hill_high,
    ));
    let low = moment_stabilization(&samples, 0.5)?.with_seed(seed);
    let high = moment_stabilization(&samples, 2.0)?.with_seed(seed);
    let label = |r: &EstimateReport| r.verdict.clone().unwrap_or_default();
    out.check(Check::new(
        "moment_half_stable",
        low.estimate,
        "verdict stable",
        label(&low) == "stable",
    ));
    out.check(Check::new(
        "moment_two_diverging",
        high.estimate,
        "verdict diverging",
        label(&high) == "diverging",
    ));

    let n = samples.len();
    let hill_curve = geometric_grid(100.0, (n / 10) as f64, 20)
        .into_iter()
        .map(|k| k.round() as usize)
        .filter_map(|k| tail_index_hill(&samples, k).ok().map(|r| (k as f64, r.estimate)))
        .collect();
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let survival = geometric_grid(1.0, n as f64, 40)
        .into_iter()
        .map(|r| r.round() as usize)
        .map(|r| (sorted[r - 1].ln(), (r as f64 / n as f64).ln()))
        .collect();
    out.series.push(Series::new("hill", "k", "tail_index", hill_curve));
    out.series
        .push(Series::new("survival_loglog", "ln_gamma", "ln_survival", survival));
    out.table("beta_min", &beta);
    out.table("light_tail", sweep.light_tail);
    out.report(central);
    out.report(low);
    out.report(high);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransienceConfig {
    pub weights: WeightsConfig,
    /// Symmetric weights for the oscillation control.
    pub control: WeightsConfig,
    pub replicas: u64,
    pub steps: u64,
    pub min_positive: f64,
    pub min_oscillating: f64,
    pub recency: f64,
}

impl Default for TransienceConfig {
    fn default() -> Self {
        TransienceConfig {
            weights: WeightsConfig::new(3, &[0.12, 0.06, 0.06, 0.04, 0.06, 0.06]),
            control: WeightsConfig::new(3, &[0.08, 0.06, 0.06, 0.08, 0.06, 0.06]),
            replicas: 200,
            steps: 200_000,
            min_positive: 0.95,
            min_oscillating: 0.9,
            recency: DEFAULT_RECENCY,
        }
    }
}

fn sign_summaries(w: &Weights<f64>, replicas: u64, steps: u64, seed: u64, group: u64) -> Result<Vec<SignSummary>> {
    let d = w.d();
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let env = replica_env(w, seed, group, i);
            let mut streams = replica_streams(seed, group, i);
            let mut proj = Vec::with_capacity(steps as usize + 1);
            walk_discrete_with(&env, steps, Site::ORIGIN, &mut streams.moves, |_, x| {
                proj.push(x.project(0, d))
            })?;
            Ok(SignSummary::from_projections(proj))
        })
        .collect()
}

/// Terminal sign of `Z · e₁` under drifted weights, and the oscillation
/// class under symmetric control weights.
pub fn transience(cfg: &TransienceConfig, seed: u64) -> Result<Outcome> {
    let w = cfg.weights.weights()?;
    let control = cfg.control.weights()?;
    if !control.is_symmetric() {
        return Err(Error::InvalidWeights("the control weights must be symmetric".into()));
    }
    let drifted = sign_summaries(&w, cfg.replicas, cfg.steps, seed, 0)?;
    let symmetric = sign_summaries(&control, cfg.replicas, cfg.steps, seed, 1)?;

    let mut out = Outcome::new("transience", seed);
    let positive = transience_check(&drifted)?
        .with_seed(seed)
        .with_meta("alpha", w.alpha())
        .with_meta("kappa", kappa(&w))
        .with_meta("steps", cfg.steps);
    out.check(Check::new(
        "terminal_positive_fraction",
        positive.estimate,
        format!(">= {}", cfg.min_positive),
        positive.estimate >= cfg.min_positive,
    ));
    let osc = oscillation_check(&symmetric, cfg.recency)?;
    out.check(Check::new(
        "control_oscillating_fraction",
        osc.oscillating,
        format!(">= {}", cfg.min_oscillating),
        osc.oscillating >= cfg.min_oscillating,
    ));
    out.table(
        "control_classes",
        serde_json::json!({
            "oscillating": osc.oscillating,
            "plus_transient": osc.plus_transient,
            "minus_transient": osc.minus_transient,
            "dominant": osc.dominant,
        }),
    );
    let terminals = |s: &[SignSummary]| -> Vec<(f64, f64)> {
        s.iter()
            .enumerate()
            .map(|(i, x)| (i as f64, x.terminal as f64))
            .collect()
    };
    out.series.push(Series::new(
        "terminal_drifted",
        "replica",
        "terminal_projection",
        terminals(&drifted),
    ));
    out.series.push(Series::new(
        "terminal_control",
        "replica",
        "terminal_projection",
        terminals(&symmetric),
    ));
    out.report(positive);
    out.report(
        osc.report
            .with_seed(seed)
            .with_meta("alpha", control.alpha())
            .with_meta("steps", cfg.steps),
    );
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentConfig {
    pub weights: WeightsConfig,
    pub replicas: u64,
    pub steps: u64,
    pub first_time: u64,
    pub grid_points: usize,
    pub levels: Vec<u64>,
    pub displacement_tolerance: f64,
    pub hitting_tolerance: f64,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        ExponentConfig {
            weights: WeightsConfig::new(3, &[0.12, 0.06, 0.06, 0.04, 0.06, 0.06]),
            replicas: 100,
            steps: 1_000_000,
            first_time: 1000,
            grid_points: 16,
            levels: (0..11).map(|k| 10 << k).collect(),
            displacement_tolerance: 0.15,
            hitting_tolerance: 0.35,
        }
    }
}

struct ReplicaPath {
    /// Running maximum of `Z · e₁` at each grid time.
    running_max: Vec<i64>,
    /// First passage step of each level, `None` when censored.
    hits: Vec<Option<u64>>,
}

/// Log-log slopes of the running maximum against time and of hitting times
/// against level, one per replica, summarized by their medians.
pub fn exponent(cfg: &ExponentConfig, seed: u64) -> Result<Outcome> {
    let w = cfg.weights.weights()?;
    let d = w.d();
    let kappa_value = kappa(&w);
    if cfg.steps <= cfg.first_time || cfg.grid_points < 4 {
        return Err(Error::Config(
            "the time grid needs steps > first_time and at least 4 points".into(),
        ));
    }
    let mut grid: Vec<u64> = geometric_grid(cfg.first_time as f64, cfg.steps as f64, cfg.grid_points)
        .into_iter()
        .map(|t| t.round() as u64)
        .collect();
    grid.dedup();
    let paths: Vec<ReplicaPath> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| -> Result<ReplicaPath> {
            let env = replica_env(&w, seed, 0, i);
            let mut streams = replica_streams(seed, 0, i);
            let mut tracker = HittingTracker::new(cfg.levels.clone());
            let mut running_max = Vec::with_capacity(grid.len());
            let mut best = 0i64;
            let mut next = 0;
            walk_discrete_with(&env, cfg.steps, Site::ORIGIN, &mut streams.moves, |n, x| {
                let p = x.project(0, d);
                best = best.max(p);
                tracker.observe(n, p);
                if next < grid.len() && n == grid[next] {
                    running_max.push(best);
                    next += 1;
                }
            })?;
            Ok(ReplicaPath {
                running_max,
                hits: tracker.hits().to_vec(),
            })
        })
        .collect::<Result<_>>()?;

    let mut levels = cfg.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    let decades = |pts: &[(f64, f64)]| {
        pts.len() >= 4 && (pts[pts.len() - 1].0 - pts[0].0) / std::f64::consts::LN_10 >= 2.0 - 1e-9
    };
    let mut disp_slopes = Vec::new();
    let mut hit_slopes = Vec::new();
    for path in &paths {
        let pts: Vec<(f64, f64)> = grid
            .iter()
            .zip(&path.running_max)
            .filter(|(_, &m)| m > 0)
            .map(|(&t, &m)| ((t as f64).ln(), (m as f64).ln()))
            .collect();
        if decades(&pts) {
            disp_slopes.push(least_squares(&pts)?.slope);
        }
        let pts: Vec<(f64, f64)> = levels
            .iter()
            .zip(&path.hits)
            .filter_map(|(&l, h)| h.filter(|&t| t > 0).map(|t| ((l as f64).ln(), (t as f64).ln())))
            .collect();
        if decades(&pts) {
            hit_slopes.push(least_squares(&pts)?.slope);
        }
    }

    let mut out = Outcome::new("exponent", seed);
    let disp = replica_median(
        "displacement_exponent",
        &disp_slopes,
        rng::derive_seed(seed, &[lane::BOOTSTRAP, 0]),
    )?
    .with_meta("kappa", kappa_value)
    .with_meta("replicas_used", disp_slopes.len())
    .with_meta("alpha", w.alpha());
    let hit = replica_median(
        "hitting_time_exponent",
        &hit_slopes,
        rng::derive_seed(seed, &[lane::BOOTSTRAP, 1]),
    )?
    .with_meta("inverse_kappa", 1.0 / kappa_value)
    .with_meta("replicas_used", hit_slopes.len())
    .with_meta("alpha", w.alpha());
    out.check(Check::within(
        "displacement_slope_median",
        disp.estimate,
        kappa_value - cfg.displacement_tolerance,
        kappa_value + cfg.displacement_tolerance,
    ));
    out.check(Check::within(
        "hitting_slope_median",
        hit.estimate,
        1.0 / kappa_value - cfg.hitting_tolerance,
        1.0 / kappa_value + cfg.hitting_tolerance,
    ));
    let (recip_lo, recip_hi) = (1.0 / hit.ci_high, 1.0 / hit.ci_low);
    let overlap = disp.ci_low <= recip_hi && recip_lo <= disp.ci_high;
    out.check(Check::new(
        "reciprocal_consistency",
        disp.estimate * hit.estimate,
        format!(
            "CI [{:.4}, {:.4}] meets [{:.4}, {:.4}]",
            disp.ci_low, disp.ci_high, recip_lo, recip_hi
        ),
        overlap,
    ));

    let median_max: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let v: Vec<f64> = paths.iter().map(|p| p.running_max[k] as f64).collect();
            (t as f64, median(&v))
        })
        .collect();
    let median_hit: Vec<(f64, f64)> = levels
        .iter()
        .enumerate()
        .filter_map(|(k, &l)| {
            let v: Vec<f64> = paths
                .iter()
                .map(|p| p.hits[k].map_or(f64::INFINITY, |t| t as f64))
                .collect();
            let m = median(&v);
            m.is_finite().then_some((l as f64, m))
        })
        .collect();
    out.series
        .push(Series::new("running_max", "n", "median_max_projection", median_max));
    out.series
        .push(Series::new("hitting_times", "level", "median_hitting_time", median_hit));
    out.series.push(Series::new(
        "displacement_slopes",
        "replica",
        "slope",
        disp_slopes.iter().enumerate().map(|(i, s)| (i as f64, *s)).collect(),
    ));
    out.report(disp);
    out.report(hit);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenewalsConfig {
    pub weights: WeightsConfig,
    pub replicas: u64,
    pub steps: u64,
    /// Trailing fraction of each trajectory whose renewals are provisional.
    pub provisional_fraction: f64,
    pub min_p_value: f64,
    pub max_autocorrelation_z: f64,
}

impl Default for RenewalsConfig {
    fn default() -> Self {
        RenewalsConfig {
            weights: WeightsConfig::new(3, &[0.12, 0.06, 0.06, 0.04, 0.06, 0.06]),
            replicas: 100,
            steps: 200_000,
            provisional_fraction: 0.1,
            min_p_value: 0.01,
            max_autocorrelation_z: 5.0,
        }
    }
}

/// Geometric law and lag-1 independence of the level gaps between
/// confirmed renewals.
pub fn renewals(cfg: &RenewalsConfig, seed: u64) -> Result<Outcome> {
    let w = cfg.weights.weights()?;
    let d = w.d();
    let per_replica: Vec<Vec<u64>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| -> Result<Vec<u64>> {
            let env = replica_env(&w, seed, 0, i);
            let mut streams = replica_streams(seed, 0, i);
            let mut proj = Vec::with_capacity(cfg.steps as usize + 1);
            walk_discrete_with(&env, cfg.steps, Site::ORIGIN, &mut streams.moves, |_, x| {
                proj.push(x.project(0, d))
            })?;
            Ok(crate::walk::renewals_from_projections(&proj, cfg.provisional_fraction).confirmed_gaps())
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<u64> = per_replica.iter().flatten().copied().collect();
    let fit = geometric_fit(&gaps)?;

    let mean = gaps.iter().sum::<u64>() as f64 / gaps.len() as f64;
    let mut num = 0.0;
    let mut pairs = 0usize;
    for g in &per_replica {
        for w in g.windows(2) {
            num += (w[0] as f64 - mean) * (w[1] as f64 - mean);
            pairs += 1;
        }
    }
    let den: f64 = gaps.iter().map(|&g| (g as f64 - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
    let rho = if pairs == 0 || den == 0.0 {
        0.0
    } else {
        num / pairs as f64 / den
    };
    let rho_z = rho * (pairs.max(1) as f64).sqrt();

    let mut out = Outcome::new("renewals", seed);
    out.check(Check::new(
        "geometric_gap_p_value",
        fit.p_value,
        format!("> {}", cfg.min_p_value),
        fit.p_value > cfg.min_p_value,
    ));
    out.check(Check::below(
        "gap_lag1_autocorrelation_z",
        rho_z.abs(),
        cfg.max_autocorrelation_z,
    ));
    let max_gap = gaps.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0u64; max_gap as usize + 1];
    for &g in &gaps {
        hist[g as usize] += 1;
    }
    out.series.push(Series::new(
        "gap_histogram",
        "gap",
        "count",
        hist.iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| (k as f64, c as f64))
            .collect(),
    ));
    out.table(
        "gap_summary",
        serde_json::json!({
            "gaps": gaps.len(),
            "mean_gap": mean,
            "chi_square": fit.chi_square,
            "dof": fit.dof,
            "lag1_autocorrelation": rho,
        }),
    );
    out.report(
        fit.report
            .with_seed(seed)
            .with_meta("alpha", w.alpha())
            .with_meta("lag1_autocorrelation", rho),
    );
    Ok(out)
}
