//! Site-level experiments: Dirichlet moments, the singleton γ identity, κ^Λ
//! tables and the exponent summary.

use num_rational::Rational64;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Check, Outcome, Series, WeightsConfig};
use crate::accel::{gamma_exact, NeighborhoodSet};
use crate::cuts::{box_kappa_lambda, kappa, kappa_lambda_with_cap, min_radius_for, DEFAULT_SIZE_CAP};
use crate::env::{dirichlet_moment, drift, sample_dirichlet, ExplicitEnvironment, LatticeEnvironment, Weights};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::rng::{self, lane};
use crate::stats::EstimateReport;

const BLOCK: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerMomentsConfig {
    pub weights: WeightsConfig,
    pub draws: u64,
    /// Largest tolerated |z| over all first and second moments.
    pub max_z: f64,
}

impl Default for SamplerMomentsConfig {
    fn default() -> Self {
        SamplerMomentsConfig {
            weights: WeightsConfig::new(3, &[0.5, 0.1, 0.1, 0.1, 0.1, 0.1]),
            draws: 200_000,
            max_z: 5.0,
        }
    }
}

/// Exponent vectors of every first moment and every second moment
/// `E[ω_i ω_j]`, `i ≤ j`.
fn moment_battery(k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..k {
        let mut t = vec![0.0; k];
        t[i] = 1.0;
        out.push(t);
    }
    for i in 0..k {
        for j in i..k {
            let mut t = vec![0.0; k];
            t[i] += 1.0;
            t[j] += 1.0;
            out.push(t);
        }
    }
    out
}

/// Compares sample moments of `draws` Dirichlet vectors with the exact
/// moments, one z-score per moment.
pub fn sampler_moments(cfg: &SamplerMomentsConfig, seed: u64) -> Result<Outcome> {
    let w = cfg.weights.weights()?;
    let k = w.alpha().len();
    let battery = moment_battery(k);
    let m = battery.len();
    let blocks = cfg.draws.div_ceil(BLOCK);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut stream = rng::stream(seed, &[lane::SAMPLES, b]);
            let mut sum = vec![0.0; m];
            let mut sq = vec![0.0; m];
            let n = BLOCK.min(cfg.draws - b * BLOCK);
            for _ in 0..n {
                let p = sample_dirichlet(&w, &mut stream);
                for (idx, theta) in battery.iter().enumerate() {
                    let v: f64 = theta
                        .iter()
                        .enumerate()
                        .filter(|(_, &t)| t > 0.0)
                        .map(|(i, &t)| p.get(i).powi(t as i32))
                        .product();
                    sum[idx] += v;
                    sq[idx] += v * v;
                }
            }
            (sum, sq)
        })
        .collect();
    let n = cfg.draws as f64;
    let mut out = Outcome::new("sampler-moments", seed);
    let mut max_abs_z: f64 = 0.0;
    let mut zs = Vec::with_capacity(m);
    for (idx, theta) in battery.iter().enumerate() {
        let s: f64 = partial.iter().map(|p| p.0[idx]).sum();
        let s2: f64 = partial.iter().map(|p| p.1[idx]).sum();
        let mean = s / n;
        let var = (s2 / n - mean * mean) * n / (n - 1.0);
        let se = (var / n).sqrt();
        let exact = dirichlet_moment(&w, theta)?;
        let z = (mean - exact) / se;
        max_abs_z = max_abs_z.max(z.abs());
        zs.push((idx as f64, z));
        out.report(
            EstimateReport::new(
                format!("dirichlet_moment_{}", exponent_label(theta)),
                mean,
                mean - 1.96 * se,
                mean + 1.96 * se,
                cfg.draws,
                seed,
            )?
            .with_meta("theta", theta)
            .with_meta("exact", exact)
            .with_meta("z", z)
            .with_meta("alpha", w.alpha()),
        );
    }
    out.check(Check::below("max_abs_z", max_abs_z, cfg.max_z));
    out.series.push(Series::new("z_scores", "moment_index", "z", zs));
    Ok(out)
}

fn exponent_label(theta: &[f64]) -> String {
    theta
        .iter()
        .map(|t| format!("{}", *t as u32))
        .collect::<Vec<_>>()
        .join("")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaIdentityConfig {
    pub weights: WeightsConfig,
    pub environments: u64,
}

impl Default for GammaIdentityConfig {
    fn default() -> Self {
        GammaIdentityConfig {
            weights: WeightsConfig::new(3, &[0.5, 0.1, 0.1, 0.1, 0.1, 0.1]),
            environments: 1000,
        }
    }
}

/// Largest tolerated |γ − 1| for `Λ = {0}`: the exit probabilities sum to 1
/// only up to rounding.
pub const IDENTITY_TOL: f64 = 4.0 * f64::EPSILON;
const UNIFORM_PAIR_TOL: f64 = 1e-12;

/// `γ ≡ 1` for the singleton neighborhood by path enumeration over random
/// environments, and `γ = 16/15` for the pair in the uniform environment.
pub fn gamma_identity(cfg: &GammaIdentityConfig, seed: u64) -> Result<Outcome> {
    let w = cfg.weights.weights()?;
    let d = w.d();
    let singleton = NeighborhoodSet::singleton(d);
    let deviations: Vec<f64> = (0..cfg.environments)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let env = LatticeEnvironment::new(w.clone(), rng::derive_seed(seed, &[lane::ENVIRONMENT, i]));
            let offset = Site::unit(0, d).step(d + 1, d);
            let a = gamma_exact(&env, &Site::ORIGIN, &singleton)?;
            let b = gamma_exact(&env, &offset, &singleton)?;
            Ok((a - 1.0).abs().max((b - 1.0).abs()))
        })
        .collect::<Result<_>>()?;
    let max_dev = deviations.iter().copied().fold(0.0, f64::max);

    let uniform = ExplicitEnvironment::uniform(2);
    let pair = NeighborhoodSet::pair(2)?;
    let g = gamma_exact(&uniform, &Site::ORIGIN, &pair)?;
    let pair_dev = (g - 16.0 / 15.0).abs();

    let mut out = Outcome::new("gamma-identity", seed);
    out.check(Check::at_most("singleton_max_deviation", max_dev, IDENTITY_TOL));
    out.check(Check::at_most("uniform_pair_deviation", pair_dev, UNIFORM_PAIR_TOL));
    out.report(
        EstimateReport::new(
            "gamma_singleton_max_deviation",
            max_dev,
            max_dev,
            max_dev,
            cfg.environments,
            seed,
        )?
        .with_meta("alpha", w.alpha())
        .with_verdict(max_dev <= IDENTITY_TOL),
    );
    out.report(
        EstimateReport::new("gamma_uniform_pair", g, g, g, 1, seed)?
            .with_meta("expected", 16.0 / 15.0)
            .with_verdict(pair_dev <= UNIFORM_PAIR_TOL),
    );
    Ok(out)
}

/// One κ^Λ table entry: weights and the box radii to tabulate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaCase {
    pub d: usize,
    pub alpha: Vec<f64>,
    pub radii: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KappaTablesConfig {
    pub cases: Vec<KappaCase>,
    pub size_cap: usize,
}

impl Default for KappaTablesConfig {
    fn default() -> Self {
        let case = |d: usize, alpha: &[f64], radii: &[u32]| KappaCase {
            d,
            alpha: alpha.to_vec(),
            radii: radii.to_vec(),
        };
        KappaTablesConfig {
            cases: vec![
                case(2, &[0.5, 0.2, 0.3, 0.1], &[1, 2]),
                case(2, &[0.1, 0.1, 0.1, 0.1], &[1, 2]),
                case(2, &[0.3, 0.05, 0.2, 0.25], &[1, 2]),
                case(3, &[0.5, 0.1, 0.1, 0.1, 0.1, 0.1], &[1]),
                case(3, &[0.12, 0.06, 0.06, 0.04, 0.06, 0.06], &[1]),
                case(3, &[0.18, 0.09, 0.09, 0.06, 0.09, 0.09], &[1]),
            ],
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

/// Converts decimal weights to the nearest small-denominator rationals.
pub fn exact_weights(d: usize, alpha: &[f64]) -> Result<Weights<Rational64>> {
    let exact = alpha
        .iter()
        .map(|&a| {
            Rational64::approximate_float(a)
                .ok_or_else(|| Error::InvalidWeights(format!("{a} has no rational approximation")))
        })
        .collect::<Result<Vec<_>>>()?;
    Weights::new(d, exact)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct KappaRow {
    d: usize,
    radius: u32,
    alpha: Vec<f64>,
    enumerated: String,
    formula: String,
    value: f64,
    argmin: Vec<Vec<i32>>,
    matches: bool,
}

/// Enumerated κ^Λ on boxes against the closed form, in exact arithmetic,
/// plus `κ^{{0}} = α₀`.
pub fn kappa_tables(cfg: &KappaTablesConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("kappa-tables", seed);
    let mut rows = Vec::new();
    for case in &cfg.cases {
        let w = exact_weights(case.d, &case.alpha)?;
        for &r in &case.radii {
            let lambda = NeighborhoodSet::boxed(case.d, r)?;
            let cut = kappa_lambda_with_cap(&w, &lambda, cfg.size_cap)?;
            let formula = box_kappa_lambda(&w, r);
            let matches = cut.value == formula;
            rows.push(KappaRow {
                d: case.d,
                radius: r,
                alpha: case.alpha.clone(),
                enumerated: cut.value.to_string(),
                formula: formula.to_string(),
                value: cut.value.to_f64().unwrap_or(f64::NAN),
                argmin: cut.argmin_set.iter().map(|v| v.to_vec(case.d)).collect(),
                matches,
            });
            out.check(Check::new(
                format!("box_d{}_r{}_{}", case.d, r, exponent_alpha_label(&case.alpha)),
                cut.value.to_f64().unwrap_or(f64::NAN),
                format!("== {formula}"),
                matches,
            ));
        }
        let single = kappa_lambda_with_cap(&w, &NeighborhoodSet::singleton(case.d), cfg.size_cap)?;
        out.check(Check::new(
            format!("singleton_d{}_{}", case.d, exponent_alpha_label(&case.alpha)),
            single.value.to_f64().unwrap_or(f64::NAN),
            format!("== {}", w.alpha0()),
            single.value == *w.alpha0(),
        ));
    }
    out.table("kappa_lambda", &rows);
    Ok(out)
}

fn exponent_alpha_label(alpha: &[f64]) -> String {
    alpha.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("_")
}

/// κ, the drift, closed-form box κ^Λ for `R = 0..=4` and the smallest box
/// radius with κ^Λ > 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentsTable {
    pub d: usize,
    pub alpha: Vec<f64>,
    pub kappa: f64,
    pub drift: Vec<f64>,
    pub box_kappa_lambda: Vec<(u32, f64)>,
    pub min_radius: u32,
}

pub fn exponents_table(weights: &WeightsConfig) -> Result<ExponentsTable> {
    weights.weights()?;
    let w = exact_weights(weights.d, &weights.alpha)?;
    let f = |r: Rational64| r.to_f64().unwrap_or(f64::NAN);
    Ok(ExponentsTable {
        d: w.d(),
        alpha: weights.alpha.clone(),
        kappa: f(kappa(&w)),
        drift: drift(&w).into_iter().map(f).collect(),
        box_kappa_lambda: (0..=4).map(|r| (r, f(box_kappa_lambda(&w, r)))).collect(),
        min_radius: min_radius_for(&w, &Rational64::from_integer(1))?,
    })
}

impl std::fmt::Display for ExponentsTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "d          {}", self.d)?;
        writeln!(f, "alpha      {:?}", self.alpha)?;
        writeln!(f, "kappa      {}", self.kappa)?;
        writeln!(f, "drift      {:?}", self.drift)?;
        for (r, k) in &self.box_kappa_lambda {
            writeln!(f, "box R={r}    kappa_lambda = {k}")?;
        }
        write!(f, "min R with kappa_lambda > 1: {}", self.min_radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents_examples() {
        let t = exponents_table(&WeightsConfig::new(3, &[0.1; 6])).unwrap();
        assert_eq!(t.kappa, 1.0);
        assert_eq!(t.drift, vec![0.0; 3]);
        assert_eq!(t.box_kappa_lambda[1].1, 1.0);

        let t = exponents_table(&WeightsConfig::new(3, &[0.18, 0.09, 0.09, 0.06, 0.09, 0.09])).unwrap();
        assert_eq!(t.min_radius, 2);

        let t = exponents_table(&WeightsConfig::new(3, &[0.12, 0.06, 0.06, 0.04, 0.06, 0.06])).unwrap();
        assert_eq!(t.kappa, 0.64);
        assert_eq!(t.drift, vec![0.2, 0.0, 0.0]);
    }

    #[test]
    fn box_one_table_entry() {
        let cfg = KappaTablesConfig {
            cases: vec![KappaCase {
                d: 3,
                alpha: vec![0.5, 0.1, 0.1, 0.1, 0.1, 0.1],
                radii: vec![1],
            }],
            size_cap: DEFAULT_SIZE_CAP,
        };
        let out = kappa_tables(&cfg, 0).unwrap();
        assert!(out.passed());
        assert_eq!(out.checks[0].value, 1.4);
    }

    #[test]
    fn battery_size() {
        assert_eq!(moment_battery(6).len(), 6 + 21);
    }
}
