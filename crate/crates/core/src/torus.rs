//! The walk on the torus `T_N = (Z/NZ)^d`: stationary law π, the invariant
//! law π̃ ∝ π/γ of the accelerated chain, the density `f_N = N^d π̃(0)`,
//! the divergence of edge functions and the time-reversed environment.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::accel::{gamma_at, GammaMethod, NeighborhoodSet};
use crate::env::{dirichlet_moment, sample_torus_env, SiteProbabilities, TorusEnvironment, Weights};
use crate::error::{Error, Result};
use crate::lattice::{opposite, TorusGeometry};
use crate::rng;
use crate::stats::{mean_and_se, EstimateReport};

/// Largest state space solved by dense LU.
pub const DENSE_LIMIT: usize = 4096;
pub const RESIDUAL_TARGET: f64 = 1e-12;
pub const MAX_SWEEPS: u64 = 1_000_000;
/// Largest tolerated deviation of `(πP)(x)/π(x)` from 1 when reversing.
pub const REVERSAL_TOL: f64 = 1e-10;
const REFINEMENT_ROUNDS: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub probs: Vec<f64>,
    /// `‖πP − π‖_∞`.
    pub residual: f64,
}

/// `(πP)(y) = Σ_x π(x) ω(x, y)`.
pub fn push_forward(env: &TorusEnvironment, pi: &[f64]) -> Vec<f64> {
    let g = env.geometry();
    let dirs = g.dirs();
    let mut out = vec![0.0; pi.len()];
    for (x, &mass) in pi.iter().enumerate() {
        let p = env.at(x);
        for dir in 0..dirs {
            out[g.neighbor(x, dir)] += mass * p.get(dir);
        }
    }
    out
}

pub fn stationary_residual(env: &TorusEnvironment, pi: &[f64]) -> f64 {
    push_forward(env, pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Dense LU on `(Pᵀ − I) π = 0` with the last equation replaced by `Σπ = 1`
/// up to [`DENSE_LIMIT`] states; lazy power iteration with Aitken
/// extrapolation beyond.
pub fn stationary_distribution(env: &TorusEnvironment) -> Result<StationaryDistribution> {
    if env.geometry().size() <= DENSE_LIMIT {
        dense_stationary(env)
    } else {
        power_stationary(env, MAX_SWEEPS)
    }
}

fn dense_stationary(env: &TorusEnvironment) -> Result<StationaryDistribution> {
    let g = env.geometry();
    let n = g.size();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        a[(x, x)] -= 1.0;
        let p = env.at(x);
        for dir in 0..g.dirs() {
            a[(g.neighbor(x, dir), x)] += p.get(dir);
        }
    }
    for col in 0..n {
        a[(n - 1, col)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let singular = Error::Convergence {
        residual: f64::INFINITY,
        sweeps: 0,
    };
    let mut solution = lu.solve(&b).ok_or(singular.clone())?;
    // Iterative refinement brings every entry to near full relative precision.
    for _ in 0..REFINEMENT_ROUNDS {
        let r = &b - &a * &solution;
        solution += lu.solve(&r).ok_or(singular.clone())?;
    }
    let mut probs: Vec<f64> = solution.iter().copied().collect();
    normalize(&mut probs);
    let mut residual = stationary_residual(env, &probs);
    // A few lazy sweeps polish the last ulps if the solve was loose.
    let mut sweeps = 0;
    while residual > RESIDUAL_TARGET && sweeps < 1000 {
        probs = lazy_step(env, &probs);
        normalize(&mut probs);
        residual = stationary_residual(env, &probs);
        sweeps += 1;
    }
    if residual > RESIDUAL_TARGET || probs.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Convergence { residual, sweeps });
    }
    Ok(StationaryDistribution { probs, residual })
}

fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= total;
    }
}

fn lazy_step(env: &TorusEnvironment, pi: &[f64]) -> Vec<f64> {
    push_forward(env, pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| 0.5 * (a + b))
        .collect()
}

/// Power iteration on the lazy chain `(I + P)/2`, trying an Aitken Δ²
/// extrapolation every third sweep and keeping it when it lowers the residual.
pub fn power_stationary(env: &TorusEnvironment, max_sweeps: u64) -> Result<StationaryDistribution> {
    let n = env.geometry().size();
    let mut pi = vec![1.0 / n as f64; n];
    let mut residual = stationary_residual(env, &pi);
    let mut sweeps = 0;
    while residual > RESIDUAL_TARGET {
        if sweeps >= max_sweeps {
            return Err(Error::Convergence { residual, sweeps });
        }
        let p1 = lazy_step(env, &pi);
        let p2 = lazy_step(env, &p1);
        sweeps += 2;
        let mut accel: Vec<f64> = pi
            .iter()
            .zip(&p1)
            .zip(&p2)
            .map(|((&a, &b), &c)| {
                let denom = c - 2.0 * b + a;
                if denom.abs() > 1e-300 {
                    let v = c - (c - b) * (c - b) / denom;
                    if v > 0.0 {
                        return v;
                    }
                }
                c
            })
            .collect();
        normalize(&mut accel);
        let r_accel = stationary_residual(env, &accel);
        let mut plain = p2;
        normalize(&mut plain);
        let r_plain = stationary_residual(env, &plain);
        if r_accel < r_plain {
            pi = accel;
            residual = r_accel;
        } else {
            pi = plain;
            residual = r_plain;
        }
    }
    Ok(StationaryDistribution { probs: pi, residual })
}

/// γ at every torus site, through the periodic lift of the environment.
pub fn gamma_field(env: &TorusEnvironment, lambda: &NeighborhoodSet, method: GammaMethod) -> Result<Vec<f64>> {
    let g = env.geometry();
    (0..g.size())
        .map(|x| gamma_at(env, &g.site(x), lambda, method))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcceleratedInvariant {
    /// `π̃(y) ∝ π(y)/γ(y)`.
    pub probs: Vec<f64>,
    pub gamma: Vec<f64>,
}

pub fn accelerated_invariant(
    env: &TorusEnvironment,
    pi: &StationaryDistribution,
    lambda: &NeighborhoodSet,
    method: GammaMethod,
) -> Result<AcceleratedInvariant> {
    let gamma = gamma_field(env, lambda, method)?;
    Ok(accelerated_from_gamma(&pi.probs, gamma))
}

pub fn accelerated_from_gamma(pi: &[f64], gamma: Vec<f64>) -> AcceleratedInvariant {
    let mut probs: Vec<f64> = pi.iter().zip(&gamma).map(|(p, g)| p / g).collect();
    normalize(&mut probs);
    AcceleratedInvariant { probs, gamma }
}

/// `max_y |Σ_x π̃(x)γ(x)ω(x,y) − π̃(y)γ(y)|`: stationarity of π̃ for the
/// chain jumping from `x` to `y` at rate `γ(x)ω(x,y)`.
pub fn generator_balance_residual(env: &TorusEnvironment, inv: &AcceleratedInvariant) -> f64 {
    let flux: Vec<f64> = inv.probs.iter().zip(&inv.gamma).map(|(p, g)| p * g).collect();
    push_forward(env, &flux)
        .iter()
        .zip(&flux)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// `f_N = N^d π̃_N(0)`.
pub fn density_f_n(env: &TorusEnvironment, lambda: &NeighborhoodSet, method: GammaMethod) -> Result<f64> {
    Ok(density_details(env, lambda, method)?.f_n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensitySample {
    pub f_n: f64,
    pub gamma_0: f64,
    pub stationary_residual: f64,
    pub balance_residual: f64,
}

pub fn density_details(env: &TorusEnvironment, lambda: &NeighborhoodSet, method: GammaMethod) -> Result<DensitySample> {
    let pi = stationary_distribution(env)?;
    let inv = accelerated_invariant(env, &pi, lambda, method)?;
    Ok(DensitySample {
        f_n: env.geometry().size() as f64 * inv.probs[0],
        gamma_0: inv.gamma[0],
        stationary_residual: pi.residual,
        balance_residual: generator_balance_residual(env, &inv),
    })
}

/// One row of the per-environment density ledger.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityRow {
    pub seed_index: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub p: f64,
    pub f_n: f64,
    pub gamma_0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpEstimate {
    /// Raw Monte Carlo mean of `f_N^p`.
    pub raw: EstimateReport,
    /// Same, with the top 0.1% of `f_N^p` values winsorized.
    pub winsorized: EstimateReport,
    pub rows: Vec<DensityRow>,
}

/// Environment `i` of a torus batch with master `seed`.
pub fn batch_env_seed(seed: u64, i: u64) -> u64 {
    rng::derive_seed(seed, &[rng::lane::ENVIRONMENT, i])
}

pub fn sample_densities(
    weights: &Weights<f64>,
    n: usize,
    lambda: &NeighborhoodSet,
    method: GammaMethod,
    n_envs: u64,
    seed: u64,
) -> Result<Vec<DensitySample>> {
    (0..n_envs)
        .into_par_iter()
        .map(|i| {
            let env = sample_torus_env(weights, n, batch_env_seed(seed, i))?;
            density_details(&env, lambda, method.for_environment(i))
        })
        .collect()
}

/// Monte Carlo `E[f_N^p]` over `n_envs` environments.
pub fn lp_norm_estimate(
    weights: &Weights<f64>,
    n: usize,
    p: f64,
    lambda: &NeighborhoodSet,
    method: GammaMethod,
    n_envs: u64,
    seed: u64,
) -> Result<LpEstimate> {
    let samples = sample_densities(weights, n, lambda, method, n_envs, seed)?;
    let values: Vec<f64> = samples.iter().map(|s| s.f_n.powf(p)).collect();
    let (mean, se) = mean_and_se(&values)?;
    let raw = EstimateReport::new("lp_norm_f_n", mean, mean - 1.96 * se, mean + 1.96 * se, n_envs, seed)?
        .with_meta("N", n)
        .with_meta("p", p)
        .with_meta("alpha", weights.alpha())
        .with_meta("lambda_size", lambda.len());

    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let cut_index = ((sorted.len() as f64) * 0.999).floor() as usize;
    let cap = sorted[cut_index.min(sorted.len() - 1)];
    let wins: Vec<f64> = values.iter().map(|v| v.min(cap)).collect();
    let (wmean, wse) = mean_and_se(&wins)?;
    let winsorized = EstimateReport::new(
        "lp_norm_f_n_winsorized",
        wmean,
        wmean - 1.96 * wse,
        wmean + 1.96 * wse,
        n_envs,
        seed,
    )?
    .with_meta("N", n)
    .with_meta("p", p)
    .with_meta("winsorized_at", cap);

    let rows = samples
        .iter()
        .enumerate()
        .map(|(i, s)| DensityRow {
            seed_index: i as u64,
            n,
            p,
            f_n: s.f_n,
            gamma_0: s.gamma_0,
        })
        .collect();
    Ok(LpEstimate { raw, winsorized, rows })
}

/// A real function on the directed edges of `T_N`, indexed `x * 2d + dir`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeFunction {
    pub geometry: TorusGeometry,
    pub values: Vec<f64>,
}

impl EdgeFunction {
    pub fn new(geometry: TorusGeometry, values: Vec<f64>) -> Result<Self> {
        let expected = geometry.size() * geometry.dirs();
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: values.len(),
            });
        }
        Ok(EdgeFunction { geometry, values })
    }

    pub fn constant(geometry: TorusGeometry, c: f64) -> Self {
        EdgeFunction {
            geometry,
            values: vec![c; geometry.size() * geometry.dirs()],
        }
    }

    pub fn indicator(geometry: TorusGeometry, x: usize, dir: usize) -> Self {
        let mut f = Self::constant(geometry, 0.0);
        f.values[x * geometry.dirs() + dir] = 1.0;
        f
    }

    /// `θ(x, x+e_i) = α_i` on every site.
    pub fn from_weights(geometry: TorusGeometry, weights: &Weights<f64>) -> Self {
        let values = (0..geometry.size())
            .flat_map(|_| weights.alpha().iter().copied())
            .collect();
        EdgeFunction { geometry, values }
    }

    /// `θ(x, x+e_i) = ω(x, x+e_i)`.
    pub fn from_env(env: &TorusEnvironment) -> Self {
        let values = env.sites().iter().flat_map(|s| s.as_slice().iter().copied()).collect();
        EdgeFunction {
            geometry: env.geometry(),
            values,
        }
    }
}

/// `div θ(x) = Σ_{edges leaving x} θ − Σ_{edges entering x} θ`.
pub fn divergence(theta: &EdgeFunction) -> Vec<f64> {
    let g = theta.geometry;
    let dirs = g.dirs();
    let mut div = vec![0.0; g.size()];
    for x in 0..g.size() {
        for dir in 0..dirs {
            let v = theta.values[x * dirs + dir];
            div[x] += v;
            div[g.neighbor(x, dir)] -= v;
        }
    }
    div
}

/// `ω̌(x, y) = ω(y, x) π(y) / π(x)`.
pub fn reversed_env(env: &TorusEnvironment, pi: &StationaryDistribution) -> Result<TorusEnvironment> {
    let g = env.geometry();
    if pi.probs.len() != g.size() {
        return Err(Error::Dimension {
            expected: g.size(),
            got: pi.probs.len(),
        });
    }
    let dirs = g.dirs();
    let mut sites = Vec::with_capacity(g.size());
    let mut row = vec![0.0; dirs];
    for x in 0..g.size() {
        for (dir, slot) in row.iter_mut().enumerate() {
            let y = g.neighbor(x, dir);
            *slot = env.omega(y, opposite(dir, g.d)) * pi.probs[y] / pi.probs[x];
        }
        // The row sums to (πP)(x)/π(x), which is 1 exactly when π is stationary.
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > REVERSAL_TOL {
            return Err(Error::Precondition(format!(
                "π is not stationary for the environment: (πP)/π = {total} at site {x}"
            )));
        }
        row.iter_mut().for_each(|v| *v /= total);
        sites.push(SiteProbabilities::new(&row)?);
    }
    TorusEnvironment::new(g, sites)
}

/// Battery of exponent vectors: every unit vector and every sum of two.
pub fn reversal_battery(d: usize) -> Vec<Vec<f64>> {
    let n = 2 * d;
    let mut out = Vec::new();
    for i in 0..n {
        let mut t = vec![0.0; n];
        t[i] = 1.0;
        out.push(t);
    }
    for i in 0..n {
        for j in i..n {
            let mut t = vec![0.0; n];
            t[i] += 1.0;
            t[j] += 1.0;
            out.push(t);
        }
    }
    out
}

/// Compares the moments of `ω̌(0, ·)` over `n_envs` torus environments with
/// those of Dirichlet(α̌). The estimate is the largest |z| over the battery.
pub fn reversal_law_check(weights: &Weights<f64>, n: usize, n_envs: u64, seed: u64) -> Result<EstimateReport> {
    let d = weights.d();
    let battery = reversal_battery(d);
    let rows: Vec<Vec<f64>> = (0..n_envs)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let env = sample_torus_env(weights, n, batch_env_seed(seed, i))?;
            let pi = stationary_distribution(&env)?;
            let rev = reversed_env(&env, &pi)?;
            let w0 = rev.at(0);
            Ok(battery
                .iter()
                .map(|theta| {
                    theta
                        .iter()
                        .enumerate()
                        .map(|(k, &t)| w0.get(k).powi(t as i32))
                        .product()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let reversed = weights.reversed();
    let mut max_z: f64 = 0.0;
    let mut zs = Vec::with_capacity(battery.len());
    for (b, theta) in battery.iter().enumerate() {
        let column: Vec<f64> = rows.iter().map(|r| r[b]).collect();
        let (mean, se) = mean_and_se(&column)?;
        let expected = dirichlet_moment(&reversed, theta)?;
        let z = (mean - expected) / se;
        max_z = max_z.max(z.abs());
        zs.push(z);
    }
    Ok(
        EstimateReport::new("reversal_law_max_abs_z", max_z, max_z, max_z, n_envs, seed)?
            .with_meta("N", n)
            .with_meta("alpha", weights.alpha())
            .with_meta("alpha_reversed", reversed.alpha())
            .with_meta("z_scores", &zs)
            .with_verdict(max_z < 5.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Signed, ToPrimitive, Zero};

    fn weights() -> Weights<f64> {
        Weights::new(2, vec![0.3, 0.1, 0.2, 0.15]).unwrap()
    }

    /// Exact Gaussian elimination of `(Pᵀ − I)π = 0, Σπ = 1` over the rationals.
    #[allow(clippy::needless_range_loop)]
    fn rational_stationary(env: &TorusEnvironment) -> Vec<f64> {
        let g = env.geometry();
        let n = g.size();
        let zero = BigRational::zero();
        let mut a = vec![vec![zero.clone(); n + 1]; n];
        for x in 0..n {
            a[x][x] -= BigRational::one();
            for dir in 0..g.dirs() {
                let p = BigRational::from_float(env.omega(x, dir)).unwrap();
                a[g.neighbor(x, dir)][x] += p;
            }
        }
        for col in 0..n {
            a[n - 1][col] = BigRational::one();
        }
        a[n - 1][n] = BigRational::one();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a[r][col].is_zero()).unwrap();
            a.swap(col, pivot);
            let inv = BigRational::one() / a[col][col].clone();
            for k in col..=n {
                a[col][k] = a[col][k].clone() * inv.clone();
            }
            for r in 0..n {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for k in col..=n {
                        let v = a[col][k].clone() * f.clone();
                        a[r][k] -= v;
                    }
                }
            }
        }
        a.iter()
            .map(|row| {
                let v = &row[n];
                assert!(!v.is_negative());
                (v.numer() * BigInt::from(10u64.pow(15)) / v.denom()).to_f64().unwrap() * 1e-15
            })
            .collect()
    }

    #[test]
    fn uniform_env_has_uniform_law_and_unit_density() {
        let env = TorusEnvironment::uniform(4, 2).unwrap();
        let pi = stationary_distribution(&env).unwrap();
        for p in &pi.probs {
            assert!((p - 1.0 / 16.0).abs() < 1e-15);
        }
        let f = density_f_n(&env, &NeighborhoodSet::pair(2).unwrap(), GammaMethod::default()).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_solve_matches_rational_oracle() {
        let env = sample_torus_env(&weights(), 3, 17).unwrap();
        let pi = stationary_distribution(&env).unwrap();
        assert!(pi.residual <= RESIDUAL_TARGET);
        let exact = rational_stationary(&env);
        for (a, b) in pi.probs.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let env = sample_torus_env(&Weights::new(2, vec![1.0, 0.5, 0.8, 0.7]).unwrap(), 5, 3).unwrap();
        let dense = stationary_distribution(&env).unwrap();
        let power = power_stationary(&env, MAX_SWEEPS).unwrap();
        assert!(power.residual <= RESIDUAL_TARGET);
        for (a, b) in dense.probs.iter().zip(&power.probs) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn accelerated_invariant_balances_generator() {
        let env = sample_torus_env(&weights(), 4, 5).unwrap();
        let pi = stationary_distribution(&env).unwrap();
        let lambda = NeighborhoodSet::pair(2).unwrap();
        let inv = accelerated_invariant(&env, &pi, &lambda, GammaMethod::default()).unwrap();
        assert!(generator_balance_residual(&env, &inv) <= 1e-10);
        let single = accelerated_invariant(&env, &pi, &NeighborhoodSet::singleton(2), GammaMethod::default()).unwrap();
        for (a, b) in single.probs.iter().zip(&pi.probs) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn divergence_examples() {
        let g = TorusGeometry::new(4, 2).unwrap();
        assert!(divergence(&EdgeFunction::constant(g, 2.5)).iter().all(|v| *v == 0.0));
        let div = divergence(&EdgeFunction::indicator(g, 5, 0));
        assert_eq!(div[5], 1.0);
        assert_eq!(div[g.neighbor(5, 0)], -1.0);
        assert_eq!(div.iter().filter(|v| **v != 0.0).count(), 2);
        let div = divergence(&EdgeFunction::from_weights(g, &weights()));
        assert!(div.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn stationary_flow_is_divergence_free() {
        let env = sample_torus_env(&weights(), 4, 8).unwrap();
        let pi = stationary_distribution(&env).unwrap();
        let dirs = env.geometry().dirs();
        let mut flow = EdgeFunction::from_env(&env);
        for (i, v) in flow.values.iter_mut().enumerate() {
            *v *= pi.probs[i / dirs];
        }
        assert!(divergence(&flow).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn reversal_is_an_involution_preserving_pi() {
        let env = sample_torus_env(&weights(), 3, 2).unwrap();
        let pi = stationary_distribution(&env).unwrap();
        let rev = reversed_env(&env, &pi).unwrap();
        assert!(stationary_residual(&rev, &pi.probs) < 1e-12);
        let back = reversed_env(&rev, &pi).unwrap();
        for (a, b) in env.sites().iter().zip(back.sites()) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let uniform = TorusEnvironment::uniform(3, 2).unwrap();
        let upi = stationary_distribution(&uniform).unwrap();
        let urev = reversed_env(&uniform, &upi).unwrap();
        for s in urev.sites() {
            assert!(s.as_slice().iter().all(|p| (p - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn reversal_rejects_non_stationary_pi() {
        let env = sample_torus_env(&weights(), 3, 2).unwrap();
        let mut pi = stationary_distribution(&env).unwrap();
        pi.probs[0] += 1e-3;
        pi.probs[1] -= 1e-3;
        assert!(matches!(reversed_env(&env, &pi), Err(Error::Precondition(_))));
    }

    #[test]
    fn battery_size() {
        assert_eq!(reversal_battery(2).len(), 4 + 10);
    }
}
