//! The acceleration function γ^ω(x) = 1 / Σ_σ ω_σ, the sum running over
//! simple paths that start at `x` and stop right after leaving `x + Λ`.
//!
//! Equivalently `1/γ^ω(x)` is the probability that the walk started at `x`
//! leaves `x + Λ` before visiting any vertex twice, which is what
//! [`gamma_mc`] estimates.

mod graph;

pub use graph::{gamma_finite_graph, CemeteryGraph, GraphEdge};

use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::env::{Environment, SiteProbabilities};
use crate::error::{Error, Result};
use crate::lattice::{Site, MAX_DIM};

pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;
/// Enumeration keeps the visited set of a path in a 128-bit mask.
pub const MAX_ENUMERATION_VERTICES: usize = 128;
pub const DEFAULT_MC_TRIALS: u64 = 10_000;
pub const BOOSTED_MC_TRIALS: u64 = 100_000;
/// Below this simple-exit frequency the adaptive estimator raises its trials.
pub const MC_FLOOR: f64 = 0.05;

const EXIT: u32 = u32::MAX;

/// Named neighborhood families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "shape", content = "radius")]
pub enum LambdaShape {
    Singleton,
    Pair,
    Box(u32),
    Diamond(u32),
}

impl LambdaShape {
    pub fn build(&self, d: usize) -> Result<NeighborhoodSet> {
        match *self {
            LambdaShape::Singleton => Ok(NeighborhoodSet::singleton(d)),
            LambdaShape::Pair => NeighborhoodSet::pair(d),
            LambdaShape::Box(r) => NeighborhoodSet::boxed(d, r),
            LambdaShape::Diamond(r) => NeighborhoodSet::diamond(d, r),
        }
    }
}

impl std::fmt::Display for LambdaShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LambdaShape::Singleton => write!(f, "singleton"),
            LambdaShape::Pair => write!(f, "pair"),
            LambdaShape::Box(r) => write!(f, "box{r}"),
            LambdaShape::Diamond(r) => write!(f, "diamond{r}"),
        }
    }
}

/// Sort key for vertices: L1 norm first, then coordinates compared with
/// `0 < 1 < 2 < … < −1 < −2 < …`, mirroring the direction order `+e_i`
/// before `−e_i`.
pub fn canonical_order(x: &Site) -> (u64, [(bool, u32); MAX_DIM]) {
    let mut key = [(false, 0); MAX_DIM];
    for (axis, k) in key.iter_mut().enumerate() {
        let c = x.coord(axis);
        *k = (c < 0, c.unsigned_abs());
    }
    (x.l1_norm(), key)
}

/// A finite connected set Λ ∋ 0, with its boundary and compiled exit graph.
#[derive(Clone, Debug)]
pub struct NeighborhoodSet {
    d: usize,
    vertices: Vec<Site>,
    index: FxHashMap<Site, usize>,
    boundary: Vec<Site>,
    /// `succ[v * 2d + dir]`: index of the neighbor inside Λ, or `EXIT`.
    succ: Vec<u32>,
}

impl NeighborhoodSet {
    /// Validates `0 ∈ Λ` and nearest-neighbor connectivity. Vertices are
    /// stored in [`canonical_order`], so the origin has index 0.
    pub fn from_vertices(d: usize, vertices: impl IntoIterator<Item = Site>) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidNeighborhood(format!("dimension {d} unsupported")));
        }
        let set: FxHashSet<Site> = vertices.into_iter().collect();
        if !set.contains(&Site::ORIGIN) {
            return Err(Error::InvalidNeighborhood("origin is not in the set".into()));
        }
        if let Some(x) = set.iter().find(|x| (d..MAX_DIM).any(|a| x.coord(a) != 0)) {
            return Err(Error::InvalidNeighborhood(format!(
                "vertex {x:?} has coordinates beyond dimension {d}"
            )));
        }
        let mut vertices: Vec<Site> = set.into_iter().collect();
        vertices.sort_by_key(canonical_order);
        let index: FxHashMap<Site, usize> = vertices.iter().enumerate().map(|(i, x)| (*x, i)).collect();

        let dirs = 2 * d;
        let mut succ = Vec::with_capacity(vertices.len() * dirs);
        for x in &vertices {
            for dir in 0..dirs {
                succ.push(index.get(&x.step(dir, d)).map_or(EXIT, |&i| i as u32));
            }
        }
        let boundary = vertices
            .iter()
            .enumerate()
            .filter(|(v, _)| (0..dirs).any(|dir| succ[v * dirs + dir] == EXIT))
            .map(|(_, x)| *x)
            .collect();

        let lambda = NeighborhoodSet {
            d,
            vertices,
            index,
            boundary,
            succ,
        };
        if lambda.component_size() != lambda.len() {
            return Err(Error::InvalidNeighborhood("vertex set is not connected".into()));
        }
        Ok(lambda)
    }

    pub fn singleton(d: usize) -> Self {
        Self::from_vertices(d, [Site::ORIGIN]).expect("the singleton is valid")
    }

    /// `{0, e₁}`.
    pub fn pair(d: usize) -> Result<Self> {
        Self::from_vertices(d, [Site::ORIGIN, Site::unit(0, d)])
    }

    /// The L∞ ball `[-R, R]^d`.
    pub fn boxed(d: usize, radius: u32) -> Result<Self> {
        Self::from_ball(d, radius, |x| x.linf_norm())
    }

    /// The L1 ball of radius `R`.
    pub fn diamond(d: usize, radius: u32) -> Result<Self> {
        Self::from_ball(d, radius, |x| x.l1_norm())
    }

    fn from_ball(d: usize, radius: u32, norm: impl Fn(&Site) -> u64) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidNeighborhood(format!("dimension {d} unsupported")));
        }
        let r = radius as i32;
        let side = (2 * r + 1) as usize;
        let mut sites = Vec::new();
        let mut coords = vec![0i32; d];
        for mut k in 0..side.pow(d as u32) {
            for c in coords.iter_mut() {
                *c = (k % side) as i32 - r;
                k /= side;
            }
            let x = Site::new(&coords)?;
            if norm(&x) <= radius as u64 {
                sites.push(x);
            }
        }
        Self::from_vertices(d, sites)
    }

    fn component_size(&self) -> usize {
        let dirs = 2 * self.d;
        let origin = self.origin();
        let mut seen = vec![false; self.len()];
        let mut stack = vec![origin];
        seen[origin] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for dir in 0..dirs {
                let t = self.succ[v * dirs + dir];
                if t != EXIT && !seen[t as usize] {
                    seen[t as usize] = true;
                    count += 1;
                    stack.push(t as usize);
                }
            }
        }
        count
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Site] {
        &self.vertices
    }

    pub fn contains(&self, x: &Site) -> bool {
        self.index.contains_key(x)
    }

    pub fn index_of(&self, x: &Site) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn origin(&self) -> usize {
        self.index[&Site::ORIGIN]
    }

    /// `∂Λ = {x ∈ Λ : some neighbor of x is outside Λ}`.
    pub fn boundary(&self) -> &[Site] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        let dirs = 2 * self.d;
        (0..dirs).any(|dir| self.succ[v * dirs + dir] == EXIT)
    }

    /// Smallest `R` with Λ inside the L∞ ball of radius `R`.
    pub fn radius(&self) -> u64 {
        self.vertices.iter().map(Site::linf_norm).max().unwrap_or(0)
    }

    /// Neighbor of vertex `v` in direction `dir`, if it lies in Λ.
    #[inline]
    pub fn successor(&self, v: usize, dir: usize) -> Option<usize> {
        let t = self.succ[v * 2 * self.d + dir];
        (t != EXIT).then_some(t as usize)
    }

    /// Exit probabilities at `x + v` for every vertex `v` of Λ, in vertex order.
    pub fn local_table<E: Environment + ?Sized>(&self, env: &E, x: &Site) -> Result<Vec<SiteProbabilities>> {
        self.vertices.iter().map(|v| env.probs(&x.add(v))).collect()
    }

    fn check_enumerable(&self) -> Result<()> {
        if self.len() > MAX_ENUMERATION_VERTICES {
            return Err(Error::InvalidNeighborhood(format!(
                "{} vertices exceed the enumeration limit of {MAX_ENUMERATION_VERTICES}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// All simple exit paths from the origin, as direction sequences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExitPathSet {
    d: usize,
    paths: Vec<Vec<u8>>,
}

impl ExitPathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[Vec<u8>] {
        &self.paths
    }

    /// Vertex sequence `0 = y₀, y₁, …, y_k` of path `i`; only `y_k ∉ Λ`.
    pub fn vertices(&self, i: usize) -> Vec<Site> {
        let mut x = Site::ORIGIN;
        let mut out = vec![x];
        for &dir in &self.paths[i] {
            x = x.step(dir as usize, self.d);
            out.push(x);
        }
        out
    }

    /// Directed edges `(tail, direction)` of path `i`.
    pub fn edges(&self, i: usize) -> Vec<(Site, usize)> {
        let verts = self.vertices(i);
        self.paths[i]
            .iter()
            .zip(verts)
            .map(|(&dir, x)| (x, dir as usize))
            .collect()
    }

    /// `ω_σ = ∏ ω(e)` for path `i` translated to start at `x`.
    pub fn weight<E: Environment + ?Sized>(&self, env: &E, x: &Site, i: usize) -> Result<f64> {
        let mut w = 1.0;
        for (y, dir) in self.edges(i) {
            w *= env.probs(&x.add(&y))?.get(dir);
        }
        Ok(w)
    }

    /// One path per line, comma-separated direction indices.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for p in &self.paths {
            let line: Vec<String> = p.iter().map(u8::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

struct Enumerator<'a> {
    lambda: &'a NeighborhoodSet,
    dirs: usize,
    nodes: u64,
    budget: u64,
}

impl Enumerator<'_> {
    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::Budget { budget: self.budget });
        }
        Ok(())
    }

    fn collect(&mut self, v: usize, visited: u128, path: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) -> Result<()> {
        for dir in 0..self.dirs {
            self.tick()?;
            path.push(dir as u8);
            match self.lambda.succ[v * self.dirs + dir] {
                EXIT => out.push(path.clone()),
                t if visited & (1u128 << t) == 0 => self.collect(t as usize, visited | (1u128 << t), path, out)?,
                _ => {}
            }
            path.pop();
        }
        Ok(())
    }

    fn sum(&mut self, v: usize, visited: u128, prefix: f64, ln_p: &[f64], p: &[f64], acc: &mut Neumaier) -> Result<()> {
        for dir in 0..self.dirs {
            self.tick()?;
            let e = v * self.dirs + dir;
            match self.lambda.succ[e] {
                EXIT => acc.add(prefix.exp() * p[e]),
                t if visited & (1u128 << t) == 0 => {
                    self.sum(t as usize, visited | (1u128 << t), prefix + ln_p[e], ln_p, p, acc)?
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Neumaier-compensated sum.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn enumerate_exit_paths(lambda: &NeighborhoodSet) -> Result<ExitPathSet> {
    enumerate_exit_paths_with_budget(lambda, DEFAULT_NODE_BUDGET)
}

/// Depth-first enumeration in direction order; each traversed edge costs one
/// node of `budget`.
pub fn enumerate_exit_paths_with_budget(lambda: &NeighborhoodSet, budget: u64) -> Result<ExitPathSet> {
    lambda.check_enumerable()?;
    let mut e = Enumerator {
        lambda,
        dirs: 2 * lambda.d,
        nodes: 0,
        budget,
    };
    let origin = lambda.origin();
    let mut out = Vec::new();
    e.collect(origin, 1u128 << origin, &mut Vec::new(), &mut out)?;
    Ok(ExitPathSet {
        d: lambda.d,
        paths: out,
    })
}

pub fn gamma_exact<E: Environment + ?Sized>(env: &E, x: &Site, lambda: &NeighborhoodSet) -> Result<f64> {
    gamma_exact_with_budget(env, x, lambda, DEFAULT_NODE_BUDGET)
}

pub fn gamma_exact_with_budget<E: Environment + ?Sized>(
    env: &E,
    x: &Site,
    lambda: &NeighborhoodSet,
    budget: u64,
) -> Result<f64> {
    let table = lambda.local_table(env, x)?;
    gamma_exact_local(lambda, &table, budget)
}

/// γ from a precomputed [`NeighborhoodSet::local_table`].
pub fn gamma_exact_local(lambda: &NeighborhoodSet, table: &[SiteProbabilities], budget: u64) -> Result<f64> {
    lambda.check_enumerable()?;
    let dirs = 2 * lambda.d;
    let p: Vec<f64> = table.iter().flat_map(|s| s.as_slice().iter().copied()).collect();
    let ln_p: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let mut e = Enumerator {
        lambda,
        dirs,
        nodes: 0,
        budget,
    };
    let origin = lambda.origin();
    let mut acc = Neumaier::default();
    e.sum(origin, 1u128 << origin, 0.0, &ln_p, &p, &mut acc)?;
    Ok(1.0 / acc.total())
}

/// Monte Carlo estimate of γ with a delta-method 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaEstimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Fraction of trials exiting before a self-intersection.
    pub p_hat: f64,
    pub trials: u64,
    pub successes: u64,
    /// `p_hat` fell below [`MC_FLOOR`].
    pub below_floor: bool,
}

impl GammaEstimate {
    fn from_counts(successes: u64, trials: u64) -> Result<Self> {
        if successes == 0 {
            return Err(Error::EstimateFailed { trials });
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let se_p = (p * (1.0 - p) / n).sqrt();
        let estimate = 1.0 / p;
        let half = 1.96 * se_p / (p * p);
        Ok(GammaEstimate {
            estimate,
            ci_low: (estimate - half).max(1.0).min(estimate),
            ci_high: estimate + half,
            p_hat: p,
            trials,
            successes,
            below_floor: p < MC_FLOOR,
        })
    }
}

/// Runs `trials` chains from `x` and counts those that leave `x + Λ` while
/// still simple.
pub fn gamma_mc<E: Environment + ?Sized, R: Rng + ?Sized>(
    env: &E,
    x: &Site,
    lambda: &NeighborhoodSet,
    trials: u64,
    rng: &mut R,
) -> Result<GammaEstimate> {
    if trials == 0 {
        return Err(Error::Precondition("gamma_mc needs at least one trial".into()));
    }
    let table = lambda.local_table(env, x)?;
    let mut sim = SimpleExitSimulator::new(lambda, &table);
    let successes = sim.run(trials, rng);
    GammaEstimate::from_counts(successes, trials)
}

/// [`DEFAULT_MC_TRIALS`] trials, topped up to [`BOOSTED_MC_TRIALS`] when the
/// simple-exit frequency is below [`MC_FLOOR`].
pub fn gamma_mc_adaptive<E: Environment + ?Sized, R: Rng + ?Sized>(
    env: &E,
    x: &Site,
    lambda: &NeighborhoodSet,
    rng: &mut R,
) -> Result<GammaEstimate> {
    let table = lambda.local_table(env, x)?;
    gamma_mc_adaptive_local(lambda, &table, rng)
}

pub fn gamma_mc_adaptive_local<R: Rng + ?Sized>(
    lambda: &NeighborhoodSet,
    table: &[SiteProbabilities],
    rng: &mut R,
) -> Result<GammaEstimate> {
    let mut sim = SimpleExitSimulator::new(lambda, table);
    let mut successes = sim.run(DEFAULT_MC_TRIALS, rng);
    let mut trials = DEFAULT_MC_TRIALS;
    if (successes as f64) < MC_FLOOR * trials as f64 {
        successes += sim.run(BOOSTED_MC_TRIALS - trials, rng);
        trials = BOOSTED_MC_TRIALS;
    }
    GammaEstimate::from_counts(successes, trials)
}

/// How γ is obtained at a site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaMethod {
    /// Path enumeration with a node budget.
    Exact { budget: u64 },
    /// [`gamma_mc_adaptive`]; the stream at site `x` is keyed by `(seed, x)`.
    MonteCarlo { seed: u64 },
}

impl Default for GammaMethod {
    fn default() -> Self {
        GammaMethod::Exact {
            budget: DEFAULT_NODE_BUDGET,
        }
    }
}

impl GammaMethod {
    /// The method for environment `i` of a batch: Monte Carlo streams are
    /// re-keyed per environment, enumeration is unchanged.
    pub fn for_environment(self, i: u64) -> Self {
        match self {
            GammaMethod::MonteCarlo { seed } => GammaMethod::MonteCarlo {
                seed: crate::rng::derive_seed(seed, &[i]),
            },
            exact => exact,
        }
    }
}

/// γ at `x` by `method`. A singleton Λ gives exactly 1.
pub fn gamma_at<E: Environment + ?Sized>(
    env: &E,
    x: &Site,
    lambda: &NeighborhoodSet,
    method: GammaMethod,
) -> Result<f64> {
    if lambda.len() == 1 {
        return Ok(1.0);
    }
    let table = lambda.local_table(env, x)?;
    match method {
        GammaMethod::Exact { budget } => gamma_exact_local(lambda, &table, budget),
        GammaMethod::MonteCarlo { seed } => {
            let mut stream = crate::rng::site_lane_stream(seed, crate::rng::lane::GAMMA_MC, x);
            Ok(gamma_mc_adaptive_local(lambda, &table, &mut stream)?.estimate)
        }
    }
}

struct SimpleExitSimulator<'a> {
    lambda: &'a NeighborhoodSet,
    table: &'a [SiteProbabilities],
    stamp: Vec<u64>,
    generation: u64,
}

impl<'a> SimpleExitSimulator<'a> {
    fn new(lambda: &'a NeighborhoodSet, table: &'a [SiteProbabilities]) -> Self {
        SimpleExitSimulator {
            lambda,
            table,
            stamp: vec![0; lambda.len()],
            generation: 0,
        }
    }

    fn run<R: Rng + ?Sized>(&mut self, trials: u64, rng: &mut R) -> u64 {
        let dirs = 2 * self.lambda.d;
        let origin = self.lambda.origin();
        let mut successes = 0;
        for _ in 0..trials {
            self.generation += 1;
            let mut v = origin;
            self.stamp[v] = self.generation;
            loop {
                let dir = self.table[v].sample_direction(rng.random::<f64>());
                let t = self.lambda.succ[v * dirs + dir];
                if t == EXIT {
                    successes += 1;
                    break;
                }
                let t = t as usize;
                if self.stamp[t] == self.generation {
                    break;
                }
                self.stamp[t] = self.generation;
                v = t;
            }
        }
        successes
    }
}
