//! Dirichlet environments on Z^d and on tori.
//!
//! An environment assigns to every site `x` the exit probabilities
//! `ω(x, x+e_i)`, `i = 1..2d`. Under the i.i.d. Dirichlet law each site's
//! vector is an independent Dirichlet(α₁,…,α_{2d}) draw.

use parking_lot::RwLock;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use rustc_hash::FxHashMap;
use serde::{Serialize, Serializer};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::lattice::{opposite, Site, TorusGeometry, MAX_DIM, MAX_DIRS};
use crate::rng;
use crate::scalar::{self, Scalar};

/// Below this shape the Dirichlet draw is normalized in log space.
pub const LOG_SPACE_SHAPE: f64 = 0.05;
pub const NORMALIZATION_TOL: f64 = 1e-12;
pub const DEFAULT_SITE_BUDGET: usize = 10_000_000;

/// Dirichlet parameters `(α₁,…,α_{2d})` together with the dimension.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Weights<T = f64> {
    d: usize,
    alpha: Vec<T>,
    alpha0: T,
}

impl<T: Scalar> Weights<T> {
    pub fn new(d: usize, alpha: Vec<T>) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidWeights(format!("dimension {d} outside 1..={MAX_DIM}")));
        }
        if alpha.len() != 2 * d {
            return Err(Error::InvalidWeights(format!(
                "expected {} weights for d = {d}, got {}",
                2 * d,
                alpha.len()
            )));
        }
        if let Some((i, a)) = alpha.iter().enumerate().find(|(_, a)| !a.is_positive()) {
            return Err(Error::InvalidWeights(format!("alpha[{i}] = {a:?} is not positive")));
        }
        let alpha0 = scalar::sum(alpha.iter().cloned());
        Ok(Weights { d, alpha, alpha0 })
    }

    pub fn uniform(d: usize, a: T) -> Result<Self> {
        Self::new(d, vec![a; 2 * d])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn alpha0(&self) -> &T {
        &self.alpha0
    }

    /// `α_axis + α_{axis+d}` for an axis in `0..d`.
    pub fn pair(&self, axis: usize) -> T {
        self.alpha[axis].clone() + self.alpha[axis + self.d].clone()
    }

    /// Weights of the time-reversed environment: `α̌(x, x+e_i) = α(x+e_i, x)`.
    pub fn reversed(&self) -> Self {
        let alpha = (0..2 * self.d)
            .map(|i| self.alpha[opposite(i, self.d)].clone())
            .collect();
        Weights {
            d: self.d,
            alpha,
            alpha0: self.alpha0.clone(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.d).all(|i| self.alpha[i] == self.alpha[i + self.d])
    }

    pub fn to_f64(&self) -> Weights<f64> {
        Weights {
            d: self.d,
            alpha: self.alpha.iter().map(scalar::to_f64).collect(),
            alpha0: scalar::to_f64(&self.alpha0),
        }
    }
}

/// Drift after one step under the annealed law, `d_α = Σ α_i e_i / α₀`.
pub fn drift<T: Scalar>(weights: &Weights<T>) -> Vec<T> {
    let d = weights.d();
    (0..d)
        .map(|i| (weights.alpha[i].clone() - weights.alpha[i + d].clone()) / weights.alpha0.clone())
        .collect()
}

/// Exit probabilities of one site, in direction order.
#[derive(Clone, Copy, PartialEq)]
pub struct SiteProbabilities {
    len: u8,
    probs: [f64; MAX_DIRS],
}

impl std::fmt::Debug for SiteProbabilities {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Serialize for SiteProbabilities {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.as_slice())
    }
}

impl SiteProbabilities {
    pub fn new(probs: &[f64]) -> Result<Self> {
        if probs.is_empty() || probs.len() > MAX_DIRS || !probs.len().is_multiple_of(2) {
            return Err(Error::InvalidProbabilities(format!(
                "{} entries is not 2d for a supported d",
                probs.len()
            )));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidProbabilities(format!(
                "entry {i} = {p} is not strictly positive"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidProbabilities(format!("entries sum to {total}")));
        }
        Ok(Self::from_slice_unchecked(probs))
    }

    pub(crate) fn from_slice_unchecked(probs: &[f64]) -> Self {
        let mut arr = [0.0; MAX_DIRS];
        arr[..probs.len()].copy_from_slice(probs);
        SiteProbabilities {
            len: probs.len() as u8,
            probs: arr,
        }
    }

    pub fn uniform(d: usize) -> Self {
        Self::from_slice_unchecked(&vec![1.0 / (2 * d) as f64; 2 * d])
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.probs[..self.len as usize]
    }

    #[inline]
    pub fn get(&self, dir: usize) -> f64 {
        self.probs[dir]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.len as usize / 2
    }

    /// Inverse-CDF draw over the fixed direction order; `u` in `[0, 1)`.
    #[inline]
    pub fn sample_direction(&self, u: f64) -> usize {
        let n = self.len as usize;
        let mut acc = 0.0;
        for dir in 0..n - 1 {
            acc += self.probs[dir];
            if u < acc {
                return dir;
            }
        }
        n - 1
    }
}

/// Anything that can report the exit probabilities at a site.
pub trait Environment {
    fn dim(&self) -> usize;

    fn probs(&self, x: &Site) -> Result<SiteProbabilities>;

    /// Seed identifying a random environment, used in diagnostics.
    fn seed(&self) -> Option<u64> {
        None
    }
}

impl<E: Environment + ?Sized> Environment for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn probs(&self, x: &Site) -> Result<SiteProbabilities> {
        (**self).probs(x)
    }

    fn seed(&self) -> Option<u64> {
        (**self).seed()
    }
}

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Marsaglia–Tsang squeeze for shape >= 1; shape < 1 is boosted through
/// `G(a) = G(a+1) U^{1/a}`.
pub fn gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let boosted = gamma_variate(shape + 1.0, rng);
        return boosted * open01(rng).powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open01(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Logarithm of a Gamma(shape, 1) variate; finite even when the variate
/// itself would underflow.
pub fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let boosted = ln_gamma_variate(shape + 1.0, rng);
        return boosted + open01(rng).ln() / shape;
    }
    gamma_variate(shape, rng).ln()
}

/// One Dirichlet(α) draw, resampled until every component is nonzero.
pub fn sample_dirichlet<R: Rng + ?Sized>(weights: &Weights<f64>, rng: &mut R) -> SiteProbabilities {
    let n = 2 * weights.d();
    let alpha = weights.alpha();
    let log_space = alpha.iter().any(|&a| a < LOG_SPACE_SHAPE);
    let mut buf = [0.0f64; MAX_DIRS];
    loop {
        if log_space {
            let mut max = f64::NEG_INFINITY;
            for (slot, &a) in buf.iter_mut().zip(alpha) {
                *slot = ln_gamma_variate(a, rng);
                max = max.max(*slot);
            }
            let mut total = 0.0;
            for slot in buf.iter_mut().take(n) {
                *slot = (*slot - max).exp();
                total += *slot;
            }
            for slot in buf.iter_mut().take(n) {
                *slot /= total;
            }
        } else {
            let mut total = 0.0;
            for (slot, &a) in buf.iter_mut().zip(alpha) {
                *slot = gamma_variate(a, rng);
                total += *slot;
            }
            for slot in buf.iter_mut().take(n) {
                *slot /= total;
            }
        }
        if buf[..n].iter().all(|p| *p > 0.0 && p.is_finite()) {
            return SiteProbabilities::from_slice_unchecked(&buf[..n]);
        }
    }
}

/// `ln E[∏ ω_i^{θ_i}]` under Dirichlet(α).
pub fn ln_dirichlet_moment(weights: &Weights<f64>, theta: &[f64]) -> Result<f64> {
    let alpha = weights.alpha();
    if theta.len() != alpha.len() {
        return Err(Error::Dimension {
            expected: alpha.len(),
            got: theta.len(),
        });
    }
    let mut acc = 0.0;
    for (i, (&a, &t)) in alpha.iter().zip(theta).enumerate() {
        let arg = a + t;
        if !(arg > 0.0) {
            return Err(Error::Domain {
                index: i,
                argument: arg,
            });
        }
        acc += ln_gamma(arg) - ln_gamma(a);
    }
    let a0 = *weights.alpha0();
    let total = a0 + theta.iter().sum::<f64>();
    if !(total > 0.0) {
        return Err(Error::Domain {
            index: alpha.len(),
            argument: total,
        });
    }
    Ok(acc + ln_gamma(a0) - ln_gamma(total))
}

/// `E[∏ ω_i^{θ_i}] = ∏ Γ(α_i+θ_i)/Γ(α_i) · Γ(α₀)/Γ(α₀+Σθ)`.
pub fn dirichlet_moment(weights: &Weights<f64>, theta: &[f64]) -> Result<f64> {
    ln_dirichlet_moment(weights, theta).map(f64::exp)
}

/// Lazily realized i.i.d. Dirichlet environment on Z^d.
///
/// The vector at `x` is a pure function of `(weights, master_seed, x)`; it is
/// sampled on first request and cached.
pub struct LatticeEnvironment {
    weights: Weights<f64>,
    master_seed: u64,
    site_budget: usize,
    cache: RwLock<FxHashMap<Site, SiteProbabilities>>,
}

impl LatticeEnvironment {
    pub fn new(weights: Weights<f64>, master_seed: u64) -> Self {
        LatticeEnvironment {
            weights,
            master_seed,
            site_budget: DEFAULT_SITE_BUDGET,
            cache: RwLock::new(FxHashMap::default()),
        }
    }

    pub fn with_site_budget(mut self, budget: usize) -> Self {
        self.site_budget = budget;
        self
    }

    pub fn weights(&self) -> &Weights<f64> {
        &self.weights
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn materialized_sites(&self) -> usize {
        self.cache.read().len()
    }

    /// Uncached draw for `x`; what `probs` returns on first materialization.
    pub fn draw_site(&self, x: &Site) -> SiteProbabilities {
        let mut stream = rng::site_stream(self.master_seed, x);
        sample_dirichlet(&self.weights, &mut stream)
    }
}

impl Environment for LatticeEnvironment {
    fn dim(&self) -> usize {
        self.weights.d()
    }

    fn probs(&self, x: &Site) -> Result<SiteProbabilities> {
        if let Some(p) = self.cache.read().get(x) {
            return Ok(*p);
        }
        let drawn = self.draw_site(x);
        let mut cache = self.cache.write();
        if cache.len() >= self.site_budget && !cache.contains_key(x) {
            return Err(Error::SiteBudget {
                budget: self.site_budget,
            });
        }
        Ok(*cache.entry(*x).or_insert(drawn))
    }

    fn seed(&self) -> Option<u64> {
        Some(self.master_seed)
    }
}

/// Environment on `T_N`; as an [`Environment`] it is the periodic lift to Z^d.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusEnvironment {
    geometry: TorusGeometry,
    sites: Vec<SiteProbabilities>,
    seed: Option<u64>,
}

impl TorusEnvironment {
    pub fn new(geometry: TorusGeometry, sites: Vec<SiteProbabilities>) -> Result<Self> {
        if sites.len() != geometry.size() {
            return Err(Error::Dimension {
                expected: geometry.size(),
                got: sites.len(),
            });
        }
        if let Some(bad) = sites.iter().find(|s| s.len() != geometry.dirs()) {
            return Err(Error::Dimension {
                expected: geometry.dirs(),
                got: bad.len(),
            });
        }
        Ok(TorusEnvironment {
            geometry,
            sites,
            seed: None,
        })
    }

    pub fn uniform(n: usize, d: usize) -> Result<Self> {
        let geometry = TorusGeometry::new(n, d)?;
        Self::new(geometry, vec![SiteProbabilities::uniform(d); geometry.size()])
    }

    pub fn geometry(&self) -> TorusGeometry {
        self.geometry
    }

    pub fn n(&self) -> usize {
        self.geometry.n
    }

    pub fn sites(&self) -> &[SiteProbabilities] {
        &self.sites
    }

    #[inline]
    pub fn at(&self, idx: usize) -> &SiteProbabilities {
        &self.sites[idx]
    }

    /// `ω(x, x+e_dir)` for torus index `x`.
    #[inline]
    pub fn omega(&self, idx: usize, dir: usize) -> f64 {
        self.sites[idx].get(dir)
    }
}

impl Environment for TorusEnvironment {
    fn dim(&self) -> usize {
        self.geometry.d
    }

    fn probs(&self, x: &Site) -> Result<SiteProbabilities> {
        Ok(self.sites[self.geometry.index(x)])
    }

    fn seed(&self) -> Option<u64> {
        self.seed
    }
}

/// i.i.d. Dirichlet sites on `T_N`. Site `x` uses the same keyed stream as
/// `LatticeEnvironment` at the representative of `x` in `[0, N)^d`.
pub fn sample_torus_env(weights: &Weights<f64>, n: usize, seed: u64) -> Result<TorusEnvironment> {
    let geometry = TorusGeometry::new(n, weights.d())?;
    let sites = (0..geometry.size())
        .map(|idx| {
            let mut stream = rng::site_stream(seed, &geometry.site(idx));
            sample_dirichlet(weights, &mut stream)
        })
        .collect();
    let mut env = TorusEnvironment::new(geometry, sites)?;
    env.seed = Some(seed);
    Ok(env)
}

/// Hand-built environment: a default vector plus per-site overrides.
#[derive(Clone, Debug)]
pub struct ExplicitEnvironment {
    d: usize,
    default: SiteProbabilities,
    overrides: FxHashMap<Site, SiteProbabilities>,
}

impl ExplicitEnvironment {
    pub fn homogeneous(probs: SiteProbabilities) -> Self {
        ExplicitEnvironment {
            d: probs.dim(),
            default: probs,
            overrides: FxHashMap::default(),
        }
    }

    pub fn uniform(d: usize) -> Self {
        Self::homogeneous(SiteProbabilities::uniform(d))
    }

    pub fn with_site(mut self, x: Site, probs: SiteProbabilities) -> Self {
        self.overrides.insert(x, probs);
        self
    }
}

impl Environment for ExplicitEnvironment {
    fn dim(&self) -> usize {
        self.d
    }

    fn probs(&self, x: &Site) -> Result<SiteProbabilities> {
        Ok(*self.overrides.get(x).unwrap_or(&self.default))
    }
}
