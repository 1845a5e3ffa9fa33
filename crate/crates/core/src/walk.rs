//! The discrete walk `Z_n`, the accelerated walk `X_t` and the path
//! functionals built on them: hitting times, exit times Θ_k, renewal
//! indices, excursion maxima and the time change `A(t) = ∫₀ᵗ γ(X_s) ds`.
//!
//! Moves and holding times come from separate streams, so a discrete run
//! and an accelerated run sharing the move stream visit the same vertices in
//! the same order.

use rand::distr::Open01;
use rand::Rng;
use rustc_hash::FxHashMap;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::accel::{gamma_at, GammaMethod, NeighborhoodSet};
use crate::env::{Environment, Weights};
use crate::error::{Error, Result};
use crate::lattice::{opposite, Site};
use crate::rng::{self, lane, Stream};

/// Independent move and clock streams of one replica.
pub struct WalkStreams {
    pub moves: Stream,
    pub clocks: Stream,
}

impl WalkStreams {
    pub fn new(seed: u64) -> Self {
        WalkStreams {
            moves: rng::stream(seed, &[lane::MOVES]),
            clocks: rng::stream(seed, &[lane::CLOCKS]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub d: usize,
    /// `Z_0, …, Z_n`.
    pub positions: Vec<Site>,
    /// `t_0 = 0 < t_1 < …`, one per position (accelerated runs only).
    pub jump_times: Option<Vec<f64>>,
    /// `E_1, …, E_n`; `E_k` is the holding clock at `Z_{k-1}`.
    pub exp_draws: Option<Vec<f64>>,
    /// `γ(Z_0), …, γ(Z_{n-1})`.
    pub gamma_values: Option<Vec<f64>>,
    /// `A(t_k) = E_1 + … + E_k`, with `A(t_0) = 0`.
    pub a_values: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn last(&self) -> &Site {
        self.positions.last().expect("a trajectory has a start")
    }

    pub fn projections(&self, dir: usize) -> impl Iterator<Item = i64> + '_ {
        self.positions.iter().map(move |x| x.project(dir, self.d))
    }

    /// `X_t`: the position held at time `t`.
    pub fn position_at(&self, t: f64) -> Result<Site> {
        let times = self.times()?;
        let horizon = *times.last().expect("nonempty");
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::Range(format!("time {t} outside [0, {horizon}]")));
        }
        Ok(self.positions[times.partition_point(|&s| s <= t) - 1])
    }

    fn times(&self) -> Result<&[f64]> {
        self.jump_times
            .as_deref()
            .ok_or_else(|| Error::Precondition("the trajectory carries no jump times".into()))
    }
}

/// Steps the chain `n_steps` times from `start`, calling `visit(n, Z_n)` for
/// every position including the start.
pub fn walk_discrete_with<E, R, F>(env: &E, n_steps: u64, start: Site, rng: &mut R, mut visit: F) -> Result<Site>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(u64, &Site),
{
    let d = env.dim();
    let mut x = start;
    visit(0, &x);
    for n in 1..=n_steps {
        let dir = env.probs(&x)?.sample_direction(rng.random::<f64>());
        x = x.step(dir, d);
        visit(n, &x);
    }
    Ok(x)
}

pub fn run_discrete<E, R>(env: &E, n_steps: u64, start: Site, rng: &mut R) -> Result<Trajectory>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    let mut positions = Vec::with_capacity(n_steps as usize + 1);
    walk_discrete_with(env, n_steps, start, rng, |_, x| positions.push(*x))?;
    Ok(Trajectory {
        d: env.dim(),
        positions,
        jump_times: None,
        exp_draws: None,
        gamma_values: None,
        a_values: None,
    })
}

/// Walk-local memo of γ by site.
pub struct GammaCache<'a, E: ?Sized> {
    env: &'a E,
    lambda: &'a NeighborhoodSet,
    method: GammaMethod,
    cache: FxHashMap<Site, f64>,
}

impl<'a, E: Environment + ?Sized> GammaCache<'a, E> {
    pub fn new(env: &'a E, lambda: &'a NeighborhoodSet, method: GammaMethod) -> Self {
        GammaCache {
            env,
            lambda,
            method,
            cache: FxHashMap::default(),
        }
    }

    pub fn get(&mut self, x: &Site) -> Result<f64> {
        if let Some(&g) = self.cache.get(x) {
            return Ok(g);
        }
        let g = gamma_at(self.env, x, self.lambda, self.method).map_err(|e| match e {
            Error::SiteBudget { .. } => e,
            other => Error::GammaAtSite {
                site: x.to_vec(self.env.dim()),
                env_seed: self.env.seed(),
                reason: other.to_string(),
            },
        })?;
        self.cache.insert(*x, g);
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }
}

/// Accelerated walk: holds at `Z_k` for `E_{k+1}/γ(Z_k)` and then moves like
/// the discrete walk. Stops at the first jump time `t_n ≥ horizon`.
pub fn run_accelerated<E>(
    env: &E,
    gamma: &mut GammaCache<'_, E>,
    horizon: f64,
    start: Site,
    streams: &mut WalkStreams,
) -> Result<Trajectory>
where
    E: Environment + ?Sized,
{
    if !(horizon > 0.0) {
        return Err(Error::Precondition("horizon must be positive".into()));
    }
    let d = env.dim();
    let mut x = start;
    let mut positions = vec![x];
    let mut times = vec![0.0];
    let mut draws = Vec::new();
    let mut gammas = Vec::new();
    let mut a_values = vec![0.0];
    let mut t = 0.0;
    let mut a = 0.0;
    while t < horizon {
        let g = gamma.get(&x)?;
        let e = -streams.clocks.sample::<f64, _>(Open01).ln();
        t += e / g;
        a += e;
        let dir = env.probs(&x)?.sample_direction(streams.moves.random::<f64>());
        x = x.step(dir, d);
        positions.push(x);
        times.push(t);
        draws.push(e);
        gammas.push(g);
        a_values.push(a);
    }
    Ok(Trajectory {
        d,
        positions,
        jump_times: Some(times),
        exp_draws: Some(draws),
        gamma_values: Some(gammas),
        a_values: Some(a_values),
    })
}

/// `A(t) = ∫₀ᵗ γ(X_s) ds`, linear between jump times.
pub fn time_change_a(traj: &Trajectory, t: f64) -> Result<f64> {
    let times = traj.times()?;
    let horizon = *times.last().expect("nonempty");
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::Range(format!("time {t} outside [0, {horizon}]")));
    }
    let a = traj.a_values.as_ref().expect("accelerated trajectories carry A");
    let gammas = traj.gamma_values.as_ref().expect("accelerated trajectories carry γ");
    let k = times.partition_point(|&s| s <= t) - 1;
    if k == times.len() - 1 {
        return Ok(a[k]);
    }
    Ok(a[k] + gammas[k] * (t - times[k]))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HittingRecord {
    pub dir: usize,
    pub levels: Vec<u64>,
    /// First step index with `Z · l ≥ level`; `None` when censored.
    pub steps: Vec<Option<u64>>,
    /// The matching jump times for accelerated trajectories.
    pub times: Option<Vec<Option<f64>>>,
}

impl HittingRecord {
    pub fn censored(&self, i: usize) -> bool {
        self.steps[i].is_none()
    }
}

/// Streaming first-passage recorder over levels sorted ascending.
#[derive(Clone, Debug)]
pub struct HittingTracker {
    levels: Vec<u64>,
    hits: Vec<Option<u64>>,
    next: usize,
}

impl HittingTracker {
    pub fn new(mut levels: Vec<u64>) -> Self {
        levels.sort_unstable();
        levels.dedup();
        let n = levels.len();
        HittingTracker {
            levels,
            hits: vec![None; n],
            next: 0,
        }
    }

    #[inline]
    pub fn observe(&mut self, step: u64, projection: i64) {
        while self.next < self.levels.len() && projection >= self.levels[self.next] as i64 {
            self.hits[self.next] = Some(step);
            self.next += 1;
        }
    }

    pub fn levels(&self) -> &[u64] {
        &self.levels
    }

    pub fn hits(&self) -> &[Option<u64>] {
        &self.hits
    }
}

/// `T_n = inf{k : Z_k · l ≥ n}` for each requested level.
pub fn hitting_times(traj: &Trajectory, dir: usize, levels: &[u64]) -> HittingRecord {
    let mut tracker = HittingTracker::new(levels.to_vec());
    for (k, p) in traj.projections(dir).enumerate() {
        tracker.observe(k as u64, p);
    }
    let lookup: FxHashMap<u64, Option<u64>> = tracker
        .levels()
        .iter()
        .copied()
        .zip(tracker.hits().iter().copied())
        .collect();
    let steps: Vec<Option<u64>> = levels.iter().map(|l| lookup[l]).collect();
    let times = traj
        .jump_times
        .as_ref()
        .map(|ts| steps.iter().map(|s| s.map(|k| ts[k as usize])).collect());
    HittingRecord {
        dir,
        levels: levels.to_vec(),
        steps,
        times,
    }
}

/// `Θ_0 = inf{n : Z_n ∉ {Z_0, Z_0 + l}}` counted from `start`, or `None` if
/// the trajectory ends first.
pub fn exit_time_from(traj: &Trajectory, dir: usize, start: usize) -> Option<u64> {
    let base = traj.positions[start];
    let partner = base.step(dir, traj.d);
    traj.positions[start..]
        .iter()
        .position(|x| *x != base && *x != partner)
        .map(|k| k as u64)
}

/// `Θ_k = Θ_0 ∘ τ_{T_{2k}}` for `k = 0, 1, …`, stopping after the first
/// censored value. The shift to `T_{2k}` is a step index.
pub fn theta_exit_times(traj: &Trajectory, dir: usize) -> Vec<Option<u64>> {
    let mut out = Vec::new();
    let mut tracker_level = 0u64;
    let mut k_index = 0usize;
    let projections: Vec<i64> = traj.projections(dir).collect();
    loop {
        let level = 2 * tracker_level;
        while k_index < projections.len() && projections[k_index] < level as i64 {
            k_index += 1;
        }
        if k_index == projections.len() {
            out.push(None);
            return out;
        }
        let theta = exit_time_from(traj, dir, k_index);
        out.push(theta);
        if theta.is_none() {
            return out;
        }
        tracker_level += 1;
    }
}

/// `E[ω(0,e₁)^{⌈n/2⌉} ω(e₁,0)^{⌊n/2⌋}]` for two independent Dirichlet sites:
/// the probability that the first `n` steps alternate inside `{0, e₁}`,
/// i.e. `P(Θ₀ > n)`.
pub fn closed_form_theta_tail(weights: &Weights<f64>, n: u64) -> f64 {
    ln_theta_tail(weights, 0, n as f64).exp()
}

/// Logarithm of the tail along direction `dir`, for real `n ≥ 0`.
pub fn ln_theta_tail(weights: &Weights<f64>, dir: usize, n: f64) -> f64 {
    let a0 = *weights.alpha0();
    let a_fwd = weights.alpha()[dir];
    let a_back = weights.alpha()[opposite(dir, weights.d())];
    let up = (n / 2.0).ceil();
    let down = (n / 2.0).floor();
    2.0 * ln_gamma(a0) - ln_gamma(a_fwd) - ln_gamma(a_back) + ln_gamma(a_fwd + up) + ln_gamma(a_back + down)
        - ln_gamma(a0 + up)
        - ln_gamma(a0 + down)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Renewals {
    /// Renewal step indices, provisional ones included.
    pub indices: Vec<u64>,
    /// `Z_τ · l` at each renewal.
    pub levels: Vec<i64>,
    /// Renewals inside the final window, where the future is not observed
    /// long enough to confirm them.
    pub provisional: Vec<bool>,
}

impl Renewals {
    /// Level gaps between consecutive confirmed renewals.
    pub fn confirmed_gaps(&self) -> Vec<u64> {
        let confirmed: Vec<i64> = self
            .levels
            .iter()
            .zip(&self.provisional)
            .filter(|(_, p)| !**p)
            .map(|(l, _)| *l)
            .collect();
        confirmed.windows(2).map(|w| (w[1] - w[0]) as u64).collect()
    }
}

/// Indices `τ` with `Z_τ · l` above every earlier value and no later value
/// below it. Renewals after `horizon · (1 − provisional_fraction)` are
/// flagged provisional.
pub fn renewal_times(traj: &Trajectory, dir: usize, provisional_fraction: f64) -> Renewals {
    let proj: Vec<i64> = traj.projections(dir).collect();
    renewals_from_projections(&proj, provisional_fraction)
}

pub fn renewals_from_projections(proj: &[i64], provisional_fraction: f64) -> Renewals {
    let n = proj.len();
    let mut suffix_min = vec![i64::MAX; n];
    let mut m = i64::MAX;
    for i in (0..n).rev() {
        m = m.min(proj[i]);
        suffix_min[i] = m;
    }
    let cutoff = ((n.saturating_sub(1)) as f64 * (1.0 - provisional_fraction)).floor() as u64;
    let mut out = Renewals {
        indices: Vec::new(),
        levels: Vec::new(),
        provisional: Vec::new(),
    };
    let mut running_max = i64::MIN;
    for (i, &p) in proj.iter().enumerate() {
        if p > running_max {
            running_max = p;
            if suffix_min[i] >= p {
                out.indices.push(i as u64);
                out.levels.push(p);
                out.provisional.push(i as u64 > cutoff);
            }
        }
    }
    out
}

/// `D(l, n) = max_{t ∈ [n, n+1]} |(X_t − X_n) · l|`.
pub fn excursion_max(traj: &Trajectory, dir: usize, n: f64) -> Result<f64> {
    let times = traj.times()?;
    let horizon = *times.last().expect("nonempty");
    if n < 0.0 || n + 1.0 > horizon {
        return Err(Error::Range(format!(
            "window [{n}, {}] not covered by the horizon {horizon}",
            n + 1.0
        )));
    }
    let start = times.partition_point(|&s| s <= n) - 1;
    let base = traj.positions[start].project(dir, traj.d);
    let mut best = 0i64;
    for (t, x) in times.iter().zip(&traj.positions).skip(start + 1) {
        if *t > n + 1.0 {
            break;
        }
        best = best.max((x.project(dir, traj.d) - base).abs());
    }
    Ok(best as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{dirichlet_moment, ExplicitEnvironment, LatticeEnvironment, SiteProbabilities};

    fn site(c: &[i32]) -> Site {
        Site::new(c).unwrap()
    }

    fn path(d: usize, coords: &[&[i32]]) -> Trajectory {
        Trajectory {
            d,
            positions: coords.iter().map(|c| site(c)).collect(),
            jump_times: None,
            exp_draws: None,
            gamma_values: None,
            a_values: None,
        }
    }

    #[test]
    fn near_deterministic_env_is_monotone() {
        let eps = 1e-9;
        let p = SiteProbabilities::new(&[1.0 - 3.0 * eps, eps, eps, eps]).unwrap();
        let env = ExplicitEnvironment::homogeneous(p);
        let mut s = rng::stream(1, &[]);
        let traj = run_discrete(&env, 1000, Site::ORIGIN, &mut s).unwrap();
        for (k, x) in traj.positions.iter().enumerate() {
            assert_eq!(x.coords(2), &[k as i32, 0]);
        }
        let rec = hitting_times(&traj, 0, &[0, 5, 10, 2000]);
        assert_eq!(rec.steps, vec![Some(0), Some(5), Some(10), None]);
        let ren = renewal_times(&traj, 0, 0.0);
        assert_eq!(ren.indices.len(), 1001);
    }

    #[test]
    fn replay_is_deterministic() {
        let w = Weights::new(2, vec![0.5, 0.3, 0.4, 0.6]).unwrap();
        let env = LatticeEnvironment::new(w, 3);
        let a = run_discrete(&env, 500, Site::ORIGIN, &mut WalkStreams::new(4).moves).unwrap();
        let b = run_discrete(&env, 500, Site::ORIGIN, &mut WalkStreams::new(4).moves).unwrap();
        assert_eq!(a, b);
        for w in a.positions.windows(2) {
            assert!(w[0].is_neighbor(&w[1]));
        }
    }

    #[test]
    fn accelerated_walk_shares_the_embedded_path() {
        let w = Weights::new(2, vec![0.5, 0.3, 0.4, 0.6]).unwrap();
        let env = LatticeEnvironment::new(w, 3);
        let lambda = NeighborhoodSet::pair(2).unwrap();
        let mut cache = GammaCache::new(&env, &lambda, GammaMethod::default());
        let acc = run_accelerated(&env, &mut cache, 50.0, Site::ORIGIN, &mut WalkStreams::new(9)).unwrap();
        let disc = run_discrete(&env, acc.steps() as u64, Site::ORIGIN, &mut WalkStreams::new(9).moves).unwrap();
        assert_eq!(acc.positions, disc.positions);

        let times = acc.jump_times.as_ref().unwrap();
        let draws = acc.exp_draws.as_ref().unwrap();
        let gammas = acc.gamma_values.as_ref().unwrap();
        let mut prefix = 0.0;
        for k in 1..times.len() {
            assert!(times[k] > times[k - 1]);
            prefix += draws[k - 1];
            assert_eq!(time_change_a(&acc, times[k]).unwrap(), prefix);
            assert!(((times[k] - times[k - 1]) - draws[k - 1] / gammas[k - 1]).abs() <= 1e-12 * times[k]);
        }
        assert_eq!(time_change_a(&acc, 0.0).unwrap(), 0.0);
        assert!(matches!(time_change_a(&acc, 1e9), Err(Error::Range(_))));
    }

    #[test]
    fn singleton_acceleration_is_unit_rate() {
        let env = ExplicitEnvironment::uniform(2);
        let lambda = NeighborhoodSet::singleton(2);
        let mut cache = GammaCache::new(&env, &lambda, GammaMethod::default());
        let traj = run_accelerated(&env, &mut cache, 20_000.0, Site::ORIGIN, &mut WalkStreams::new(1)).unwrap();
        for t in [0.5, 7.25, 19_999.0] {
            assert!((time_change_a(&traj, t).unwrap() - t).abs() < 1e-9 * t.max(1.0));
        }
        let jumps_before = traj.steps() as f64 - 1.0;
        assert!((jumps_before / 20_000.0 - 1.0).abs() < 5.0 / 20_000f64.sqrt());
    }

    #[test]
    fn theta_examples() {
        let t = path(2, &[&[0, 0], &[1, 0], &[0, 0], &[1, 0], &[1, 1]]);
        assert_eq!(exit_time_from(&t, 0, 0), Some(4));
        let t = path(2, &[&[0, 0], &[0, 1]]);
        assert_eq!(exit_time_from(&t, 0, 0), Some(1));
        let t = path(2, &[&[0, 0], &[1, 0], &[2, 0], &[3, 0], &[2, 0], &[2, 1]]);
        assert_eq!(theta_exit_times(&t, 0), vec![Some(2), Some(3), None]);
    }

    #[test]
    fn theta_tail_matches_moment_oracle() {
        let w = Weights::new(2, vec![1.0; 4]).unwrap();
        assert!((closed_form_theta_tail(&w, 0) - 1.0).abs() < 1e-14);
        assert!((closed_form_theta_tail(&w, 2) - 0.0625).abs() < 1e-14);
        assert!((closed_form_theta_tail(&w, 3) - 0.025).abs() < 1e-14);
        let e1 = dirichlet_moment(&w, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let e2 = dirichlet_moment(&w, &[2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((closed_form_theta_tail(&w, 4) - e2 * e2).abs() < 1e-14);
        assert!((closed_form_theta_tail(&w, 3) - e2 * e1).abs() < 1e-14);
    }

    #[test]
    fn renewals_skip_revisited_records() {
        let proj = [0, 1, 2, 1, 3, 4, 4, 5];
        let r = renewals_from_projections(&proj, 0.0);
        assert_eq!(r.indices, vec![0, 1, 4, 5, 7]);
        assert_eq!(r.confirmed_gaps(), vec![1, 2, 1, 1]);
        let r = renewals_from_projections(&proj, 0.5);
        assert_eq!(r.provisional, vec![false, false, true, true, true]);
    }

    #[test]
    fn excursion_examples() {
        let traj = Trajectory {
            d: 2,
            positions: vec![site(&[0, 0]), site(&[0, 1]), site(&[1, 1]), site(&[-1, 1])],
            jump_times: Some(vec![0.0, 0.5, 2.5, 4.0]),
            exp_draws: None,
            gamma_values: None,
            a_values: None,
        };
        assert_eq!(excursion_max(&traj, 0, 1.0).unwrap(), 0.0);
        assert_eq!(excursion_max(&traj, 0, 0.0).unwrap(), 0.0);
        assert_eq!(excursion_max(&traj, 1, 0.0).unwrap(), 1.0);
        assert_eq!(excursion_max(&traj, 0, 2.0).unwrap(), 1.0);
        assert!(matches!(excursion_max(&traj, 0, 3.5), Err(Error::Range(_))));
        assert_eq!(traj.position_at(3.0).unwrap(), site(&[1, 1]));
    }
}
