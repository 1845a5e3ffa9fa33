//! Exit-sum exponents: κ, the constrained minimum κ^Λ, its closed form on
//! boxes, and β_min on cemetery graphs.
//!
//! The exit sum of a vertex set K is Σ α(e) over directed edges leaving K.
//! Both κ^Λ and β_min minimize it over connected sets grown from a root, so
//! they share one enumerator.

use serde::Serialize;

use crate::accel::{CemeteryGraph, NeighborhoodSet};
use crate::env::Weights;
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::scalar::{self, Scalar};

pub const DEFAULT_SIZE_CAP: usize = 8;
const TIE_TOL: f64 = 1e-12;

/// A minimizing vertex set together with its leaving edges.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutResult<T, V = Site, E = (Site, usize)> {
    pub value: T,
    #[serde(rename = "k_vertices")]
    pub argmin_set: Vec<V>,
    pub cut_edges: Vec<E>,
}

/// `κ = 2α₀ − max_i (α_i + α_{i+d})`.
pub fn kappa<T: Scalar>(weights: &Weights<T>) -> T {
    let two = T::count(2);
    two * weights.alpha0().clone() - max_pair(weights)
}

fn pairs<T: Scalar>(weights: &Weights<T>) -> Vec<T> {
    (0..weights.d()).map(|i| weights.pair(i)).collect()
}

fn max_pair<T: Scalar>(weights: &Weights<T>) -> T {
    let mut best = weights.pair(0);
    for p in pairs(weights).into_iter().skip(1) {
        if p > best {
            best = p;
        }
    }
    best
}

/// `min_{i₀} (α_{i₀} + α_{i₀+d} + (R+1) Σ_{i≠i₀} (α_i + α_{i+d}))`.
pub fn box_kappa_lambda<T: Scalar>(weights: &Weights<T>, radius: u32) -> T {
    let ps = pairs(weights);
    let total = scalar::sum(ps.iter().cloned());
    let factor = T::count(radius as u64 + 1);
    let mut best: Option<T> = None;
    for p in ps {
        let v = p.clone() + factor.clone() * (total.clone() - p);
        if best.as_ref().is_none_or(|b| v < *b) {
            best = Some(v);
        }
    }
    best.expect("at least one axis")
}

/// Smallest box radius whose closed-form κ^Λ exceeds `target`.
pub fn min_radius_for<T: Scalar>(weights: &Weights<T>, target: &T) -> Result<u32> {
    if !target.is_positive() {
        return Err(Error::Precondition("target must be positive".into()));
    }
    let mut r = 0;
    while box_kappa_lambda(weights, r) <= *target {
        r += 1;
    }
    Ok(r)
}

/// κ^Λ: minimal exit sum over connected `K ⊆ Λ` with `0 ∈ K` and
/// `K ∩ ∂Λ ≠ ∅`, enumerated up to `|K| ≤ cap`.
pub fn kappa_lambda<T: Scalar>(weights: &Weights<T>, lambda: &NeighborhoodSet) -> Result<CutResult<T>> {
    kappa_lambda_with_cap(weights, lambda, DEFAULT_SIZE_CAP)
}

pub fn kappa_lambda_with_cap<T: Scalar>(
    weights: &Weights<T>,
    lambda: &NeighborhoodSet,
    cap: usize,
) -> Result<CutResult<T>> {
    if weights.d() != lambda.d() {
        return Err(Error::Dimension {
            expected: weights.d(),
            got: lambda.d(),
        });
    }
    let graph = CemeteryGraph::contract(lambda);
    let alpha = lattice_edge_alpha(weights, lambda);
    let best = min_exit_sum(&graph, &alpha, lambda.origin(), cap, |k| {
        k.iter().any(|&v| lambda.is_boundary(v))
    })?;
    let dirs = 2 * lambda.d();
    Ok(CutResult {
        value: best.value,
        argmin_set: best.argmin_set.iter().map(|&v| lambda.vertices()[v]).collect(),
        cut_edges: best
            .cut_edges
            .iter()
            .map(|&e| (lambda.vertices()[e / dirs], e % dirs))
            .collect(),
    })
}

/// `α` on the edges of [`CemeteryGraph::contract`], in its edge order.
pub fn lattice_edge_alpha<T: Scalar>(weights: &Weights<T>, lambda: &NeighborhoodSet) -> Vec<T> {
    (0..lambda.len())
        .flat_map(|_| weights.alpha().iter().cloned())
        .collect()
}

/// `min β_A` over strongly connected edge sets `A` whose vertex set contains
/// `vertex0`. With symmetric ordinary edges every connected vertex set of
/// size ≥ 2 carries such an `A`, and `β_A` only depends on that vertex set.
/// Vertices are graph indices and edges are graph edge indices.
pub fn beta_min<T: Scalar>(
    graph: &CemeteryGraph,
    alpha: &[T],
    vertex0: usize,
    cap: usize,
) -> Result<CutResult<T, usize, usize>> {
    if alpha.len() != graph.edges().len() {
        return Err(Error::Dimension {
            expected: graph.edges().len(),
            got: alpha.len(),
        });
    }
    if !graph.is_symmetric() {
        return Err(Error::InvalidGraph("ordinary edges must come in opposite pairs".into()));
    }
    if vertex0 >= graph.n_vertices() {
        return Err(Error::InvalidGraph(format!("vertex {vertex0} is not in the graph")));
    }
    if graph.neighbors()[vertex0].is_empty() {
        return Err(Error::InvalidGraph(format!(
            "vertex {vertex0} lies on no strongly connected edge set"
        )));
    }
    min_exit_sum(graph, alpha, vertex0, cap, |k| k.len() >= 2)
}

/// Minimizes the exit sum over connected vertex sets containing `root`
/// accepted by `admissible`, growing sets one vertex at a time. Each
/// connected set is produced once: candidates skipped at a branch are banned
/// in the later branches. Ties resolve to the lexicographically smallest
/// sorted vertex list.
fn min_exit_sum<T: Scalar>(
    graph: &CemeteryGraph,
    alpha: &[T],
    root: usize,
    cap: usize,
    admissible: impl Fn(&[usize]) -> bool,
) -> Result<CutResult<T, usize, usize>> {
    let n = graph.n_vertices();
    if n > 128 {
        return Err(Error::InvalidGraph(format!(
            "{n} vertices exceed the enumeration limit of 128"
        )));
    }
    if cap == 0 {
        return Err(Error::Precondition("size cap must be positive".into()));
    }
    let adj = graph.neighbors();
    let out_total: Vec<T> = (0..n)
        .map(|v| scalar::sum(graph.out_edges(v).iter().map(|&i| alpha[i].clone())))
        .collect();
    // Ordinary edges touching v, in either direction, with their weights.
    let mut touching: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for (i, e) in graph.edges().iter().enumerate() {
        if let Some(t) = e.to {
            touching[t].push((e.from, alpha[i].clone()));
            touching[e.from].push((t, alpha[i].clone()));
        }
    }

    struct Search<'a, T, F> {
        adj: &'a [Vec<usize>],
        out_total: &'a [T],
        touching: &'a [Vec<(usize, T)>],
        cap: usize,
        admissible: F,
        best: Option<(T, Vec<usize>)>,
    }

    impl<T: Scalar, F: Fn(&[usize]) -> bool> Search<'_, T, F> {
        /// Exit sum after adding `v` to a set with membership mask `members`.
        fn extend(&self, value: &T, members: u128, v: usize) -> T {
            let mut next = value.clone() + self.out_total[v].clone();
            for (u, a) in &self.touching[v] {
                if members & (1u128 << u) != 0 {
                    next = next - a.clone();
                }
            }
            next
        }

        fn offer(&mut self, value: &T, set: &[usize]) {
            if !(self.admissible)(set) {
                return;
            }
            let mut sorted = set.to_vec();
            sorted.sort_unstable();
            let better = match &self.best {
                None => true,
                Some((b, bs)) => {
                    let (x, y) = (scalar::to_f64(value), scalar::to_f64(b));
                    let tol = TIE_TOL * y.abs().max(1.0);
                    x < y - tol || ((x - y).abs() <= tol && sorted < *bs)
                }
            };
            if better {
                self.best = Some((value.clone(), sorted));
            }
        }

        fn grow(&mut self, set: &mut Vec<usize>, members: u128, value: T, cand: &[usize], banned: u128) {
            self.offer(&value, set);
            if set.len() == self.cap {
                return;
            }
            let mut banned = banned;
            for (i, &v) in cand.iter().enumerate() {
                let mut next: Vec<usize> = cand[i + 1..].to_vec();
                let mut in_next: u128 = next.iter().fold(0, |m, &u| m | (1u128 << u));
                for &u in &self.adj[v] {
                    let bit = 1u128 << u;
                    if u != v && members & bit == 0 && banned & bit == 0 && in_next & bit == 0 {
                        next.push(u);
                        in_next |= bit;
                    }
                }
                let value_v = self.extend(&value, members, v);
                set.push(v);
                self.grow(set, members | (1u128 << v), value_v, &next, banned | (1u128 << v));
                set.pop();
                banned |= 1u128 << v;
            }
        }
    }

    let mut search = Search {
        adj: &adj,
        out_total: &out_total,
        touching: &touching,
        cap,
        admissible,
        best: None,
    };
    let root_value = out_total[root].clone();
    let cand = adj[root].clone();
    search.grow(&mut vec![root], 1u128 << root, root_value, &cand, 1u128 << root);

    let (value, set) = match search.best {
        Some(best) => best,
        None if cap < n => return Err(Error::SizeCap { cap }),
        None => return Err(Error::Precondition("no admissible vertex set".into())),
    };
    if set.len() == cap && cap < n {
        return Err(Error::SizeCap { cap });
    }
    let members: u128 = set.iter().fold(0, |m, &v| m | (1u128 << v));
    let cut_edges = set
        .iter()
        .flat_map(|&v| graph.out_edges(v).iter().copied())
        .filter(|&i| graph.edges()[i].to.is_none_or(|t| members & (1u128 << t) == 0))
        .collect();
    Ok(CutResult {
        value,
        argmin_set: set,
        cut_edges,
    })
}
