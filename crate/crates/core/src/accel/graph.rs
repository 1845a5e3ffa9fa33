//! Finite directed graphs with an absorbing cemetery vertex δ.

use serde::Serialize;

use super::{NeighborhoodSet, DEFAULT_NODE_BUDGET};
use crate::error::{Error, Result};

/// A directed edge; `to == None` means the edge enters δ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: Option<usize>,
}

/// Vertices `0..n` plus δ. Edges into δ may be parallel (a contracted
/// complement receives one edge per crossing); edges between ordinary
/// vertices may not.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CemeteryGraph {
    n: usize,
    edges: Vec<GraphEdge>,
    out: Vec<Vec<usize>>,
}

impl CemeteryGraph {
    pub fn new(n: usize, edges: Vec<GraphEdge>) -> Result<Self> {
        let mut out = vec![Vec::new(); n];
        let mut seen = rustc_hash::FxHashSet::default();
        for (i, e) in edges.iter().enumerate() {
            if e.from >= n || e.to.is_some_and(|t| t >= n) {
                return Err(Error::InvalidGraph(format!("edge {i} references a missing vertex")));
            }
            if e.to == Some(e.from) {
                return Err(Error::InvalidGraph(format!("edge {i} is an elementary loop")));
            }
            if e.to.is_some() && !seen.insert(*e) {
                return Err(Error::InvalidGraph(format!("edge {i} duplicates an earlier edge")));
            }
            out[e.from].push(i);
        }
        Ok(CemeteryGraph { n, edges, out })
    }

    /// Λ with its complement contracted to δ. Edge `v * 2d + dir` leaves
    /// vertex `v` of Λ in direction `dir`.
    pub fn contract(lambda: &NeighborhoodSet) -> Self {
        let dirs = 2 * lambda.d();
        let edges = (0..lambda.len())
            .flat_map(|v| {
                (0..dirs).map(move |dir| GraphEdge {
                    from: v,
                    to: lambda.successor(v, dir),
                })
            })
            .collect();
        Self::new(lambda.len(), edges).expect("lattice contraction is a valid graph")
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    /// Every edge between ordinary vertices has its reverse.
    pub fn is_symmetric(&self) -> bool {
        let set: rustc_hash::FxHashSet<GraphEdge> = self.edges.iter().copied().collect();
        self.edges.iter().all(|e| match e.to {
            Some(t) => set.contains(&GraphEdge {
                from: t,
                to: Some(e.from),
            }),
            None => true,
        })
    }

    pub fn reaches_cemetery(&self, v: usize) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(u) = stack.pop() {
            for &i in &self.out[u] {
                match self.edges[i].to {
                    None => return true,
                    Some(t) if !seen[t] => {
                        seen[t] = true;
                        stack.push(t);
                    }
                    _ => {}
                }
            }
        }
        false
    }

    /// Undirected adjacency over ordinary vertices.
    pub(crate) fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            if let Some(t) = e.to {
                if !adj[e.from].contains(&t) {
                    adj[e.from].push(t);
                }
                if !adj[t].contains(&e.from) {
                    adj[t].push(e.from);
                }
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
        }
        adj
    }
}

/// `1 / Σ_σ ω_σ` over simple paths from `vertex` to δ; `omega[i]` weights edge `i`.
pub fn gamma_finite_graph(graph: &CemeteryGraph, omega: &[f64], vertex: usize) -> Result<f64> {
    if omega.len() != graph.edges.len() {
        return Err(Error::Dimension {
            expected: graph.edges.len(),
            got: omega.len(),
        });
    }
    if vertex >= graph.n {
        return Err(Error::InvalidGraph(format!("vertex {vertex} is not in the graph")));
    }
    if !graph.reaches_cemetery(vertex) {
        return Err(Error::InvalidGraph(format!(
            "the cemetery is unreachable from vertex {vertex}"
        )));
    }
    fn go(
        g: &CemeteryGraph,
        omega: &[f64],
        v: usize,
        on_path: &mut [bool],
        weight: f64,
        nodes: &mut u64,
    ) -> Result<f64> {
        let mut total = 0.0;
        for &i in &g.out[v] {
            *nodes += 1;
            if *nodes > DEFAULT_NODE_BUDGET {
                return Err(Error::Budget {
                    budget: DEFAULT_NODE_BUDGET,
                });
            }
            let w = weight * omega[i];
            match g.edges[i].to {
                None => total += w,
                Some(t) if !on_path[t] => {
                    on_path[t] = true;
                    total += go(g, omega, t, on_path, w, nodes)?;
                    on_path[t] = false;
                }
                _ => {}
            }
        }
        Ok(total)
    }
    let mut on_path = vec![false; graph.n];
    on_path[vertex] = true;
    let mut nodes = 0;
    Ok(1.0 / go(graph, omega, vertex, &mut on_path, 1.0, &mut nodes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::gamma_exact;
    use crate::env::{Environment, LatticeEnvironment, Weights};
    use crate::lattice::Site;

    #[test]
    fn validation() {
        let loop_edge = vec![GraphEdge { from: 0, to: Some(0) }];
        assert!(CemeteryGraph::new(1, loop_edge).is_err());
        let dup = vec![GraphEdge { from: 0, to: Some(1) }, GraphEdge { from: 0, to: Some(1) }];
        assert!(CemeteryGraph::new(2, dup).is_err());
        let parallel_to_cemetery = vec![GraphEdge { from: 0, to: None }, GraphEdge { from: 0, to: None }];
        assert!(CemeteryGraph::new(1, parallel_to_cemetery).is_ok());
    }

    #[test]
    fn small_graph_examples() {
        let g = CemeteryGraph::new(1, vec![GraphEdge { from: 0, to: None }]).unwrap();
        assert!((gamma_finite_graph(&g, &[0.25], 0).unwrap() - 4.0).abs() < 1e-15);
        let g = CemeteryGraph::new(
            2,
            vec![
                GraphEdge { from: 0, to: None },
                GraphEdge { from: 0, to: None },
                GraphEdge { from: 1, to: Some(0) },
            ],
        )
        .unwrap();
        assert!((gamma_finite_graph(&g, &[0.5, 0.5, 1.0], 0).unwrap() - 1.0).abs() < 1e-15);
        let stuck = CemeteryGraph::new(
            2,
            vec![GraphEdge { from: 0, to: Some(1) }, GraphEdge { from: 1, to: Some(0) }],
        )
        .unwrap();
        assert!(matches!(
            gamma_finite_graph(&stuck, &[1.0, 1.0], 0),
            Err(Error::InvalidGraph(_))
        ));
    }

    #[test]
    fn contraction_agrees_with_lattice_gamma() {
        let w = Weights::new(2, vec![0.3, 0.1, 0.3, 0.1]).unwrap();
        let env = LatticeEnvironment::new(w, 21);
        for lambda in [NeighborhoodSet::pair(2).unwrap(), NeighborhoodSet::boxed(2, 1).unwrap()] {
            let g = CemeteryGraph::contract(&lambda);
            assert!(g.is_symmetric());
            let x = Site::new(&[4, -1]).unwrap();
            let omega: Vec<f64> = lambda
                .vertices()
                .iter()
                .flat_map(|v| env.probs(&x.add(v)).unwrap().as_slice().to_vec())
                .collect();
            let a = gamma_finite_graph(&g, &omega, lambda.origin()).unwrap();
            let b = gamma_exact(&env, &x, &lambda).unwrap();
            assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
        }
    }
}
