//! Random walks in i.i.d. Dirichlet environments on Z^d.
//!
//! The crate samples environments, computes the acceleration function γ and
//! the exit-sum exponents κ, κ^Λ and β_min, builds the torus invariant
//! density, simulates the discrete and the accelerated walk, and provides
//! the estimators used to check their asymptotics.

pub mod accel;
pub mod cuts;
pub mod env;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod torus;
pub mod walk;

use num_rational::Rational64;

pub use accel::{GammaMethod, LambdaShape, NeighborhoodSet};
pub use env::{Environment, LatticeEnvironment, SiteProbabilities, TorusEnvironment, Weights};
pub use error::{Error, Result};
pub use lattice::{Site, TorusGeometry};

/// Dirichlet weights with exact rational entries.
pub type ExactWeights = Weights<Rational64>;
/// κ^Λ result on the lattice in floating point.
pub type LatticeCut = cuts::CutResult<f64>;
/// κ^Λ result on the lattice in exact arithmetic.
pub type ExactLatticeCut = cuts::CutResult<Rational64>;
/// β_min result on a cemetery graph (graph vertex and edge indices).
pub type GraphCut = cuts::CutResult<f64, usize, usize>;
