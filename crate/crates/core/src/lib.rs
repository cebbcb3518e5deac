//! Lattice potential theory: harmonic measure from infinity, Green's
//! functions, escape probabilities and capacities on `Z^d`, the planar
//! vertex-removal strategy, the example sets built on top of them, and a
//! reproducible experiment harness.

pub mod chain;
pub mod constructions;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod grid;
pub mod kernel;
pub mod lattice;
pub mod measure;
pub mod montecarlo;
pub mod solver;

pub use error::{HarmlatError, Result};
pub use lattice::{Adjacency, LatticePoint, SiteSet};
