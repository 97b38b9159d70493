//! Executable checks for generalized complex (GC) structures.
//!
//! The crate turns the linear-algebraic and pointwise-differential side of
//! GC geometry into testable computations:
//!
//! - [`subspace`]: tolerance-aware complex column spans (the substrate);
//! - [`linear`]: GC structures on a fixed even-dimensional real space —
//!   validation, eigenbundles, types, B-field transforms, the `(E, σ)`
//!   presentation, Dirac pushforwards and GC-map criteria;
//! - [`field`]: finite-difference calculus for structures given as smooth
//!   fields on a coordinate box — Courant brackets, Nijenhuis residuals,
//!   `d_L`, holomorphicity and plurisubharmonicity tests;
//! - [`stein`]: sampled probes of Stein-type properties — hulls,
//!   separability, regularity, exhaustion functions, polyhedra.
//!
//! All values are immutable after construction and all operations are pure,
//! so everything can be called concurrently without coordination.

pub mod error;
pub mod field;
pub mod linear;
pub mod stein;
pub mod subspace;

pub use error::{GcError, Result};
pub use subspace::{ComplexMatrix, RankDecision, Subspace, DEFAULT_TOL};
