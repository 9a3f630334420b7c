//! Anchored fixed-point and extragradient methods together with their H-duals,
//! the optimal family between OHM and Dual-OHM, H-duality certificates,
//! continuous-time models, and an experiment harness.

pub mod error;
pub mod family;
pub mod fixedpoint;
pub mod harness;
pub mod hduality;
pub mod hmatrix;
pub mod minimax;
pub mod numerics;
pub mod ode;
pub mod operators;
pub mod plot;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ExperimentReport};
pub use hmatrix::{anti_transpose, Convention, FixedPointKind, GradientKind, HMatrix};
pub use numerics::{DenseMatrix, DenseVector};
pub use operators::{MonotoneMap, NonexpansiveMap, ProblemSpec, SaddleProblem};
pub use trace::Trace;
