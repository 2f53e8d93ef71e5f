//! Root-vector expansions of non-normal matrices, Abel-Lidskii regularized
//! series, and resolvent contour integrals for the Cauchy problem
//! `du/dt + φ(W)u = 0`, `W = B^{-1}`, each with an independent oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abel;
pub mod contour;
pub mod csv;
pub mod error;
pub mod evolution;
pub mod expm;
pub mod fixtures;
pub mod jordan;
pub mod matrixcore;
pub mod opfunc;
pub mod quadrature;
pub mod spectralstats;

pub use abel::{h_function, AbelCoefficients, AbelEvaluator, AbelKernel, HFamily, LimitProbe};
pub use contour::{build_contour, ContourIntegrator, ContourSpec, QuadratureResult, TailTrace};
pub use error::{Error, Result};
pub use evolution::{solve_cauchy, solve_cauchy_with, EvolutionSolution, Oracle, SolveOptions};
pub use fixtures::{Fixture, FixtureKind, FixtureRecipe};
pub use jordan::{ChainSpec, JordanSystem};
pub use matrixcore::{CMatrix, CVector, DenseOperator};
pub use num_complex::Complex64;
pub use opfunc::LaurentFunction;
pub use spectralstats::SingularProfile;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
