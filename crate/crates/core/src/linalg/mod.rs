//! Linear solvers used by the problems and the Gauss-Newton steps.

pub mod banded;
pub mod cg;

pub use banded::{BandCholesky, BandLu, BandMatrix, SymBandMatrix};
pub use cg::{conjugate_gradient, CgSolution};
