//! Domain-decomposition preconditioners for first-kind volume integral
//! equations of the Laplace operator on uniform grids.

pub mod dense;
pub mod error;
pub mod fast_matvec;
pub mod geometry;
pub mod kernel;
pub mod pcg;
pub mod precond;
pub mod quadrature;
pub mod rskel;
pub mod spectrum;

pub use error::{Error, Result};
pub use fast_matvec::{LinearOperator, ToeplitzMatvec};
pub use geometry::{Decomposition, DecompositionKind, Grid};
pub use kernel::{KernelOperator, PointLayout};
