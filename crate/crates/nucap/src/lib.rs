//! Numerical toolkit for radial Lévy-type kernels and the function spaces
//! they generate: tail and concentration functions, nonlocal Sobolev
//! seminorms on grids, half-space Hardy inequalities with explicit constants,
//! nu-perimeters with their coarea identity, and variational capacities by
//! constrained convex minimization.

pub mod capacity;
pub mod error;
pub mod grid;
pub mod hardy;
pub mod index;
pub mod kernel;
pub mod masses;
pub mod maximal;
pub mod perimeter;
pub mod quad;
pub mod seminorm;
pub mod tabulated;

pub use error::{CapacityError, DiscretizationError, HardyError, KernelError};
pub use grid::{GridFunction, GridGeometry, SetMask};
pub use kernel::{KernelFamily, KernelSpec};
pub use masses::KernelCellMasses;
pub use tabulated::TabulatedRadial;
