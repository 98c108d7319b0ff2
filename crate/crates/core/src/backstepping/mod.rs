//! Backstepping kernels, the source matrix and the Volterra transform.

mod gauge;
mod kernel;
mod source;
mod transform;

pub use gauge::{preprocess_diagonal, DiagonalGauge};
pub use kernel::{pde_residual, solve_kernel, source_matrix, Kernel, KernelOptions};
pub use source::SourceMatrix;
pub use transform::{inverse_transform, target_residual, transform, KernelTable};
