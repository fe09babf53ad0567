//! Fixtures shared by the benchmarks.

use blowup_core::kernel::{GridSpec, KernelSpec};
use blowup_core::nonlinearity::Nonlinearity;
use blowup_core::pde::{PdeProblem, PhiShape};
use blowup_core::Result;

/// One-dimensional Gaussian data of the given amplitude on `[-L, L)` with
/// `N` points.
pub fn pde_problem(p: f64, alpha: f64, half_width: f64, points: usize, amplitude: f64) -> Result<PdeProblem> {
    let spec = KernelSpec::new(alpha, 1)?;
    let grid = GridSpec::new(half_width, points)?;
    let phi = PhiShape::Gaussian.field(grid, 1, amplitude)?;
    PdeProblem::new(Nonlinearity::power(p)?, spec, grid, phi)
}
