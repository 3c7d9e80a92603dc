//! Dense complex linear algebra and quadrature primitives sized for small
//! channel counts (matrices up to 16x16 in practice).

mod cmatrix;
mod contour;
mod eig;
mod lu;
mod phase;

pub use cmatrix::{matmul_into, CMatrix};
pub use contour::{quad_closed, Contour};
pub use eig::{eig_general, eig_hermitian, EigGeneral, EigHermitian};
pub use lu::{cond_inf, determinant, inverse, solve, LuFactors};
pub use phase::{principal_arg, unwrap_phase, PhaseTrace};

use thiserror::Error;

/// Relative tolerances used by the kernel; callers may scale them uniformly.
pub const TOL_ALGEBRA: f64 = 1e-12;
pub const TOL_DECOMP: f64 = 1e-10;
pub const TOL_QUAD: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum NumError {
    #[error("matrix is singular to working precision (condition estimate {cond:.3e})")]
    SingularMatrix { cond: f64 },
    #[error("eigeniteration failed to converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix departs from Hermitian symmetry by {defect:.3e} (relative)")]
    NotHermitian { defect: f64 },
    #[error("phase step of {step:.6} rad at sample {index} is too close to the branch cut")]
    PhaseJump { index: usize, step: f64 },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Groups sorted values into clusters whose members differ by less than
/// `rel_tol` relative to the cluster scale. Returns the cluster index of
/// each entry.
pub fn cluster_by_relative_gap(moduli: &[f64], rel_tol: f64) -> Vec<usize> {
    let mut ids = vec![0usize; moduli.len()];
    let mut current = 0usize;
    for i in 1..moduli.len() {
        let scale = moduli[i].abs().max(moduli[i - 1].abs()).max(1e-300);
        if (moduli[i] - moduli[i - 1]).abs() > rel_tol * scale {
            current += 1;
        }
        ids[i] = current;
    }
    ids
}
