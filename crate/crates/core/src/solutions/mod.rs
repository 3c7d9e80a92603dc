//! Decaying solution frames for H(s) = -d^2/dx^2 + V(x, s) at off-spectrum
//! spectral parameters.
//!
//! A frame at (z, s, x) carries the matrix solutions psi_plus (decaying as
//! x -> +inf), psi_minus (decaying as x -> -inf), their x-derivatives, and the
//! adjoint rows psi_tilde_{plus,minus} read off the inverse of the fundamental
//! matrix Phi = [[psi_plus, psi_minus], [psi_plus', psi_minus']].  With
//! Phi^{-1} = [[P, Q], [R, S]] the adjoints are
//!
//!     psi_tilde_minus = Q,   psi_tilde_minus' = -P,
//!     psi_tilde_plus  = -S,  psi_tilde_plus'  = R,
//!
//! so that W(psi_tilde_minus, psi_plus) = I and W(psi_tilde_plus, psi_minus) = -I
//! hold exactly at every x, along with the completeness identities
//!
//!     psi_plus  psi_tilde_minus  - psi_minus  psi_tilde_plus  = 0
//!     psi_plus  psi_tilde_minus' - psi_minus  psi_tilde_plus' = -I
//!     psi_plus' psi_tilde_minus  - psi_minus' psi_tilde_plus  = I
//!
//! (these are the block identities of Phi Phi^{-1} = Phi^{-1} Phi = I).

mod frame;
mod greens;
mod integrals;
mod stepper;

pub use frame::{cell_span, decaying_frame, Asymptotics, FrameBundle, SolutionFrame};
pub use greens::greens_function;
pub use integrals::{
    half_line_decay_norm, half_line_integrals, simpson_product, HalfLineIntegrals, NodeTables,
    ProductKind,
};
pub use stepper::{cs_pair, transfer, CellGrid, TransferMatrix, STEP_ERROR_LIMIT};
pub(crate) use stepper::step_from_eig;

use num_complex::Complex64;
use thiserror::Error;

use crate::numkernel::{CMatrix, NumError};

#[derive(Debug, Error)]
pub enum SolveError {
    /// The spectral parameter is on (or numerically indistinguishable from)
    /// the spectrum: a Floquet multiplier sits on the unit circle, or z is not
    /// below the constant-tail threshold, or the frame assembly is singular
    /// because z hits a discrete eigenvalue.
    #[error("spectral parameter {z} is on or within {dist:.3e} of the spectrum")]
    OnSpectrum { z: Complex64, dist: f64 },
    /// The decaying/growing splitting of the Floquet multipliers is not
    /// numerically clean.
    #[error("degenerate decaying/growing splitting of Floquet multipliers (relative gap {gap:.3e})")]
    DegenerateSplit { gap: f64 },
    /// The Richardson error estimate of a transfer matrix exceeded the
    /// admissible limit; refine x_step.
    #[error("x-step too large: Richardson estimate {estimate:.3e} exceeds {limit:.3e}")]
    StepTooLarge { estimate: f64, limit: f64 },
    /// Evaluation was requested at a point that is not a propagation node.
    #[error("x = {x} is not on the propagation node grid")]
    OffGrid { x: f64 },
    /// A linear solve inside frame assembly failed.
    #[error("singular frame assembly: {0}")]
    Singular(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Matrix Wronskian W(f, g) = f g' - f' g of a row solution f against a
/// column solution g; constant in x whenever both satisfy the same equation
/// (f from the left, g from the right).
pub fn wronskian(f: &CMatrix, f_d: &CMatrix, g: &CMatrix, g_d: &CMatrix) -> CMatrix {
    &(f * g_d) - &(f_d * g)
}
