//! Scattering route to the pumped charge: finite-window S-matrices at the
//! Fermi energy, the half-line reflection they converge to, the charge and
//! variance functionals of the S-matrix cycle, and the winding number of
//! det R.
//!
//! The finite object is the scattering matrix S_L(s) of the truncated
//! potential V(x, s) chi_[0,L](x) with free leads on both sides.  As L grows
//! (with the Fermi energy in a gap of the untruncated system) the
//! transmission blocks die off exponentially and S_L converges to
//! diag(R, R'), where R is the reflection of the half-line potential.  The
//! winding number of det R(s) over one cycle is the same integer as the
//! topological charge, and the charge functional of S_L approaches it.

mod bpt;
mod convergence;
mod finite;
mod halfline;
mod winding;

pub use bpt::{bpt_charge, bpt_variance, BptCharge};
pub use convergence::{verify_cinque, ConvergenceRow, ConvergenceTable};
pub use finite::{s_matrix_cycle, s_matrix_finite, ScatteringMatrix};
pub use halfline::{reflection_halfline, HalflineReflection};
pub use winding::{winding_det_r, RCrossing, WindingResult};

use crate::numkernel::NumError;
use crate::solutions::SolveError;
use crate::topology::TopologyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScatteringError {
    /// The Fermi energy touches the spectrum of the untruncated system, so
    /// the half-line limit objects do not exist.
    #[error("no spectral gap at the Fermi energy (s = {s:.6}, margin {margin:.3e})")]
    GapClosed { s: f64, margin: f64 },
    /// The plane-wave matching system for the truncated potential is
    /// numerically degenerate.
    #[error("degenerate plane-wave matching at s = {s:.6}, L = {l:.3}")]
    MatchingSingular { s: f64, l: f64 },
    /// The half-line reflection system (psi_plus'(0) - ik psi_plus(0)) is
    /// singular; the reflection is not determined at this cycle time.
    #[error("half-line reflection system singular at s = {s:.6}")]
    SystemSingular { s: f64 },
    /// Doubling the sample count moved the quadrature by more than the
    /// admissible shift; the cycle is under-resolved.
    #[error("cycle under-resolved: refining the grid shifts the result by {shift:.3e}")]
    UnderResolved { shift: f64 },
    /// A phase step between adjacent samples is too large to unwrap, or an
    /// eigenvalue crossing slipped between grid points; refine the s grid.
    #[error("phase trace not resolvable at sample {index} (step {step:.3} rad); refine the s grid")]
    PhaseJump { index: usize, step: f64 },
    #[error("invalid scattering request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Num(#[from] NumError),
}

impl ScatteringError {
    /// Reinterprets frame-construction failures: on-spectrum means the gap
    /// needed by the half-line objects is closed at this cycle time.
    pub(crate) fn from_frame(err: SolveError, s: f64) -> Self {
        match err {
            SolveError::OnSpectrum { dist, .. } => ScatteringError::GapClosed { s, margin: dist },
            other => ScatteringError::Solve(other),
        }
    }
}
