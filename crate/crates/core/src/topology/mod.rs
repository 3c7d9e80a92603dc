//! Chern-number side of the pump: gap verification, the Wronskian-bundle
//! torus grid, the plaquette field strength, the crossing count at the Fermi
//! line, the direct curvature quadrature, the transported-charge double
//! integral, and the persistent-current check.
//!
//! The torus is the product of a closed energy contour through `(e_below,
//! mu)` and the pump cycle `s` in `[0, 2pi)`, oriented contour-first. All
//! routes below produce the same integer on a valid configuration; they
//! share the solution frames of [`crate::solutions`] but discretize
//! independently, which is what makes their agreement a meaningful check.

mod charge;
mod crossings;
mod current;
mod curvature;
mod gap;
mod grid;
mod plaquette;

pub use charge::{charge_topological, TopologicalCharge};
pub use crossings::{chern_from_crossings, find_crossings, reflection_defect, CrossingRecord};
pub use current::persistent_current;
pub use curvature::{curvature_direct, Patch, PatchCurvature};
pub use gap::{first_positive_gap, resolve_mu, verify_gap, GapReport};
pub use grid::TorusGrid;
pub use plaquette::{chern_plaquette, PlaquetteChern};

use crate::numkernel::NumError;
use num_complex::Complex64;
use crate::solutions::SolveError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TopologyError {
    /// The Fermi energy touches the spectrum somewhere along the cycle.
    #[error("spectral gap closes at s = {s:.6} (margin {margin:.3e})")]
    GapClosed { s: f64, margin: f64 },
    /// Plaquette phase sum too far from an integer multiple of 2 pi.
    #[error("plaquette sum is {residual:.3e} away from an integer; grid too coarse")]
    NotInteger { residual: f64 },
    /// A link matrix between neighbouring grid points is numerically singular.
    #[error("degenerate link matrix at grid cell ({jz}, {ks}): |det| = {det:.3e}")]
    DegenerateLink { jz: usize, ks: usize, det: f64 },
    /// Crossing analysis hit a non-generic configuration.
    #[error("degenerate crossing near s = {s:.6}: {reason}")]
    DegenerateCrossing { s: f64, reason: String },
    /// The patch gauge point stopped being invertible inside the patch.
    #[error("patch gauge singular: |det psi_plus(x_ref)| = {det:.3e} at (z={z}, s={s:.6})")]
    PatchSingular { z: Complex64, s: f64, det: f64 },
    /// No spectral gap overlapping positive energies was found in the scan.
    #[error("no gap found above zero energy in the scan window up to z = {scanned_to:.3}")]
    NoPositiveGap { scanned_to: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Num(#[from] NumError),
}
