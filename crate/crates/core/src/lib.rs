//! Charge transport in adiabatic quantum pumps, computed two independent
//! ways: as the first Chern number of a bundle of decaying Schrodinger
//! solutions over (energy contour) x (pump cycle), and from the scattering
//! matrix of truncated potentials. The two routes must agree; the crate
//! exists to compute both and check that they do.

pub mod adiabatic;
pub mod numkernel;
pub mod par;
pub mod potential;
pub mod report;
pub mod scattering;
pub mod solutions;
pub mod topology;

pub use numkernel::CMatrix;
pub use potential::{PotentialSpec, PumpProblem};
