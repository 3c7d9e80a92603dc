//! Chern number of the Wronskian bundle over the torus, computed from
//! plaquette holonomies of the discrete link field.
//!
//! The link from node p to node q is the Wronskian pairing
//! `U(p->q) = W(adj_minus(p), psi_plus(q); x0)`, which equals the identity
//! at p = q and transforms as `T_p^{-1} U T_q` under frame gauge changes.
//! Around an oriented plaquette the gauge factors cancel, so the plaquette
//! phase `arg det [U_s(j,k) U_z(j,k+1) U_s(j+1,k)^{-1} U_z(j,k)^{-1}]` is
//! gauge invariant, and the phases of all plaquettes sum to 2 pi times an
//! integer because every link enters once directly and once inverted. The
//! loop runs its cycle leg first so a charge dragged forward by the pump
//! counts positive, matching the orientation of the crossing census.

use num_complex::Complex64;

use crate::numkernel::{determinant, principal_arg, CMatrix};
use crate::par::map_indexed;
use crate::solutions::{wronskian, SolutionFrame};
use crate::topology::{TopologyError, TorusGrid};

/// Relative floor under which a link determinant counts as degenerate.
const LINK_DET_TOL: f64 = 1e-10;
/// Largest acceptable distance of the summed phase from an integer multiple
/// of 2 pi, in units of 2 pi.
const INTEGER_TOL: f64 = 0.05;

pub struct PlaquetteChern {
    pub chern: i64,
    /// Distance of total phase / 2 pi from the reported integer.
    pub residual: f64,
    /// Sum of plaquette phases.
    pub total_phase: f64,
}

/// Wronskian link between two torus frames.
fn link(p: &SolutionFrame, q: &SolutionFrame) -> CMatrix {
    wronskian(&p.adj_m, &p.adj_m_d, &q.psi_p, &q.psi_p_d)
}

fn link_det(p: &SolutionFrame, q: &SolutionFrame) -> Result<Complex64, TopologyError> {
    let u = link(p, q);
    let det = determinant(&u)?;
    let scale = u.norm_max().max(1e-300);
    if det.norm() < LINK_DET_TOL * scale.powi(u.rows() as i32) {
        Err(TopologyError::DegenerateLink {
            jz: usize::MAX,
            ks: usize::MAX,
            det: det.norm(),
        })
    } else {
        Ok(det)
    }
}

/// Chern number from plaquette holonomy phases over the full torus grid.
pub fn chern_plaquette(grid: &TorusGrid) -> Result<PlaquetteChern, TopologyError> {
    let nz = grid.nz();
    let ns = grid.ns();
    // Determinants of all links, z-direction and s-direction, computed in
    // one parallel pass; the reduction below stays sequential and in index
    // order so the result does not depend on the thread count.
    let dets: Vec<Result<(Complex64, Complex64), TopologyError>> =
        map_indexed(nz * ns, grid.parallelism, |idx| {
            let j = idx % nz;
            let k = idx / nz;
            let here = grid.frame(j, k);
            let tag = |e| match e {
                TopologyError::DegenerateLink { det, .. } => {
                    TopologyError::DegenerateLink { jz: j, ks: k, det }
                }
                other => other,
            };
            let dz = link_det(here, grid.frame(j + 1, k)).map_err(tag)?;
            let ds = link_det(here, grid.frame(j, k + 1)).map_err(tag)?;
            Ok((dz, ds))
        });
    let mut dz = Vec::with_capacity(nz * ns);
    let mut ds = Vec::with_capacity(nz * ns);
    for r in dets {
        let (a, b) = r?;
        dz.push(a);
        ds.push(b);
    }
    let at = |v: &Vec<Complex64>, j: usize, k: usize| v[(k % ns) * nz + (j % nz)];

    let mut total = 0.0;
    for k in 0..ns {
        for j in 0..nz {
            let loop_det =
                at(&ds, j, k) * at(&dz, j, k + 1) / (at(&ds, j + 1, k) * at(&dz, j, k));
            total += principal_arg(loop_det);
        }
    }
    let turns = total / (2.0 * std::f64::consts::PI);
    let chern = turns.round();
    let residual = (turns - chern).abs();
    if residual > INTEGER_TOL {
        return Err(TopologyError::NotInteger { residual });
    }
    Ok(PlaquetteChern {
        chern: chern as i64,
        residual,
        total_phase: total,
    })
}

/// Sum of plaquette phases over a rectangle of cells (indices may run past
/// the torus seam; they wrap). Shares the cells' holonomy convention with
/// `chern_plaquette`, so integrated curvature can be compared patchwise.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn phase_sum(
    grid: &TorusGrid,
    jz: std::ops::Range<usize>,
    ks: std::ops::Range<usize>,
) -> Result<f64, TopologyError> {
    let mut total = 0.0;
    for k in ks.clone() {
        for j in jz.clone() {
            let uz0 = link_det(grid.frame(j, k), grid.frame(j + 1, k))?;
            let us1 = link_det(grid.frame(j + 1, k), grid.frame(j + 1, k + 1))?;
            let uz1 = link_det(grid.frame(j, k + 1), grid.frame(j + 1, k + 1))?;
            let us0 = link_det(grid.frame(j, k), grid.frame(j, k + 1))?;
            total += principal_arg(us0 * uz1 / (us1 * uz0));
        }
    }
    Ok(total)
}
