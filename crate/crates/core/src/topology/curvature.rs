//! Curvature of the gap bundle sampled directly on a patch of the torus, in
//! the gauge pinned by the fiducial point.
//!
//! On a patch where `psi_plus(x0)` is invertible, the hatted sections
//! `psi_hat_plus = psi_plus psi_plus(x0)^{-1}` satisfy
//! `psi_hat_plus(x0) = I` identically, so both partial derivatives of the
//! section value at x0 vanish and the curvature reduces to
//!
//! `tr[ dz psi_tilde_hat_minus * ds psi_hat_plus'
//!    - ds psi_tilde_hat_minus * dz psi_hat_plus' ]`  at x0.
//!
//! The z-derivatives are closed-form in the half-line integrals: with
//! `F_hat = psi_minus(x0) Gamma_plus psi_plus(x0)^{-1}`,
//!
//! `dz psi_hat_plus'(x0)      = psi_hat_plus'(x0) F_hat - psi_minus'(x0) Gamma_hat_plus`
//! `dz psi_tilde_hat_minus(x0) = -F_hat psi_tilde_hat_minus(x0)
//!                               - psi_plus(x0) Gamma_minus psi_tilde_plus(x0)`,
//!
//! every factor taken from one frame bundle so the per-point gauge cancels
//! exactly. The cycle derivatives are centred differences of the hatted
//! neighbours, which are gauge-free by construction. Integrating the
//! curvature against dz ds over the patch and multiplying by i/(2 pi) gives
//! the patch's share of the transported charge.

use num_complex::Complex64;

use crate::numkernel::{determinant, inverse, CMatrix};
use crate::par::map_indexed;
use crate::potential::PumpProblem;
use crate::solutions::{
    cell_span, half_line_integrals, CellGrid, FrameBundle, NodeTables, SolutionFrame,
};
use crate::topology::{resolve_mu, TopologyError};

/// Cycle step for the centred differences of the hatted sections.
const FD_STEP_S: f64 = 1e-3;
/// Relative floor for det psi_plus(x0) before the patch gauge breaks down.
const PATCH_DET_TOL: f64 = 1e-8;

/// Rectangle in (contour parameter, cycle time) with Simpson sample counts;
/// `nz` and `ns` are interval counts and must be even.
#[derive(Clone, Debug)]
pub struct Patch {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    pub nz: usize,
    pub ns: usize,
}

pub struct PatchCurvature {
    /// Curvature samples, cycle-major: index j * (nz + 1) + i.
    pub samples: Vec<Complex64>,
    /// Integral of the curvature against dz ds over the patch.
    pub integral: Complex64,
}

/// The hatted pieces of one frame that enter the curvature.
struct Hatted {
    /// psi_hat_plus'(x0).
    psi_p_d: CMatrix,
    /// psi_tilde_hat_minus(x0) = psi_plus(x0) psi_tilde_minus(x0).
    adj_m: CMatrix,
    /// psi_plus(x0)^{-1}.
    t: CMatrix,
}

fn hatted(frame: &SolutionFrame) -> Result<Hatted, TopologyError> {
    let det = determinant(&frame.psi_p)?;
    // the derivative rows join the scale so a degenerate psi_plus(x0) is
    // measured against the size of the whole frame, not against itself
    let scale = (frame.psi_p.norm_max() + frame.psi_p_d.norm_max()).max(1e-300);
    if det.norm() < PATCH_DET_TOL * scale.powi(frame.n as i32) {
        return Err(TopologyError::PatchSingular {
            z: frame.z,
            s: frame.s,
            det: det.norm(),
        });
    }
    let t = inverse(&frame.psi_p)?;
    Ok(Hatted {
        psi_p_d: frame.psi_p_d.mul_mat(&t),
        adj_m: frame.psi_p.mul_mat(&frame.adj_m),
        t,
    })
}

/// Curvature of the gap bundle on a Simpson grid over the patch.
pub fn curvature_direct(
    problem: &PumpProblem,
    patch: &Patch,
) -> Result<PatchCurvature, TopologyError> {
    if patch.nz == 0 || patch.ns == 0 || patch.nz % 2 != 0 || patch.ns % 2 != 0 {
        return Err(TopologyError::DegenerateCrossing {
            s: patch.s_lo,
            reason: "patch sample counts must be even and positive".into(),
        });
    }
    let mu = resolve_mu(problem)?;
    let center = 0.5 * (problem.e_below + mu);
    let semi_x = 0.5 * (mu - problem.e_below);
    let semi_y = problem.contour_aspect * semi_x;
    let z_at = move |theta: f64| {
        Complex64::new(
            center + semi_x * theta.cos(),
            semi_y * theta.sin(),
        )
    };
    let z_dot = move |theta: f64| Complex64::new(-semi_x * theta.sin(), semi_y * theta.cos());

    let (lo, hi) = cell_span(&problem.spec, problem.x0);
    let d_theta = (patch.theta_hi - patch.theta_lo) / patch.nz as f64;
    let d_s = (patch.s_hi - patch.s_lo) / patch.ns as f64;

    // one cycle row per task: the three grids (s, s +- delta) are shared by
    // all contour samples of the row
    let rows: Vec<Result<Vec<Complex64>, TopologyError>> =
        map_indexed(patch.ns + 1, problem.parallelism, |jrow| {
            let s = patch.s_lo + d_s * jrow as f64;
            let grid_c = CellGrid::build(&problem.spec, s, lo, hi, problem.x_step)?;
            let grid_p = CellGrid::build(&problem.spec, s + FD_STEP_S, lo, hi, problem.x_step)?;
            let grid_m = CellGrid::build(&problem.spec, s - FD_STEP_S, lo, hi, problem.x_step)?;
            let j0 = grid_c.node_index(problem.x0)?;
            let mut row = Vec::with_capacity(patch.nz + 1);
            for i in 0..=patch.nz {
                let z = z_at(patch.theta_lo + d_theta * i as f64);
                let bundle = FrameBundle::build(&problem.spec, &grid_c, z)?;
                let frame = bundle.frame_at_node(&grid_c, j0);
                let tables = NodeTables::build(&bundle);
                let ints = half_line_integrals(&grid_c, &bundle, &tables, j0, None)?;
                let hat = hatted(&frame)?;

                let f_hat = frame.psi_m.mul_mat(&ints.gamma_plus).mul_mat(&hat.t);
                let dz_psi_p_d = &hat.psi_p_d.mul_mat(&f_hat)
                    - &frame.psi_m_d.mul_mat(&ints.gamma_plus).mul_mat(&hat.t);
                let dz_adj_m = -&(&f_hat.mul_mat(&hat.adj_m)
                    + &frame
                        .psi_p
                        .mul_mat(&ints.gamma_minus)
                        .mul_mat(&frame.adj_p));

                let bundle_p = FrameBundle::build(&problem.spec, &grid_p, z)?;
                let hat_p = hatted(&bundle_p.frame_at_node(&grid_p, j0))?;
                let bundle_m = FrameBundle::build(&problem.spec, &grid_m, z)?;
                let hat_m = hatted(&bundle_m.frame_at_node(&grid_m, j0))?;
                let ds_psi_p_d =
                    (&hat_p.psi_p_d - &hat_m.psi_p_d).scale_re(1.0 / (2.0 * FD_STEP_S));
                let ds_adj_m = (&hat_p.adj_m - &hat_m.adj_m).scale_re(1.0 / (2.0 * FD_STEP_S));

                let omega = dz_adj_m.mul_mat(&ds_psi_p_d).trace()
                    - ds_adj_m.mul_mat(&dz_psi_p_d).trace();
                row.push(omega);
            }
            Ok(row)
        });

    let mut samples = Vec::with_capacity((patch.nz + 1) * (patch.ns + 1));
    for row in rows {
        samples.extend(row?);
    }

    let wz = simpson_weights(patch.nz, d_theta);
    let ws = simpson_weights(patch.ns, d_s);
    let mut integral = Complex64::new(0.0, 0.0);
    for j in 0..=patch.ns {
        for i in 0..=patch.nz {
            let theta = patch.theta_lo + d_theta * i as f64;
            integral += samples[j * (patch.nz + 1) + i] * z_dot(theta) * (wz[i] * ws[j]);
        }
    }
    Ok(PatchCurvature { samples, integral })
}

fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; intervals + 1];
    for (i, entry) in w.iter_mut().enumerate() {
        *entry = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        } * h
            / 3.0;
    }
    w
}
