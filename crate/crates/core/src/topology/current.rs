//! Persistent current at the fiducial point from the contour-integrated
//! spectral kernel.
//!
//! The filled-band kernel is K(x, y) = -(2 pi i)^{-1} times the closed
//! contour integral of the Green function G_z(x, y). The current observable
//! at x0 is `i tr(d2 K - d1 K)` on the diagonal, which vanishes identically
//! for an adiabatic pump at every cycle time. Realized literally through the
//! one-sided Green branches the trace collapses by cyclicity for any kernel,
//! so the check would be empty; instead the kernel is sampled on a five-point
//! stencil across the diagonal and differentiated numerically. The quadrature
//! kernel is smooth across the diagonal to the stencil's order because the
//! branch jumps are polynomials in z, which the closed trapezoid rule
//! annihilates exactly, so the result genuinely tracks the contour
//! resolution until the finite-difference floor.

use num_complex::Complex64;

use crate::numkernel::{CMatrix, Contour};
use crate::par::map_indexed;
use crate::potential::PumpProblem;
use crate::solutions::{cell_span, greens_function, CellGrid, FrameBundle, SolutionFrame};
use crate::topology::{resolve_mu, TopologyError};

/// Five-point first-derivative weights on a unit-spaced stencil.
const FD5: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];

/// Persistent current at the problem's fiducial point and cycle time s.
pub fn persistent_current(problem: &PumpProblem, s: f64) -> Result<f64, TopologyError> {
    let mu = resolve_mu(problem)?;
    let contour = Contour::ellipse(
        problem.e_below,
        mu,
        problem.contour_aspect,
        problem.contour_nodes.max(8),
    );
    let x0 = problem.x0;
    let spec = &problem.spec;
    let (lo, hi) = cell_span(spec, x0);
    let delta = (hi - lo) / 512.0;

    let main_grid = CellGrid::build(spec, s, lo, hi, problem.x_step)?;
    let j0 = main_grid.node_index(x0)?;
    // short auxiliary grids on either side of x0; their end nodes land on
    // the stencil offsets -2 delta .. +2 delta exactly
    let left_grid = CellGrid::build(spec, s, x0 - 2.0 * delta, x0, 0.5 * delta)?;
    let right_grid = CellGrid::build(spec, s, x0, x0 + 2.0 * delta, 0.5 * delta)?;
    let half = left_grid.steps / 2;
    let xs = [
        x0 - 2.0 * delta,
        x0 - delta,
        x0,
        x0 + delta,
        x0 + 2.0 * delta,
    ];

    let nodes = contour.nodes.clone();
    let weights = contour.weights.clone();
    type Slice = (Vec<CMatrix>, Vec<CMatrix>);
    let per_node: Vec<Result<Slice, TopologyError>> =
        map_indexed(nodes.len(), problem.parallelism, |j| {
            let z = nodes[j];
            let bundle = FrameBundle::build(spec, &main_grid, z)?;
            let center = bundle.frame_at_node(&main_grid, j0);
            let phi_c = center.phi();
            let phi_c_inv = center.phi_inv();

            let (fwd_l, inv_l) = left_grid.cumulatives(z);
            let (fwd_r, inv_r) = right_grid.cumulatives(z);
            let steps = left_grid.steps;
            let anchor_l = inv_l[steps].mul_mat(&phi_c);
            let anchor_l_inv = phi_c_inv.mul_mat(&fwd_l[steps]);

            let stencil: Vec<SolutionFrame> = (0..5)
                .map(|a| match a {
                    0 | 1 => {
                        let jl = if a == 0 { 0 } else { half };
                        let phi = fwd_l[jl].mul_mat(&anchor_l);
                        let phi_inv = anchor_l_inv.mul_mat(&inv_l[jl]);
                        SolutionFrame::from_phi(
                            z,
                            s,
                            xs[a],
                            &phi,
                            &phi_inv,
                            bundle.asym.clone(),
                            bundle.step_error,
                        )
                    }
                    2 => center.clone(),
                    _ => {
                        let jr = if a == 3 { half } else { 2 * half };
                        let phi = fwd_r[jr].mul_mat(&phi_c);
                        let phi_inv = phi_c_inv.mul_mat(&inv_r[jr]);
                        SolutionFrame::from_phi(
                            z,
                            s,
                            xs[a],
                            &phi,
                            &phi_inv,
                            bundle.asym.clone(),
                            bundle.step_error,
                        )
                    }
                })
                .collect();

            // -(2 pi i)^{-1} w_j = (i / 2 pi) w_j
            let factor = Complex64::new(0.0, 1.0 / (2.0 * std::f64::consts::PI)) * weights[j];
            let first: Vec<CMatrix> = (0..5)
                .map(|a| greens_function(&stencil[a], &stencil[2]).scale(factor))
                .collect();
            let second: Vec<CMatrix> = (0..5)
                .map(|b| greens_function(&stencil[2], &stencil[b]).scale(factor))
                .collect();
            Ok((first, second))
        });

    let n = spec.n;
    let mut k_first = vec![CMatrix::zeros(n, n); 5];
    let mut k_second = vec![CMatrix::zeros(n, n); 5];
    for slice in per_node {
        let (first, second) = slice?;
        for a in 0..5 {
            k_first[a] = &k_first[a] + &first[a];
            k_second[a] = &k_second[a] + &second[a];
        }
    }

    let mut d1 = Complex64::new(0.0, 0.0);
    let mut d2 = Complex64::new(0.0, 0.0);
    for a in 0..5 {
        let c = FD5[a] / (12.0 * delta);
        d1 += k_first[a].trace() * c;
        d2 += k_second[a].trace() * c;
    }
    Ok((Complex64::new(0.0, 1.0) * (d2 - d1)).re)
}
