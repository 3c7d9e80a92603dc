//! Green function of H(s) - z from the decaying frames.

use crate::numkernel::CMatrix;

use super::SolutionFrame;

/// G(x, x') = -theta(x - x') psi_plus(x) psi_tilde_minus(x')
///            -theta(x' - x) psi_minus(x) psi_tilde_plus(x').
///
/// Both frames must belong to the same (z, s).  On the diagonal the two
/// branches agree because psi_plus psi_tilde_minus = psi_minus psi_tilde_plus
/// pointwise, and the derivative jump across the diagonal is exactly -I.
pub fn greens_function(at_x: &SolutionFrame, at_xp: &SolutionFrame) -> CMatrix {
    debug_assert!((at_x.z - at_xp.z).norm() < 1e-14);
    debug_assert!((at_x.s - at_xp.s).abs() < 1e-14);
    if at_x.x >= at_xp.x {
        -&(&at_x.psi_p * &at_xp.adj_m)
    } else {
        -&(&at_x.psi_m * &at_xp.adj_p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{preset, PotentialSpec, PresetParams, Structure};
    use crate::solutions::{CellGrid, FrameBundle};
    use num_complex::Complex64;

    #[test]
    fn constant_potential_greens_matches_closed_form() {
        // V = 3 everywhere: G(x, x') = exp(-kappa |x - x'|) / (2 kappa)
        let spec = PotentialSpec {
            name: "const".into(),
            n: 1,
            structure: Structure::ConstantOutside {
                a: 0.0,
                b: 1.0,
                tail: CMatrix::scalar(1, Complex64::new(3.0, 0.0)),
            },
            terms: vec![],
            floor: Some(3.0),
        };
        let z = Complex64::new(1.2, 0.0);
        let kappa = (3.0 - 1.2f64).sqrt();
        let grid = CellGrid::build(&spec, 0.0, 0.0, 1.0, 1.0 / 32.0).unwrap();
        let bundle = FrameBundle::build(&spec, &grid, z).unwrap();
        for (x, xp) in [(0.75, 0.25), (0.25, 0.75), (0.5, 0.5), (1.75, 0.5), (-0.5, 0.25)] {
            let fx = bundle.frame_at(&grid, x).unwrap();
            let fxp = bundle.frame_at(&grid, xp).unwrap();
            let g = greens_function(&fx, &fxp);
            let want = (-kappa * (x - xp).abs()).exp() / (2.0 * kappa);
            assert!(
                (g[(0, 0)] - Complex64::new(want, 0.0)).norm() < 1e-9,
                "G({x}, {xp}) = {} want {want}",
                g[(0, 0)]
            );
        }
    }

    #[test]
    fn diagonal_continuity_and_derivative_jump_are_exact() {
        let spec = preset("sliding_multichannel", &PresetParams::default()).unwrap();
        let (_, ell) = spec.x_extent();
        let z = Complex64::new(0.8, 0.7);
        let grid = CellGrid::build(&spec, 1.2, 0.0, ell, ell / 64.0).unwrap();
        let bundle = FrameBundle::build(&spec, &grid, z).unwrap();
        let f = bundle.frame_at_node(&grid, grid.steps / 4);
        let upper = &f.psi_p * &f.adj_m;
        let lower = &f.psi_m * &f.adj_p;
        assert!((&upper - &lower).norm_max() < 1e-12);
        let jump = &(&f.psi_p_d * &f.adj_m) - &(&f.psi_m_d * &f.adj_p);
        assert!((&jump - &CMatrix::identity(2)).norm_max() < 1e-12);
    }

    #[test]
    fn greens_solves_the_equation_under_finite_differences() {
        // second-derivative stencil on a wide spacing H, with the propagation
        // step small enough that the midpoint-freezing error stays below the
        // stencil's own truncation
        let spec = preset("sliding_cosine", &PresetParams::default()).unwrap();
        let (_, ell) = spec.x_extent();
        let z = Complex64::new(1.0, 0.6);
        let s = 0.8;
        let grid = CellGrid::build(&spec, s, 0.0, ell, ell / 32768.0).unwrap();
        let bundle = FrameBundle::build(&spec, &grid, z).unwrap();
        let fxp = bundle.frame_at_node(&grid, 0);

        let stride = 128; // H = 128 h = ell / 512
        let h_big = stride as f64 * grid.h;
        let center = grid.steps / 2;
        let mut g = Vec::new();
        for k in -2i64..=2 {
            let j = (center as i64 + k * stride as i64) as usize;
            let fx = bundle.frame_at_node(&grid, j);
            g.push(greens_function(&fx, &fxp)[(0, 0)]);
        }
        let d2 = (-g[0] + 16.0 * g[1] - 30.0 * g[2] + 16.0 * g[3] - g[4]) / (12.0 * h_big * h_big);
        let x_c = grid.node(center);
        let v = spec.evaluate(x_c, s)[(0, 0)];
        let residual = (-d2 + (v - z) * g[2]).norm();
        let scale = g[2].norm() * (1.0 + (v - z).norm());
        assert!(
            residual <= 1e-6 * scale,
            "relative residual {:.3e}",
            residual / scale
        );
    }
}
