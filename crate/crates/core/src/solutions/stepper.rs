//! Transfer matrices for u'' = (V(x, s) - z) u by midpoint-frozen exact stepping.
//!
//! Over a step [x_j, x_j + h] the potential is frozen at its midpoint value and
//! the propagator of the frozen system is evaluated exactly through the
//! Hermitian eigendecomposition V_mid = Q diag(v) Q*.  In the eigenbasis each
//! channel decouples into the scalar system u'' = omega u, omega = v_i - z,
//! whose propagator is built from the entire functions
//!
//!     c(omega)      = cosh(sqrt(omega) h)
//!     stilde(omega) = sinh(sqrt(omega) h) / sqrt(omega)
//!
//! which are analytic in omega (no branch issues at omega = 0).  The step
//! matrix is
//!
//!     [[ C, S ], [ B, C ]],  C = Q c Q*,  S = Q stilde Q*,  B = Q omega*stilde Q*
//!
//! with determinant exactly one; its inverse is obtained by flipping the signs
//! of S and B (propagation by -h), so forward and backward products are exact
//! inverses up to rounding.
//!
//! Accuracy control is by Richardson comparison: the interval is traversed
//! once with K midpoint steps and once with 2K half-steps; the returned matrix
//! is the fine one and the attached estimate is |M_coarse - M_fine| / (3 |M_fine|),
//! which shrinks ~4x when the step is halved.

use num_complex::Complex64;

use crate::numkernel::eig_hermitian;
use crate::numkernel::CMatrix;
use crate::potential::PotentialSpec;

use super::SolveError;

/// Relative Richardson estimate above which a transfer matrix is rejected.
pub const STEP_ERROR_LIMIT: f64 = 3e-3;

/// Entire-function pair (cosh(sqrt(omega) h), sinh(sqrt(omega) h)/sqrt(omega)).
///
/// For small |omega| h^2 the power series in q = omega h^2 is used so the
/// functions stay smooth through omega = 0.  Valid for signed h.
pub fn cs_pair(omega: Complex64, h: f64) -> (Complex64, Complex64) {
    let q = omega * (h * h);
    if q.norm() < 1e-3 {
        // cosh(sqrt(q)) = 1 + q/2 + q^2/24 + q^3/720 + O(q^4)
        // sinh(sqrt(q))/sqrt(q) = 1 + q/6 + q^2/120 + q^3/5040 + O(q^4)
        let q2 = q * q;
        let q3 = q2 * q;
        let c = Complex64::new(1.0, 0.0) + q * 0.5 + q2 / 24.0 + q3 / 720.0;
        let st = Complex64::new(1.0, 0.0) + q / 6.0 + q2 / 120.0 + q3 / 5040.0;
        (c, st * h)
    } else {
        let w = omega.sqrt();
        let wh = w * h;
        (wh.cosh(), wh.sinh() / w)
    }
}

/// Q diag(d) Q* for unitary Q (columns are the eigenvectors).
fn sandwich(q: &CMatrix, d: &[Complex64]) -> CMatrix {
    let n = q.rows();
    let mut scaled = q.clone();
    for i in 0..n {
        for j in 0..n {
            let v = scaled[(i, j)] * d[j];
            scaled[(i, j)] = v;
        }
    }
    &scaled * &q.adjoint()
}

/// Exact propagator of the frozen system over a signed step h, from the
/// eigendecomposition (vals, vecs) of the frozen potential value.
pub(crate) fn step_from_eig(vals: &[f64], vecs: &CMatrix, z: Complex64, h: f64) -> CMatrix {
    let n = vals.len();
    let mut c = Vec::with_capacity(n);
    let mut st = Vec::with_capacity(n);
    let mut bst = Vec::with_capacity(n);
    for &v in vals {
        let omega = Complex64::new(v, 0.0) - z;
        let (ci, si) = cs_pair(omega, h);
        c.push(ci);
        st.push(si);
        bst.push(omega * si);
    }
    let cb = sandwich(vecs, &c);
    let sb = sandwich(vecs, &st);
    let bb = sandwich(vecs, &bst);
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    m.set_block(0, 0, &cb);
    m.set_block(0, n, &sb);
    m.set_block(n, 0, &bb);
    m.set_block(n, n, &cb);
    m
}

/// Frozen potential eigendecomposition at one midpoint.
#[derive(Clone)]
pub(crate) struct FrozenPoint {
    pub vals: Vec<f64>,
    pub vecs: CMatrix,
}

fn freeze(spec: &PotentialSpec, x: f64, s: f64) -> Result<FrozenPoint, SolveError> {
    let v = spec.evaluate(x, s);
    let eig = eig_hermitian(&v.hermitize())?;
    Ok(FrozenPoint {
        vals: eig.values,
        vecs: eig.vectors,
    })
}

/// Transfer matrix of the first-order system over [x_a, x_b] at spectral
/// parameter z and cycle time s, with its Richardson error estimate.
#[derive(Clone)]
pub struct TransferMatrix {
    /// Propagator acting on the stacked vector (u, u').
    pub m: CMatrix,
    pub x_a: f64,
    pub x_b: f64,
    pub z: Complex64,
    pub s: f64,
    /// Fine step actually used.
    pub step: f64,
    /// Relative Richardson estimate |M_coarse - M_fine| / (3 |M_fine|).
    pub error_estimate: f64,
}

/// Build the transfer matrix over an arbitrary interval, choosing the number
/// of coarse steps from `x_step` (at least 4).
pub fn transfer(
    spec: &PotentialSpec,
    z: Complex64,
    s: f64,
    x_a: f64,
    x_b: f64,
    x_step: f64,
) -> Result<TransferMatrix, SolveError> {
    if !(x_b > x_a) {
        return Err(SolveError::Singular(format!(
            "empty propagation interval [{x_a}, {x_b}]"
        )));
    }
    let span = x_b - x_a;
    let k = ((span / x_step).round() as usize).max(4);
    let hc = span / k as f64;
    let hf = hc / 2.0;

    let mut coarse = CMatrix::identity(2 * spec.n);
    for i in 0..k {
        let mid = x_a + (i as f64 + 0.5) * hc;
        let fp = freeze(spec, mid, s)?;
        coarse = &step_from_eig(&fp.vals, &fp.vecs, z, hc) * &coarse;
    }
    let mut fine = CMatrix::identity(2 * spec.n);
    for j in 0..2 * k {
        let mid = x_a + (j as f64 + 0.5) * hf;
        let fp = freeze(spec, mid, s)?;
        fine = &step_from_eig(&fp.vals, &fp.vecs, z, hf) * &fine;
    }
    let err = (&coarse - &fine).norm_fro() / (3.0 * fine.norm_fro().max(f64::MIN_POSITIVE));
    Ok(TransferMatrix {
        m: fine,
        x_a,
        x_b,
        z,
        s,
        step: hf,
        error_estimate: err,
    })
}

/// Precomputed midpoint eigendecompositions over one propagation cell at a
/// fixed cycle time s, shared across all spectral parameters z.
///
/// The cell is [x_lo, x_hi] split into `steps` fine steps of width h (an even
/// count, so Simpson weights apply on the node grid), with the coarse table
/// kept for Richardson estimates.
pub struct CellGrid {
    pub s: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    /// Fine step width.
    pub h: f64,
    /// Number of fine steps (even); the node grid has steps + 1 points.
    pub steps: usize,
    pub n: usize,
    fine: Vec<FrozenPoint>,
    coarse: Vec<FrozenPoint>,
}

impl CellGrid {
    pub fn build(
        spec: &PotentialSpec,
        s: f64,
        x_lo: f64,
        x_hi: f64,
        x_step: f64,
    ) -> Result<Self, SolveError> {
        if !(x_hi > x_lo) {
            return Err(SolveError::Singular(format!(
                "empty propagation cell [{x_lo}, {x_hi}]"
            )));
        }
        let span = x_hi - x_lo;
        let k = ((span / x_step).round() as usize).max(8);
        let hc = span / k as f64;
        let h = hc / 2.0;
        let mut coarse = Vec::with_capacity(k);
        for i in 0..k {
            coarse.push(freeze(spec, x_lo + (i as f64 + 0.5) * hc, s)?);
        }
        let mut fine = Vec::with_capacity(2 * k);
        for j in 0..2 * k {
            fine.push(freeze(spec, x_lo + (j as f64 + 0.5) * h, s)?);
        }
        Ok(CellGrid {
            s,
            x_lo,
            x_hi,
            h,
            steps: 2 * k,
            n: spec.n,
            fine,
            coarse,
        })
    }

    /// Position of fine node j (j = 0 ..= steps).
    pub fn node(&self, j: usize) -> f64 {
        self.x_lo + j as f64 * self.h
    }

    /// Index of the fine node nearest x, if x lies on the node grid.
    pub fn node_index(&self, x: f64) -> Result<usize, SolveError> {
        let t = (x - self.x_lo) / self.h;
        let j = t.round();
        if (t - j).abs() > 1e-9 * (1.0 + t.abs()) || j < 0.0 || j > self.steps as f64 {
            return Err(SolveError::OffGrid { x });
        }
        Ok(j as usize)
    }

    /// Exact single fine-step propagator across step j (node j -> node j+1),
    /// or its inverse.
    pub fn step_matrix(&self, j: usize, z: Complex64, inverse: bool) -> CMatrix {
        let fp = &self.fine[j];
        let h = if inverse { -self.h } else { self.h };
        step_from_eig(&fp.vals, &fp.vecs, z, h)
    }

    /// Transfer matrix over the whole cell with Richardson estimate:
    /// (forward fine product, estimate).
    pub fn transfer(&self, z: Complex64) -> (CMatrix, f64) {
        let two_n = 2 * self.n;
        let hc = 2.0 * self.h;
        let mut coarse = CMatrix::identity(two_n);
        for fp in &self.coarse {
            coarse = &step_from_eig(&fp.vals, &fp.vecs, z, hc) * &coarse;
        }
        let mut fine = CMatrix::identity(two_n);
        for j in 0..self.steps {
            fine = &self.step_matrix(j, z, false) * &fine;
        }
        let err = (&coarse - &fine).norm_fro() / (3.0 * fine.norm_fro().max(f64::MIN_POSITIVE));
        (fine, err)
    }

    /// Inverse transfer over the whole cell, as the reversed product of exact
    /// inverse steps: (T_{K-1} ... T_0)^{-1} = T_0^{-1} T_1^{-1} ... T_{K-1}^{-1}.
    pub fn transfer_inv(&self, z: Complex64) -> CMatrix {
        let mut m = CMatrix::identity(2 * self.n);
        for j in 0..self.steps {
            m = &m * &self.step_matrix(j, z, true);
        }
        m
    }

    /// Cumulative products to every fine node:
    /// fwd[j] = M(node j <- x_lo), inv[j] = fwd[j]^{-1}, both of length steps+1.
    pub fn cumulatives(&self, z: Complex64) -> (Vec<CMatrix>, Vec<CMatrix>) {
        let two_n = 2 * self.n;
        let mut fwd = Vec::with_capacity(self.steps + 1);
        let mut inv = Vec::with_capacity(self.steps + 1);
        fwd.push(CMatrix::identity(two_n));
        inv.push(CMatrix::identity(two_n));
        for j in 0..self.steps {
            let next = &self.step_matrix(j, z, false) * &fwd[j];
            fwd.push(next);
            let next_inv = &inv[j] * &self.step_matrix(j, z, true);
            inv.push(next_inv);
        }
        (fwd, inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{preset, PresetParams, PotentialSpec, Structure};

    fn free_spec(n: usize) -> PotentialSpec {
        PotentialSpec {
            name: "free".into(),
            n,
            structure: Structure::Periodic { ell: 1.0 },
            terms: vec![],
            floor: Some(0.0),
        }
    }

    fn const_spec(v: f64) -> PotentialSpec {
        PotentialSpec {
            name: "const".into(),
            n: 1,
            structure: Structure::ConstantOutside {
                a: 0.0,
                b: 1.0,
                tail: CMatrix::scalar(1, Complex64::new(v, 0.0)),
            },
            terms: vec![],
            floor: Some(v),
        }
    }

    fn closed_form_free(z: Complex64, d: f64) -> CMatrix {
        // u'' = -z u: with k = sqrt(z), [[cos kd, sin kd / k], [-k sin kd, cos kd]]
        let omega = -z;
        let (c, st) = cs_pair(omega, d);
        CMatrix::from_rows(&[vec![c, st], vec![omega * st, c]])
    }

    #[test]
    fn free_transfer_matches_closed_form() {
        let spec = free_spec(1);
        for z in [
            Complex64::new(2.3, 0.7),
            Complex64::new(-1.5, 0.0),
            Complex64::new(0.0, 1.0),
        ] {
            let t = transfer(&spec, z, 0.0, 0.0, 0.8, 0.05).unwrap();
            let want = closed_form_free(z, 0.8);
            assert!(
                (&t.m - &want).norm_max() < 1e-12,
                "free propagator mismatch at z = {z}"
            );
            assert!(t.error_estimate < 1e-13);
        }
    }

    #[test]
    fn constant_potential_shifts_the_spectral_parameter() {
        let spec = const_spec(3.0);
        let z = Complex64::new(1.2, 0.4);
        let t = transfer(&spec, z, 0.0, 0.0, 1.0, 0.1).unwrap();
        let want = closed_form_free(z - Complex64::new(3.0, 0.0), 1.0);
        assert!((&t.m - &want).norm_max() < 1e-12);
    }

    #[test]
    fn small_argument_series_is_smooth_through_zero() {
        // Compare the series branch against the exponential branch just
        // outside the switchover.
        let h = 0.01;
        for re in [-9.0, -0.5, 0.5, 9.0] {
            for im in [-9.0, 0.0, 9.0] {
                let omega = Complex64::new(re, im);
                let (c1, s1) = cs_pair(omega, h);
                // force the exponential branch by scaling h up and matching
                let w = omega.sqrt();
                let c2 = (w * h).cosh();
                let s2 = (w * h).sinh() / w;
                assert!((c1 - c2).norm() < 1e-14);
                assert!((s1 - s2).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn composition_over_adjacent_intervals_is_consistent() {
        let params = PresetParams::default();
        let spec = preset("sliding_cosine", &params).unwrap();
        let z = Complex64::new(1.0, 0.3);
        let s = 0.7;
        let step = 0.05;
        let t01 = transfer(&spec, z, s, 0.0, 1.0, step).unwrap();
        let t12 = transfer(&spec, z, s, 1.0, 2.0, step).unwrap();
        let t02 = transfer(&spec, z, s, 0.0, 2.0, step).unwrap();
        let composed = &t12.m * &t01.m;
        assert!((&composed - &t02.m).norm_max() <= 1e-9 * t02.m.norm_max());
    }

    #[test]
    fn richardson_estimate_shrinks_about_four_fold_when_step_halves() {
        let params = PresetParams::default();
        let spec = preset("sliding_cosine", &params).unwrap();
        let z = Complex64::new(0.9, 0.2);
        let coarse = transfer(&spec, z, 1.3, 0.0, 2.0, 0.1).unwrap();
        let fine = transfer(&spec, z, 1.3, 0.0, 2.0, 0.05).unwrap();
        let ratio = coarse.error_estimate / fine.error_estimate;
        assert!(
            (2.5..6.0).contains(&ratio),
            "expected ~4x shrink, got ratio {ratio}"
        );
    }

    #[test]
    fn transfer_determinant_is_one() {
        let params = PresetParams::default();
        let spec = preset("sliding_multichannel", &params).unwrap();
        let z = Complex64::new(0.4, 0.5);
        let (_, hi) = spec.x_extent();
        let t = transfer(&spec, z, 2.1, 0.0, hi, 0.1).unwrap();
        let det = crate::numkernel::determinant(&t.m).unwrap();
        assert!((det - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn inverse_steps_invert_forward_steps_exactly() {
        let params = PresetParams::default();
        let spec = preset("sliding_cosine", &params).unwrap();
        let (_, hi) = spec.x_extent();
        let grid = CellGrid::build(&spec, 0.4, 0.0, hi, 0.1).unwrap();
        let z = Complex64::new(0.7, 0.1);
        // single steps invert exactly up to rounding
        let one = &grid.step_matrix(3, z, true) * &grid.step_matrix(3, z, false);
        assert!((&one - &CMatrix::identity(2)).norm_max() < 1e-13);
        // the full-cell product accumulates rounding scaled by the solution
        // growth across the cell
        let (m, est) = grid.transfer(z);
        let minv = grid.transfer_inv(z);
        let prod = &minv * &m;
        let eye = CMatrix::identity(2);
        let scale = m.norm_max() * minv.norm_max();
        assert!((&prod - &eye).norm_max() < 1e-12 * scale.max(1.0));
        assert!(est < STEP_ERROR_LIMIT);
    }

    #[test]
    fn cell_grid_transfer_agrees_with_generic_transfer() {
        let params = PresetParams::default();
        let spec = preset("sliding_multichannel", &params).unwrap();
        let (_, ell) = spec.x_extent();
        let z = Complex64::new(0.8, 0.45);
        let s = 1.9;
        let grid = CellGrid::build(&spec, s, 0.0, ell, ell / 64.0).unwrap();
        let (m, _) = grid.transfer(z);
        let t = transfer(&spec, z, s, 0.0, ell, ell / 64.0).unwrap();
        assert!((&m - &t.m).norm_max() < 1e-12 * m.norm_max());
    }

    #[test]
    fn cumulative_products_land_on_the_nodes() {
        let params = PresetParams::default();
        let spec = preset("sliding_cosine", &params).unwrap();
        let (_, ell) = spec.x_extent();
        let grid = CellGrid::build(&spec, 2.6, 0.0, ell, ell / 16.0).unwrap();
        let z = Complex64::new(1.1, 0.2);
        let (fwd, inv) = grid.cumulatives(z);
        assert_eq!(fwd.len(), grid.steps + 1);
        // last cumulative equals the full transfer
        let (m, _) = grid.transfer(z);
        assert!((&fwd[grid.steps] - &m).norm_max() < 1e-12 * m.norm_max());
        // inverses match forward cumulatives
        for j in [0, grid.steps / 2, grid.steps] {
            let prod = &inv[j] * &fwd[j];
            let eye = CMatrix::identity(2);
            assert!((&prod - &eye).norm_max() < 1e-11);
        }
        // node positions
        assert!(grid.node_index(grid.node(4)).unwrap() == 4);
        assert!(matches!(
            grid.node_index(grid.node(4) + 0.3 * grid.h),
            Err(SolveError::OffGrid { .. })
        ));
    }
}
