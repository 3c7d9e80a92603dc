//! Half-line integrals of solution products.
//!
//! The quadratic functionals entering the charge formulas are integrals of
//! products like psi_tilde_plus(x) psi_plus(x) over half lines.  On a periodic
//! structure the integral over [x0, x0 + ell] is computed once by Simpson
//! quadrature on the fine node grid, and the remaining periods are summed in
//! closed form through the Floquet multipliers: shifting by one period scales
//! entry (i, j) of the integrand by a fixed ratio r_ij, so the half-line
//! integral is the one-period block Hadamard-multiplied by the geometric-series
//! factor.  On a constant-outside structure the tail contributes the exact
//! exponential moment (2 kappa)^{-1}.

use num_complex::Complex64;

use crate::numkernel::CMatrix;

use super::frame::{Asymptotics, FrameBundle};
use super::stepper::CellGrid;
use super::SolveError;

/// Fundamental matrices and their inverses tabulated at every fine node of a
/// cell, for one (z, s).
pub struct NodeTables {
    pub phi: Vec<CMatrix>,
    pub phi_inv: Vec<CMatrix>,
    pub n: usize,
}

impl NodeTables {
    pub fn build(bundle: &FrameBundle) -> NodeTables {
        let n = bundle.phi0.rows() / 2;
        let count = bundle.fwd.len();
        let mut phi = Vec::with_capacity(count);
        let mut phi_inv = Vec::with_capacity(count);
        for j in 0..count {
            phi.push(&bundle.fwd[j] * &bundle.phi0);
            phi_inv.push(&bundle.phi0_inv * &bundle.inv[j]);
        }
        NodeTables { phi, phi_inv, n }
    }

    pub fn psi_p(&self, j: usize) -> CMatrix {
        self.phi[j].block(0, 0, self.n, self.n)
    }
    pub fn psi_p_d(&self, j: usize) -> CMatrix {
        self.phi[j].block(self.n, 0, self.n, self.n)
    }
    pub fn psi_m(&self, j: usize) -> CMatrix {
        self.phi[j].block(0, self.n, self.n, self.n)
    }
    pub fn psi_m_d(&self, j: usize) -> CMatrix {
        self.phi[j].block(self.n, self.n, self.n, self.n)
    }
    pub fn adj_m(&self, j: usize) -> CMatrix {
        self.phi_inv[j].block(0, self.n, self.n, self.n)
    }
    pub fn adj_m_d(&self, j: usize) -> CMatrix {
        -&self.phi_inv[j].block(0, 0, self.n, self.n)
    }
    pub fn adj_p(&self, j: usize) -> CMatrix {
        -&self.phi_inv[j].block(self.n, self.n, self.n, self.n)
    }
    pub fn adj_p_d(&self, j: usize) -> CMatrix {
        self.phi_inv[j].block(self.n, 0, self.n, self.n)
    }
}

/// Which solution product is being integrated.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum ProductKind {
    /// psi_tilde_plus psi_plus
    AdjPlusPsiPlus,
    /// psi_tilde_minus psi_minus
    AdjMinusPsiMinus,
    /// psi_tilde_minus psi_plus
    AdjMinusPsiPlus,
    /// psi_tilde_plus psi_minus
    AdjPlusPsiMinus,
    /// psi_plus^* psi_plus (real spectral parameter)
    ConjPlusPsiPlus,
}

fn product_at(t: &NodeTables, j: usize, kind: ProductKind) -> CMatrix {
    let n = t.n;
    match kind {
        ProductKind::AdjPlusPsiPlus => {
            -&(&t.phi_inv[j].block(n, n, n, n) * &t.phi[j].block(0, 0, n, n))
        }
        ProductKind::AdjMinusPsiMinus => {
            &t.phi_inv[j].block(0, n, n, n) * &t.phi[j].block(0, n, n, n)
        }
        ProductKind::AdjMinusPsiPlus => {
            &t.phi_inv[j].block(0, n, n, n) * &t.phi[j].block(0, 0, n, n)
        }
        ProductKind::AdjPlusPsiMinus => {
            -&(&t.phi_inv[j].block(n, n, n, n) * &t.phi[j].block(0, n, n, n))
        }
        ProductKind::ConjPlusPsiPlus => {
            let p = t.phi[j].block(0, 0, n, n);
            &p.adjoint() * &p
        }
    }
}

/// Simpson quadrature of a solution product over nodes [j0, j1]
/// (j1 - j0 even; returns zero when j0 == j1).
pub fn simpson_product(
    tables: &NodeTables,
    h: f64,
    j0: usize,
    j1: usize,
    kind: ProductKind,
) -> Result<CMatrix, SolveError> {
    if j0 == j1 {
        return Ok(CMatrix::zeros(tables.n, tables.n));
    }
    if j1 < j0 || (j1 - j0) % 2 != 0 {
        return Err(SolveError::Singular(format!(
            "Simpson range [{j0}, {j1}] must span an even number of steps"
        )));
    }
    let mut acc = CMatrix::zeros(tables.n, tables.n);
    for j in j0..=j1 {
        let w = if j == j0 || j == j1 {
            1.0
        } else if (j - j0) % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc = &acc + &product_at(tables, j, kind).scale(Complex64::new(w * h / 3.0, 0.0));
    }
    Ok(acc)
}

fn scale_rows_cols(m: &CMatrix, row: &[Complex64], col: &[Complex64]) -> CMatrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = out[(i, j)] * row[i] * col[j];
            out[(i, j)] = v;
        }
    }
    out
}

/// One-period integral starting at node j0, using the wraparound
/// [cell start, j0] piece shifted up by one period via the multiplier scaling.
fn period_from(
    tables: &NodeTables,
    grid: &CellGrid,
    j0: usize,
    kind: ProductKind,
    row: &[Complex64],
    col: &[Complex64],
) -> Result<CMatrix, SolveError> {
    let head = simpson_product(tables, grid.h, j0, grid.steps, kind)?;
    if j0 == 0 {
        return Ok(head);
    }
    let tail = simpson_product(tables, grid.h, 0, j0, kind)?;
    Ok(&head + &scale_rows_cols(&tail, row, col))
}

fn geometric_sum(r: Complex64, skip_first: bool, periods: Option<usize>) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let base = match periods {
        None => one / (one - r),
        Some(m) => (one - r.powu(m as u32)) / (one - r),
    };
    if skip_first {
        r * base
    } else {
        base
    }
}

/// The half-line functionals entering the charge formulas.
pub struct HalfLineIntegrals {
    /// Integral of psi_tilde_plus psi_plus over [x0, +inf).
    pub gamma_plus: CMatrix,
    /// Integral of psi_tilde_minus psi_minus over (-inf, x0].
    pub gamma_minus: CMatrix,
}

/// Compute the half-line integrals anchored at fine node j0 (which must be an
/// even node so Simpson pairing applies on both sides).
///
/// `periods` truncates the period sums to the first M cells on either side
/// (periodic structures only); `None` sums the full geometric series.
pub fn half_line_integrals(
    grid: &CellGrid,
    bundle: &FrameBundle,
    tables: &NodeTables,
    j0: usize,
    periods: Option<usize>,
) -> Result<HalfLineIntegrals, SolveError> {
    if j0 % 2 != 0 || j0 > grid.steps {
        return Err(SolveError::Singular(format!(
            "half-line anchor node {j0} must be an even node of the cell"
        )));
    }
    match &bundle.asym {
        Asymptotics::Periodic { rho_p, rho_m, .. } => {
            let n = tables.n;
            let inv_rho_m: Vec<Complex64> = rho_m.iter().map(|r| 1.0 / r).collect();
            let inv_rho_p: Vec<Complex64> = rho_p.iter().map(|r| 1.0 / r).collect();

            let pp = period_from(tables, grid, j0, ProductKind::AdjPlusPsiPlus, &inv_rho_m, rho_p)?;
            let mut gamma_plus = CMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let r = rho_p[j] / rho_m[i];
                    gamma_plus[(i, j)] = pp[(i, j)] * geometric_sum(r, false, periods);
                }
            }

            let mm = period_from(
                tables,
                grid,
                j0,
                ProductKind::AdjMinusPsiMinus,
                &inv_rho_p,
                rho_m,
            )?;
            let mut gamma_minus = CMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let r = rho_p[i] / rho_m[j];
                    gamma_minus[(i, j)] = mm[(i, j)] * geometric_sum(r, true, periods);
                }
            }
            Ok(HalfLineIntegrals {
                gamma_plus,
                gamma_minus,
            })
        }
        Asymptotics::Tails { .. } => {
            let half_inv = bundle.asym.half_inv_kappa_matrix().unwrap();
            let jb = grid.steps;
            let body_p = simpson_product(tables, grid.h, j0, jb, ProductKind::AdjPlusPsiPlus)?;
            let tail_p = &(&tables.adj_p(jb) * &half_inv) * &tables.psi_p(jb);
            let body_m = simpson_product(tables, grid.h, 0, j0, ProductKind::AdjMinusPsiMinus)?;
            let tail_m = &(&tables.adj_m(0) * &half_inv) * &tables.psi_m(0);
            Ok(HalfLineIntegrals {
                gamma_plus: &body_p + &tail_p,
                gamma_minus: &body_m + &tail_m,
            })
        }
    }
}

/// Integral of psi_plus^* psi_plus over [x0, +inf) at real spectral
/// parameter; strictly positive definite, used for the energy-derivative sign
/// of crossing eigenvalues.
pub fn half_line_decay_norm(
    grid: &CellGrid,
    bundle: &FrameBundle,
    tables: &NodeTables,
    j0: usize,
) -> Result<CMatrix, SolveError> {
    if j0 % 2 != 0 || j0 > grid.steps {
        return Err(SolveError::Singular(format!(
            "half-line anchor node {j0} must be an even node of the cell"
        )));
    }
    match &bundle.asym {
        Asymptotics::Periodic { rho_p, .. } => {
            let n = tables.n;
            let conj_rho_p: Vec<Complex64> = rho_p.iter().map(|r| r.conj()).collect();
            let cpp = period_from(
                tables,
                grid,
                j0,
                ProductKind::ConjPlusPsiPlus,
                &conj_rho_p,
                rho_p,
            )?;
            let mut out = CMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let r = rho_p[i].conj() * rho_p[j];
                    out[(i, j)] = cpp[(i, j)] * geometric_sum(r, false, None);
                }
            }
            Ok(out)
        }
        Asymptotics::Tails { .. } => {
            let half_inv = bundle.asym.half_inv_kappa_matrix().unwrap();
            let jb = grid.steps;
            let body = simpson_product(tables, grid.h, j0, jb, ProductKind::ConjPlusPsiPlus)?;
            let pb = tables.psi_p(jb);
            let tail = &(&pb.adjoint() * &half_inv) * &pb;
            Ok(&body + &tail)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{preset, PotentialSpec, PresetParams, Structure};
    use num_complex::Complex64;

    fn free_spec(ell: f64) -> PotentialSpec {
        PotentialSpec {
            name: "free".into(),
            n: 1,
            structure: Structure::Periodic { ell },
            terms: vec![],
            floor: Some(0.0),
        }
    }

    fn setup(
        spec: &PotentialSpec,
        z: Complex64,
        s: f64,
        steps_hint: f64,
    ) -> (CellGrid, FrameBundle, NodeTables) {
        let (lo, hi) = match &spec.structure {
            Structure::Periodic { ell } => (0.0, *ell),
            Structure::ConstantOutside { a, b, .. } => (*a, *b),
        };
        let grid = CellGrid::build(spec, s, lo, hi, (hi - lo) / steps_hint).unwrap();
        let bundle = FrameBundle::build(spec, &grid, z).unwrap();
        let tables = NodeTables::build(&bundle);
        (grid, bundle, tables)
    }

    #[test]
    fn free_problem_half_line_integrals_match_analytic_values() {
        // gauge: psi_plus = exp(-kappa x), psi_minus = exp(kappa x),
        // adjoints -exp(±kappa x)/(2 kappa); so
        // gamma_plus(0) = gamma_minus(0) = -1/(4 kappa^2)
        let kappa = 1.3f64;
        let z = Complex64::new(-kappa * kappa, 0.0);
        let spec = free_spec(1.0);
        let (grid, bundle, tables) = setup(&spec, z, 0.0, 64.0);
        let hl = half_line_integrals(&grid, &bundle, &tables, 0, None).unwrap();
        let want = Complex64::new(-1.0 / (4.0 * kappa * kappa), 0.0);
        assert!((hl.gamma_plus[(0, 0)] - want).norm() < 1e-8);
        assert!((hl.gamma_minus[(0, 0)] - want).norm() < 1e-8);
        // decay norm: integral of exp(-2 kappa x) = 1/(2 kappa)
        let dn = half_line_decay_norm(&grid, &bundle, &tables, 0).unwrap();
        assert!((dn[(0, 0)] - Complex64::new(0.5 / kappa, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn anchoring_off_the_cell_start_uses_the_wraparound_piece() {
        let kappa = 1.3f64;
        let z = Complex64::new(-kappa * kappa, 0.0);
        let spec = free_spec(1.0);
        let (grid, bundle, tables) = setup(&spec, z, 0.0, 64.0);
        let j0 = grid.steps / 2; // x0 = 0.5
        let hl = half_line_integrals(&grid, &bundle, &tables, j0, None).unwrap();
        let want_p = -(-kappa).exp() / (4.0 * kappa * kappa);
        let want_m = -(kappa).exp() / (4.0 * kappa * kappa);
        assert!((hl.gamma_plus[(0, 0)] - Complex64::new(want_p, 0.0)).norm() < 1e-8);
        assert!((hl.gamma_minus[(0, 0)] - Complex64::new(want_m, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn truncated_period_sum_matches_partial_integral_and_bounds_the_tail() {
        let kappa = 0.9f64;
        let z = Complex64::new(-kappa * kappa, 0.0);
        let spec = free_spec(1.0);
        let (grid, bundle, tables) = setup(&spec, z, 0.0, 64.0);
        let full = half_line_integrals(&grid, &bundle, &tables, 0, None).unwrap();
        let m = 3;
        let trunc = half_line_integrals(&grid, &bundle, &tables, 0, Some(m)).unwrap();
        // partial integral of -exp(-2 kappa x)/(2 kappa) over [0, 3]
        let want = -(1.0 - (-2.0 * kappa * 3.0f64).exp()) / (4.0 * kappa * kappa);
        assert!((trunc.gamma_plus[(0, 0)] - Complex64::new(want, 0.0)).norm() < 1e-8);
        // the remainder is exactly the geometric tail r^m / (4 kappa^2)
        let r = (-2.0 * kappa).exp();
        let tail_exact = r.powi(m as i32) / (4.0 * kappa * kappa);
        let diff = (full.gamma_plus[(0, 0)] - trunc.gamma_plus[(0, 0)]).norm();
        assert!((diff - tail_exact).abs() < 1e-8);
    }

    #[test]
    fn constant_tail_half_line_integrals_match_analytic_values() {
        // V = 3 on the whole line, cell [0, 1]; gauge fixes psi_minus(0) = 1,
        // psi_plus(1) = 1, so gamma_plus(0) = -e^kappa/(4 kappa^2) and
        // gamma_minus(0) = -1/(4 kappa^2 e^kappa)
        let v = 3.0;
        let z = Complex64::new(1.2, 0.0);
        let kappa = (v - 1.2f64).sqrt();
        let spec = PotentialSpec {
            name: "const".into(),
            n: 1,
            structure: Structure::ConstantOutside {
                a: 0.0,
                b: 1.0,
                tail: CMatrix::scalar(1, Complex64::new(v, 0.0)),
            },
            terms: vec![],
            floor: Some(v),
        };
        let (grid, bundle, tables) = setup(&spec, z, 0.0, 64.0);
        let hl = half_line_integrals(&grid, &bundle, &tables, 0, None).unwrap();
        let want_p = -kappa.exp() / (4.0 * kappa * kappa);
        let want_m = -(-kappa).exp() / (4.0 * kappa * kappa);
        assert!((hl.gamma_plus[(0, 0)] - Complex64::new(want_p, 0.0)).norm() < 1e-8);
        assert!((hl.gamma_minus[(0, 0)] - Complex64::new(want_m, 0.0)).norm() < 1e-8);
        let dn = half_line_decay_norm(&grid, &bundle, &tables, 0).unwrap();
        // integral of exp(-2 kappa (x-1)) over [0, inf) = e^{2 kappa}/(2 kappa)
        let want_dn = (2.0 * kappa).exp() / (2.0 * kappa);
        assert!((dn[(0, 0)] - Complex64::new(want_dn, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn multichannel_half_line_matches_explicit_multi_period_quadrature() {
        let spec = preset("sliding_multichannel", &PresetParams::default()).unwrap();
        let z = Complex64::new(-0.5, 0.4);
        let s = 1.1;
        let (grid, bundle, tables) = setup(&spec, z, s, 96.0);
        let hl = half_line_integrals(&grid, &bundle, &tables, 0, None).unwrap();

        // independent route: Simpson over [0, M ell] from pointwise frames
        let m_periods = 30usize;
        let n = tables.n;
        let mut acc = CMatrix::zeros(n, n);
        let ell = grid.x_hi - grid.x_lo;
        let total = m_periods * grid.steps;
        for node in 0..=total {
            let cell = node / grid.steps;
            let j = node - cell * grid.steps;
            let x = cell as f64 * ell + grid.node(j);
            let f = bundle.frame_at(&grid, x).unwrap();
            let prod = &f.adj_p * &f.psi_p;
            let w = if node == 0 || node == total {
                1.0
            } else if node % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc = &acc + &prod.scale(Complex64::new(w * grid.h / 3.0, 0.0));
        }
        let diff = (&acc - &hl.gamma_plus).norm_max();
        assert!(
            diff < 1e-6 * hl.gamma_plus.norm_max().max(1.0),
            "closed form vs explicit quadrature differ by {diff:.3e}"
        );
    }

    #[test]
    fn odd_anchor_nodes_are_rejected() {
        let spec = free_spec(1.0);
        let z = Complex64::new(-1.0, 0.0);
        let (grid, bundle, tables) = setup(&spec, z, 0.0, 64.0);
        assert!(half_line_integrals(&grid, &bundle, &tables, 1, None).is_err());
    }
}
