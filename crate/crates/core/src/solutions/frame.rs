//! Construction and propagation of decaying solution frames.

use num_complex::Complex64;

use crate::numkernel::{cond_inf, eig_general, eig_hermitian, inverse, CMatrix};
use crate::potential::{PotentialSpec, PumpProblem, Structure};

use super::stepper::{step_from_eig, CellGrid, STEP_ERROR_LIMIT};
use super::{wronskian, SolveError};

/// Distance of a Floquet multiplier to the unit circle below which the
/// spectral parameter is treated as on-spectrum.
const UNIT_CIRCLE_TOL: f64 = 1e-8;

/// Relative modulus gap between the decaying and growing multiplier groups
/// below which the splitting is rejected as degenerate.
const SPLIT_GAP_TOL: f64 = 1e-10;

/// How the solutions behave outside the propagation cell.
#[derive(Clone)]
pub enum Asymptotics {
    /// Periodic structure: psi_plus/psi_minus are Floquet columns with
    /// multipliers rho_p (|rho| < 1) and rho_m (|rho| > 1) per period ell,
    /// so Phi(x + ell) = Phi(x) diag(rho_p, rho_m).
    Periodic {
        rho_p: Vec<Complex64>,
        rho_m: Vec<Complex64>,
        ell: f64,
    },
    /// Constant potential outside [a, b]: solutions continue as exact
    /// exponentials exp(-kappa (x - b)) / exp(kappa (x - a)) where
    /// kappa = U diag(sqrt(t_i - z)) U* from the tail eigendecomposition.
    Tails {
        tail_vals: Vec<f64>,
        tail_vecs: CMatrix,
        kappa_vals: Vec<Complex64>,
        a: f64,
        b: f64,
    },
}

impl Asymptotics {
    /// The decay-rate matrix kappa of the constant tail (Tails only).
    pub fn kappa_matrix(&self) -> Option<CMatrix> {
        match self {
            Asymptotics::Tails {
                tail_vecs,
                kappa_vals,
                ..
            } => Some(unitary_sandwich(tail_vecs, kappa_vals)),
            _ => None,
        }
    }

    /// (2 kappa)^{-1} of the constant tail (Tails only).
    pub fn half_inv_kappa_matrix(&self) -> Option<CMatrix> {
        match self {
            Asymptotics::Tails {
                tail_vecs,
                kappa_vals,
                ..
            } => {
                let inv: Vec<Complex64> = kappa_vals
                    .iter()
                    .map(|k| Complex64::new(0.5, 0.0) / k)
                    .collect();
                Some(unitary_sandwich(tail_vecs, &inv))
            }
            _ => None,
        }
    }
}

/// U diag(d) U* for unitary U.
pub(crate) fn unitary_sandwich(u: &CMatrix, d: &[Complex64]) -> CMatrix {
    let n = u.rows();
    let mut scaled = u.clone();
    for i in 0..n {
        for j in 0..n {
            let v = scaled[(i, j)] * d[j];
            scaled[(i, j)] = v;
        }
    }
    &scaled * &u.adjoint()
}

/// The decaying solutions, their derivatives, and the adjoint rows at a
/// single point (z, s, x).
#[derive(Clone)]
pub struct SolutionFrame {
    pub z: Complex64,
    pub s: f64,
    pub x: f64,
    pub n: usize,
    /// psi_plus: columns decaying as x -> +inf.
    pub psi_p: CMatrix,
    pub psi_p_d: CMatrix,
    /// psi_minus: columns decaying as x -> -inf.
    pub psi_m: CMatrix,
    pub psi_m_d: CMatrix,
    /// psi_tilde_plus: rows with W(psi_tilde_plus, psi_minus) = -I.
    pub adj_p: CMatrix,
    pub adj_p_d: CMatrix,
    /// psi_tilde_minus: rows with W(psi_tilde_minus, psi_plus) = I.
    pub adj_m: CMatrix,
    pub adj_m_d: CMatrix,
    pub asym: Asymptotics,
    /// Richardson estimate inherited from the transfer matrices used.
    pub step_error: f64,
}

impl SolutionFrame {
    /// Assemble from the fundamental matrix and its inverse.
    pub fn from_phi(
        z: Complex64,
        s: f64,
        x: f64,
        phi: &CMatrix,
        phi_inv: &CMatrix,
        asym: Asymptotics,
        step_error: f64,
    ) -> Self {
        let n = phi.rows() / 2;
        let p = phi_inv.block(0, 0, n, n);
        let q = phi_inv.block(0, n, n, n);
        let r = phi_inv.block(n, 0, n, n);
        let sblk = phi_inv.block(n, n, n, n);
        SolutionFrame {
            z,
            s,
            x,
            n,
            psi_p: phi.block(0, 0, n, n),
            psi_p_d: phi.block(n, 0, n, n),
            psi_m: phi.block(0, n, n, n),
            psi_m_d: phi.block(n, n, n, n),
            adj_m: q,
            adj_m_d: -&p,
            adj_p: -&sblk,
            adj_p_d: r,
            asym,
            step_error,
        }
    }

    /// Fundamental matrix Phi = [[psi_p, psi_m], [psi_p', psi_m']].
    pub fn phi(&self) -> CMatrix {
        let n = self.n;
        let mut m = CMatrix::zeros(2 * n, 2 * n);
        m.set_block(0, 0, &self.psi_p);
        m.set_block(0, n, &self.psi_m);
        m.set_block(n, 0, &self.psi_p_d);
        m.set_block(n, n, &self.psi_m_d);
        m
    }

    /// Inverse fundamental matrix reassembled from the adjoint rows.
    pub fn phi_inv(&self) -> CMatrix {
        let n = self.n;
        let mut m = CMatrix::zeros(2 * n, 2 * n);
        m.set_block(0, 0, &(-&self.adj_m_d));
        m.set_block(0, n, &self.adj_m);
        m.set_block(n, 0, &self.adj_p_d);
        m.set_block(n, n, &(-&self.adj_p));
        m
    }

    /// Largest violation among the Wronskian normalizations and the
    /// completeness identities; zero up to rounding by construction.  Each
    /// violation is measured relative to the size of the products entering
    /// it, since identities that cancel a growing against a decaying family
    /// carry rounding proportional to that contrast.
    pub fn identity_residual(&self) -> f64 {
        let n = self.n;
        let eye = CMatrix::identity(n);
        let pair_scale = |a: &CMatrix, ad: &CMatrix, b: &CMatrix, bd: &CMatrix| {
            (a.norm_max() * bd.norm_max()).max(ad.norm_max() * b.norm_max()).max(1.0)
        };
        let mut worst: f64 = 0.0;
        let w_mp = wronskian(&self.adj_m, &self.adj_m_d, &self.psi_p, &self.psi_p_d);
        worst = worst.max(
            (&w_mp - &eye).norm_max()
                / pair_scale(&self.adj_m, &self.adj_m_d, &self.psi_p, &self.psi_p_d),
        );
        let w_pm = wronskian(&self.adj_p, &self.adj_p_d, &self.psi_m, &self.psi_m_d);
        worst = worst.max(
            (&w_pm + &eye).norm_max()
                / pair_scale(&self.adj_p, &self.adj_p_d, &self.psi_m, &self.psi_m_d),
        );
        let w_mm = wronskian(&self.adj_m, &self.adj_m_d, &self.psi_m, &self.psi_m_d);
        worst = worst.max(
            w_mm.norm_max() / pair_scale(&self.adj_m, &self.adj_m_d, &self.psi_m, &self.psi_m_d),
        );
        let w_pp = wronskian(&self.adj_p, &self.adj_p_d, &self.psi_p, &self.psi_p_d);
        worst = worst.max(
            w_pp.norm_max() / pair_scale(&self.adj_p, &self.adj_p_d, &self.psi_p, &self.psi_p_d),
        );
        let scale_c = (self.psi_p.norm_max() * self.adj_m.norm_max())
            .max(self.psi_m.norm_max() * self.adj_p.norm_max())
            .max(self.psi_p_d.norm_max() * self.adj_m_d.norm_max())
            .max(self.psi_m_d.norm_max() * self.adj_p_d.norm_max())
            .max(1.0);
        let c0 = &(&self.psi_p * &self.adj_m) - &(&self.psi_m * &self.adj_p);
        worst = worst.max(c0.norm_max() / scale_c);
        let c1 = &(&self.psi_p * &self.adj_m_d) - &(&self.psi_m * &self.adj_p_d);
        worst = worst.max((&c1 + &eye).norm_max() / scale_c);
        let c2 = &(&self.psi_p_d * &self.adj_m) - &(&self.psi_m_d * &self.adj_p);
        worst = worst.max((&c2 - &eye).norm_max() / scale_c);
        worst
    }
}

/// Frame at the cell anchor plus cumulative transfer products to every fine
/// node, enough to evaluate the frame anywhere on the node grid (and beyond
/// it through the asymptotic continuation).
pub struct FrameBundle {
    pub z: Complex64,
    pub s: f64,
    pub phi0: CMatrix,
    pub phi0_inv: CMatrix,
    /// fwd[j] = M(node j <- anchor).
    pub fwd: Vec<CMatrix>,
    /// inv[j] = fwd[j]^{-1} as a reversed product of exact inverse steps.
    pub inv: Vec<CMatrix>,
    pub asym: Asymptotics,
    pub step_error: f64,
}

impl FrameBundle {
    pub fn build(
        spec: &PotentialSpec,
        grid: &CellGrid,
        z: Complex64,
    ) -> Result<FrameBundle, SolveError> {
        match &spec.structure {
            Structure::Periodic { ell } => build_periodic(grid, z, *ell),
            Structure::ConstantOutside { a, b, tail } => build_tails(grid, z, *a, *b, tail),
        }
    }

    /// Frame at fine node j of the cell.
    pub fn frame_at_node(&self, grid: &CellGrid, j: usize) -> SolutionFrame {
        let phi = &self.fwd[j] * &self.phi0;
        let phi_inv = &self.phi0_inv * &self.inv[j];
        SolutionFrame::from_phi(
            self.z,
            grid.s,
            grid.node(j),
            &phi,
            &phi_inv,
            self.asym.clone(),
            self.step_error,
        )
    }

    /// Frame at arbitrary x: on the node grid directly, outside the cell via
    /// the Floquet multipliers (periodic) or the exact constant-tail
    /// propagator (constant-outside).
    pub fn frame_at(&self, grid: &CellGrid, x: f64) -> Result<SolutionFrame, SolveError> {
        let span_tol = 1e-9 * (1.0 + grid.x_hi.abs().max(grid.x_lo.abs()));
        if x >= grid.x_lo - span_tol && x <= grid.x_hi + span_tol {
            let j = grid.node_index(x)?;
            return Ok(self.frame_at_node(grid, j));
        }
        match &self.asym {
            Asymptotics::Periodic { rho_p, rho_m, ell } => {
                let t = (x - grid.x_lo) / ell;
                let m = t.floor();
                let r = x - grid.x_lo - m * ell;
                let j = grid.node_index(grid.x_lo + r)?;
                let n = grid.n;
                // Phi(x) = Phi(x - m ell) D^m with D = diag(rho_p, rho_m)
                let mut d_pow = Vec::with_capacity(2 * n);
                for rho in rho_p.iter().chain(rho_m.iter()) {
                    d_pow.push(rho.powf(m));
                }
                let phi_cell = &self.fwd[j] * &self.phi0;
                let mut phi = phi_cell;
                for c in 0..2 * n {
                    for rix in 0..2 * n {
                        let v = phi[(rix, c)] * d_pow[c];
                        phi[(rix, c)] = v;
                    }
                }
                let inv_cell = &self.phi0_inv * &self.inv[j];
                let mut phi_inv = inv_cell;
                for rix in 0..2 * n {
                    for c in 0..2 * n {
                        let v = phi_inv[(rix, c)] / d_pow[rix];
                        phi_inv[(rix, c)] = v;
                    }
                }
                Ok(SolutionFrame::from_phi(
                    self.z,
                    grid.s,
                    x,
                    &phi,
                    &phi_inv,
                    self.asym.clone(),
                    self.step_error,
                ))
            }
            Asymptotics::Tails {
                tail_vals,
                tail_vecs,
                a,
                b,
                ..
            } => {
                // continue with the exact constant-potential propagator from
                // the nearer cell edge
                let (edge_x, edge_j) = if x > *b {
                    (*b, grid.steps)
                } else if x < *a {
                    (*a, 0)
                } else {
                    return Err(SolveError::OffGrid { x });
                };
                let h = x - edge_x;
                let step = step_from_eig(tail_vals, tail_vecs, self.z, h);
                let step_back = step_from_eig(tail_vals, tail_vecs, self.z, -h);
                let phi = &step * &(&self.fwd[edge_j] * &self.phi0);
                let phi_inv = &(&self.phi0_inv * &self.inv[edge_j]) * &step_back;
                Ok(SolutionFrame::from_phi(
                    self.z,
                    grid.s,
                    x,
                    &phi,
                    &phi_inv,
                    self.asym.clone(),
                    self.step_error,
                ))
            }
        }
    }
}

fn build_periodic(grid: &CellGrid, z: Complex64, ell: f64) -> Result<FrameBundle, SolveError> {
    let n = grid.n;
    let (mono, est) = grid.transfer(z);
    if est > STEP_ERROR_LIMIT {
        return Err(SolveError::StepTooLarge {
            estimate: est,
            limit: STEP_ERROR_LIMIT,
        });
    }
    let eig = eig_general(&mono)?;
    // eig_general sorts ascending by (modulus, argument)
    let moduli: Vec<f64> = eig.values.iter().map(|v| v.norm()).collect();
    let circle_dist = moduli
        .iter()
        .map(|m| (m - 1.0).abs())
        .fold(f64::INFINITY, f64::min);
    if circle_dist < UNIT_CIRCLE_TOL {
        return Err(SolveError::OnSpectrum {
            z,
            dist: circle_dist,
        });
    }
    let gap = moduli[n] / moduli[n - 1] - 1.0;
    if !(moduli[n - 1] < 1.0 && moduli[n] > 1.0) || gap < SPLIT_GAP_TOL {
        return Err(SolveError::DegenerateSplit { gap });
    }

    // column order: decaying group by descending modulus, growing ascending
    let mut order: Vec<usize> = (0..n).rev().collect();
    order.extend(n..2 * n);

    let mut phi0 = CMatrix::zeros(2 * n, 2 * n);
    let mut rho = Vec::with_capacity(2 * n);
    for (col, &k) in order.iter().enumerate() {
        rho.push(eig.values[k]);
        // deterministic column gauge: first component of noticeable size
        // is scaled to one
        let mut maxabs: f64 = 0.0;
        for i in 0..2 * n {
            maxabs = maxabs.max(eig.vectors[(i, k)].norm());
        }
        let mut pivot = Complex64::new(1.0, 0.0);
        for i in 0..2 * n {
            if eig.vectors[(i, k)].norm() >= 1e-8 * maxabs {
                pivot = eig.vectors[(i, k)];
                break;
            }
        }
        for i in 0..2 * n {
            phi0[(i, col)] = eig.vectors[(i, k)] / pivot;
        }
    }
    let rho_p = rho[..n].to_vec();
    let rho_m = rho[n..].to_vec();

    if cond_inf(&phi0) > 1e12 {
        return Err(SolveError::Singular(
            "monodromy eigenbasis is numerically rank-deficient".into(),
        ));
    }
    let phi0_inv = inverse(&phi0)
        .map_err(|_| SolveError::Singular("monodromy eigenbasis is singular".into()))?;

    let (fwd, inv) = grid.cumulatives(z);
    Ok(FrameBundle {
        z,
        s: grid.s,
        phi0,
        phi0_inv,
        fwd,
        inv,
        asym: Asymptotics::Periodic { rho_p, rho_m, ell },
        step_error: est,
    })
}

fn build_tails(
    grid: &CellGrid,
    z: Complex64,
    a: f64,
    b: f64,
    tail: &CMatrix,
) -> Result<FrameBundle, SolveError> {
    let n = grid.n;
    let eig = eig_hermitian(tail)?;
    let mut kappa_vals = Vec::with_capacity(n);
    let mut min_re = f64::INFINITY;
    for &t in &eig.values {
        let k = (Complex64::new(t, 0.0) - z).sqrt();
        min_re = min_re.min(k.re);
        kappa_vals.push(k);
    }
    if min_re <= 1e-8 {
        // z is at or above the essential-spectrum threshold of the tail
        return Err(SolveError::OnSpectrum {
            z,
            dist: min_re.max(0.0),
        });
    }
    let asym = Asymptotics::Tails {
        tail_vals: eig.values.clone(),
        tail_vecs: eig.vectors.clone(),
        kappa_vals: kappa_vals.clone(),
        a,
        b,
    };
    let kappa = asym.kappa_matrix().unwrap();

    let (_, est) = grid.transfer(z);
    if est > STEP_ERROR_LIMIT {
        return Err(SolveError::StepTooLarge {
            estimate: est,
            limit: STEP_ERROR_LIMIT,
        });
    }
    let (fwd, inv) = grid.cumulatives(z);

    // psi_minus anchored at a: (I, kappa); psi_plus anchored at b: (I, -kappa)
    // transported back to a by the inverse cumulative product.
    let mut plus_at_b = CMatrix::zeros(2 * n, n);
    plus_at_b.set_block(0, 0, &CMatrix::identity(n));
    plus_at_b.set_block(n, 0, &(-&kappa));
    let plus_at_a = &inv[grid.steps] * &plus_at_b;

    let mut phi0 = CMatrix::zeros(2 * n, 2 * n);
    for c in 0..n {
        for i in 0..2 * n {
            phi0[(i, c)] = plus_at_a[(i, c)];
        }
    }
    phi0.set_block(0, n, &CMatrix::identity(n));
    phi0.set_block(n, n, &kappa);

    let cond = cond_inf(&phi0);
    if cond > 1e12 {
        // a discrete eigenvalue of the half/full-line operator: the decaying
        // families intersect
        return Err(SolveError::OnSpectrum { z, dist: 1.0 / cond });
    }
    let phi0_inv =
        inverse(&phi0).map_err(|_| SolveError::Singular("frame assembly singular".into()))?;

    Ok(FrameBundle {
        z,
        s: grid.s,
        phi0,
        phi0_inv,
        fwd,
        inv,
        asym,
        step_error: est,
    })
}

/// Propagation cell for a problem: one period anchored at x0 (periodic), or
/// the support interval [a, b] (constant-outside).
pub fn cell_span(spec: &PotentialSpec, x0: f64) -> (f64, f64) {
    match &spec.structure {
        Structure::Periodic { ell } => (x0, x0 + ell),
        Structure::ConstantOutside { a, b, .. } => (*a, *b),
    }
}

/// Build the decaying frame of a pump problem at (z, s, x0).
///
/// Convenience wrapper over CellGrid + FrameBundle for callers that need a
/// single point; pipelines that sweep z share the grid instead.
pub fn decaying_frame(
    problem: &PumpProblem,
    z: Complex64,
    s: f64,
    x0: f64,
) -> Result<SolutionFrame, SolveError> {
    let (lo, hi) = cell_span(&problem.spec, x0);
    let grid = CellGrid::build(&problem.spec, s, lo, hi, problem.x_step)?;
    let bundle = FrameBundle::build(&problem.spec, &grid, z)?;
    bundle.frame_at(&grid, x0)
}
