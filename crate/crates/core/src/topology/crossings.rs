//! Census of the cycle times at which the half-line bound state crosses the
//! chemical potential, and the Chern number as the signed crossing count.
//!
//! At real z inside a spectral gap the boundary form
//! `L(z, s) = psi_plus'(x0)^* psi_plus(x0)` is Hermitian. Its determinant
//! vanishes on two interleaved families: where `psi_plus(x0)` is singular
//! (a bound state of the Dirichlet half-line operator on `[x0, inf)`) and
//! where `psi_plus'(x0)` is singular (a Neumann bound state). Only the
//! Dirichlet family marks a degeneracy of the gap bundle and carries
//! transported charge; each such simple zero contributes the orientation
//! weight `w = -sgn(lambda_z * lambda_s)` and the pumped charge is `-sum w`.
//! The two families are told apart by the residual `|psi_plus(x0) u|` of the
//! null vector: at a Dirichlet zero `lambda_z` equals minus the positive form
//! `(u, [integral over [x0, inf) of psi_plus^* psi_plus] u)` and is strictly
//! negative, while at a Neumann zero the branch rises through zero instead.
//! Neumann zeros are classified and skipped, splitting their bracket so a
//! Dirichlet zero sharing the same scan cell is still found.
//!
//! Frame gauges rescale L by congruence, which preserves null spaces, the
//! inertia, and the sign of det L; the scan and all sign decisions below rely
//! only on those invariants.

use num_complex::Complex64;

use crate::numkernel::{determinant, eig_hermitian, inverse, CMatrix};
use crate::par::map_indexed;
use crate::potential::PumpProblem;
use crate::solutions::{
    cell_span, decaying_frame, half_line_decay_norm, wronskian, CellGrid, FrameBundle, NodeTables,
    SolutionFrame,
};
use crate::topology::{resolve_mu, TopologyError};

/// Bisection refines the bracket down to this width in s.
const ROOT_S_TOL: f64 = 1e-13;
/// At the converged root the vanishing eigenvalue must be at least this much
/// smaller than its values one FD step away, or the zero is not sharp.
const LINEAR_DROP: f64 = 1e-2;
/// Step for centred differences of lambda along the cycle.
const FD_STEP_S: f64 = 1e-5;
/// Relative step for centred differences of lambda in the spectral parameter.
const FD_STEP_Z: f64 = 1e-5;
/// A second boundary-form eigenvalue below this relative size at a crossing
/// means the null space is (numerically) more than one dimensional.
const SECOND_EIGENVALUE_FLOOR: f64 = 1e-8;
/// Null-vector residual `|psi_plus(x0) u|` below which a boundary zero is a
/// Dirichlet crossing...
const DIRICHLET_RESIDUAL: f64 = 1e-6;
/// ...and above which it is a Neumann zero; the band between is ambiguous.
const NEUMANN_RESIDUAL: f64 = 1e-3;
/// Offset used to step off a located root before re-scanning its bracket for
/// further sign changes.
const BRACKET_SPLIT: f64 = 1e-9;
/// Recursion bound for bracket splitting.
const MAX_SPLIT_DEPTH: usize = 8;
/// Relative agreement required between the FD energy derivative and the
/// half-line quadratic form at a Dirichlet crossing.
const FORM_AGREEMENT: f64 = 0.05;
const MAX_BISECTIONS: usize = 200;

/// One transversal crossing of the half-line bound state through mu.
#[derive(Clone, Debug)]
pub struct CrossingRecord {
    /// Cycle time of the crossing.
    pub s_star: f64,
    /// Derivative of the vanishing eigenvalue branch along the cycle.
    pub lambda_s: f64,
    /// Derivative in the spectral parameter, by centred differences.
    pub lambda_z: f64,
    /// The same derivative by the half-line quadratic form; negative at
    /// every nondegenerate crossing.
    pub lambda_z_quadratic: f64,
    /// Orientation weight -sgn(lambda_z * lambda_s).
    pub w: i32,
    /// Unit null vector of the boundary form at the crossing.
    pub u: Vec<Complex64>,
}

/// Chern number of the gap bundle as minus the sum of crossing weights.
pub fn chern_from_crossings(records: &[CrossingRecord]) -> i64 {
    -records.iter().map(|r| i64::from(r.w)).sum::<i64>()
}

/// Boundary form L at the frame's fiducial point (real spectral parameter).
fn boundary_form(frame: &SolutionFrame) -> CMatrix {
    frame.psi_p_d.adjoint().mul_mat(&frame.psi_p)
}

struct BoundaryEig {
    values: Vec<f64>,
    vectors: CMatrix,
    /// Index of the eigenvalue closest to zero.
    min_idx: usize,
    /// Product of all eigenvalues; its sign is gauge invariant.
    det: f64,
}

fn boundary_eig(frame: &SolutionFrame) -> Result<BoundaryEig, TopologyError> {
    let l = boundary_form(frame).hermitize();
    let eig = eig_hermitian(&l)?;
    let min_idx = (0..eig.values.len())
        .min_by(|&a, &b| {
            eig.values[a]
                .abs()
                .partial_cmp(&eig.values[b].abs())
                .unwrap()
        })
        .unwrap();
    let det = eig.values.iter().product();
    Ok(BoundaryEig {
        values: eig.values,
        vectors: eig.vectors,
        min_idx,
        det,
    })
}

fn eig_at(
    problem: &PumpProblem,
    z: Complex64,
    s: f64,
) -> Result<BoundaryEig, TopologyError> {
    let frame = decaying_frame(problem, z, s, problem.x0)?;
    boundary_eig(&frame)
}

/// Eigenvalue at a neighbouring point on the branch through null vector `u`,
/// picked by maximal eigenvector overlap; also returns det for the
/// gauge-invariant sign cross-check.
///
/// The neighbour's arbitrary per-point frame gauge is removed by aligning
/// against the centre frame: renormalizing so the Wronskian with the centre's
/// left adjoint is the identity makes the congruence factor on L smooth in
/// (z, s) and exactly the identity at the centre, so centred differences of
/// the branch live in one gauge. (The raw pivot gauge switches entries right
/// where psi_plus(x0) degenerates, which is precisely at a crossing.)
fn branch_at(
    problem: &PumpProblem,
    z: Complex64,
    s: f64,
    center: &SolutionFrame,
    u: &[Complex64],
) -> Result<(f64, f64), TopologyError> {
    let nb = decaying_frame(problem, z, s, problem.x0)?;
    let a = wronskian(&center.adj_m, &center.adj_m_d, &nb.psi_p, &nb.psi_p_d);
    let a_inv = inverse(&a).map_err(|_| TopologyError::DegenerateCrossing {
        s,
        reason: "alignment wronskian singular near the crossing".into(),
    })?;
    let psi = nb.psi_p.mul_mat(&a_inv);
    let psi_d = nb.psi_p_d.mul_mat(&a_inv);
    let l = psi_d.adjoint().mul_mat(&psi).hermitize();
    let eig = eig_hermitian(&l)?;
    let n = eig.values.len();
    let mut best = 0;
    let mut best_overlap = -1.0;
    for i in 0..n {
        let col = eig.vectors.col(i);
        let ov: Complex64 = u.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
        if ov.norm() > best_overlap {
            best_overlap = ov.norm();
            best = i;
        }
    }
    let det: f64 = eig.values.iter().product();
    Ok((eig.values[best], det))
}

/// Locate all transversal Dirichlet crossings over one cycle at z = mu.
///
/// The cycle is scanned at twice the problem's s resolution; each sign change
/// of det L (a gauge-invariant marker of an odd number of eigenvalue zeros)
/// brackets at least one zero. Bisection refines a root, classification
/// keeps it or drops it as a Neumann zero, and the bracket is re-scanned on
/// both sides of the root so neighbouring zeros in the same cell are found.
/// Zeros paired inside one scan cell without a net sign change are invisible
/// to any determinant scan; raise `s_nodes` to rule them out.
pub fn find_crossings(problem: &PumpProblem) -> Result<Vec<CrossingRecord>, TopologyError> {
    let mu = resolve_mu(problem)?;
    let z = Complex64::new(mu, 0.0);
    let tau = 2.0 * std::f64::consts::PI;
    let n_scan = (2 * problem.s_nodes).max(64);

    let scans: Vec<Result<f64, TopologyError>> = map_indexed(n_scan, problem.parallelism, |k| {
        Ok(eig_at(problem, z, tau * k as f64 / n_scan as f64)?.det)
    });
    let mut dets = Vec::with_capacity(n_scan);
    for d in scans {
        dets.push(d?);
    }

    let mut records = Vec::new();
    for k in 0..n_scan {
        let d_lo = dets[k];
        let d_hi = dets[(k + 1) % n_scan];
        let s_lo = tau * k as f64 / n_scan as f64;
        let s_hi = tau * (k + 1) as f64 / n_scan as f64;
        collect_roots(problem, z, s_lo, s_hi, d_lo, d_hi, 0, &mut records)?;
    }
    Ok(records)
}

/// Bisect one root inside a sign-changing bracket, classify it, and recurse
/// into the flanking sub-brackets.
#[allow(clippy::too_many_arguments)]
fn collect_roots(
    problem: &PumpProblem,
    z: Complex64,
    s_lo: f64,
    s_hi: f64,
    d_lo: f64,
    d_hi: f64,
    depth: usize,
    records: &mut Vec<CrossingRecord>,
) -> Result<(), TopologyError> {
    if !(d_lo * d_hi < 0.0) || s_hi - s_lo <= 2.0 * BRACKET_SPLIT {
        return Ok(());
    }
    if depth > MAX_SPLIT_DEPTH {
        return Err(TopologyError::DegenerateCrossing {
            s: 0.5 * (s_lo + s_hi),
            reason: "boundary-determinant zeros cluster too densely".into(),
        });
    }
    let s_star = bisect_crossing(problem, z, s_lo, s_hi, d_lo)?;
    let d_left = eig_at(problem, z, s_star - BRACKET_SPLIT)?.det;
    let d_right = eig_at(problem, z, s_star + BRACKET_SPLIT)?.det;
    collect_roots(
        problem,
        z,
        s_lo,
        s_star - BRACKET_SPLIT,
        d_lo,
        d_left,
        depth + 1,
        records,
    )?;
    if let Some(record) = finalize_crossing(problem, z, s_star)? {
        records.push(record);
    }
    collect_roots(
        problem,
        z,
        s_star + BRACKET_SPLIT,
        s_hi,
        d_right,
        d_hi,
        depth + 1,
        records,
    )?;
    Ok(())
}

fn bisect_crossing(
    problem: &PumpProblem,
    z: Complex64,
    mut s_lo: f64,
    mut s_hi: f64,
    det_lo: f64,
) -> Result<f64, TopologyError> {
    // det L changes sign across the bracket, so the sign alone steers the
    // bisection; eigenvalue magnitudes are left to the linearity check at the
    // converged root, where FD neighbours give them a meaningful scale.
    let sign_lo = det_lo.signum();
    for _ in 0..MAX_BISECTIONS {
        let s_mid = 0.5 * (s_lo + s_hi);
        if s_hi - s_lo <= ROOT_S_TOL {
            return Ok(s_mid);
        }
        let e = eig_at(problem, z, s_mid)?;
        if e.det.signum() == sign_lo {
            s_lo = s_mid;
        } else {
            s_hi = s_mid;
        }
    }
    Ok(0.5 * (s_lo + s_hi))
}

/// Classify and validate the boundary zero at `s_star`. Returns `None` for a
/// Neumann zero (no transported charge), a record for a Dirichlet crossing.
fn finalize_crossing(
    problem: &PumpProblem,
    z: Complex64,
    s_star: f64,
) -> Result<Option<CrossingRecord>, TopologyError> {
    let (lo, hi) = cell_span(&problem.spec, problem.x0);
    let grid = CellGrid::build(&problem.spec, s_star, lo, hi, problem.x_step)?;
    let j0 = grid.node_index(problem.x0)?;
    let bundle = FrameBundle::build(&problem.spec, &grid, z)?;
    let frame = bundle.frame_at_node(&grid, j0);
    let e = boundary_eig(&frame)?;
    let n = e.values.len();
    let u = e.vectors.col(e.min_idx);
    let scale = e
        .values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);

    // Dirichlet zeros annihilate the null vector through psi_plus(x0) itself;
    // Neumann zeros leave it of frame size.
    let pu = frame.psi_p.mul_vec(&u);
    let pu_norm = pu.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let frame_scale = (frame.psi_p.norm_max() + frame.psi_p_d.norm_max()).max(1e-300);
    let residual = pu_norm / frame_scale;
    if residual > NEUMANN_RESIDUAL {
        return Ok(None);
    }
    if residual > DIRICHLET_RESIDUAL {
        return Err(TopologyError::DegenerateCrossing {
            s: s_star,
            reason: format!("boundary zero of ambiguous type: residual {residual:.3e}"),
        });
    }

    let second = e
        .values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != e.min_idx)
        .map(|(_, v)| v.abs())
        .fold(f64::INFINITY, f64::min);
    if n > 1 && second < SECOND_EIGENVALUE_FLOOR * scale {
        return Err(TopologyError::DegenerateCrossing {
            s: s_star,
            reason: format!("null space not simple: next eigenvalue {second:.3e}"),
        });
    }
    let d_scale = frame.psi_p_d.norm_max().max(1e-300);
    if determinant(&frame.psi_p_d)?.norm() < 1e-8 * d_scale.powi(n as i32) {
        return Err(TopologyError::DegenerateCrossing {
            s: s_star,
            reason: "derivative frame singular at the crossing".into(),
        });
    }

    // sign of the eigenvalue product over the non-vanishing branches; used to
    // recover gauge-invariant signs of lambda on either side from det L
    let sigma: f64 = e
        .values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != e.min_idx)
        .map(|(_, v)| v.signum())
        .product();

    let (lam_sp, det_sp) = branch_at(problem, z, s_star + FD_STEP_S, &frame, &u)?;
    let (lam_sm, det_sm) = branch_at(problem, z, s_star - FD_STEP_S, &frame, &u)?;
    let lambda_s = (lam_sp - lam_sm) / (2.0 * FD_STEP_S);

    // a sharp zero: lambda at the root is far below its FD-step neighbours
    if e.values[e.min_idx].abs() > LINEAR_DROP * lam_sp.abs().min(lam_sm.abs()) {
        return Err(TopologyError::DegenerateCrossing {
            s: s_star,
            reason: "boundary-form eigenvalue does not vanish linearly".into(),
        });
    }

    let dz = FD_STEP_Z * z.re.abs().max(1.0);
    let (lam_zp, det_zp) = branch_at(problem, z + dz, s_star, &frame, &u)?;
    let (lam_zm, det_zm) = branch_at(problem, z - dz, s_star, &frame, &u)?;
    let lambda_z = (lam_zp - lam_zm) / (2.0 * dz);

    // branch tracking must agree with the det-based signs on all four sides
    for (lam, det) in [
        (lam_sp, det_sp),
        (lam_sm, det_sm),
        (lam_zp, det_zp),
        (lam_zm, det_zm),
    ] {
        if lam.signum() != det.signum() * sigma {
            return Err(TopologyError::DegenerateCrossing {
                s: s_star,
                reason: "eigenvalue branch tracking inconsistent with det sign".into(),
            });
        }
    }

    let tables = NodeTables::build(&bundle);
    let decay = half_line_decay_norm(&grid, &bundle, &tables, j0)?;
    let du = decay.mul_vec(&u);
    let quad: Complex64 = u.iter().zip(du.iter()).map(|(a, b)| a.conj() * b).sum();
    let lambda_z_quadratic = -quad.re;

    if lambda_z >= 0.0 || lambda_z_quadratic >= 0.0 {
        return Err(TopologyError::DegenerateCrossing {
            s: s_star,
            reason: format!(
                "energy derivative not negative: fd {lambda_z:.3e}, form {lambda_z_quadratic:.3e}"
            ),
        });
    }
    let disagreement =
        (lambda_z - lambda_z_quadratic).abs() / lambda_z_quadratic.abs().max(1e-300);
    if disagreement > FORM_AGREEMENT {
        return Err(TopologyError::DegenerateCrossing {
            s: s_star,
            reason: format!(
                "energy derivative mismatch: fd {lambda_z:.6e}, form {lambda_z_quadratic:.6e}"
            ),
        });
    }
    if lambda_s == 0.0 {
        return Err(TopologyError::DegenerateCrossing {
            s: s_star,
            reason: "cycle derivative vanishes at the crossing".into(),
        });
    }

    let w = if lambda_z * lambda_s > 0.0 { -1 } else { 1 };
    Ok(Some(CrossingRecord {
        s_star,
        lambda_s,
        lambda_z,
        lambda_z_quadratic,
        w,
        u,
    }))
}

/// Residual of the reflection identity L(z, s) = L(zbar, s)^*, measured as
/// the relative size of the Wronskian of the conjugated decaying frame at
/// zbar against the decaying frame at z. Both frames decay to the right, so
/// the constant Wronskian vanishes identically; the residual is pure
/// discretization noise in any frame gauge.
pub fn reflection_defect(
    problem: &PumpProblem,
    z: Complex64,
    s: f64,
) -> Result<f64, TopologyError> {
    let f_z = decaying_frame(problem, z, s, problem.x0)?;
    let f_c = decaying_frame(problem, z.conj(), s, problem.x0)?;
    let w = wronskian(
        &f_c.psi_p.adjoint(),
        &f_c.psi_p_d.adjoint(),
        &f_z.psi_p,
        &f_z.psi_p_d,
    );
    let scale = (f_c.psi_p.norm_max() * f_z.psi_p_d.norm_max()
        + f_c.psi_p_d.norm_max() * f_z.psi_p.norm_max())
    .max(1e-300);
    Ok(w.norm_max() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{preset, MuSpec, PresetParams};

    fn problem(name: &str, mu: f64, s_nodes: usize) -> PumpProblem {
        let spec = preset(name, &PresetParams::default()).unwrap();
        let mut p = PumpProblem::new(spec, mu, mu - 4.0);
        p.s_nodes = s_nodes;
        p
    }

    #[test]
    fn static_well_has_no_crossings() {
        let mut params = PresetParams::default();
        params.depth_mod = Some(0.0);
        params.tilt_mod = Some(0.0);
        let spec = preset("modulated_well", &params).unwrap();
        let mut p = PumpProblem::new(spec, 2.5, -1.0);
        p.s_nodes = 16;
        let records = find_crossings(&p).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn sliding_cosine_crosses_once_per_cycle_in_the_lowest_gap() {
        let p = problem("sliding_cosine", -1.7, 32);
        let records = find_crossings(&p).unwrap();
        assert_eq!(records.len(), 1, "expected a single crossing");
        let r = &records[0];
        assert!(r.lambda_z < 0.0);
        assert!(r.lambda_z_quadratic < 0.0);
        assert!(r.lambda_s < 0.0, "dragged level falls through mu");
        assert_eq!(r.w, if r.lambda_s > 0.0 { 1 } else { -1 });
        assert_eq!(chern_from_crossings(&records), 1);
    }

    #[test]
    fn sliding_cosine_crosses_twice_per_cycle_in_the_second_gap() {
        let p = problem("sliding_cosine", 1.01, 48);
        let records = find_crossings(&p).unwrap();
        assert_eq!(records.len(), 2, "expected two crossings");
        assert_eq!(records[0].w, records[1].w, "both crossings share a sign");
        assert_eq!(chern_from_crossings(&records), 2);
    }

    #[test]
    fn fiducial_shift_moves_crossings_but_not_their_signed_count() {
        let base = problem("sliding_cosine", -1.7, 32);
        let mut shifted = problem("sliding_cosine", -1.7, 32);
        shifted.x0 = 0.3;
        let a = find_crossings(&base).unwrap();
        let b = find_crossings(&shifted).unwrap();
        assert_eq!(chern_from_crossings(&a), chern_from_crossings(&b));
        assert_eq!(a.len(), b.len());
        assert!(
            (a[0].s_star - b[0].s_star).abs() > 1e-6,
            "crossing time should move with the fiducial point"
        );
    }

    #[test]
    fn opposed_multichannel_crossings_cancel_in_pairs() {
        let spec = preset("sliding_multichannel", &PresetParams::default()).unwrap();
        let mut p = PumpProblem::new(spec, 0.0, -6.0);
        p.mu = MuSpec::FirstGap { fraction: 0.5 };
        p.s_nodes = 32;
        let records = find_crossings(&p).unwrap();
        assert_eq!(records.len() % 2, 0, "opposed crossings come in pairs");
        assert!(!records.is_empty(), "sliding channels must cross");
        assert_eq!(chern_from_crossings(&records), 0);
        for r in &records {
            assert!(r.lambda_z < 0.0);
            assert!(r.lambda_z_quadratic < 0.0);
        }
    }

    #[test]
    fn reflection_identity_holds_off_the_real_axis() {
        let p = problem("sliding_cosine", -1.7, 16);
        for (re, im, s) in [(-1.7, 0.4, 1.1), (-2.2, -0.9, 4.0), (0.6, 1.3, 0.3)] {
            let d = reflection_defect(&p, Complex64::new(re, im), s).unwrap();
            assert!(d < 1e-9, "defect {d} at z = {re}+{im}i");
        }
        let spec = preset("sliding_multichannel", &PresetParams::default()).unwrap();
        let pm = PumpProblem::new(spec, -5.5, -7.0);
        let d = reflection_defect(&pm, Complex64::new(-1.3, 0.7), 2.4).unwrap();
        assert!(d < 1e-9, "multichannel defect {d}");
    }
}
