//! Winding of det R over the pump cycle and its eigenphase anatomy.
//!
//! The half-line reflection R(s) is unitary in a gap, so det R traces the
//! unit circle; its winding number over one cycle is the pumped charge seen
//! from the scattering side.  The winding is carried entirely by eigenvalues
//! of R sweeping through -1: an eigenvector u with R u = -u forces
//! psi_+(0) u = 0, which is exactly a boundary-form crossing of the
//! topological census, and the sweep direction through -1 is set by the sign
//! of the crossing's cycle-time slope.  Both sides are computed here — the
//! phase trace of det R on the cycle grid, and the refined eigenvalue
//! passages — together with the independently found census crossings, so the
//! caller can check the three agree event by event.

use crate::numkernel::{determinant, eig_general, principal_arg, unwrap_phase, NumError};
use crate::par::map_indexed;
use crate::potential::PumpProblem;
use crate::topology::{find_crossings, CrossingRecord};

use super::halfline::{reflection_halfline, HalflineReflection};
use super::ScatteringError;

/// Tolerance on the refined crossing time, in cycle radians.
const REFINE_TOL: f64 = 1e-10;

/// One passage of an eigenvalue of R through -1.
#[derive(Clone, Debug)]
pub struct RCrossing {
    /// Refined cycle time of the passage.
    pub s: f64,
    /// +1 for a counterclockwise passage (eigenphase increasing through pi),
    /// -1 for clockwise.
    pub direction: i32,
    /// Cycle time of the census crossing this passage was matched to.
    pub s_census: Option<f64>,
    /// Direction the census predicts, -sgn(lambda_s).
    pub census_direction: Option<i32>,
}

/// Winding of det R with the per-event reconciliation against the census.
#[derive(Clone, Debug)]
pub struct WindingResult {
    /// Winding number of det R over the cycle.
    pub winding: i64,
    /// Distance of the raw phase winding from the nearest integer.
    pub phase_residual: f64,
    /// Closed grid of cycle times, last entry = first + 2 pi.
    pub s_values: Vec<f64>,
    /// Unwrapped phase of det R on that grid.
    pub det_phases: Vec<f64>,
    /// Eigenvalue passages through -1, refined by bisection.
    pub crossings: Vec<RCrossing>,
    /// Charge the boundary-form census counts, -sum sgn(lambda_s).
    pub census_winding: i64,
    /// Whether winding, eigenvalue passages and census all tell one story.
    pub consistent: bool,
}

/// Eigenphases measured from -1: arg(-lambda) for each eigenvalue of R.
fn gaps_from_minus_one(r: &crate::numkernel::CMatrix) -> Result<Vec<f64>, NumError> {
    let eig = eig_general(r)?;
    Ok(eig.values.iter().map(|l| principal_arg(-l)).collect())
}

/// The eigenphase closest to the -1 passage.
fn nearest_gap(gaps: &[f64]) -> f64 {
    gaps.iter()
        .copied()
        .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
        .unwrap()
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let d = (a - b).rem_euclid(tau);
    d.min(tau - d)
}

/// Winding of det R over the pump cycle at the problem's s-resolution.
pub fn winding_det_r(problem: &PumpProblem) -> Result<WindingResult, ScatteringError> {
    let tau = 2.0 * std::f64::consts::PI;
    let n_s = problem.s_nodes;
    let cell = tau / n_s as f64;

    let samples: Vec<HalflineReflection> =
        map_indexed(n_s, problem.parallelism, |j| {
            reflection_halfline(problem, cell * j as f64)
        })
        .into_iter()
        .collect::<Result<_, _>>()?;

    let mut dets = Vec::with_capacity(n_s + 1);
    for hl in &samples {
        dets.push(determinant(&hl.r)?);
    }
    dets.push(dets[0]);
    let trace = unwrap_phase(&dets).map_err(|e| match e {
        NumError::PhaseJump { index, step } => ScatteringError::PhaseJump { index, step },
        other => ScatteringError::Num(other),
    })?;

    let mut s_values: Vec<f64> = (0..n_s).map(|j| cell * j as f64).collect();
    s_values.push(tau);

    // eigenphase passages through -1, cell by cell
    let gaps: Vec<Vec<f64>> = samples
        .iter()
        .map(|hl| gaps_from_minus_one(&hl.r))
        .collect::<Result<_, _>>()
        .map_err(ScatteringError::Num)?;
    let mut crossings = Vec::new();
    for j in 0..n_s {
        let here = &gaps[j];
        let next = &gaps[(j + 1) % n_s];
        for &ga in here {
            // transversal passages stay within a quarter turn of -1 on both
            // sides; pair ga with the closest phase in the next frame
            let gb = next
                .iter()
                .copied()
                .min_by(|a, b| (a - ga).abs().partial_cmp(&(b - ga).abs()).unwrap())
                .unwrap();
            if ga.abs() < 0.5 * std::f64::consts::PI
                && gb.abs() < 0.5 * std::f64::consts::PI
                && (ga == 0.0 || ga.signum() != gb.signum())
                && gb != 0.0
            {
                let direction = if gb > ga { 1 } else { -1 };
                let s_star = refine_passage(problem, cell * j as f64, cell * (j + 1) as f64, ga)?;
                crossings.push(RCrossing {
                    s: s_star,
                    direction,
                    s_census: None,
                    census_direction: None,
                });
            }
        }
    }
    crossings.sort_by(|a, b| a.s.partial_cmp(&b.s).unwrap());

    let swept: i64 = crossings.iter().map(|c| i64::from(c.direction)).sum();
    if swept != trace.winding {
        // a passage was missed or double-counted between grid nodes; the
        // remedy is the same as for a raw phase jump — refine the cycle grid
        return Err(ScatteringError::UnderResolved {
            shift: (swept - trace.winding) as f64,
        });
    }

    // reconcile with the boundary-form census
    let census: Vec<CrossingRecord> = find_crossings(problem)?;
    let census_winding: i64 = census
        .iter()
        .map(|c| -i64::from(c.lambda_s.signum() as i8))
        .sum();
    let mut paired = 0usize;
    for cross in &mut crossings {
        if let Some(best) = census
            .iter()
            .min_by(|a, b| {
                circular_distance(a.s_star, cross.s)
                    .partial_cmp(&circular_distance(b.s_star, cross.s))
                    .unwrap()
            })
            .filter(|rec| circular_distance(rec.s_star, cross.s) <= cell)
        {
            cross.s_census = Some(best.s_star);
            cross.census_direction = Some(if best.lambda_s < 0.0 { 1 } else { -1 });
            paired += 1;
        }
    }
    let consistent = trace.winding == census_winding
        && paired == crossings.len()
        && crossings.len() == census.len()
        && crossings
            .iter()
            .all(|c| c.census_direction == Some(c.direction));

    Ok(WindingResult {
        winding: trace.winding,
        phase_residual: trace.residual,
        s_values,
        det_phases: trace.phases,
        crossings,
        census_winding,
        consistent,
    })
}

/// Bisect the eigenphase sign change to locate the passage time.
fn refine_passage(
    problem: &PumpProblem,
    s_lo: f64,
    s_hi: f64,
    gap_lo: f64,
) -> Result<f64, ScatteringError> {
    let mut lo = s_lo;
    let mut hi = s_hi;
    let mut sign_lo = if gap_lo == 0.0 { return Ok(s_lo) } else { gap_lo.signum() };
    while hi - lo > REFINE_TOL {
        let mid = 0.5 * (lo + hi);
        let g = nearest_gap(
            &gaps_from_minus_one(&reflection_halfline(problem, mid)?.r)
                .map_err(ScatteringError::Num)?,
        );
        if g == 0.0 {
            return Ok(mid);
        }
        if g.signum() == sign_lo {
            lo = mid;
            sign_lo = g.signum();
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{preset, PresetParams, PotentialSpec, SProfile, Structure, Term, XProfile};
    use crate::numkernel::CMatrix;
    use num_complex::Complex64;

    fn static_cosine() -> PotentialSpec {
        PotentialSpec {
            name: "static_cosine".into(),
            n: 1,
            structure: Structure::Periodic {
                ell: 2.0 * std::f64::consts::PI,
            },
            terms: vec![Term {
                coeff: CMatrix::scalar(1, Complex64::new(4.0, 0.0)),
                x_profile: XProfile::Cos { mode: 1 },
                s_profile: SProfile::One,
            }],
            floor: Some(-4.0),
        }
    }

    #[test]
    fn static_lattice_winds_zero() {
        let mut problem = PumpProblem::new(static_cosine(), 1.01, -6.0);
        problem.s_nodes = 64;
        let res = winding_det_r(&problem).unwrap();
        assert_eq!(res.winding, 0);
        assert_eq!(res.census_winding, 0);
        assert!(res.crossings.is_empty());
        assert!(res.consistent);
        assert!(res.phase_residual < 1e-8);
    }

    #[test]
    fn sliding_lattice_winding_matches_the_census_event_by_event() {
        let mut problem = PumpProblem::new(
            preset("sliding_cosine", &PresetParams::default()).unwrap(),
            1.01,
            -6.0,
        );
        problem.s_nodes = 64;
        let res = winding_det_r(&problem).unwrap();
        assert_eq!(res.winding, 2, "det R should wind twice in the second gap");
        assert_eq!(res.census_winding, 2);
        assert!(res.consistent);
        assert_eq!(res.crossings.len(), 2);
        let cell = 2.0 * std::f64::consts::PI / 64.0;
        for c in &res.crossings {
            assert_eq!(c.direction, 1);
            assert_eq!(c.census_direction, Some(1));
            let s_census = c.s_census.unwrap();
            assert!(
                circular_distance(c.s, s_census) <= cell,
                "eigenvalue passage at {} vs census {}",
                c.s,
                s_census
            );
        }
    }

    #[test]
    fn counter_sliding_channels_cancel() {
        let mut params = PresetParams::default();
        params.n = Some(2);
        let mut problem = PumpProblem::new(
            preset("sliding_multichannel", &params).unwrap(),
            1.01,
            -8.0,
        );
        problem.s_nodes = 64;
        let res = winding_det_r(&problem).unwrap();
        assert_eq!(res.winding, res.census_winding);
        assert!(res.consistent);
        let swept: i64 = res.crossings.iter().map(|c| i64::from(c.direction)).sum();
        assert_eq!(swept, res.winding);
    }
}
