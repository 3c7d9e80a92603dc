//! Convergence of the truncated-window scattering data to the half-line
//! limit: the transmission dies at the slowest gap contraction rate, the
//! left reflection converges to the half-line reflection at twice that rate,
//! and the off-diagonal blocks of S_L measure how far the window still is
//! from the block-diagonal form that quantizes the pumped charge.

use crate::potential::PumpProblem;

use super::finite::s_matrix_finite;
use super::halfline::reflection_halfline;
use super::ScatteringError;

/// One window length of the convergence sweep.
#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub l: f64,
    /// ||T_L||_F as stored (underflows for long windows) and its logarithm,
    /// which stays finite.
    pub t_norm: f64,
    pub t_norm_ln: f64,
    pub t_prime_norm_ln: f64,
    /// ||R_L - R_halfline||_F.
    pub r_diff: f64,
    /// Right reflection referred to the moving right edge,
    /// e^{2ikL} R'_L, compared against its value at the largest window; the
    /// half-line limit of the right edge is a translated problem, so the
    /// sweep anchors on itself.
    pub r_prime_diff: f64,
    /// Size of the off-diagonal blocks of S_L, max(||T||_F, ||T'||_F), the
    /// distance from the block-diagonal limiting form.
    pub offdiag: f64,
    pub unitarity_residual: f64,
}

/// Convergence sweep at a fixed cycle time.
#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub s: f64,
    pub mu: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of ln ||T_L|| against L.
    pub t_slope: f64,
    /// Root-mean-square residual of that linear fit.
    pub t_fit_rms: f64,
    /// Slowest gap contraction rate per unit length (negative), from the
    /// Floquet multipliers or tail decay exponents.
    pub expected_rate: f64,
    /// Whether ||T_L|| decreases along the sweep up to a 1.1 factor of
    /// pairwise slack.
    pub monotone_envelope: bool,
}

/// Sweep the window length and tabulate the approach to the half-line limit.
///
/// Lengths are sorted ascending; at least two are required for the slope.
/// A gapless system surfaces as `GapClosed` from the half-line solve.
pub fn verify_cinque(
    problem: &PumpProblem,
    s: f64,
    l_list: &[f64],
) -> Result<ConvergenceTable, ScatteringError> {
    if l_list.len() < 2 {
        return Err(ScatteringError::Invalid(
            "convergence sweep needs at least two window lengths".into(),
        ));
    }
    let half = reflection_halfline(problem, s)?;
    let mut lengths = l_list.to_vec();
    lengths.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mats = lengths
        .iter()
        .map(|&l| s_matrix_finite(problem, s, l))
        .collect::<Result<Vec<_>, _>>()?;

    // right reflections referred to the right edge, anchored at the longest
    // window of the sweep
    let edge_referred: Vec<_> = mats
        .iter()
        .map(|sm| {
            let phase = num_complex::Complex64::from_polar(1.0, 2.0 * sm.k * sm.l);
            sm.r_prime.scale(phase)
        })
        .collect();
    let anchor = edge_referred.last().unwrap();

    let rows: Vec<ConvergenceRow> = mats
        .iter()
        .zip(&edge_referred)
        .map(|(sm, edge)| ConvergenceRow {
            l: sm.l,
            t_norm: sm.t.norm_fro(),
            t_norm_ln: sm.t_norm_ln,
            t_prime_norm_ln: sm.t_prime_norm_ln,
            r_diff: (&sm.r - &half.r).norm_fro(),
            r_prime_diff: (&(edge - anchor)).norm_fro(),
            offdiag: sm.t_norm_ln.max(sm.t_prime_norm_ln).exp(),
            unitarity_residual: sm.unitarity_residual,
        })
        .collect();

    let (t_slope, t_fit_rms) = fit_line(
        &rows.iter().map(|r| r.l).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.t_norm_ln).collect::<Vec<_>>(),
    );

    let slack = 1.1_f64.ln();
    let monotone_envelope = rows
        .windows(2)
        .all(|w| w[1].t_norm_ln <= w[0].t_norm_ln + slack);

    Ok(ConvergenceTable {
        s,
        mu: half.mu,
        rows,
        t_slope,
        t_fit_rms,
        expected_rate: half.decay_rate,
        monotone_envelope,
    })
}

fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (intercept + slope * a);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, rms)
}
