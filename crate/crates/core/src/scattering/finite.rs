//! Scattering matrix of the truncated potential V(x, s) chi_[0,L](x) by
//! plane-wave matching through the transfer matrix of the window.
//!
//! With M the transfer matrix over the window at z = mu = k^2 and blocks
//! M = [[M11, M12], [M21, M22]], matching psi = e^{ikx} + R e^{-ikx} on the
//! left against psi = T e^{ikx} on the right eliminates T and leaves
//!
//!     A R = -B,   A = M21 - ik (M11 + M22) - k^2 M12,
//!                 B = M21 + ik (M22 - M11) + k^2 M12,
//!
//! while the right-incident wave gives T' = -2ik e^{-ikL} A^{-1} and
//! R' = e^{-2ikL} [(M11 - ik M12)(-2ik A^{-1}) - 1].
//!
//! Deep in a gap the window transfer grows like e^{kappa L}, so M carries the
//! growing solution and every block of A and B is dominated by it.  R, R' and
//! T' come out of quotients in which that dominant part is the signal, so they
//! stay accurate; the transmission T, however, would require cancelling the
//! growing parts of M11 and M12 and loses all digits that way.  Instead T is
//! computed from the inverse-direction transfer: at real energy the transfer
//! matrix is J-unitary (M* J M = J with J = [[0, I], [-I, 0]] — constancy of
//! the sesquilinear Wronskian), hence M^{-1} = [[M22*, -M12*], [-M21*, M11*]]
//! entrywise from adjoint blocks, and the matching in terms of M^{-1} yields
//! the cancellation-free formula
//!
//!     T = 2ik e^{-ikL} Ahat^{-1},
//!     Ahat = -M21* + ik (M11* + M22*) + k^2 M12*.
//!
//! A running scale factor keeps the stored transfer bounded; the blocks are
//! scale-free quotients except T and T', whose logarithmic norms are reported
//! alongside so the exponential decay is measurable past the underflow point.

use num_complex::Complex64;

use crate::numkernel::{eig_hermitian, solve, CMatrix};
use crate::par::map_indexed;
use crate::potential::{PumpProblem, Structure};
use crate::solutions::{step_from_eig, transfer, CellGrid, STEP_ERROR_LIMIT};
use crate::topology::resolve_mu;

use super::ScatteringError;

/// Norm above which the running window transfer is renormalized into the
/// logarithmic scale factor.
const RESCALE_LIMIT: f64 = 1e120;

/// Scattering matrix of one truncated window at the Fermi energy.
#[derive(Clone)]
pub struct ScatteringMatrix {
    pub s: f64,
    pub mu: f64,
    /// k = sqrt(mu), the common lead wavenumber of all channels.
    pub k: f64,
    /// Window length of the truncation.
    pub l: f64,
    /// Reflection of the left-incident wave.
    pub r: CMatrix,
    /// Transmission of the left-incident wave (amplitude of e^{ikx} on the right).
    pub t: CMatrix,
    /// Reflection of the right-incident wave.
    pub r_prime: CMatrix,
    /// Transmission of the right-incident wave.
    pub t_prime: CMatrix,
    /// ln ||T||_F and ln ||T'||_F, finite even after the entries underflow.
    pub t_norm_ln: f64,
    pub t_prime_norm_ln: f64,
    /// max-norm of S S* - 1.
    pub unitarity_residual: f64,
    /// Richardson estimate accumulated over the window pieces.
    pub step_error: f64,
}

impl ScatteringMatrix {
    /// Number of channels per lead.
    pub fn channels(&self) -> usize {
        self.r.rows()
    }

    /// The full 2n x 2n matrix [[R, T'], [T, R']].
    pub fn full(&self) -> CMatrix {
        let n = self.channels();
        let mut s = CMatrix::zeros(2 * n, 2 * n);
        s.set_block(0, 0, &self.r);
        s.set_block(0, n, &self.t_prime);
        s.set_block(n, 0, &self.t);
        s.set_block(n, n, &self.r_prime);
        s
    }
}

/// Window transfer matrix held as m * e^{sigma} with ||m|| kept moderate.
struct ScaledTransfer {
    m: CMatrix,
    sigma: f64,
    step_error: f64,
}

fn rescale(m: &mut CMatrix, sigma: &mut f64) {
    let norm = m.norm_max();
    if norm > RESCALE_LIMIT {
        *m = m.scale_re(1.0 / norm);
        *sigma += norm.ln();
    }
}

/// Transfer matrix over the truncation window at z = mu.
///
/// Periodic structures use the window [x0, x0 + L] built from powers of the
/// one-cell transfer plus a partial cell; constant-outside structures use
/// [0, L], which must contain the support [a, b], with the exact constant
/// propagator on the flat pieces.
fn window_transfer(
    problem: &PumpProblem,
    mu: f64,
    s: f64,
    l: f64,
) -> Result<ScaledTransfer, ScatteringError> {
    let z = Complex64::new(mu, 0.0);
    let spec = &problem.spec;
    match &spec.structure {
        Structure::Periodic { ell } => {
            let m_full = ((l / ell) + 1e-9).floor().max(0.0);
            let rem = (l - m_full * ell).max(0.0);
            let mut acc = CMatrix::identity(2 * spec.n);
            let mut sigma = 0.0;
            let mut step_error = 0.0;
            if m_full >= 1.0 {
                let grid = CellGrid::build(spec, s, problem.x0, problem.x0 + ell, problem.x_step)?;
                let (cell, est) = grid.transfer(z);
                if est > STEP_ERROR_LIMIT {
                    return Err(ScatteringError::Solve(
                        crate::solutions::SolveError::StepTooLarge {
                            estimate: est,
                            limit: STEP_ERROR_LIMIT,
                        },
                    ));
                }
                step_error += est * m_full;
                for _ in 0..m_full as usize {
                    acc = &cell * &acc;
                    rescale(&mut acc, &mut sigma);
                }
            }
            if rem > 1e-9 * ell {
                let xa = problem.x0 + m_full * ell;
                let t = transfer(spec, z, s, xa, xa + rem, problem.x_step)?;
                step_error += t.error_estimate;
                acc = &t.m * &acc;
                rescale(&mut acc, &mut sigma);
            }
            Ok(ScaledTransfer {
                m: acc,
                sigma,
                step_error,
            })
        }
        Structure::ConstantOutside { a, b, tail } => {
            if l < *b {
                return Err(ScatteringError::Invalid(format!(
                    "window length {l} does not contain the potential support [{a}, {b}]"
                )));
            }
            let eig = eig_hermitian(&tail.hermitize())?;
            let cell = transfer(spec, z, s, *a, *b, problem.x_step)?;
            let mut acc = if *a > 0.0 {
                step_from_eig(&eig.values, &eig.vectors, z, *a)
            } else {
                CMatrix::identity(2 * spec.n)
            };
            let mut sigma = 0.0;
            rescale(&mut acc, &mut sigma);
            acc = &cell.m * &acc;
            rescale(&mut acc, &mut sigma);
            if l > *b {
                // the constant propagator over a long flat stretch can crest
                // the representable range on its own; split it into bounded
                // pieces
                let mut left = l - *b;
                let piece = (200.0 / (tail.norm_fro() + mu).sqrt().max(1e-3)).max(1.0);
                while left > 0.0 {
                    let h = left.min(piece);
                    acc = &step_from_eig(&eig.values, &eig.vectors, z, h) * &acc;
                    rescale(&mut acc, &mut sigma);
                    left -= h;
                }
            }
            Ok(ScaledTransfer {
                m: acc,
                sigma,
                step_error: cell.error_estimate,
            })
        }
    }
}

/// Assemble the S-matrix blocks from the (scaled) window transfer.
fn blocks_from_window(
    win: &ScaledTransfer,
    n: usize,
    mu: f64,
    s: f64,
    l: f64,
) -> Result<ScatteringMatrix, ScatteringError> {
    let k = mu.sqrt();
    let ik = Complex64::new(0.0, k);
    let k2 = Complex64::new(k * k, 0.0);
    let m11 = win.m.block(0, 0, n, n);
    let m12 = win.m.block(0, n, n, n);
    let m21 = win.m.block(n, 0, n, n);
    let m22 = win.m.block(n, n, n, n);

    let a = &(&m21 - &(&m11 + &m22).scale(ik)) - &m12.scale(k2);
    let b = &(&m21 + &(&m22 - &m11).scale(ik)) + &m12.scale(k2);
    let a_hat = &(&(&m11.adjoint() + &m22.adjoint()).scale(ik) - &m21.adjoint())
        + &m12.adjoint().scale(k2);

    let singular = |_| ScatteringError::MatchingSingular { s, l };
    let r = -&solve(&a, &b).map_err(singular)?;
    let two_ik = CMatrix::identity(n).scale(ik.scale(2.0));
    let t_prime_unit = -&solve(&a, &two_ik).map_err(singular)?;
    let t_unit = solve(&a_hat, &two_ik).map_err(singular)?;

    // phases and the residual scale factor; from_polar(0, ..) underflows
    // cleanly when sigma is past the representable range
    let phase_l = Complex64::from_polar(1.0, -k * l);
    let shrink = Complex64::from_polar((-win.sigma).exp(), 0.0);
    let t = t_unit.scale(phase_l * shrink);
    let t_prime = t_prime_unit.scale(phase_l * shrink);
    let r_prime = (&(&(&m11 - &m12.scale(ik)) * &t_prime_unit) - &CMatrix::identity(n))
        .scale(phase_l * phase_l);

    let t_norm_ln = t_unit.norm_fro().max(f64::MIN_POSITIVE).ln() - win.sigma;
    let t_prime_norm_ln = t_prime_unit.norm_fro().max(f64::MIN_POSITIVE).ln() - win.sigma;

    let out = ScatteringMatrix {
        s,
        mu,
        k,
        l,
        r,
        t,
        r_prime,
        t_prime,
        t_norm_ln,
        t_prime_norm_ln,
        unitarity_residual: 0.0,
        step_error: win.step_error,
    };
    let full = out.full();
    let defect = (&(&full * &full.adjoint()) - &CMatrix::identity(2 * n)).norm_max();
    Ok(ScatteringMatrix {
        unitarity_residual: defect,
        ..out
    })
}

/// Scattering matrix of the potential truncated to a window of length `l`
/// at cycle time `s` and the problem's Fermi energy.
pub fn s_matrix_finite(
    problem: &PumpProblem,
    s: f64,
    l: f64,
) -> Result<ScatteringMatrix, ScatteringError> {
    let mu = resolve_mu(problem)?;
    if !(mu > 0.0) {
        return Err(ScatteringError::Invalid(format!(
            "Fermi energy mu = {mu} must be positive for free leads"
        )));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(ScatteringError::Invalid(format!(
            "window length l = {l} must be positive"
        )));
    }
    let win = window_transfer(problem, mu, s, l)?;
    blocks_from_window(&win, problem.spec.n, mu, s, l)
}

/// S_L over one closed pump cycle, sampled at n_s equispaced cycle times.
pub fn s_matrix_cycle(
    problem: &PumpProblem,
    l: f64,
    n_s: usize,
) -> Result<Vec<ScatteringMatrix>, ScatteringError> {
    let tau = 2.0 * std::f64::consts::PI;
    let results = map_indexed(n_s, problem.parallelism, |j| {
        s_matrix_finite(problem, tau * j as f64 / n_s as f64, l)
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{preset, PresetParams, PotentialSpec, SProfile, Structure, Term, XProfile};
    use std::f64::consts::PI;

    fn free_spec() -> PotentialSpec {
        PotentialSpec {
            name: "free".into(),
            n: 1,
            structure: Structure::Periodic { ell: 1.0 },
            terms: vec![],
            floor: Some(0.0),
        }
    }

    fn constant_spec(v: f64) -> PotentialSpec {
        PotentialSpec {
            name: "flat".into(),
            n: 1,
            structure: Structure::Periodic { ell: 1.0 },
            terms: vec![Term {
                coeff: CMatrix::scalar(1, Complex64::new(v, 0.0)),
                x_profile: XProfile::One,
                s_profile: SProfile::One,
            }],
            floor: Some(v),
        }
    }

    #[test]
    fn free_window_scatters_nothing() {
        let problem = PumpProblem::new(free_spec(), 2.3, -1.0);
        let sm = s_matrix_finite(&problem, 0.7, 3.4).unwrap();
        assert!(sm.r.norm_max() < 1e-12);
        assert!(sm.r_prime.norm_max() < 1e-12);
        assert!((&sm.t - &CMatrix::identity(1)).norm_max() < 1e-12);
        assert!((&sm.t_prime - &CMatrix::identity(1)).norm_max() < 1e-12);
        assert!(sm.unitarity_residual < 1e-12);
    }

    #[test]
    fn square_barrier_transmission_matches_closed_form() {
        // constant potential v truncated to [0, d] is the textbook barrier;
        // above it, |T|^2 = [1 + v^2 sin^2(k' d) / (4 mu (mu - v))]^{-1}
        let v = 1.5;
        let mu = 2.3;
        let d = 0.8;
        let problem = PumpProblem::new(constant_spec(v), mu, -1.0);
        let sm = s_matrix_finite(&problem, 1.9, d).unwrap();
        let kp = (mu - v).sqrt();
        let want = 1.0 / (1.0 + v * v * (kp * d).sin().powi(2) / (4.0 * mu * (mu - v)));
        let got = sm.t[(0, 0)].norm_sqr();
        assert!((got - want).abs() < 1e-12, "|T|^2 = {got}, want {want}");
        let refl = sm.r[(0, 0)].norm_sqr();
        assert!((refl + got - 1.0).abs() < 1e-12);
        assert!(sm.unitarity_residual < 1e-12);
    }

    #[test]
    fn s_matrix_is_unitary_on_the_presets() {
        let cosine = PumpProblem::new(
            preset("sliding_cosine", &PresetParams::default()).unwrap(),
            1.01,
            -6.0,
        );
        let mut params = PresetParams::default();
        params.n = Some(2);
        let multi = PumpProblem::new(
            preset("sliding_multichannel", &params).unwrap(),
            0.8,
            -8.0,
        );
        let ell = 2.0 * PI;
        for (problem, s, l) in [
            (&cosine, 0.4, 2.0 * ell),
            (&cosine, 2.9, 3.0 * ell + 1.2),
            (&multi, 1.3, 2.0 * ell),
            (&multi, 5.1, ell + 0.7),
        ] {
            let sm = s_matrix_finite(problem, s, l).unwrap();
            assert!(
                sm.unitarity_residual < 1e-9,
                "unitarity defect {} at s = {s}, L = {l} for {}",
                sm.unitarity_residual,
                problem.spec.name
            );
        }
    }

    #[test]
    fn blocks_agree_with_the_inverse_direction_transfer() {
        // the same window traversed backwards: composing exact inverse steps
        // gives M^{-1} independently; reconstituting M = J^{-1} (M^{-1})* J
        // through the J-unitarity identity must reproduce every block
        let spec = preset("sliding_cosine", &PresetParams::default()).unwrap();
        let problem = PumpProblem::new(spec, 1.01, -6.0);
        let ell = 2.0 * PI;
        let s = 1.1;
        let l = 2.0 * ell;
        let z = Complex64::new(1.01, 0.0);

        let grid = CellGrid::build(&problem.spec, s, 0.0, ell, problem.x_step).unwrap();
        let mut inv = CMatrix::identity(2);
        for _ in 0..2 {
            inv = &inv * &grid.transfer_inv(z);
        }
        // M = J^{-1} (M^{-1})* J: blocks [[d*, -b*], [-c*, a*]] of the inverse
        let a = inv.block(0, 0, 1, 1);
        let b = inv.block(0, 1, 1, 1);
        let c = inv.block(1, 0, 1, 1);
        let d = inv.block(1, 1, 1, 1);
        let mut m = CMatrix::zeros(2, 2);
        m.set_block(0, 0, &d.adjoint());
        m.set_block(0, 1, &(-&b.adjoint()));
        m.set_block(1, 0, &(-&c.adjoint()));
        m.set_block(1, 1, &a.adjoint());
        let win = ScaledTransfer {
            m,
            sigma: 0.0,
            step_error: 0.0,
        };
        let from_reverse = blocks_from_window(&win, 1, 1.01, s, l).unwrap();
        let direct = s_matrix_finite(&problem, s, l).unwrap();
        for (x, y, label) in [
            (&direct.r, &from_reverse.r, "R"),
            (&direct.t, &from_reverse.t, "T"),
            (&direct.r_prime, &from_reverse.r_prime, "R'"),
            (&direct.t_prime, &from_reverse.t_prime, "T'"),
        ] {
            assert!(
                (&(x - y)).norm_max() < 1e-9,
                "{label} differs between directions by {}",
                (&(x - y)).norm_max()
            );
        }
    }

    #[test]
    fn periodic_power_path_matches_one_shot_composition() {
        let spec = preset("sliding_cosine", &PresetParams::default()).unwrap();
        let problem = PumpProblem::new(spec, 1.01, -6.0);
        let ell = 2.0 * PI;
        let s = 0.3;
        let l = 3.0 * ell;
        let z = Complex64::new(1.01, 0.0);
        let one_shot = transfer(&problem.spec, z, s, 0.0, l, problem.x_step).unwrap();
        let mut sigma = 0.0;
        let mut m = one_shot.m.clone();
        rescale(&mut m, &mut sigma);
        let win = ScaledTransfer {
            m,
            sigma,
            step_error: one_shot.error_estimate,
        };
        let a = blocks_from_window(&win, 1, 1.01, s, l).unwrap();
        let b = s_matrix_finite(&problem, s, l).unwrap();
        let scale = a.r.norm_max().max(1.0);
        assert!((&(&a.r - &b.r)).norm_max() < 1e-9 * scale);
        assert!((a.t_norm_ln - b.t_norm_ln).abs() < 1e-6 * a.t_norm_ln.abs().max(1.0));
    }

    #[test]
    fn long_windows_keep_logarithmic_transmission_finite() {
        let spec = preset("sliding_cosine", &PresetParams::default()).unwrap();
        let problem = PumpProblem::new(spec, 1.01, -6.0);
        let ell = 2.0 * PI;
        let short = s_matrix_finite(&problem, 1.0, 10.0 * ell).unwrap();
        let long = s_matrix_finite(&problem, 1.0, 40.0 * ell).unwrap();
        assert!(long.t_norm_ln.is_finite());
        assert!(long.t_norm_ln < short.t_norm_ln - 1.0);
        assert!(long.unitarity_residual < 1e-9);
        // the stored entries may underflow but must never be NaN
        assert!(long.t.norm_max().is_finite());
    }

    #[test]
    fn cycle_sampling_is_deterministic_and_ordered() {
        let spec = preset("sliding_cosine", &PresetParams::default()).unwrap();
        let problem = PumpProblem::new(spec, 1.01, -6.0);
        let ell = 2.0 * PI;
        let a = s_matrix_cycle(&problem, ell, 16).unwrap();
        let b = s_matrix_cycle(&problem, ell, 16).unwrap();
        assert_eq!(a.len(), 16);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.s, y.s);
            assert!((&(&x.r - &y.r)).norm_max() == 0.0);
        }
    }

    #[test]
    fn rejects_windows_that_cut_the_support() {
        let spec = preset("modulated_well", &PresetParams::default()).unwrap();
        let problem = PumpProblem::new(spec, 1.01, -1.0);
        match s_matrix_finite(&problem, 0.0, 2.0) {
            Err(ScatteringError::Invalid(_)) => {}
            other => panic!("expected Invalid, got {:?}", other.err()),
        }
    }

    #[test]
    fn well_window_transmission_is_unitary_below_the_tails()
    {
        // mu below the tail height: transmission through the flat barriers
        // tunnels, so T is tiny but S stays unitary
        let spec = preset("modulated_well", &PresetParams::default()).unwrap();
        let problem = PumpProblem::new(spec, 1.01, -1.0);
        let sm = s_matrix_finite(&problem, 2.2, 12.0).unwrap();
        assert!(sm.unitarity_residual < 1e-9);
        assert!(sm.t_norm_ln < -5.0);
    }
}
