//! Reflection off the half-line potential V(x, s) restricted to x >= 0,
//! the L -> infinity limit of the truncated windows.
//!
//! For mu = k^2 in a spectral gap the scattering state on the left lead is
//! psi = e^{ikx} c + e^{-ikx} R c, and on x >= 0 it must be a combination of
//! the decaying solutions, psi = psi_+(x) w.  Eliminating w through the
//! boundary forms W± = psi_+'(0) ± ik psi_+(0) gives
//!
//!     W+ + R* W- = 0,   i.e.   R = -(W-*)^{-1} W+* = -W- W+^{-1},
//!
//! where the two forms agree because W-* W- = W+* W+ (the cross terms cancel
//! by the Lagrange identity psi_+(0)* psi_+'(0) = psi_+'(0)* psi_+(0), which
//! is the vanishing sesquilinear Wronskian of the square-integrable branch
//! with itself).  That same identity makes R exactly unitary at real energy.

use num_complex::Complex64;

use crate::numkernel::{solve, CMatrix};
use crate::potential::PumpProblem;
use crate::solutions::{decaying_frame, Asymptotics};
use crate::topology::resolve_mu;

use super::ScatteringError;

/// Unitary reflection matrix of the half-line potential at one cycle time.
#[derive(Clone)]
pub struct HalflineReflection {
    pub s: f64,
    pub mu: f64,
    pub k: f64,
    pub r: CMatrix,
    /// Residual of the defining system ||W+ + R* W-|| / (||W+|| + ||W-||).
    pub system_residual: f64,
    /// max-norm of R* R - 1.
    pub unitarity_defect: f64,
    /// ln of the slowest spatial contraction of the gap solutions per unit
    /// length (negative); the transmission of a window of length L decays at
    /// this rate and the reflection converges at twice it.
    pub decay_rate: f64,
}

/// Reflection matrix of the half-line restriction of the pump potential.
pub fn reflection_halfline(
    problem: &PumpProblem,
    s: f64,
) -> Result<HalflineReflection, ScatteringError> {
    let mu = resolve_mu(problem)?;
    if !(mu > 0.0) {
        return Err(ScatteringError::Invalid(format!(
            "Fermi energy mu = {mu} must be positive for a free left lead"
        )));
    }
    let k = mu.sqrt();
    let z = Complex64::new(mu, 0.0);
    let frame = decaying_frame(problem, z, s, problem.x0)
        .map_err(|e| ScatteringError::from_frame(e, s))?;

    let ik = Complex64::new(0.0, k);
    let w_plus = &frame.psi_p_d + &frame.psi_p.scale(ik);
    let w_minus = &frame.psi_p_d - &frame.psi_p.scale(ik);
    let x = solve(&w_minus.adjoint(), &w_plus.adjoint())
        .map_err(|_| ScatteringError::SystemSingular { s })?;
    let r = -&x;

    let scale = (w_plus.norm_max() + w_minus.norm_max()).max(f64::MIN_POSITIVE);
    let system_residual = (&w_plus + &(&r.adjoint() * &w_minus)).norm_max() / scale;
    let unitarity_defect =
        (&(&r.adjoint() * &r) - &CMatrix::identity(problem.spec.n)).norm_max();

    let decay_rate = match &frame.asym {
        Asymptotics::Periodic { rho_p, ell, .. } => {
            let slowest = rho_p
                .iter()
                .map(|r| r.norm())
                .fold(f64::NEG_INFINITY, f64::max);
            slowest.ln() / ell
        }
        Asymptotics::Tails { kappa_vals, .. } => {
            -kappa_vals
                .iter()
                .map(|k| k.re)
                .fold(f64::INFINITY, f64::min)
        }
    };

    Ok(HalflineReflection {
        s,
        mu,
        k,
        r,
        system_residual,
        unitarity_defect,
        decay_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{preset, PresetParams, PotentialSpec, Structure};

    fn step_spec(v: f64) -> PotentialSpec {
        // the constant tail continues through [a, b] when no term modulates
        // it, so this is V = v on the whole line — a step barrier once the
        // left lead is attached at 0
        PotentialSpec {
            name: "step".into(),
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

    #[test]
    fn potential_step_matches_the_closed_form() {
        // psi_+ = e^{-kappa x} with kappa = sqrt(v - mu) gives
        // R = -(kappa + ik) / (kappa - ik), a pure phase
        let v = 3.0;
        let mu = 1.2;
        let problem = PumpProblem::new(step_spec(v), mu, -1.0);
        let got = reflection_halfline(&problem, 0.4).unwrap();
        let k = mu.sqrt();
        let kappa = (v - mu).sqrt();
        let want = -Complex64::new(kappa, k) / Complex64::new(kappa, -k);
        assert!((got.r[(0, 0)] - want).norm() < 1e-10);
        assert!(got.system_residual < 1e-12);
        assert!(got.unitarity_defect < 1e-12);
        assert!((got.decay_rate + kappa).abs() < 1e-10);
    }

    #[test]
    fn reflection_is_unitary_in_the_gap() {
        let cosine = PumpProblem::new(
            preset("sliding_cosine", &PresetParams::default()).unwrap(),
            1.01,
            -6.0,
        );
        let mut params = PresetParams::default();
        params.n = Some(2);
        let multi = PumpProblem::new(
            preset("sliding_multichannel", &params).unwrap(),
            1.01,
            -8.0,
        );
        for problem in [&cosine, &multi] {
            for s in [0.0, 0.9, 2.4, 4.8] {
                let hl = reflection_halfline(problem, s).unwrap();
                assert!(
                    hl.unitarity_defect < 1e-8,
                    "unitarity defect {} for {} at s = {s}",
                    hl.unitarity_defect,
                    problem.spec.name
                );
                assert!(hl.system_residual < 1e-9);
                assert!(hl.decay_rate < 0.0);
            }
        }
    }

    #[test]
    fn time_independent_well_reflects_identically_at_all_times() {
        let mut params = PresetParams::default();
        params.depth_mod = Some(0.0);
        params.tilt_mod = Some(0.0);
        let spec = preset("modulated_well", &params).unwrap();
        let problem = PumpProblem::new(spec, 1.01, -1.0);
        let base = reflection_halfline(&problem, 0.0).unwrap();
        for s in [1.0, 2.5, 5.9] {
            let hl = reflection_halfline(&problem, s).unwrap();
            assert!((&(&hl.r - &base.r)).norm_max() < 1e-12);
        }
        assert!(base.unitarity_defect < 1e-10);
    }

    #[test]
    fn energy_on_the_band_reports_a_closed_gap() {
        // mu = 2.1 sits inside the third band of the cosine lattice
        let problem = PumpProblem::new(
            preset("sliding_cosine", &PresetParams::default()).unwrap(),
            2.1,
            -6.0,
        );
        match reflection_halfline(&problem, 0.3) {
            Err(ScatteringError::GapClosed { .. }) => {}
            other => panic!("expected GapClosed, got {:?}", other.err()),
        }
    }
}
