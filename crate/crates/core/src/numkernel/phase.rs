use super::NumError;
use num_complex::Complex64;

/// Continuous phase lifted from a sequence of nonzero complex samples.
#[derive(Clone, Debug)]
pub struct PhaseTrace {
    /// Unwrapped phases, same length as the input.
    pub phases: Vec<f64>,
    /// (phase_end - phase_start) / 2*pi rounded to the nearest integer.
    pub winding: i64,
    /// Distance of the raw winding from that integer.
    pub residual: f64,
}

pub fn principal_arg(z: Complex64) -> f64 {
    z.arg()
}

/// Unwraps the phase along a sampled path. Adjacent samples must differ in
/// phase by less than pi; a step at or beyond the branch cut is an error
/// because the lift becomes ambiguous. For a closed loop pass the first
/// sample again at the end.
pub fn unwrap_phase(samples: &[Complex64]) -> Result<PhaseTrace, NumError> {
    if samples.is_empty() {
        return Ok(PhaseTrace {
            phases: vec![],
            winding: 0,
            residual: 0.0,
        });
    }
    let mut phases = Vec::with_capacity(samples.len());
    let mut current = samples[0].arg();
    phases.push(current);
    for (i, pair) in samples.windows(2).enumerate() {
        let (prev, next) = (pair[0], pair[1]);
        if next.norm() == 0.0 || prev.norm() == 0.0 {
            return Err(NumError::PhaseJump {
                index: i + 1,
                step: f64::NAN,
            });
        }
        let step = (next / prev).arg();
        if step.abs() >= std::f64::consts::PI - 1e-9 {
            return Err(NumError::PhaseJump { index: i + 1, step });
        }
        current += step;
        phases.push(current);
    }
    let raw = (phases[phases.len() - 1] - phases[0]) / (2.0 * std::f64::consts::PI);
    let winding = raw.round() as i64;
    Ok(PhaseTrace {
        phases,
        winding,
        residual: (raw - winding as f64).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loop_samples(winding: i64, n: usize) -> Vec<Complex64> {
        // closed loop including the repeated first point
        (0..=n)
            .map(|j| {
                let t = 2.0 * std::f64::consts::PI * winding as f64 * j as f64 / n as f64;
                Complex64::new(t.cos(), t.sin())
            })
            .collect()
    }

    #[test]
    fn constant_samples_wind_zero() {
        let samples = vec![Complex64::new(1.0, 0.0); 5];
        let tr = unwrap_phase(&samples).unwrap();
        assert_eq!(tr.winding, 0);
        assert!(tr.residual < 1e-15);
    }

    #[test]
    fn unit_circle_winds_once() {
        let tr = unwrap_phase(&loop_samples(1, 100)).unwrap();
        assert_eq!(tr.winding, 1);
        assert!(tr.residual < 1e-12);
    }

    #[test]
    fn negative_winding() {
        let tr = unwrap_phase(&loop_samples(-3, 200)).unwrap();
        assert_eq!(tr.winding, -3);
    }

    #[test]
    fn phase_jump_detected() {
        let samples = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 1e-14),
            Complex64::new(1.0, 0.0),
        ];
        assert!(matches!(
            unwrap_phase(&samples),
            Err(NumError::PhaseJump { .. })
        ));
    }

    #[test]
    fn linear_phase_ramp() {
        let samples: Vec<Complex64> = (0..50)
            .map(|j| Complex64::from_polar(2.0, 0.1 * j as f64))
            .collect();
        let tr = unwrap_phase(&samples).unwrap();
        assert!((tr.phases[49] - tr.phases[0] - 4.9).abs() < 1e-12);
    }
}
