//! Built-in pump families with tunable parameters.

use super::{PotentialError, PotentialSpec, SProfile, Structure, Term, XProfile};
use crate::numkernel::CMatrix;
use num_complex::Complex64;
use serde::Deserialize;
use std::f64::consts::PI;

/// Knobs accepted by the presets; unused fields are ignored by presets that
/// do not consume them, unknown keys in a config file are rejected.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetParams {
    /// Sliding-lattice amplitude (default 4.0).
    pub v0: Option<f64>,
    /// Spatial period (default 2*pi).
    pub ell: Option<f64>,
    /// Channel count for the multichannel preset (default 2).
    pub n: Option<usize>,
    /// Per-channel sliding phase offsets (default k*pi/2).
    pub phases: Option<Vec<f64>>,
    /// Real part of the nearest-neighbour channel coupling (default 0.4).
    pub coupling_re: Option<f64>,
    /// Imaginary part of the nearest-neighbour channel coupling (default 0.3).
    pub coupling_im: Option<f64>,
    /// Barrier height outside the well (default 6.0).
    pub v_out: Option<f64>,
    /// Well width (default 4.0).
    pub well_width: Option<f64>,
    /// Mean well depth below the barrier top (default 4.5).
    pub depth_mean: Option<f64>,
    /// Depth modulation amplitude over the cycle (default 0.4).
    pub depth_mod: Option<f64>,
    /// Tilt (left/right asymmetry) modulation amplitude (default 0.3).
    pub tilt_mod: Option<f64>,
}

pub fn preset_names() -> &'static [&'static str] {
    &["sliding_cosine", "sliding_multichannel", "modulated_well"]
}

pub fn preset(name: &str, params: &PresetParams) -> Result<PotentialSpec, PotentialError> {
    match name {
        "sliding_cosine" => sliding_cosine(params),
        "sliding_multichannel" => sliding_multichannel(params),
        "modulated_well" => modulated_well(params),
        other => Err(PotentialError::UnknownPreset(other.to_string())),
    }
}

fn positive(name: &str, value: f64, hi: f64) -> Result<f64, PotentialError> {
    if value > 0.0 && value <= hi && value.is_finite() {
        Ok(value)
    } else {
        Err(PotentialError::InvalidParameter(format!(
            "{name} = {value} outside (0, {hi}]"
        )))
    }
}

fn scalar(v: f64) -> CMatrix {
    CMatrix::scalar(1, Complex64::new(v, 0.0))
}

/// One channel, a cosine lattice translated rigidly through one period per
/// cycle: V(x, s) = v0 cos(2 pi x / ell - s).
fn sliding_cosine(params: &PresetParams) -> Result<PotentialSpec, PotentialError> {
    let v0 = positive("v0", params.v0.unwrap_or(4.0), 50.0)?;
    let ell = positive("ell", params.ell.unwrap_or(2.0 * PI), 20.0)?;
    Ok(PotentialSpec {
        name: "sliding_cosine".into(),
        n: 1,
        // V = v0 cos(2 pi x / ell - s) >= -v0 exactly
        floor: Some(-v0),
        structure: Structure::Periodic { ell },
        terms: vec![
            Term {
                coeff: scalar(v0),
                x_profile: XProfile::Cos { mode: 1 },
                s_profile: SProfile::Cos {
                    harmonic: 1,
                    phase: 0.0,
                },
            },
            Term {
                coeff: scalar(v0),
                x_profile: XProfile::Sin { mode: 1 },
                s_profile: SProfile::Cos {
                    harmonic: 1,
                    // cos(s - pi/2) = sin(s)
                    phase: -0.5 * PI,
                },
            },
        ],
    })
}

/// n coupled channels, each carrying the sliding cosine with a per-channel
/// phase offset, plus a constant complex Hermitian nearest-neighbour coupling
/// (which breaks time-reversal and makes persistent-current cancellation a
/// nontrivial check). Odd channels slide against even ones, so the default
/// two-channel cycle transports opposite charges through the two channels and
/// the net pumped charge vanishes through cancelling crossings rather than
/// through an empty cycle.
fn sliding_multichannel(params: &PresetParams) -> Result<PotentialSpec, PotentialError> {
    let v0 = positive("v0", params.v0.unwrap_or(4.0), 50.0)?;
    let ell = positive("ell", params.ell.unwrap_or(2.0 * PI), 20.0)?;
    let n = params.n.unwrap_or(2);
    if !(2..=super::MAX_CHANNELS).contains(&n) {
        return Err(PotentialError::InvalidParameter(format!(
            "n = {n} outside 2..={}",
            super::MAX_CHANNELS
        )));
    }
    let phases: Vec<f64> = match &params.phases {
        Some(p) => {
            if p.len() != n {
                return Err(PotentialError::InvalidParameter(format!(
                    "phases has {} entries, expected {n}",
                    p.len()
                )));
            }
            p.clone()
        }
        None => (0..n).map(|k| 0.5 * PI * k as f64).collect(),
    };
    let coupling = Complex64::new(
        params.coupling_re.unwrap_or(0.4),
        params.coupling_im.unwrap_or(0.3),
    );
    if coupling.norm() > 10.0 {
        return Err(PotentialError::InvalidParameter(format!(
            "coupling modulus {} exceeds 10",
            coupling.norm()
        )));
    }

    let mut terms = Vec::new();
    for (k, &phi) in phases.iter().enumerate() {
        let mut diag = CMatrix::zeros(n, n);
        diag[(k, k)] = Complex64::new(v0, 0.0);
        // channel k carries v0 cos(2 pi x / ell -+ (s + phi)): the sign of s
        // alternates with the channel, flipping the sliding direction
        let direction = if k % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(Term {
            coeff: diag.clone(),
            x_profile: XProfile::Cos { mode: 1 },
            s_profile: SProfile::Cos {
                harmonic: 1,
                phase: phi,
            },
        });
        terms.push(Term {
            coeff: diag,
            x_profile: XProfile::Sin { mode: 1 },
            s_profile: SProfile::Cos {
                harmonic: 1,
                phase: phi - direction * 0.5 * PI,
            },
        });
    }
    let mut w = CMatrix::zeros(n, n);
    for k in 0..n - 1 {
        w[(k, k + 1)] = coupling;
        w[(k + 1, k)] = coupling.conj();
    }
    terms.push(Term {
        coeff: w,
        x_profile: XProfile::One,
        s_profile: SProfile::One,
    });

    Ok(PotentialSpec {
        name: "sliding_multichannel".into(),
        n,
        // each diagonal >= -v0 and the coupling is bounded by its Gershgorin radius
        floor: Some(-v0 - 2.0 * coupling.norm()),
        structure: Structure::Periodic { ell },
        terms,
    })
}

/// Single well inside flat barriers: the depth breathes over the cycle and a
/// left/right tilt oscillates in quadrature with it, so the well's bound
/// levels trace loops in the (depth, tilt) plane.
fn modulated_well(params: &PresetParams) -> Result<PotentialSpec, PotentialError> {
    let v_out = positive("v_out", params.v_out.unwrap_or(6.0), 100.0)?;
    let width = positive("well_width", params.well_width.unwrap_or(4.0), 40.0)?;
    let depth_mean = positive("depth_mean", params.depth_mean.unwrap_or(4.5), 100.0)?;
    let depth_mod = params.depth_mod.unwrap_or(0.4);
    let tilt_mod = params.tilt_mod.unwrap_or(0.3);
    for (label, v) in [("depth_mod", depth_mod), ("tilt_mod", tilt_mod)] {
        if !(v.is_finite() && v.abs() <= depth_mean) {
            return Err(PotentialError::InvalidParameter(format!(
                "{label} = {v} must satisfy |{label}| <= depth_mean"
            )));
        }
    }
    let (a, b) = (0.0, width);
    let half = 0.5 * width;
    let well = XProfile::Indicator { lo: a, hi: b };
    let left = XProfile::Indicator { lo: a, hi: half };
    let right = XProfile::Indicator { lo: half, hi: b };
    Ok(PotentialSpec {
        name: "modulated_well".into(),
        n: 1,
        floor: Some((v_out - depth_mean - depth_mod.abs() - tilt_mod.abs()).min(v_out)),
        structure: Structure::ConstantOutside {
            a,
            b,
            tail: scalar(v_out),
        },
        terms: vec![
            Term {
                coeff: scalar(-depth_mean),
                x_profile: well,
                s_profile: SProfile::One,
            },
            Term {
                coeff: scalar(-depth_mod),
                x_profile: XProfile::Indicator { lo: a, hi: b },
                s_profile: SProfile::Cos {
                    harmonic: 1,
                    phase: 0.0,
                },
            },
            Term {
                coeff: scalar(-tilt_mod),
                x_profile: left,
                s_profile: SProfile::Cos {
                    harmonic: 1,
                    phase: -0.5 * PI,
                },
            },
            Term {
                coeff: scalar(tilt_mod),
                x_profile: right,
                s_profile: SProfile::Cos {
                    harmonic: 1,
                    phase: -0.5 * PI,
                },
            },
        ],
    })
}
