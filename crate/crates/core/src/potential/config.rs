//! TOML problem configuration.
//!
//! ```toml
//! [problem]
//! preset = "sliding_cosine"      # or provide a [potential] table instead
//! mu = 1.7                        # or "first_gap", or { first_gap_fraction = 0.3 }
//! e_below = -6.5                  # optional; defaults to a safe value below the spectrum
//! tol_scale = 1.0
//!
//! [problem.params]                # preset knobs, all optional
//! v0 = 4.0
//!
//! [grids]                         # all optional
//! s_nodes = 256
//! contour_nodes = 256
//! plaquette_z = 128
//! plaquette_s = 128
//! x_step = 0.049
//! contour_aspect = 0.35
//! x0 = 0.0
//!
//! [potential]                     # custom potential (alternative to preset)
//! structure = "periodic"          # or "constant_outside"
//! ell = 6.2831853
//! n = 1
//! [[potential.term]]
//! coeff_re = [[4.0]]
//! coeff_im = [[0.0]]              # optional
//! x = { kind = "cos", mode = 1 }  # one | cos | sin | indicator | bump
//! s = { kind = "cos", harmonic = 1, phase = 0.0 }   # optional, default constant
//! ```

use super::presets::{preset, PresetParams};
use super::{
    MuSpec, PotentialError, PotentialSpec, PumpProblem, SProfile, Structure, Term, XProfile,
};
use crate::numkernel::CMatrix;
use num_complex::Complex64;
use serde::Deserialize;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    #[serde(default)]
    grids: RawGrids,
    potential: Option<RawPotential>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    preset: Option<String>,
    params: Option<PresetParams>,
    mu: Option<toml::Value>,
    e_below: Option<f64>,
    tol_scale: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrids {
    s_nodes: Option<usize>,
    contour_nodes: Option<usize>,
    plaquette_z: Option<usize>,
    plaquette_s: Option<usize>,
    x_step: Option<f64>,
    contour_aspect: Option<f64>,
    x0: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    structure: String,
    n: usize,
    ell: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    tail_re: Option<Vec<Vec<f64>>>,
    tail_im: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    term: Vec<RawTerm>,
    name: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    coeff_re: Vec<Vec<f64>>,
    coeff_im: Option<Vec<Vec<f64>>>,
    x: RawXProfile,
    s: Option<RawSProfile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawXProfile {
    kind: String,
    mode: Option<u32>,
    lo: Option<f64>,
    hi: Option<f64>,
    center: Option<f64>,
    halfwidth: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSProfile {
    kind: String,
    harmonic: Option<u32>,
    phase: Option<f64>,
}

fn complex_matrix(
    n: usize,
    re: &[Vec<f64>],
    im: Option<&Vec<Vec<f64>>>,
    what: &str,
) -> Result<CMatrix, PotentialError> {
    let shape_err = || PotentialError::ParseError(format!("{what}: expected {n} rows of {n} reals"));
    if re.len() != n || re.iter().any(|r| r.len() != n) {
        return Err(shape_err());
    }
    if let Some(im) = im {
        if im.len() != n || im.iter().any(|r| r.len() != n) {
            return Err(shape_err());
        }
    }
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let imv = im.map_or(0.0, |im| im[i][j]);
            m[(i, j)] = Complex64::new(re[i][j], imv);
        }
    }
    Ok(m)
}

fn build_x_profile(raw: &RawXProfile) -> Result<XProfile, PotentialError> {
    let need = |field: &str, v: Option<f64>| {
        v.ok_or_else(|| {
            PotentialError::ParseError(format!("x profile `{}` needs `{field}`", raw.kind))
        })
    };
    match raw.kind.as_str() {
        "one" => Ok(XProfile::One),
        "cos" => Ok(XProfile::Cos {
            mode: raw.mode.unwrap_or(1),
        }),
        "sin" => Ok(XProfile::Sin {
            mode: raw.mode.unwrap_or(1),
        }),
        "indicator" => Ok(XProfile::Indicator {
            lo: need("lo", raw.lo)?,
            hi: need("hi", raw.hi)?,
        }),
        "bump" => Ok(XProfile::Bump {
            center: need("center", raw.center)?,
            halfwidth: need("halfwidth", raw.halfwidth)?,
        }),
        other => Err(PotentialError::ParseError(format!(
            "unknown x profile kind `{other}`"
        ))),
    }
}

fn build_s_profile(raw: Option<&RawSProfile>) -> Result<SProfile, PotentialError> {
    match raw {
        None => Ok(SProfile::One),
        Some(r) => match r.kind.as_str() {
            "one" => Ok(SProfile::One),
            "cos" => Ok(SProfile::Cos {
                harmonic: r.harmonic.unwrap_or(1),
                phase: r.phase.unwrap_or(0.0),
            }),
            other => Err(PotentialError::ParseError(format!(
                "unknown s profile kind `{other}`"
            ))),
        },
    }
}

fn build_custom(raw: &RawPotential) -> Result<PotentialSpec, PotentialError> {
    let n = raw.n;
    let structure = match raw.structure.as_str() {
        "periodic" => Structure::Periodic {
            ell: raw.ell.ok_or_else(|| {
                PotentialError::ParseError("periodic potential needs `ell`".into())
            })?,
        },
        "constant_outside" => {
            let a = raw.a.unwrap_or(0.0);
            let b = raw.b.ok_or_else(|| {
                PotentialError::ParseError("constant_outside potential needs `b`".into())
            })?;
            let tail_re = raw.tail_re.as_ref().ok_or_else(|| {
                PotentialError::ParseError("constant_outside potential needs `tail_re`".into())
            })?;
            let tail = complex_matrix(n, tail_re, raw.tail_im.as_ref(), "tail")?;
            Structure::ConstantOutside { a, b, tail }
        }
        other => {
            return Err(PotentialError::ParseError(format!(
                "unknown structure `{other}` (use `periodic` or `constant_outside`)"
            )))
        }
    };
    let mut terms = Vec::with_capacity(raw.term.len());
    for (i, t) in raw.term.iter().enumerate() {
        terms.push(Term {
            coeff: complex_matrix(n, &t.coeff_re, t.coeff_im.as_ref(), &format!("term {i} coeff"))?,
            x_profile: build_x_profile(&t.x)?,
            s_profile: build_s_profile(t.s.as_ref())?,
        });
    }
    Ok(PotentialSpec {
        name: raw.name.clone().unwrap_or_else(|| "custom".into()),
        n,
        structure,
        terms,
        floor: None,
    })
}

fn build_mu(raw: Option<&toml::Value>) -> Result<MuSpec, PotentialError> {
    match raw {
        None => Ok(MuSpec::FirstGap { fraction: 0.5 }),
        Some(toml::Value::Float(v)) => Ok(MuSpec::Value(*v)),
        Some(toml::Value::Integer(v)) => Ok(MuSpec::Value(*v as f64)),
        Some(toml::Value::String(s)) if s == "first_gap" => {
            Ok(MuSpec::FirstGap { fraction: 0.5 })
        }
        Some(toml::Value::Table(t)) => {
            let frac = t
                .get("first_gap_fraction")
                .and_then(|v| v.as_float())
                .ok_or_else(|| {
                    PotentialError::ParseError(
                        "mu table must contain `first_gap_fraction = <float>`".into(),
                    )
                })?;
            if !(0.0 < frac && frac < 1.0) {
                return Err(PotentialError::ParseError(format!(
                    "first_gap_fraction = {frac} outside (0, 1)"
                )));
            }
            Ok(MuSpec::FirstGap { fraction: frac })
        }
        Some(other) => Err(PotentialError::ParseError(format!(
            "mu must be a number, \"first_gap\", or {{ first_gap_fraction = ... }}, got {other}"
        ))),
    }
}

/// Parse a TOML problem description. The returned problem is validated except
/// for gap placement, which requires the spectral scan (and for `first_gap`
/// requests, resolution of mu itself).
pub fn parse_config(text: &str) -> Result<PumpProblem, PotentialError> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| PotentialError::ParseError(e.to_string()))?;

    let spec = match (&raw.problem.preset, &raw.potential) {
        (Some(name), None) => preset(
            name,
            &raw.problem.params.clone().unwrap_or_default(),
        )?,
        (None, Some(pot)) => build_custom(pot)?,
        (Some(_), Some(_)) => {
            return Err(PotentialError::ParseError(
                "give either `problem.preset` or a `[potential]` table, not both".into(),
            ))
        }
        (None, None) => {
            return Err(PotentialError::ParseError(
                "missing potential: set `problem.preset` or add a `[potential]` table".into(),
            ))
        }
    };

    let mu = build_mu(raw.problem.mu.as_ref())?;
    let e_below = raw.problem.e_below.unwrap_or_else(|| {
        let floor = spec.spectral_floor();
        floor - 2.0 - 0.5 * floor.abs()
    });

    let mut problem = PumpProblem::new(spec, 1.0, e_below);
    problem.mu = mu;
    if let Some(v) = raw.problem.tol_scale {
        problem.tol_scale = v;
    }
    let g = &raw.grids;
    if let Some(v) = g.s_nodes {
        problem.s_nodes = v;
    }
    if let Some(v) = g.contour_nodes {
        problem.contour_nodes = v;
    }
    if let Some(v) = g.plaquette_z {
        problem.plaquette_z = v;
    }
    if let Some(v) = g.plaquette_s {
        problem.plaquette_s = v;
    }
    if let Some(v) = g.x_step {
        problem.x_step = v;
    }
    if let Some(v) = g.contour_aspect {
        problem.contour_aspect = v;
    }
    if let Some(v) = g.x0 {
        problem.x0 = v;
    }
    problem.validate()?;
    Ok(problem)
}
