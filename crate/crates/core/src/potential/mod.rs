//! Pump potentials: Hermitian matrix-valued V(x, s), 2*pi-periodic in the
//! cycle parameter s, either periodic in x or constant outside a compact
//! interval. Includes the built-in presets and the config-file parser.

mod config;
mod presets;

pub use config::parse_config;
pub use presets::{preset, preset_names, PresetParams};

use crate::numkernel::CMatrix;
use crate::par::Parallelism;
use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

pub const MAX_CHANNELS: usize = 8;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config parse error: {0}")]
    ParseError(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

/// Spatial structure of the potential.
#[derive(Clone, Debug)]
pub enum Structure {
    /// V(x + ell, s) = V(x, s).
    Periodic { ell: f64 },
    /// V(x, s) equals `tail` for x outside [a, b].
    ConstantOutside { a: f64, b: f64, tail: CMatrix },
}

/// Spatial profile of a single term. Fourier modes are only meaningful for
/// periodic structures; indicator/bump profiles only for compact ones.
#[derive(Clone, Debug, PartialEq)]
pub enum XProfile {
    One,
    /// cos(2 pi mode x / ell)
    Cos { mode: u32 },
    /// sin(2 pi mode x / ell)
    Sin { mode: u32 },
    /// characteristic function of [lo, hi)
    Indicator { lo: f64, hi: f64 },
    /// cos^2 window supported on |x - center| < halfwidth
    Bump { center: f64, halfwidth: f64 },
}

/// Cycle profile of a single term, a first-order trig polynomial factor.
#[derive(Clone, Debug, PartialEq)]
pub enum SProfile {
    One,
    /// cos(harmonic * s + phase)
    Cos { harmonic: u32, phase: f64 },
}

#[derive(Clone, Debug)]
pub struct Term {
    pub coeff: CMatrix,
    pub x_profile: XProfile,
    pub s_profile: SProfile,
}

#[derive(Clone, Debug)]
pub struct PotentialSpec {
    pub name: String,
    pub n: usize,
    pub structure: Structure,
    pub terms: Vec<Term>,
    /// Sharper lower bound on min-eig V(x, s) than the generic term-by-term
    /// estimate, supplied by families whose closed form gives one.
    pub floor: Option<f64>,
}

impl XProfile {
    fn eval(&self, x: f64, ell: f64) -> f64 {
        match *self {
            XProfile::One => 1.0,
            XProfile::Cos { mode } => (2.0 * std::f64::consts::PI * mode as f64 * x / ell).cos(),
            XProfile::Sin { mode } => (2.0 * std::f64::consts::PI * mode as f64 * x / ell).sin(),
            XProfile::Indicator { lo, hi } => {
                if x >= lo && x < hi {
                    1.0
                } else {
                    0.0
                }
            }
            XProfile::Bump { center, halfwidth } => {
                let t = (x - center).abs();
                if t < halfwidth {
                    let w = 0.5 * std::f64::consts::PI * t / halfwidth;
                    let c = w.cos();
                    c * c
                } else {
                    0.0
                }
            }
        }
    }
}

impl SProfile {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            SProfile::One => 1.0,
            SProfile::Cos { harmonic, phase } => (harmonic as f64 * s + phase).cos(),
        }
    }
}

impl PotentialSpec {
    /// V(x, s) as an n x n Hermitian matrix.
    pub fn evaluate(&self, x: f64, s: f64) -> CMatrix {
        let (mut v, ell) = match &self.structure {
            Structure::Periodic { ell } => (CMatrix::zeros(self.n, self.n), *ell),
            Structure::ConstantOutside { tail, b, a } => (tail.clone(), (b - a).max(1.0)),
        };
        for term in &self.terms {
            let w = term.x_profile.eval(x, ell) * term.s_profile.eval(s);
            if w != 0.0 {
                v = &v + &term.coeff.scale(Complex64::new(w, 0.0));
            }
        }
        v
    }

    /// Upper bound on sup_{x,s} of the spectral norm of V.
    pub fn norm_bound(&self) -> f64 {
        let base = match &self.structure {
            Structure::Periodic { .. } => 0.0,
            Structure::ConstantOutside { tail, .. } => tail.norm_fro(),
        };
        base + self
            .terms
            .iter()
            .map(|t| t.coeff.norm_fro())
            .sum::<f64>()
    }

    /// Rigorous lower bound on min-eig V(x, s) over all x, s. Since
    /// -d^2/dx^2 >= 0, the operator spectrum lies above this value.
    pub fn spectral_floor(&self) -> f64 {
        if let Some(f) = self.floor {
            return f;
        }
        let base = match &self.structure {
            Structure::Periodic { .. } => 0.0,
            Structure::ConstantOutside { tail, .. } => crate::numkernel::eig_hermitian(tail)
                .map(|e| e.values[0])
                .unwrap_or(-tail.norm_fro()),
        };
        base - self
            .terms
            .iter()
            .map(|t| t.coeff.norm_fro())
            .sum::<f64>()
    }

    /// Period for periodic structures, compact-support width otherwise.
    pub fn x_extent(&self) -> (f64, f64) {
        match &self.structure {
            Structure::Periodic { ell } => (0.0, *ell),
            Structure::ConstantOutside { a, b, .. } => (*a, *b),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.structure, Structure::Periodic { .. })
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        if self.n == 0 || self.n > MAX_CHANNELS {
            return Err(PotentialError::Validation(format!(
                "channel count {} outside 1..={}",
                self.n, MAX_CHANNELS
            )));
        }
        match &self.structure {
            Structure::Periodic { ell } => {
                if !(*ell > 0.0) || !ell.is_finite() {
                    return Err(PotentialError::Validation(format!(
                        "period ell = {ell} must be positive and finite"
                    )));
                }
                for (i, t) in self.terms.iter().enumerate() {
                    if matches!(
                        t.x_profile,
                        XProfile::Indicator { .. } | XProfile::Bump { .. }
                    ) {
                        return Err(PotentialError::Validation(format!(
                            "term {i}: compact spatial profile in a periodic potential"
                        )));
                    }
                }
            }
            Structure::ConstantOutside { a, b, tail } => {
                if !(a < b) {
                    return Err(PotentialError::Validation(format!(
                        "interval [{a}, {b}] is empty"
                    )));
                }
                if *a < 0.0 {
                    return Err(PotentialError::Validation(
                        "compact support must sit in x >= 0 so the truncation window [0, L] can contain it".into(),
                    ));
                }
                if tail.rows() != self.n || tail.cols() != self.n {
                    return Err(PotentialError::Validation("tail matrix has wrong shape".into()));
                }
                if tail.hermitian_defect() > 1e-12 {
                    return Err(PotentialError::Validation(
                        "tail matrix is not Hermitian".into(),
                    ));
                }
                for (i, t) in self.terms.iter().enumerate() {
                    let ok = match t.x_profile {
                        XProfile::Indicator { lo, hi } => lo >= *a - 1e-12 && hi <= *b + 1e-12,
                        XProfile::Bump { center, halfwidth } => {
                            center - halfwidth >= *a - 1e-12 && center + halfwidth <= *b + 1e-12
                        }
                        _ => false,
                    };
                    if !ok {
                        return Err(PotentialError::Validation(format!(
                            "term {i}: spatial profile must be compactly supported inside [{a}, {b}]"
                        )));
                    }
                }
            }
        }
        for (i, t) in self.terms.iter().enumerate() {
            if t.coeff.rows() != self.n || t.coeff.cols() != self.n {
                return Err(PotentialError::Validation(format!(
                    "term {i}: coefficient has wrong shape"
                )));
            }
            if t.coeff.hermitian_defect() > 1e-12 {
                return Err(PotentialError::Validation(format!(
                    "term {i}: coefficient is not Hermitian"
                )));
            }
        }
        Ok(())
    }
}

/// Chemical potential specification: an explicit number or a request to place
/// it inside the lowest gap that intersects the positive axis (resolved by
/// the spectral scan before any pipeline runs).
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub enum MuSpec {
    Value(f64),
    FirstGap { fraction: f64 },
}

/// A fully specified pump computation: the potential plus energy window and
/// discretization choices shared by all pipelines.
#[derive(Clone, Debug)]
pub struct PumpProblem {
    pub spec: PotentialSpec,
    pub mu: MuSpec,
    pub e_below: f64,
    pub s_nodes: usize,
    pub contour_nodes: usize,
    pub plaquette_z: usize,
    pub plaquette_s: usize,
    pub x_step: f64,
    pub contour_aspect: f64,
    pub x0: f64,
    /// Uniform scale applied to the tolerance ladder.
    pub tol_scale: f64,
    pub parallelism: Parallelism,
}

impl PumpProblem {
    pub fn new(spec: PotentialSpec, mu: f64, e_below: f64) -> Self {
        let x_step = match &spec.structure {
            Structure::Periodic { ell } => ell / 128.0,
            Structure::ConstantOutside { a, b, .. } => (b - a) / 128.0,
        };
        PumpProblem {
            spec,
            mu: MuSpec::Value(mu),
            e_below,
            s_nodes: 256,
            contour_nodes: 256,
            plaquette_z: 128,
            plaquette_s: 128,
            x_step,
            contour_aspect: 0.35,
            x0: 0.0,
            tol_scale: 1.0,
            parallelism: Parallelism::default(),
        }
    }

    /// Chemical potential; panics if the first-gap request has not been
    /// resolved yet (resolution happens right after parsing).
    pub fn mu_value(&self) -> f64 {
        match self.mu {
            MuSpec::Value(v) => v,
            MuSpec::FirstGap { .. } => {
                panic!("chemical potential still unresolved; run the gap scan first")
            }
        }
    }

    pub fn set_mu(&mut self, mu: f64) {
        self.mu = MuSpec::Value(mu);
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        self.spec.validate()?;
        if let MuSpec::Value(mu) = self.mu {
            if !(mu > 0.0) || !mu.is_finite() {
                return Err(PotentialError::Validation(format!(
                    "chemical potential mu = {mu} must be positive (it must sit in the leads' continuum)"
                )));
            }
            if let Structure::ConstantOutside { tail, .. } = &self.spec.structure {
                let floor = crate::numkernel::eig_hermitian(tail)
                    .map_err(|e| PotentialError::Validation(format!("tail matrix: {e}")))?
                    .values[0];
                if mu >= floor {
                    return Err(PotentialError::Validation(format!(
                        "mu = {mu} must lie below the tail threshold {floor}"
                    )));
                }
            }
            if self.e_below >= mu {
                return Err(PotentialError::Validation(
                    "e_below must lie below mu".into(),
                ));
            }
        }
        let floor = self.spec.spectral_floor();
        if self.e_below >= floor {
            return Err(PotentialError::Validation(format!(
                "e_below = {} is not safely below the spectrum; need < {floor}",
                self.e_below
            )));
        }
        if !(self.x_step > 0.0) {
            return Err(PotentialError::Validation("x_step must be positive".into()));
        }
        let (xa, xb) = self.spec.x_extent();
        if self.x_step > (xb - xa) / 8.0 {
            return Err(PotentialError::Validation(format!(
                "x_step = {} too coarse for spatial extent {}",
                self.x_step,
                xb - xa
            )));
        }
        for (label, v) in [
            ("s_nodes", self.s_nodes),
            ("contour_nodes", self.contour_nodes),
            ("plaquette_z", self.plaquette_z),
            ("plaquette_s", self.plaquette_s),
        ] {
            if v < 8 {
                return Err(PotentialError::Validation(format!(
                    "{label} = {v} is below the minimum of 8"
                )));
            }
        }
        if !(self.contour_aspect > 0.0 && self.contour_aspect <= 2.0) {
            return Err(PotentialError::Validation(
                "contour_aspect must lie in (0, 2]".into(),
            ));
        }
        if !(self.tol_scale >= 1e-2 && self.tol_scale <= 1e6) {
            return Err(PotentialError::Validation(
                "tol_scale must lie in [1e-2, 1e6]".into(),
            ));
        }
        Ok(())
    }
}
