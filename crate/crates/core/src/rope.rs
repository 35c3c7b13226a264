//! Temporal rotary position embeddings with frequency-aware length extension.
//!
//! Plane `m` of a `d_f`-dimensional temporal embedding rotates at
//! `theta_m = base^(-2m/d_f)` radians per latent frame. Three modulation
//! modes are supported when the inference length `L` exceeds the training
//! length:
//!
//! * [`ModulationMode::Vanilla`] extrapolates: positions and frequencies are
//!   used unchanged.
//! * [`ModulationMode::PositionInterpolation`] divides every position by the
//!   dynamic scale `S = max(1, L / L_train)`.
//! * [`ModulationMode::FlexNtkByParts`] keeps positions and blends each
//!   plane's frequency between `theta / S` and `theta` according to how many
//!   full cycles the plane completed during training.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, FlexError, Result};

/// Temporal rotary configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RopeSpec {
    /// Temporal embedding dimension; `d_f / 2` rotary planes.
    pub d_f: usize,
    pub base: f64,
    /// Training horizon in latent frames.
    pub l_train: usize,
    /// Exposure below which a plane is fully interpolated.
    pub alpha: f64,
    /// Exposure above which a plane is left untouched.
    pub beta: f64,
}

impl Default for RopeSpec {
    fn default() -> Self {
        Self {
            d_f: 16,
            base: 10_000.0,
            l_train: 21,
            alpha: 0.1,
            beta: 2.5,
        }
    }
}

impl RopeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d_f < 2 || !self.d_f.is_multiple_of(2) {
            return Err(FlexError::Config(format!(
                "d_f must be even and >= 2, got {}",
                self.d_f
            )));
        }
        if self.base.is_nan() || self.base <= 1.0 || !self.base.is_finite() {
            return Err(FlexError::Config(format!(
                "rotary base must be finite and > 1, got {}",
                self.base
            )));
        }
        if self.l_train < 1 {
            return Err(FlexError::Config("l_train must be >= 1".into()));
        }
        check_gate_params(self.alpha, self.beta)
    }

    pub fn planes(&self) -> usize {
        self.d_f / 2
    }
}

fn check_gate_params(alpha: f64, beta: f64) -> Result<()> {
    if alpha.is_nan() || beta.is_nan() || alpha < 0.0 || alpha >= beta || !beta.is_finite() {
        return Err(FlexError::Config(format!(
            "gate thresholds need 0 <= alpha < beta, got alpha={alpha}, beta={beta}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulationMode {
    Vanilla,
    #[serde(rename = "pi")]
    PositionInterpolation,
    #[serde(rename = "flex")]
    FlexNtkByParts,
}

impl ModulationMode {
    pub const ALL: [ModulationMode; 3] = [
        ModulationMode::Vanilla,
        ModulationMode::PositionInterpolation,
        ModulationMode::FlexNtkByParts,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModulationMode::Vanilla => "vanilla",
            ModulationMode::PositionInterpolation => "pi",
            ModulationMode::FlexNtkByParts => "flex",
        }
    }
}

impl fmt::Display for ModulationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModulationMode {
    type Err = FlexError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" => Ok(ModulationMode::Vanilla),
            "pi" | "position-interpolation" => Ok(ModulationMode::PositionInterpolation),
            "flex" | "ntk-by-parts" => Ok(ModulationMode::FlexNtkByParts),
            other => Err(FlexError::Config(format!(
                "unknown modulation mode '{other}' (expected vanilla, pi or flex)"
            ))),
        }
    }
}

/// Position and dynamic scale for one rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotaryState {
    pub position: u64,
    pub scale: f64,
}

impl RotaryState {
    pub fn new(position: u64, spec: &RopeSpec, target_len: usize) -> Self {
        Self {
            position,
            scale: dynamic_scale(spec.l_train, target_len),
        }
    }
}

/// `S = max(1, L / L_train)`.
pub fn dynamic_scale(l_train: usize, target_len: usize) -> f64 {
    (target_len as f64 / l_train as f64).max(1.0)
}

/// `theta_m = base^(-2m/d_f)` for every plane.
pub fn plane_frequencies(spec: &RopeSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let d = spec.d_f as f64;
    Ok((0..spec.planes())
        .map(|m| spec.base.powf(-2.0 * m as f64 / d))
        .collect())
}

/// Wavelength and training exposure of one plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exposure {
    pub lambda: f64,
    pub exposure_r: f64,
}

pub fn wavelength(theta: f64) -> f64 {
    TAU / theta
}

/// Full rotation cycles completed within `l_train` frames.
pub fn exposure(theta: f64, l_train: usize) -> f64 {
    l_train as f64 * theta / TAU
}

pub fn exposure_table(spec: &RopeSpec) -> Result<Vec<Exposure>> {
    Ok(plane_frequencies(spec)?
        .into_iter()
        .map(|theta| Exposure {
            lambda: wavelength(theta),
            exposure_r: exposure(theta, spec.l_train),
        })
        .collect())
}

/// Ramp from 0 at `alpha` to 1 at `beta`, clamped outside.
pub fn gate(exposure_r: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_gate_params(alpha, beta)?;
    Ok(gate_unchecked(exposure_r, alpha, beta))
}

fn gate_unchecked(r: f64, alpha: f64, beta: f64) -> f64 {
    if r <= alpha {
        0.0
    } else if r >= beta {
        1.0
    } else {
        ((r - alpha) / (beta - alpha)).clamp(0.0, 1.0)
    }
}

/// Blends `theta / scale` and `theta` with weight `g` on the original.
fn blend(theta: f64, g: f64, scale: f64) -> f64 {
    if g >= 1.0 {
        return theta;
    }
    let squeezed = theta / scale;
    if g <= 0.0 {
        return squeezed;
    }
    ((1.0 - g) * squeezed + g * theta).clamp(squeezed, theta)
}

/// Dynamic scale and NTK-by-parts frequencies for inference length `target_len`.
///
/// Within the training horizon the base frequencies are returned as-is.
pub fn modulated_frequencies(spec: &RopeSpec, target_len: usize) -> Result<(f64, Vec<f64>)> {
    if target_len < 1 {
        return Err(FlexError::Config("target length must be >= 1".into()));
    }
    let thetas = plane_frequencies(spec)?;
    if target_len <= spec.l_train {
        return Ok((1.0, thetas));
    }
    let scale = dynamic_scale(spec.l_train, target_len);
    let modulated = thetas
        .iter()
        .map(|&theta| {
            let g = gate_unchecked(exposure(theta, spec.l_train), spec.alpha, spec.beta);
            blend(theta, g, scale)
        })
        .collect();
    Ok((scale, modulated))
}

/// Position fed to the rotation for global frame index `n`.
pub fn position_map(mode: ModulationMode, n: f64, scale: f64) -> f64 {
    match mode {
        ModulationMode::PositionInterpolation => n / scale,
        ModulationMode::Vanilla | ModulationMode::FlexNtkByParts => n,
    }
}

/// Per-plane derived quantities for one `(spec, L)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub m: usize,
    pub theta: f64,
    pub lambda: f64,
    pub exposure_r: f64,
    pub gate_g: f64,
    pub theta_mod: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneTable {
    pub spec: RopeSpec,
    pub target_len: usize,
    pub scale: f64,
    pub planes: Vec<Plane>,
}

impl PlaneTable {
    pub fn new(spec: &RopeSpec, target_len: usize) -> Result<Self> {
        let thetas = plane_frequencies(spec)?;
        let (scale, modulated) = modulated_frequencies(spec, target_len)?;
        let planes = thetas
            .iter()
            .zip(modulated)
            .enumerate()
            .map(|(m, (&theta, theta_mod))| {
                let exposure_r = exposure(theta, spec.l_train);
                Plane {
                    m,
                    theta,
                    lambda: wavelength(theta),
                    exposure_r,
                    gate_g: gate_unchecked(exposure_r, spec.alpha, spec.beta),
                    theta_mod,
                }
            })
            .collect();
        Ok(Self {
            spec: *spec,
            target_len,
            scale,
            planes,
        })
    }
}

/// Precomputed rotation for one `(spec, mode, L)` run.
///
/// The angle for plane `m` at position `n` is `n * theta_eff[m]` for
/// Vanilla and Flex, and `(n * theta[m]) / S` for position interpolation,
/// which equals `position_map(n) * theta[m]` and keeps the one-frame step
/// exactly `theta / S`. Cos/sin tables cover integer positions `[0, L)`;
/// other positions are evaluated directly.
#[derive(Debug, Clone)]
pub struct RotaryTable {
    mode: ModulationMode,
    scale: f64,
    theta_eff: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    cached_positions: usize,
}

impl RotaryTable {
    pub fn new(spec: &RopeSpec, mode: ModulationMode, target_len: usize) -> Result<Self> {
        let (scale, modulated) = modulated_frequencies(spec, target_len)?;
        let theta_eff = match mode {
            ModulationMode::FlexNtkByParts => modulated,
            _ => plane_frequencies(spec)?,
        };
        let mut table = Self {
            mode,
            scale,
            theta_eff,
            cos: Vec::new(),
            sin: Vec::new(),
            cached_positions: 0,
        };
        let planes = table.theta_eff.len();
        table.cos.reserve(target_len * planes);
        table.sin.reserve(target_len * planes);
        for n in 0..target_len {
            for m in 0..planes {
                let (s, c) = table.angle(n as f64, m).sin_cos();
                table.cos.push(c);
                table.sin.push(s);
            }
        }
        table.cached_positions = target_len;
        Ok(table)
    }

    pub fn mode(&self) -> ModulationMode {
        self.mode
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn planes(&self) -> usize {
        self.theta_eff.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.theta_eff.len()
    }

    /// Frequency applied to plane `m` (before any position scaling).
    pub fn theta_eff(&self) -> &[f64] {
        &self.theta_eff
    }

    pub fn angle(&self, position: f64, m: usize) -> f64 {
        match self.mode {
            ModulationMode::PositionInterpolation => position * self.theta_eff[m] / self.scale,
            _ => position * self.theta_eff[m],
        }
    }

    /// `(cos, sin)` of the angle for plane `m` at `position`.
    pub fn cos_sin(&self, position: f64, m: usize) -> (f64, f64) {
        if position >= 0.0 && position.fract() == 0.0 && (position as usize) < self.cached_positions
        {
            let idx = position as usize * self.planes() + m;
            (self.cos[idx], self.sin[idx])
        } else {
            let (s, c) = self.angle(position, m).sin_cos();
            (c, s)
        }
    }

    pub fn rotate(&self, vec: &[f64], position: f64) -> Result<Vec<f64>> {
        let mut out = vec.to_vec();
        self.rotate_in_place(&mut out, position)?;
        Ok(out)
    }

    pub fn rotate_in_place(&self, vec: &mut [f64], position: f64) -> Result<()> {
        self.check_len(vec.len())?;
        for (m, pair) in vec.chunks_exact_mut(2).enumerate() {
            let (c, s) = self.cos_sin(position, m);
            let (x, y) = (pair[0], pair[1]);
            pair[0] = c * x - s * y;
            pair[1] = s * x + c * y;
        }
        Ok(())
    }

    /// Single-precision rotation used by the toy model; angles stay in f64.
    pub fn rotate_in_place_f32(&self, vec: &mut [f32], position: f64) -> Result<()> {
        self.check_len(vec.len())?;
        for (m, pair) in vec.chunks_exact_mut(2).enumerate() {
            let (c, s) = self.cos_sin(position, m);
            let (c, s) = (c as f32, s as f32);
            let (x, y) = (pair[0], pair[1]);
            pair[0] = c * x - s * y;
            pair[1] = s * x + c * y;
        }
        Ok(())
    }

    /// Phase advance between adjacent frames, per plane.
    pub fn phase_steps(&self) -> Vec<f64> {
        (0..self.planes())
            .map(|m| self.angle(1.0, m) - self.angle(0.0, m))
            .collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(shape_err(format!("vector of length {}", self.dim()), len));
        }
        Ok(())
    }
}

/// Rotates `vec` to global frame index `n` under `mode`.
pub fn apply_rotary(
    vec: &[f64],
    spec: &RopeSpec,
    mode: ModulationMode,
    n: u64,
    target_len: usize,
) -> Result<Vec<f64>> {
    if vec.len() != spec.d_f {
        return Err(shape_err(
            format!("vector of length {}", spec.d_f),
            vec.len(),
        ));
    }
    RotaryTable::new(spec, mode, target_len)?.rotate(vec, n as f64)
}

/// Inner product of the rotated query and key.
pub fn relative_logit(
    q: &[f64],
    k: &[f64],
    n_q: u64,
    n_k: u64,
    spec: &RopeSpec,
    mode: ModulationMode,
    target_len: usize,
) -> Result<f64> {
    let table = RotaryTable::new(spec, mode, target_len)?;
    table_logit(&table, q, k, n_q as f64, n_k as f64)
}

/// [`relative_logit`] against a prebuilt table, at real-valued positions.
pub fn table_logit(table: &RotaryTable, q: &[f64], k: &[f64], n_q: f64, n_k: f64) -> Result<f64> {
    let rq = table.rotate(q, n_q)?;
    let rk = table.rotate(k, n_k)?;
    Ok(rq.iter().zip(&rk).map(|(a, b)| a * b).sum())
}

/// Adjacent-frame phase increment of every plane under `mode`.
pub fn phase_step_report(
    spec: &RopeSpec,
    mode: ModulationMode,
    target_len: usize,
) -> Result<Vec<f64>> {
    Ok(RotaryTable::new(spec, mode, target_len)?.phase_steps())
}
