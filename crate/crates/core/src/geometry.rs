//! Uniform linear array manifold and angular grids.
//!
//! Physical angles `φ ∈ [-π/2, π/2]` in radians are the public unit. The
//! electrical angle `θ = 2π (d/λ) sin φ` only appears inside the steering
//! vector and the spatial DFT.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CVec;

/// Sensor array description, including optional per-element calibration
/// errors. Offsets are in wavelengths, phases in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub m: usize,
    pub spacing_wavelengths: f64,
    pub position_offsets: Vec<f64>,
    pub gains: Vec<f64>,
    pub phases: Vec<f64>,
}

impl ArrayConfig {
    /// Ideal half-wavelength ULA.
    pub fn ideal(m: usize) -> Self {
        Self::ula(m, 0.5)
    }

    pub fn ula(m: usize, spacing_wavelengths: f64) -> Self {
        Self {
            m,
            spacing_wavelengths,
            position_offsets: vec![0.0; m],
            gains: vec![1.0; m],
            phases: vec![0.0; m],
        }
    }

    /// The error-free array with the same size and spacing.
    pub fn nominal(&self) -> Self {
        Self::ula(self.m, self.spacing_wavelengths)
    }

    pub fn is_ideal(&self) -> bool {
        self.position_offsets.iter().all(|&p| p == 0.0)
            && self.gains.iter().all(|&g| g == 1.0)
            && self.phases.iter().all(|&p| p == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::config(format!("array needs at least 2 sensors, got {}", self.m)));
        }
        if !(self.spacing_wavelengths > 0.0) {
            return Err(Error::config("element spacing must be positive"));
        }
        for (name, len) in [
            ("position_offsets", self.position_offsets.len()),
            ("gains", self.gains.len()),
            ("phases", self.phases.len()),
        ] {
            if len != self.m {
                return Err(Error::config(format!("{name} has length {len}, expected {}", self.m)));
            }
        }
        Ok(())
    }

    pub fn electrical_angle(&self, phi: f64) -> f64 {
        2.0 * PI * self.spacing_wavelengths * phi.sin()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub values: CVec,
    pub angle: f64,
}

/// Array response to a unit plane wave from physical angle `phi`.
///
/// Element `m` is `g_m e^{j ψ_m} e^{-j 2π p_m sin φ}` with position
/// `p_m = m d + δ_m` in wavelengths; an ideal array gives
/// `[1, e^{-jθ}, …, e^{-j(M-1)θ}]`.
pub fn steering_vector(cfg: &ArrayConfig, phi: f64) -> SteeringVector {
    let s = phi.sin();
    let values = CVec::from_iterator(
        cfg.m,
        (0..cfg.m).map(|i| {
            let pos = i as f64 * cfg.spacing_wavelengths + cfg.position_offsets[i];
            Complex64::from_polar(cfg.gains[i], cfg.phases[i] - 2.0 * PI * pos * s)
        }),
    );
    SteeringVector { values, angle: phi }
}

/// Uniform grid over `[-π/2, π/2)` with spacing `π/q`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    pub q: usize,
    pub angles: Vec<f64>,
    pub delta: f64,
}

pub fn make_grid(q: usize) -> Result<AngularGrid> {
    if q < 2 {
        return Err(Error::config(format!("angular grid needs at least 2 points, got {q}")));
    }
    let delta = PI / q as f64;
    let angles = (0..q).map(|j| -FRAC_PI_2 + j as f64 * delta).collect();
    Ok(AngularGrid { q, angles, delta })
}

impl AngularGrid {
    pub fn len(&self) -> usize {
        self.q
    }

    pub fn is_empty(&self) -> bool {
        self.q == 0
    }

    /// Nearest grid index, ties rounding up. `+π/2` maps to the last point.
    pub fn angle_to_index(&self, phi: f64) -> Result<usize> {
        if !(phi.abs() <= FRAC_PI_2 + 1e-12) {
            return Err(Error::AngleOutOfRange(phi));
        }
        let pos = (phi + FRAC_PI_2) / self.delta;
        let idx = (pos + 0.5).floor() as isize;
        Ok(idx.clamp(0, self.q as isize - 1) as usize)
    }

    /// Indices whose angle lies within `half_width` of `center` (radians).
    pub fn indices_within(&self, center: f64, half_width: f64) -> Vec<usize> {
        let tol = 1e-9 * self.delta;
        (0..self.q)
            .filter(|&j| (self.angles[j] - center).abs() <= half_width + tol)
            .collect()
    }

    pub fn degrees(&self) -> impl Iterator<Item = f64> + '_ {
        self.angles.iter().map(|a| a.to_degrees())
    }
}
