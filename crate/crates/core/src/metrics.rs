//! Output SINR, optimal SINR and beampatterns, always evaluated against the
//! simulator's ground truth.

use num_complex::Complex64;
use serde::Serialize;

use crate::cg::{BeamformerWeights, Method, Normalization};
use crate::error::{Error, Result};
use crate::geometry::{steering_vector, AngularGrid, ArrayConfig};
use crate::linalg::{condition_estimate, dot_h, hermitian_eigen, CMat, CVec, Cholesky};
use crate::scene::Truth;

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinrReport {
    pub output_sinr_db: f64,
    pub optimal_sinr_db: f64,
    /// `optimal − output`.
    pub deviation_db: f64,
    pub scenario_id: String,
    pub seed: u64,
}

impl SinrReport {
    fn new(output: f64, optimal: f64) -> Self {
        let (o, p) = (to_db(output), to_db(optimal));
        Self {
            output_sinr_db: o,
            optimal_sinr_db: p,
            deviation_db: p - o,
            scenario_id: String::new(),
            seed: 0,
        }
    }

    pub fn tagged(mut self, scenario_id: impl Into<String>, seed: u64) -> Self {
        self.scenario_id = scenario_id.into();
        self.seed = seed;
        self
    }
}

fn hermitian_form(r: &CMat, w: &CVec) -> f64 {
    dot_h(w, &(r * w)).re
}

fn chol(r: &CMat) -> Result<Cholesky> {
    Cholesky::factor(r, None).ok_or_else(|| Error::Singular {
        condition: condition_estimate(r),
    })
}

/// `σ₀²|wᴴa₀|² / (wᴴR_in w)` against `σ₀² a₀ᴴR_in⁻¹a₀`, or the generalized
/// ratio with the truth's `R_s` when the SOI is spatially spread.
pub fn output_sinr(w: &CVec, truth: &Truth) -> Result<SinrReport> {
    if truth.rank_one_soi {
        let out = truth.soi_power * dot_h(w, &truth.a0).norm_sqr() / hermitian_form(&truth.r_in, w);
        let opt = truth.soi_power * chol(&truth.r_in)?.inverse_quadratic(&truth.a0);
        Ok(SinrReport::new(out, opt))
    } else {
        scattering_sinr(w, &truth.r_s, &truth.r_in)
    }
}

/// Generalized Rayleigh quotient `wᴴR_s w / wᴴR_in w` and its maximum.
pub fn scattering_sinr(w: &CVec, r_s: &CMat, r_in: &CMat) -> Result<SinrReport> {
    let out = hermitian_form(r_s, w) / hermitian_form(r_in, w);
    let (opt, _) = principal_generalized(r_s, r_in)?;
    Ok(SinrReport::new(out, opt))
}

/// Largest eigenvalue of `R_in⁻¹R_s` and its eigenvector, via whitening
/// with the Cholesky factor of `R_in`.
fn principal_generalized(r_s: &CMat, r_in: &CMat) -> Result<(f64, CVec)> {
    let c = chol(r_in)?;
    let m = r_in.nrows();
    // C = L⁻¹ R_s L⁻ᴴ, built column by column
    let mut half = CMat::zeros(m, m);
    for j in 0..m {
        half.set_column(j, &c.forward(&r_s.column(j).into_owned(), None));
    }
    let half_h = half.adjoint();
    let mut whitened = CMat::zeros(m, m);
    for j in 0..m {
        whitened.set_column(j, &c.forward(&half_h.column(j).into_owned(), None));
    }
    let (vals, vecs) = hermitian_eigen(&whitened);
    let u = vecs.column(m - 1).into_owned();
    let w = c.backward(&u, None);
    Ok((vals[m - 1], w))
}

/// Weights maximizing the generalized SINR.
pub fn scattering_optimal(r_s: &CMat, r_in: &CMat) -> Result<BeamformerWeights> {
    let (_, w) = principal_generalized(r_s, r_in)?;
    Ok(BeamformerWeights {
        w,
        normalization: Normalization::Raw,
        method: Method::Optimal,
    })
}

/// Gain `20·log10|wᴴa(φ)|` normalized to 0 dB at the grid maximum.
#[derive(Debug, Clone)]
pub struct Beampattern {
    pub grid: AngularGrid,
    pub gain_db: Vec<f64>,
    pub peak_amplitude: f64,
}

impl Beampattern {
    pub fn peak_index(&self) -> usize {
        (0..self.gain_db.len())
            .max_by(|&a, &b| self.gain_db[a].total_cmp(&self.gain_db[b]))
            .unwrap_or(0)
    }

    /// Normalized gain at an arbitrary angle.
    pub fn gain_at(&self, w: &CVec, phi: f64, cfg: &ArrayConfig) -> f64 {
        let amp = dot_h(w, &steering_vector(cfg, phi).values).norm();
        20.0 * (amp / self.peak_amplitude).log10()
    }
}

pub fn beampattern(w: &CVec, grid: &AngularGrid, cfg: &ArrayConfig) -> Beampattern {
    let amps: Vec<f64> = grid
        .angles
        .iter()
        .map(|&phi| dot_h(w, &steering_vector(cfg, phi).values).norm())
        .collect();
    let peak = amps.iter().copied().fold(0.0, f64::max);
    let gain_db = amps.iter().map(|a| 20.0 * (a / peak).log10()).collect();
    Beampattern {
        grid: grid.clone(),
        gain_db,
        peak_amplitude: peak,
    }
}

/// Uniform weights `1/M`.
pub fn uniform_weights(m: usize) -> CVec {
    CVec::from_element(m, Complex64::new(1.0 / m as f64, 0.0))
}
