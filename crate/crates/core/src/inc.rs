//! Interference-plus-noise covariance reconstruction and SOI steering
//! vector estimation from a sampled spatial spectrum.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::doa::{Sector, SectorSet};
use crate::error::{Error, Result};
use crate::geometry::{steering_vector, AngularGrid, ArrayConfig};
use crate::quadrature::{adaptive_simpson, golden_max, AdaptiveOptions};
use crate::linalg::{add_outer, dot_h, hermitian_eigenvalues, identity, norm_sqr, tick, CMat, CVec, OpCounter};
use crate::spectrum::{capon_spectrum, CovarianceMatrix, SpectrumEstimate};

#[derive(Debug, Clone, PartialEq)]
pub struct SectorTerm {
    pub index: usize,
    /// `P(φ_j)·Δ`, strictly positive.
    pub weight: f64,
    pub steering: CVec,
}

/// `Σ_j w_j a_j a_jᴴ + noise_load·I`, kept as a sum of rank-one terms so it
/// can be applied to a vector in `O(terms·M)`.
#[derive(Debug, Clone)]
pub struct IncModel {
    pub terms: Vec<SectorTerm>,
    pub noise_load: f64,
    m: usize,
    explicit: Option<CMat>,
}

impl IncModel {
    pub fn new(m: usize, terms: Vec<SectorTerm>, noise_load: f64) -> Self {
        Self {
            terms,
            noise_load,
            m,
            explicit: None,
        }
    }

    pub fn noise_only(m: usize, noise_load: f64) -> Self {
        Self::new(m, Vec::new(), noise_load)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// Matrix-vector product through the term sum; `2M` MACs per term.
    pub fn apply(&self, v: &CVec, counter: Option<&OpCounter>) -> CVec {
        let mut out = v * Complex64::new(self.noise_load, 0.0);
        for t in &self.terms {
            let c = dot_h(&t.steering, v) * t.weight;
            out.axpy(c, &t.steering, Complex64::new(1.0, 0.0));
        }
        tick(counter, (2 * self.terms.len() * self.m + self.m) as u64);
        out
    }

    /// `vᴴ R v`.
    pub fn quadratic(&self, v: &CVec) -> f64 {
        self.noise_load * norm_sqr(v)
            + self
                .terms
                .iter()
                .map(|t| t.weight * dot_h(&t.steering, v).norm_sqr())
                .sum::<f64>()
    }

    pub fn to_matrix(&self) -> CMat {
        let mut r = identity(self.m) * Complex64::new(self.noise_load, 0.0);
        for t in &self.terms {
            add_outer(&mut r, &t.steering, t.weight);
        }
        r
    }

    /// Materializes and caches the explicit matrix.
    pub fn materialize(&mut self) -> &CMat {
        if self.explicit.is_none() {
            self.explicit = Some(self.to_matrix());
        }
        self.explicit.as_ref().unwrap()
    }

    pub fn explicit(&self) -> Option<&CMat> {
        self.explicit.as_ref()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| SectorTerm {
                weight: t.weight * c,
                ..t.clone()
            })
            .collect();
        Self::new(self.m, terms, self.noise_load * c)
    }

    /// Ascending eigenvalues of the explicit matrix.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match &self.explicit {
            Some(r) => hermitian_eigenvalues(r),
            None => hermitian_eigenvalues(&self.to_matrix()),
        }
    }
}

/// Spectrum-weighted outer products over an arbitrary index set.
pub fn build_inc_over(
    spec: &SpectrumEstimate,
    indices: &[usize],
    cfg: &ArrayConfig,
    noise: f64,
) -> Result<IncModel> {
    if !(noise >= 0.0) {
        return Err(Error::config(format!("noise load must be nonnegative, got {noise}")));
    }
    let grid = &spec.grid;
    let mut terms = Vec::with_capacity(indices.len());
    for &j in indices {
        if j >= grid.len() {
            return Err(Error::config(format!("sector index {j} outside grid of size {}", grid.len())));
        }
        let weight = spec.values[j] * grid.delta;
        if weight > 0.0 && weight.is_finite() {
            terms.push(SectorTerm {
                index: j,
                weight,
                steering: steering_vector(cfg, grid.angles[j]).values,
            });
        }
    }
    Ok(IncModel::new(cfg.m, terms, noise))
}

/// Reduced-sector reconstruction: one term per index in the sector union
/// plus `noise·I`.
pub fn build_inc(spec: &SpectrumEstimate, sectors: &SectorSet, cfg: &ArrayConfig, noise: f64) -> Result<IncModel> {
    build_inc_over(spec, &sectors.union_indices, cfg, noise)
}

/// How each sector's spectrum integral is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Quadrature {
    /// One term per grid point, weight `P(φ_j)·Δ`.
    Grid,
    /// Adaptive Simpson on the continuous spectrum over each contiguous
    /// sector, with every local peak pinned as a panel boundary.
    Adaptive { rel_tol: f64 },
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::Adaptive { rel_tol: 1e-4 }
    }
}

/// Scan points per grid bin when locating spectral peaks.
const PEAK_SCAN: usize = 16;

/// Local maxima of `f` on `[a, b]`, located on a scan of step `h` and
/// polished by golden section.
fn local_peaks(f: &impl Fn(f64) -> f64, a: f64, b: f64, h: f64) -> Vec<f64> {
    let n = ((b - a) / h).ceil().max(2.0) as usize;
    let step = (b - a) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| a + i as f64 * step).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    (1..n)
        .filter(|&i| ys[i] > ys[i - 1] && ys[i] >= ys[i + 1])
        .map(|i| golden_max(f, xs[i - 1], xs[i + 1], 120))
        .collect()
}

/// Contiguous runs of a sorted index list.
fn runs(indices: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &j in indices {
        match out.last_mut() {
            Some(r) if r.1 + 1 == j => r.1 = j,
            _ => out.push((j, j)),
        }
    }
    out
}

/// [`build_inc`] with a selectable integration rule. Maximum-entropy
/// peaks are far narrower than a grid bin at high INR, so the grid rule
/// can miss almost all of an interferer's power when it falls between
/// two grid points; the adaptive rule integrates the continuous spectrum
/// over the same sectors instead. Sectors are clipped to `[-π/2, π/2]`.
pub fn build_inc_with(
    spec: &SpectrumEstimate,
    sectors: &SectorSet,
    cfg: &ArrayConfig,
    noise: f64,
    quadrature: Quadrature,
) -> Result<IncModel> {
    let rel_tol = match quadrature {
        Quadrature::Grid => return build_inc(spec, sectors, cfg, noise),
        Quadrature::Adaptive { rel_tol } => rel_tol,
    };
    if !(rel_tol > 0.0) {
        return Err(Error::config("quadrature tolerance must be positive"));
    }
    if !(noise >= 0.0) {
        return Err(Error::config(format!("noise load must be nonnegative, got {noise}")));
    }
    let filter = spec
        .filter
        .as_ref()
        .ok_or_else(|| Error::config("adaptive quadrature needs a maximum-entropy spectrum"))?;
    let grid = &spec.grid;
    if let Some(&j) = sectors.union_indices.iter().find(|&&j| j >= grid.len()) {
        return Err(Error::config(format!("sector index {j} outside grid of size {}", grid.len())));
    }
    let density = |phi: f64| filter.power(&steering_vector(cfg, phi).values);
    let opts = AdaptiveOptions {
        rel_tol,
        ..AdaptiveOptions::default()
    };

    let mut terms = Vec::new();
    for (first, last) in runs(&sectors.union_indices) {
        let a = (grid.angles[first] - grid.delta / 2.0).max(-FRAC_PI_2);
        let b = (grid.angles[last] + grid.delta / 2.0).min(FRAC_PI_2);
        let mut breaks: Vec<f64> = (first..=last).map(|j| grid.angles[j] + grid.delta / 2.0).collect();
        breaks.extend(local_peaks(&density, a, b, grid.delta / PEAK_SCAN as f64));
        let rule = adaptive_simpson(density, a, b, &breaks, opts);
        for (phi, w) in rule.nodes {
            let steering = steering_vector(cfg, phi).values;
            let weight = filter.power(&steering) * w;
            if weight > 0.0 && weight.is_finite() {
                let index = grid.angle_to_index(phi)?.clamp(first, last);
                terms.push(SectorTerm { index, weight, steering });
            }
        }
    }
    Ok(IncModel::new(cfg.m, terms, noise))
}

/// Full-sector Capon reconstruction over every grid angle outside `soi`.
pub fn build_capon_inc_baseline(
    r: &CovarianceMatrix,
    grid: &AngularGrid,
    soi: Sector,
    cfg: &ArrayConfig,
) -> Result<IncModel> {
    let spec = capon_spectrum(r, grid, cfg)?;
    let set = SectorSet::complement(grid, soi);
    build_inc_over(&spec, &set.union_indices, cfg, 0.0)
}

#[derive(Debug, Clone)]
pub struct SoiEstimate {
    pub r_s: CMat,
    /// Estimated steering vector scaled to `‖â‖² = M`.
    pub a_hat: CVec,
    /// Presumed steering vector on the nominal array.
    pub a_bar: CVec,
    pub s_points: usize,
}

/// `R̂_s = Σ_{φ ∈ soi} P(φ) a(φ)a(φ)ᴴ Δ`, `â = R̂_s ā`.
///
/// `ā` comes from the error-free version of `cfg`.
pub fn estimate_soi(spec: &SpectrumEstimate, soi: Sector, cfg: &ArrayConfig, presumed_doa: f64) -> Result<SoiEstimate> {
    let grid = &spec.grid;
    let idx = soi.grid_indices(grid);
    if idx.is_empty() {
        return Err(Error::config("look sector contains no grid points"));
    }
    let m = cfg.m;
    let mut r_s = CMat::zeros(m, m);
    let mut total = 0.0;
    for &j in &idx {
        let w = spec.values[j] * grid.delta;
        total += w;
        add_outer(&mut r_s, &steering_vector(cfg, grid.angles[j]).values, w);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroSoiSpectrum);
    }
    let a_bar = steering_vector(&cfg.nominal(), presumed_doa).values;
    let raw = &r_s * &a_bar;
    let n2 = norm_sqr(&raw);
    if !(n2 > 0.0) {
        return Err(Error::ZeroSteering);
    }
    let a_hat = raw * Complex64::new((m as f64 / n2).sqrt(), 0.0);
    Ok(SoiEstimate {
        r_s,
        a_hat,
        a_bar,
        s_points: idx.len(),
    })
}

/// `|âᴴa| / (‖â‖‖a‖)`.
pub fn cosine_similarity(a: &CVec, b: &CVec) -> f64 {
    dot_h(a, b).norm() / (norm_sqr(a) * norm_sqr(b)).sqrt()
}

/// Small-mismatch SINR loss `1 − ε²Φ²/12`.
pub fn predicted_sinr_loss(phi: f64, eps_res: f64) -> f64 {
    1.0 - eps_res * eps_res * phi * phi / 12.0
}

/// Residual-noise fraction `S/(Q·SNR)`.
pub fn residual_noise_ratio(s_points: usize, q: usize, snr: f64) -> f64 {
    s_points as f64 / (q as f64 * snr)
}

/// `sin²(MΦ/2)/sin²(Φ/2)` for an electrical-angle offset `Φ`; `M²` at 0.
pub fn sine_ratio(m: usize, phi: f64) -> f64 {
    let den = (phi / 2.0).sin().powi(2);
    if den < 1e-300 {
        return (m * m) as f64;
    }
    (m as f64 * phi / 2.0).sin().powi(2) / den
}
