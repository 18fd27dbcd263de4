//! Covariance estimation and spatial power spectra.
//!
//! Both spectra factor the covariance once and then spend `O(M²)` (Capon)
//! or `O(M)` (maximum entropy) per grid angle.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{steering_vector, AngularGrid, ArrayConfig};
use crate::linalg::{
    add_outer, condition_estimate, dot_h, hermitian_eigenvalues, hermitize, identity, CMat, CVec,
    Cholesky,
};
use crate::par::{map_indexed, Execution};

/// Relative diagonal-loading level (times `trace/M`) applied when the
/// smallest eigenvalue falls below it.
pub const LOADING_LEVEL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceKind {
    Sample,
    Theoretical,
}

/// Hermitian covariance matrix.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    pub values: CMat,
    pub kind: CovarianceKind,
}

impl CovarianceMatrix {
    /// Wraps `values`, symmetrizing it to exact Hermitian form.
    pub fn new(mut values: CMat, kind: CovarianceKind) -> Self {
        hermitize(&mut values);
        Self { values, kind }
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.values.diagonal().iter().map(|v| v.re).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: &self.values * Complex64::new(c, 0.0),
            kind: self.kind,
        }
    }

    /// The matrix with the positive-definiteness guard applied.
    pub fn loaded(&self) -> CMat {
        let m = self.dim();
        let level = LOADING_LEVEL * self.trace() / m as f64;
        let min_eig = hermitian_eigenvalues(&self.values).first().copied().unwrap_or(0.0);
        let mut out = self.values.clone();
        if min_eig < level {
            for i in 0..m {
                out[(i, i)] += Complex64::new(level, 0.0);
            }
        }
        out
    }

    pub fn factor(&self) -> Result<Cholesky> {
        let loaded = self.loaded();
        Cholesky::factor(&loaded, None).ok_or_else(|| Error::Singular {
            condition: condition_estimate(&loaded),
        })
    }
}

/// `R̂ = (1/K) Σ x(k)x(k)ᴴ`.
pub fn sample_covariance(snap: &crate::scene::SnapshotMatrix) -> Result<CovarianceMatrix> {
    sample_covariance_of(&snap.data)
}

pub fn sample_covariance_of(data: &CMat) -> Result<CovarianceMatrix> {
    let k = data.ncols();
    if k == 0 || data.nrows() == 0 {
        return Err(Error::EmptySnapshots);
    }
    let r = data * data.adjoint() * Complex64::new(1.0 / k as f64, 0.0);
    Ok(CovarianceMatrix::new(r, CovarianceKind::Sample))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Capon,
    MaxEntropy,
}

#[derive(Debug, Clone)]
pub struct SpectrumEstimate {
    pub grid: AngularGrid,
    pub values: Vec<f64>,
    pub estimator: Estimator,
    /// Prediction-error power `ε` (maximum entropy only).
    pub epsilon: Option<f64>,
    /// Kept so the spectrum can be evaluated between grid points.
    pub filter: Option<MaxEntropyFilter>,
}

impl SpectrumEstimate {
    pub fn peak_index(&self) -> usize {
        (0..self.values.len())
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap_or(0)
    }

    pub fn to_db(&self) -> Vec<f64> {
        self.values.iter().map(|v| 10.0 * v.max(1e-300).log10()).collect()
    }

    /// Off-grid value of a maximum-entropy spectrum; `None` for Capon.
    pub fn evaluate(&self, cfg: &ArrayConfig, phi: f64) -> Option<f64> {
        self.filter.as_ref().map(|f| f.power(&steering_vector(cfg, phi).values))
    }
}

pub fn capon_spectrum(r: &CovarianceMatrix, grid: &AngularGrid, cfg: &ArrayConfig) -> Result<SpectrumEstimate> {
    capon_spectrum_with(r, grid, cfg, Execution::Sequential)
}

/// `P(φ) = 1 / (a(φ)ᴴ R⁻¹ a(φ))` over the grid.
pub fn capon_spectrum_with(
    r: &CovarianceMatrix,
    grid: &AngularGrid,
    cfg: &ArrayConfig,
    exec: Execution,
) -> Result<SpectrumEstimate> {
    let chol = r.factor()?;
    let values = map_indexed(grid.len(), exec, |j| {
        let a = steering_vector(cfg, grid.angles[j]).values;
        1.0 / chol.inverse_quadratic(&a)
    });
    Ok(SpectrumEstimate {
        grid: grid.clone(),
        values,
        estimator: Estimator::Capon,
        epsilon: None,
        filter: None,
    })
}

/// Prediction-error filter of the maximum-entropy spectrum:
/// `b = R⁻¹u₁` and `ε = 1/(u₁ᴴR⁻¹u₁)`.
#[derive(Debug, Clone)]
pub struct MaxEntropyFilter {
    pub b: CVec,
    pub epsilon: f64,
}

impl MaxEntropyFilter {
    pub fn new(r: &CovarianceMatrix) -> Result<Self> {
        let chol = r.factor()?;
        let mut u1 = CVec::zeros(r.dim());
        u1[0] = Complex64::new(1.0, 0.0);
        let b = chol.solve(&u1, None);
        debug_assert!(b[0].im.abs() <= 1e-10 * b[0].norm().max(f64::MIN_POSITIVE));
        Ok(Self { epsilon: 1.0 / b[0].re, b })
    }

    /// `1 / (ε |aᴴ b|²)`.
    pub fn power(&self, a: &CVec) -> f64 {
        1.0 / (self.epsilon * dot_h(a, &self.b).norm_sqr())
    }
}

pub fn me_spectrum(r: &CovarianceMatrix, grid: &AngularGrid, cfg: &ArrayConfig) -> Result<SpectrumEstimate> {
    me_spectrum_with(r, grid, cfg, Execution::Sequential)
}

/// `P(φ) = 1 / (ε |a(φ)ᴴ R⁻¹ u₁|²)` over the grid.
pub fn me_spectrum_with(
    r: &CovarianceMatrix,
    grid: &AngularGrid,
    cfg: &ArrayConfig,
    exec: Execution,
) -> Result<SpectrumEstimate> {
    let filter = MaxEntropyFilter::new(r)?;
    let values = map_indexed(grid.len(), exec, |j| {
        filter.power(&steering_vector(cfg, grid.angles[j]).values)
    });
    Ok(SpectrumEstimate {
        grid: grid.clone(),
        values,
        estimator: Estimator::MaxEntropy,
        epsilon: Some(filter.epsilon),
        filter: Some(filter),
    })
}

/// `R_tc = σ_n² I + σ_l² a_l a_lᴴ` on an ideal half-wavelength array, with
/// the closed forms used as validation oracles.
#[derive(Debug, Clone)]
pub struct SingleInterfererModel {
    pub m: usize,
    pub noise_power: f64,
    pub interferer_power: f64,
    pub phi: f64,
    pub a_l: CVec,
}

/// Unit-noise single-interferer covariance model.
pub fn theoretical_single_interferer(m: usize, sigma_l2: f64, phi: f64) -> SingleInterfererModel {
    SingleInterfererModel {
        m,
        noise_power: 1.0,
        interferer_power: sigma_l2,
        phi,
        a_l: steering_vector(&ArrayConfig::ideal(m), phi).values,
    }
}

impl SingleInterfererModel {
    pub fn with_noise(mut self, sigma_n2: f64) -> Self {
        self.noise_power = sigma_n2;
        self
    }

    pub fn covariance(&self) -> CovarianceMatrix {
        let mut r = identity(self.m) * Complex64::new(self.noise_power, 0.0);
        add_outer(&mut r, &self.a_l, self.interferer_power);
        CovarianceMatrix::new(r, CovarianceKind::Theoretical)
    }

    /// `M + ρ` with `ρ = σ_n²/σ_l²`.
    fn m_plus_rho(&self) -> f64 {
        self.m as f64 + self.noise_power / self.interferer_power
    }

    /// `(1/σ_n²)(I − a_l a_lᴴ/(ρ + M))`.
    pub fn woodbury_inverse(&self) -> CMat {
        let mut inv = identity(self.m);
        if self.interferer_power > 0.0 {
            add_outer(&mut inv, &self.a_l, -1.0 / self.m_plus_rho());
        }
        inv * Complex64::new(1.0 / self.noise_power, 0.0)
    }

    /// `a(φ)ᴴ R_tc⁻¹ a(φ) = (1/σ_n²)(M − |aᴴa_l|²/(ρ+M))` with the exact inner
    /// product.
    pub fn capon_denominator(&self, a: &CVec) -> f64 {
        let m = self.m as f64;
        if self.interferer_power == 0.0 {
            return m / self.noise_power;
        }
        (m - dot_h(a, &self.a_l).norm_sqr() / self.m_plus_rho()) / self.noise_power
    }

    /// `σ_l² + σ_n²/M`, the mainlobe-approximated Capon peak.
    pub fn capon_peak_approx(&self) -> f64 {
        self.interferer_power + self.noise_power / self.m as f64
    }

    /// `ε = σ_n²(σ_n² + Mσ_l²)/(σ_n² + (M−1)σ_l²)`.
    pub fn me_epsilon(&self) -> f64 {
        let (n, l, m) = (self.noise_power, self.interferer_power, self.m as f64);
        n * (n + m * l) / (n + (m - 1.0) * l)
    }

    /// `(σ_n² + Mσ_l²)² / ε` with the exact `ε`.
    pub fn me_peak_exact(&self) -> f64 {
        (self.noise_power + self.m as f64 * self.interferer_power).powi(2) / self.me_epsilon()
    }

    /// `(σ_n² + Mσ_l²)²/σ_n² = σ_n² + (2M + M²·INR)σ_l²`, valid for `M ≫ 1`.
    pub fn me_peak_approx(&self) -> f64 {
        (self.noise_power + self.m as f64 * self.interferer_power).powi(2) / self.noise_power
    }
}

/// Mean of the `M − L − 1` smallest eigenvalues of `r`.
pub fn noise_floor(r: &CovarianceMatrix, l: usize) -> Result<f64> {
    let m = r.dim();
    if l + 1 >= m {
        return Err(Error::NoNoiseSubspace { l, m });
    }
    let ev = hermitian_eigenvalues(&r.values);
    let n = m - l - 1;
    Ok(ev[..n].iter().sum::<f64>() / n as f64)
}
