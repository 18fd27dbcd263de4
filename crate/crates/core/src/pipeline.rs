//! End-to-end beamformer: covariance, spectrum, interferer tracking, sector
//! reconstruction, SOI estimate and the conjugate-gradient solve.

use serde::{Deserialize, Serialize};

use crate::cg::{cg_solve, direct_weights, mvdr, smi_weights, BeamformerWeights, CgOptions, CgState, Method};
use crate::doa::{build_sectors, coarse_doas, refine_track, DoaTrack, Sector, SectorSet, TrackerConfig};
use crate::error::{Error, Result, StageExt};
use crate::geometry::{make_grid, steering_vector, AngularGrid};
use crate::inc::{build_capon_inc_baseline, build_inc_with, estimate_soi, IncModel, Quadrature, SoiEstimate};
use crate::metrics::scattering_optimal;
use crate::par::{map_indexed, Execution};
use crate::scene::SnapshotMatrix;
use crate::spectrum::{me_spectrum_with, noise_floor, sample_covariance, CovarianceMatrix, SpectrumEstimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Angular grid size.
    pub q: usize,
    /// Presumed SOI direction; the scenario's nominal SOI DoA when unset.
    pub presumed_doa_deg: Option<f64>,
    pub soi_half_width_deg: f64,
    pub tracker: TrackerConfig,
    /// Integration rule over the interferer sectors.
    pub quadrature: Quadrature,
    /// Gradient tolerance relative to `‖â‖`.
    pub cg_tol_rel: f64,
    /// Iteration cap, `2M` when unset.
    pub cg_max_iter: Option<usize>,
    pub execution: Execution,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            q: 200,
            presumed_doa_deg: None,
            soi_half_width_deg: 4.0,
            tracker: TrackerConfig::default(),
            quadrature: Quadrature::default(),
            cg_tol_rel: 1e-6,
            cg_max_iter: None,
            execution: Execution::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::config("grid needs at least 2 points"));
        }
        if !(self.soi_half_width_deg > 0.0) {
            return Err(Error::config("look sector half-width must be positive"));
        }
        let t = &self.tracker;
        if !(t.scan_half_width_deg > 0.0 && t.scan_step_deg > 0.0) {
            return Err(Error::config("scan window and step must be positive"));
        }
        if !(t.margin_deg >= 0.0) || t.dft_size < 2 {
            return Err(Error::config("invalid tracker settings"));
        }
        if let Quadrature::Adaptive { rel_tol } = self.quadrature {
            if !(rel_tol > 0.0) {
                return Err(Error::config("quadrature tolerance must be positive"));
            }
        }
        if !(self.cg_tol_rel > 0.0) {
            return Err(Error::config("conjugate-gradient tolerance must be positive"));
        }
        Ok(())
    }

    pub fn soi_sector(&self, snap: &SnapshotMatrix) -> Sector {
        Sector::new(self.presumed_deg(snap), self.soi_half_width_deg)
    }

    pub fn presumed_deg(&self, snap: &SnapshotMatrix) -> f64 {
        self.presumed_doa_deg.unwrap_or(snap.scenario.soi.doa_deg)
    }
}

/// Every intermediate artifact of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineTrace {
    pub grid: AngularGrid,
    pub covariance: CovarianceMatrix,
    pub spectrum: SpectrumEstimate,
    pub coarse_doas: Vec<f64>,
    pub tracks: Vec<DoaTrack>,
    pub sectors: SectorSet,
    pub noise_floor: f64,
    pub inc: IncModel,
    pub soi: SoiEstimate,
    pub cg: CgState,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub weights: BeamformerWeights,
    pub trace: PipelineTrace,
}

pub fn run_pipeline(snap: &SnapshotMatrix, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate().stage("config")?;
    let array = snap.scenario.nominal_array();
    let m = array.m;
    let grid = make_grid(cfg.q).stage("grid")?;
    let soi = cfg.soi_sector(snap);
    let presumed = cfg.presumed_deg(snap).to_radians();

    let covariance = sample_covariance(snap).stage("covariance")?;
    let spectrum = me_spectrum_with(&covariance, &grid, &array, cfg.execution).stage("spectrum")?;

    let coarse = coarse_doas(snap, &soi, &array, &cfg.tracker);
    let t = &cfg.tracker;
    let tracks = map_indexed(coarse.len(), Execution::Sequential, |i| {
        refine_track(snap, coarse[i], t.scan_half_width_deg, t.scan_step_deg, &array, i)
    });
    let sectors = build_sectors(&tracks, &grid, soi, t.margin_deg);

    let l = coarse.len().min(m.saturating_sub(2));
    let noise = noise_floor(&covariance, l).stage("noise floor")?;
    let inc = build_inc_with(&spectrum, &sectors, &array, noise, cfg.quadrature).stage("reconstruction")?;
    let soi_est = estimate_soi(&spectrum, soi, &array, presumed).stage("steering estimate")?;

    let a_norm = soi_est.a_hat.norm();
    let opts = CgOptions {
        tol: Some(cfg.cg_tol_rel * a_norm),
        max_iter: cfg.cg_max_iter,
    };
    let sol = cg_solve(&inc, &soi_est.a_hat, opts, None).stage("conjugate gradient")?;

    Ok(PipelineOutput {
        weights: sol.weights,
        trace: PipelineTrace {
            grid,
            covariance,
            spectrum,
            coarse_doas: coarse,
            tracks,
            sectors,
            noise_floor: noise,
            inc,
            soi: soi_est,
            cg: sol.state,
        },
    })
}

/// Weights for any method on one snapshot block. `pipeline` is reused for
/// the reconstruction-based methods when already computed.
pub fn method_weights(
    method: Method,
    snap: &SnapshotMatrix,
    cfg: &PipelineConfig,
    pipeline: Option<&PipelineOutput>,
) -> Result<BeamformerWeights> {
    let run = || -> Result<PipelineOutput> { run_pipeline(snap, cfg) };
    let array = snap.scenario.nominal_array();
    let a_bar = steering_vector(&array, cfg.presumed_deg(snap).to_radians()).values;
    match method {
        Method::CmrIsps => match pipeline {
            Some(p) => Ok(p.weights.clone()),
            None => Ok(run()?.weights),
        },
        Method::CmrIspsDirect => {
            let owned;
            let p = match pipeline {
                Some(p) => p,
                None => {
                    owned = run()?;
                    &owned
                }
            };
            direct_weights(&p.trace.inc, &p.trace.soi.a_hat).stage("direct solve")
        }
        Method::Smi => {
            let r = sample_covariance(snap).stage("covariance")?;
            smi_weights(&r, &a_bar).stage("smi")
        }
        Method::CaponBaseline => {
            let r = sample_covariance(snap).stage("covariance")?;
            let grid = make_grid(cfg.q).stage("grid")?;
            let inc = build_capon_inc_baseline(&r, &grid, cfg.soi_sector(snap), &array).stage("capon baseline")?;
            let mut w = direct_weights(&inc, &a_bar).stage("capon baseline")?;
            w.method = Method::CaponBaseline;
            Ok(w)
        }
        Method::Optimal => {
            let t = &snap.truth;
            if t.rank_one_soi {
                mvdr(&t.r_in, &t.a0, Method::Optimal, None).stage("optimal")
            } else {
                scattering_optimal(&t.r_s, &t.r_in).stage("optimal")
            }
        }
    }
}
