//! Snapshot simulation for a desired signal, interferers and white noise.
//!
//! All powers are relative to unit noise power per sensor, so `power_db` is
//! the SNR for the desired signal and the INR for interferers. Every random
//! component draws from its own named stream derived from the scenario
//! seed (see [`crate::rng`]).

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{steering_vector, ArrayConfig};
use crate::linalg::{add_outer, identity, CMat, CVec};
use crate::rng::{self, complex_gaussian};

/// Quadratic DoA trajectory: `doa(k) = doa + rate·k + accel·k²` in degrees,
/// `k = 0..K-1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Motion {
    pub rate_deg: f64,
    pub accel_deg: f64,
}

impl Motion {
    /// Linear sweep covering `span_deg` over `snapshots` samples.
    pub fn linear_span(span_deg: f64, snapshots: usize) -> Self {
        let steps = snapshots.saturating_sub(1).max(1) as f64;
        Self {
            rate_deg: span_deg / steps,
            accel_deg: 0.0,
        }
    }

    fn offset_deg(&self, k: usize) -> f64 {
        let k = k as f64;
        self.rate_deg * k + self.accel_deg * k * k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSpec {
    pub doa_deg: f64,
    pub power_db: f64,
    /// Half-width of the uniform DoA perturbation.
    pub doa_jitter_deg: f64,
    pub motion: Option<Motion>,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self::new(0.0, 0.0)
    }
}

impl SourceSpec {
    pub fn new(doa_deg: f64, power_db: f64) -> Self {
        Self {
            doa_deg,
            power_db,
            doa_jitter_deg: 0.0,
            motion: None,
        }
    }

    pub fn power(&self) -> f64 {
        10f64.powf(self.power_db / 10.0)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.doa_deg.abs() <= 90.0) {
            return Err(Error::config(format!("{what} DoA {} outside [-90, 90] degrees", self.doa_deg)));
        }
        if !self.power_db.is_finite() {
            return Err(Error::config(format!("{what} power must be finite")));
        }
        if !(self.doa_jitter_deg >= 0.0) {
            return Err(Error::config(format!("{what} jitter must be nonnegative")));
        }
        Ok(())
    }

    fn is_static(&self, per_snapshot_jitter: bool) -> bool {
        self.motion.is_none() && !(per_snapshot_jitter && self.doa_jitter_deg > 0.0)
    }
}

/// Array calibration model applied per run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayError {
    #[default]
    Ideal,
    /// Element positions off by `U[-0.05, 0.05]` wavelengths.
    Geometry,
    /// Gains `N(1, 0.05²)`, phases `N(0, (0.025π)²)`.
    GainPhase,
}

/// Incoherent local scattering of the desired signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scattering {
    pub paths: usize,
    /// Standard deviation of the path DoAs around the direct path.
    pub spread_deg: f64,
}

impl Default for Scattering {
    fn default() -> Self {
        Self {
            paths: 4,
            spread_deg: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub m: usize,
    pub spacing_wavelengths: f64,
    pub array_error: ArrayError,
    pub soi: SourceSpec,
    pub interferers: Vec<SourceSpec>,
    pub snapshots: usize,
    pub scattering: Option<Scattering>,
    /// Redraw DoA jitter every snapshot instead of once per run.
    pub jitter_per_snapshot: bool,
    pub seed: u64,
}

impl Default for Scenario {
    /// Ten-element half-wavelength ULA, desired signal at 10° and 10 dB,
    /// interferers at 20° and -40° with 30 dB INR, 50 snapshots.
    fn default() -> Self {
        Self {
            m: 10,
            spacing_wavelengths: 0.5,
            array_error: ArrayError::Ideal,
            soi: SourceSpec::new(10.0, 10.0),
            interferers: vec![SourceSpec::new(20.0, 30.0), SourceSpec::new(-40.0, 30.0)],
            snapshots: 50,
            scattering: None,
            jitter_per_snapshot: false,
            seed: 0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.nominal_array().validate()?;
        if self.snapshots < 1 {
            return Err(Error::config("scenario needs at least one snapshot"));
        }
        self.soi.validate("desired signal")?;
        for s in &self.interferers {
            s.validate("interferer")?;
        }
        if let Some(sc) = &self.scattering {
            if !(sc.spread_deg >= 0.0) {
                return Err(Error::config("scattering spread must be nonnegative"));
            }
        }
        Ok(())
    }

    /// The array the beamformer believes it has.
    pub fn nominal_array(&self) -> ArrayConfig {
        ArrayConfig::ula(self.m, self.spacing_wavelengths)
    }

    /// Applies the same jitter half-width to every source.
    pub fn with_look_jitter(mut self, jitter_deg: f64) -> Self {
        self.soi.doa_jitter_deg = jitter_deg;
        for s in &mut self.interferers {
            s.doa_jitter_deg = jitter_deg;
        }
        self
    }
}

/// Ground truth behind a snapshot block.
#[derive(Debug, Clone)]
pub struct Truth {
    /// Realized (possibly perturbed) array.
    pub array: ArrayConfig,
    /// Desired-signal DoA per snapshot, radians.
    pub soi_doas: Vec<f64>,
    /// Per interferer, DoA per snapshot, radians.
    pub interferer_doas: Vec<Vec<f64>>,
    /// Desired-signal steering vector at the first snapshot.
    pub a0: CVec,
    /// Interferer steering vectors at the first snapshot.
    pub a_l: Vec<CVec>,
    pub soi_power: f64,
    pub interferer_powers: Vec<f64>,
    pub noise_power: f64,
    /// Expected desired-signal covariance over the block.
    pub r_s: CMat,
    /// Expected interference-plus-noise covariance over the block.
    pub r_in: CMat,
    /// `r_s` is `σ₀² a₀a₀ᴴ` exactly.
    pub rank_one_soi: bool,
    /// Realized scattering path DoAs (direct path first), radians.
    pub scatter_doas: Vec<f64>,
    pub soi_waveform: Vec<Complex64>,
    pub interferer_waveforms: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    /// `M × K`, one snapshot per column.
    pub data: CMat,
    pub truth: Truth,
    pub scenario: Scenario,
}

impl SnapshotMatrix {
    pub fn sensors(&self) -> usize {
        self.data.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.data.ncols()
    }

    pub fn snapshot(&self, k: usize) -> CVec {
        self.data.column(k).into_owned()
    }
}

/// Draws a perturbed array for the given calibration model.
pub fn perturb_array(kind: ArrayError, m: usize, spacing_wavelengths: f64, seed: u64) -> ArrayConfig {
    let mut cfg = ArrayConfig::ula(m, spacing_wavelengths);
    let mut rng = rng::stream(seed, rng::STREAM_ARRAY);
    match kind {
        ArrayError::Ideal => {}
        ArrayError::Geometry => {
            for off in &mut cfg.position_offsets {
                *off = rng.random_range(-0.05..=0.05);
            }
        }
        ArrayError::GainPhase => {
            let gain = Normal::new(1.0, 0.05).expect("valid normal");
            let phase = Normal::new(0.0, 0.025 * std::f64::consts::PI).expect("valid normal");
            for g in &mut cfg.gains {
                *g = gain.sample(&mut rng);
            }
            for p in &mut cfg.phases {
                *p = phase.sample(&mut rng);
            }
        }
    }
    cfg
}

struct Trajectory {
    doas: Vec<f64>,
    steering: Vec<CVec>,
    is_static: bool,
}

impl Trajectory {
    fn at(&self, k: usize) -> &CVec {
        if self.is_static {
            &self.steering[0]
        } else {
            &self.steering[k]
        }
    }

    /// `avg_k a(k) a(k)ᴴ`.
    fn mean_outer(&self, m: usize) -> CMat {
        let mut acc = CMat::zeros(m, m);
        let n = self.steering.len();
        for a in &self.steering {
            add_outer(&mut acc, a, 1.0 / n as f64);
        }
        acc
    }
}

fn trajectory<R: Rng>(
    src: &SourceSpec,
    array: &ArrayConfig,
    k_total: usize,
    per_snapshot: bool,
    jitter: &mut R,
) -> Trajectory {
    let mut draw = || (2.0 * jitter.random::<f64>() - 1.0) * src.doa_jitter_deg;
    let run_offset = draw();
    let is_static = src.is_static(per_snapshot);
    let count = if is_static { 1 } else { k_total };
    let mut doas = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let jit = if per_snapshot && k > 0 { draw() } else { run_offset };
        let motion = src.motion.as_ref().map_or(0.0, |mo| mo.offset_deg(k));
        doas.push((src.doa_deg + jit + motion).clamp(-90.0, 90.0).to_radians());
    }
    let steering = doas[..count].iter().map(|&d| steering_vector(array, d).values).collect();
    Trajectory {
        doas,
        steering,
        is_static,
    }
}

/// Simulates `x(k) = s₀(k)a₀ + Σ s_l(k)a_l + n(k)`.
///
/// Scenarios carrying a scattering spec are routed to
/// [`simulate_scattered`].
pub fn simulate(scn: &Scenario) -> Result<SnapshotMatrix> {
    if scn.scattering.is_some() {
        return simulate_scattered(scn);
    }
    generate(scn, None)
}

/// Simulates the desired signal under incoherent local scattering: the
/// direct path plus `P` paths whose DoAs are drawn once per run around it,
/// each with an independent waveform per snapshot and power `σ₀²/(P+1)`.
pub fn simulate_scattered(scn: &Scenario) -> Result<SnapshotMatrix> {
    let sc = scn.scattering.as_ref().ok_or(Error::MissingScattering)?;
    generate(scn, Some(sc))
}

fn generate(scn: &Scenario, scattering: Option<&Scattering>) -> Result<SnapshotMatrix> {
    scn.validate()?;
    let m = scn.m;
    let k_total = scn.snapshots;
    let array = perturb_array(scn.array_error, m, scn.spacing_wavelengths, scn.seed);

    let mut jitter = rng::stream(scn.seed, rng::STREAM_JITTER);
    let soi_traj = trajectory(&scn.soi, &array, k_total, scn.jitter_per_snapshot, &mut jitter);
    let int_traj: Vec<Trajectory> = scn
        .interferers
        .iter()
        .map(|s| trajectory(s, &array, k_total, scn.jitter_per_snapshot, &mut jitter))
        .collect();

    let soi_power = scn.soi.power();
    let int_powers: Vec<f64> = scn.interferers.iter().map(SourceSpec::power).collect();

    // scattering paths: direct path at the realized SOI DoA plus P offsets
    let (scatter_doas, scatter_sv): (Vec<f64>, Vec<CVec>) = match scattering {
        Some(sc) => {
            let mut srng = rng::stream(scn.seed, rng::STREAM_SCATTER);
            let spread = Normal::new(0.0, sc.spread_deg.to_radians().max(0.0)).expect("valid normal");
            let base = soi_traj.doas[0];
            let mut doas = vec![base];
            for _ in 0..sc.paths {
                let d = if sc.spread_deg > 0.0 { base + spread.sample(&mut srng) } else { base };
                doas.push(d.clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2));
            }
            let sv = doas.iter().map(|&d| steering_vector(&array, d).values).collect();
            (doas, sv)
        }
        None => (Vec::new(), Vec::new()),
    };

    let mut soi_rng = rng::stream(scn.seed, rng::STREAM_SOI);
    let mut int_rng = rng::stream(scn.seed, rng::STREAM_INTERFERERS);
    let mut noise_rng = rng::stream(scn.seed, rng::STREAM_NOISE);

    let mut data = CMat::zeros(m, k_total);
    let mut soi_waveform = Vec::with_capacity(k_total);
    let mut int_waveforms = vec![Vec::with_capacity(k_total); int_traj.len()];
    let path_power = soi_power / scatter_sv.len().max(1) as f64;

    for k in 0..k_total {
        let mut x = CVec::zeros(m);
        if scatter_sv.is_empty() {
            let s0 = complex_gaussian(&mut soi_rng, soi_power);
            x.axpy(s0, soi_traj.at(k), Complex64::new(1.0, 0.0));
            soi_waveform.push(s0);
        } else {
            for (p, a) in scatter_sv.iter().enumerate() {
                let sp = complex_gaussian(&mut soi_rng, path_power);
                x.axpy(sp, a, Complex64::new(1.0, 0.0));
                if p == 0 {
                    soi_waveform.push(sp);
                }
            }
        }
        for (l, traj) in int_traj.iter().enumerate() {
            let sl = complex_gaussian(&mut int_rng, int_powers[l]);
            x.axpy(sl, traj.at(k), Complex64::new(1.0, 0.0));
            int_waveforms[l].push(sl);
        }
        for v in x.iter_mut() {
            *v += complex_gaussian(&mut noise_rng, 1.0);
        }
        data.set_column(k, &x);
    }

    let mut r_in = identity(m);
    for (traj, &p) in int_traj.iter().zip(&int_powers) {
        r_in += traj.mean_outer(m) * Complex64::new(p, 0.0);
    }
    let (r_s, rank_one_soi) = if scatter_sv.is_empty() {
        (soi_traj.mean_outer(m) * Complex64::new(soi_power, 0.0), soi_traj.is_static)
    } else {
        let mut r = CMat::zeros(m, m);
        for a in &scatter_sv {
            add_outer(&mut r, a, path_power);
        }
        let collapsed = scatter_doas.iter().all(|&d| d == scatter_doas[0]);
        (r, collapsed)
    };

    let truth = Truth {
        a0: soi_traj.at(0).clone(),
        a_l: int_traj.iter().map(|t| t.at(0).clone()).collect(),
        soi_doas: soi_traj.doas,
        interferer_doas: int_traj.into_iter().map(|t| t.doas).collect(),
        array,
        soi_power,
        interferer_powers: int_powers,
        noise_power: 1.0,
        r_s,
        r_in,
        rank_one_soi,
        scatter_doas,
        soi_waveform,
        interferer_waveforms: int_waveforms,
    };
    Ok(SnapshotMatrix {
        data,
        truth,
        scenario: scn.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, hermitian_eigenvalues};
    use crate::spectrum::sample_covariance;

    fn noise_only(k: usize, seed: u64) -> Scenario {
        Scenario {
            soi: SourceSpec::new(10.0, -300.0),
            interferers: vec![],
            snapshots: k,
            seed,
            ..Scenario::default()
        }
    }

    #[test]
    fn white_noise_covariance_is_identity() {
        let snap = simulate(&noise_only(100_000, 1)).unwrap();
        let r = sample_covariance(&snap).unwrap();
        let err = frobenius(&(r.values - identity(10))) / frobenius(&identity(10));
        assert!(err < 0.02, "{err}");
    }

    #[test]
    fn single_interferer_covariance() {
        let scn = Scenario {
            interferers: vec![SourceSpec::new(20.0, 30.0)],
            ..noise_only(100_000, 2)
        };
        let snap = simulate(&scn).unwrap();
        let r = sample_covariance(&snap).unwrap();
        let a = steering_vector(&ArrayConfig::ideal(10), 20f64.to_radians()).values;
        let mut expect = identity(10);
        add_outer(&mut expect, &a, 1000.0);
        let err = frobenius(&(r.values - &expect)) / frobenius(&expect);
        assert!(err < 0.02, "{err}");
        assert!(frobenius(&(snap.truth.r_in.clone() - &expect)) < 1e-9);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let scn = Scenario::default().with_look_jitter(4.0);
        let a = simulate(&scn).unwrap();
        let b = simulate(&scn).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.truth.soi_doas, b.truth.soi_doas);
        let c = simulate(&Scenario { seed: 1, ..scn }).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn power_accounting_and_independence() {
        let k = 100_000;
        let scn = Scenario {
            snapshots: k,
            seed: 5,
            ..Scenario::default()
        };
        let snap = simulate(&scn).unwrap();
        let avg: f64 = snap.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / (10 * k) as f64;
        let expect = 10.0 + 1000.0 + 1000.0 + 1.0;
        assert!((avg - expect).abs() / expect < 0.02, "{avg}");

        let s0 = &snap.truth.soi_waveform;
        for sl in &snap.truth.interferer_waveforms {
            let cross: Complex64 = s0.iter().zip(sl).map(|(a, b)| a * b.conj()).sum();
            let p0: f64 = s0.iter().map(|v| v.norm_sqr()).sum();
            let pl: f64 = sl.iter().map(|v| v.norm_sqr()).sum();
            let rho = cross.norm() / (p0 * pl).sqrt();
            assert!(rho < 3.0 / (k as f64).sqrt(), "{rho}");
        }
    }

    #[test]
    fn jitter_stays_within_window() {
        for seed in 0..200 {
            let scn = Scenario { seed, ..Scenario::default() }.with_look_jitter(4.0);
            let snap = simulate(&scn).unwrap();
            let soi = snap.truth.soi_doas[0].to_degrees();
            assert!((6.0..=14.0).contains(&soi), "{soi}");
            let i1 = snap.truth.interferer_doas[0][0].to_degrees();
            let i2 = snap.truth.interferer_doas[1][0].to_degrees();
            assert!((16.0..=24.0).contains(&i1));
            assert!((-44.0..=-36.0).contains(&i2));
            // per-run jitter: constant across snapshots
            assert!(snap.truth.soi_doas.iter().all(|&d| d == snap.truth.soi_doas[0]));
        }
        let scn = Scenario {
            jitter_per_snapshot: true,
            ..Scenario::default().with_look_jitter(4.0)
        };
        let snap = simulate(&scn).unwrap();
        assert!(snap.truth.soi_doas.iter().any(|&d| d != snap.truth.soi_doas[0]));
    }

    #[test]
    fn linear_motion_spans_requested_range() {
        let mut scn = Scenario::default();
        scn.interferers[0].motion = Some(Motion::linear_span(4.0, scn.snapshots));
        let snap = simulate(&scn).unwrap();
        let d = &snap.truth.interferer_doas[0];
        assert!((d[0].to_degrees() - 20.0).abs() < 1e-12);
        assert!((d[49].to_degrees() - 24.0).abs() < 1e-9);
    }

    #[test]
    fn scattering_zero_spread_is_rank_one() {
        let scn = Scenario {
            scattering: Some(Scattering { paths: 4, spread_deg: 0.0 }),
            ..Scenario::default()
        };
        let snap = simulate_scattered(&scn).unwrap();
        assert!(snap.truth.rank_one_soi);
        let ev = hermitian_eigenvalues(&snap.truth.r_s);
        assert!(ev[8] < 1e-9 * ev[9]);
        let mut expect = CMat::zeros(10, 10);
        add_outer(&mut expect, &snap.truth.a0, 10.0);
        assert!(frobenius(&(snap.truth.r_s.clone() - expect)) < 1e-9);
    }

    #[test]
    fn scattering_spreads_soi_covariance() {
        let scn = Scenario {
            interferers: vec![],
            soi: SourceSpec::new(10.0, 20.0),
            snapshots: 100_000,
            scattering: Some(Scattering::default()),
            seed: 3,
            ..Scenario::default()
        };
        let snap = simulate(&scn).unwrap();
        assert!(!snap.truth.rank_one_soi);
        // empirical SOI covariance: remove the known unit noise
        let r = sample_covariance(&snap).unwrap().values - identity(10);
        let ev = hermitian_eigenvalues(&r);
        assert!(ev[8] > 0.01 * ev[9], "{:?}", ev);
        // path DoAs fixed for the run
        let again = simulate(&scn).unwrap();
        assert_eq!(snap.truth.scatter_doas, again.truth.scatter_doas);
        assert_eq!(snap.truth.scatter_doas.len(), 5);
    }

    #[test]
    fn scattered_requires_spec() {
        assert!(matches!(
            simulate_scattered(&Scenario::default()),
            Err(Error::MissingScattering)
        ));
    }

    #[test]
    fn perturbation_models() {
        let g = perturb_array(ArrayError::Geometry, 10, 0.5, 9);
        assert!(g.position_offsets.iter().all(|o| o.abs() <= 0.05));
        assert!(g.position_offsets.iter().any(|&o| o != 0.0));
        assert_eq!(g, perturb_array(ArrayError::Geometry, 10, 0.5, 9));

        let gains: Vec<f64> = (0..1000)
            .flat_map(|s| perturb_array(ArrayError::GainPhase, 10, 0.5, s).gains)
            .collect();
        let n = gains.len() as f64;
        let mean = gains.iter().sum::<f64>() / n;
        let sd = (gains.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 1.0).abs() < 0.005);
        assert!((sd - 0.05).abs() < 0.005, "{sd}");
        assert!(perturb_array(ArrayError::Ideal, 10, 0.5, 1).is_ideal());
    }

    #[test]
    fn scenario_json_defaults() {
        let scn: Scenario = serde_json::from_str(r#"{"snapshots": 20, "soi": {"doa_deg": 5}}"#).unwrap();
        assert_eq!(scn.snapshots, 20);
        assert_eq!(scn.m, 10);
        assert_eq!(scn.soi.doa_deg, 5.0);
        assert_eq!(scn.interferers.len(), 2);
        assert!(serde_json::from_str::<Scenario>(r#"{"bogus": 1}"#).is_err());
    }
}
