//! Monte Carlo sweeps and the analytical validation report.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cg::{cg_solve, direct_weights, CgOptions, Method};
use crate::doa::{Sector, SectorSet};
use crate::error::{Error, Result};
use crate::geometry::{make_grid, steering_vector, ArrayConfig};
use crate::inc::{build_inc_over, build_inc_with, predicted_sinr_loss, sine_ratio, Quadrature};
use crate::linalg::{add_outer, frobenius, identity, CMat};
use crate::metrics::output_sinr;
use crate::par::{map_indexed, Execution};
use crate::pipeline::{method_weights, run_pipeline, PipelineConfig};
use crate::rng::trial_seed;
use crate::scene::{simulate, Scenario};
use crate::spectrum::{capon_spectrum, me_spectrum, noise_floor, sample_covariance, theoretical_single_interferer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    SnrDb,
    Snapshots,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::SnrDb => "snr_db",
            AxisName::Snapshots => "snapshots",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub name: AxisName,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn snr(values: Vec<f64>) -> Self {
        Self {
            name: AxisName::SnrDb,
            values,
        }
    }

    pub fn snapshots(values: Vec<usize>) -> Self {
        Self {
            name: AxisName::Snapshots,
            values: values.into_iter().map(|k| k as f64).collect(),
        }
    }

    fn apply(&self, scn: &mut Scenario, value: f64) {
        match self.name {
            AxisName::SnrDb => scn.soi.power_db = value,
            AxisName::Snapshots => scn.snapshots = value as usize,
        }
    }
}

impl Default for SweepAxis {
    fn default() -> Self {
        Self::snr((-4..=4).map(|i| 5.0 * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub pipeline: PipelineConfig,
    pub axis: SweepAxis,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            pipeline: PipelineConfig::default(),
            axis: SweepAxis::default(),
            trials: 100,
            methods: Method::ALL.to_vec(),
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::config("sweep needs at least one trial"));
        }
        if self.axis.values.is_empty() {
            return Err(Error::config("sweep axis is empty"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("sweep needs at least one method"));
        }
        if self.axis.name == AxisName::Snapshots
            && self.axis.values.iter().any(|&v| !(v >= 1.0) || v.fract() != 0.0)
        {
            return Err(Error::config("snapshot counts must be positive integers"));
        }
        if self.axis.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("axis values must be finite"));
        }
        self.scenario.validate()?;
        self.pipeline.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub method: Method,
    pub axis_name: &'static str,
    pub axis_value: f64,
    pub trial: usize,
    pub seed: u64,
    /// `NaN` when the trial failed.
    pub output_sinr_db: f64,
    pub optimal_sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub axis_name: &'static str,
    pub axis_value: f64,
    pub mean_db: f64,
    pub std_db: f64,
    /// Successful trials behind the statistics.
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<String>,
}

impl SweepResult {
    pub fn summary_for(&self, method: Method) -> Vec<&SummaryRow> {
        self.summary.iter().filter(|r| r.method == method).collect()
    }
}

/// One trial of every requested method, sharing the snapshot block.
/// Failures are kept as messages so one method cannot sink the others.
fn run_trial(scn: &Scenario, cfg: &PipelineConfig, methods: &[Method]) -> Vec<std::result::Result<(f64, f64), String>> {
    let snap = match simulate(scn) {
        Ok(s) => s,
        Err(e) => return methods.iter().map(|_| Err(e.to_string())).collect(),
    };
    let needs_pipeline = methods
        .iter()
        .any(|m| matches!(m, Method::CmrIsps | Method::CmrIspsDirect));
    let pipeline = needs_pipeline.then(|| run_pipeline(&snap, cfg));
    methods
        .iter()
        .map(|&m| {
            let p = match &pipeline {
                Some(Ok(p)) => Some(p),
                Some(Err(e)) if matches!(m, Method::CmrIsps | Method::CmrIspsDirect) => return Err(e.to_string()),
                _ => None,
            };
            let w = method_weights(m, &snap, cfg, p).map_err(|e| e.to_string())?;
            let rep = output_sinr(&w.w, &snap.truth).map_err(|e| e.to_string())?;
            Ok((rep.output_sinr_db, rep.optimal_sinr_db))
        })
        .collect()
}

/// Runs every (axis value, trial) job, in parallel when requested. Output
/// ordering is method, axis value, trial regardless of execution order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let n_axis = spec.axis.values.len();
    let jobs = n_axis * spec.trials;
    let mut pipeline = spec.pipeline.clone();
    pipeline.execution = Execution::Sequential;

    let outcomes = map_indexed(jobs, spec.execution, |job| {
        let (ai, trial) = (job / spec.trials, job % spec.trials);
        let seed = trial_seed(spec.seed, trial as u64);
        let mut scn = spec.scenario.clone();
        scn.seed = seed;
        spec.axis.apply(&mut scn, spec.axis.values[ai]);
        (seed, run_trial(&scn, &pipeline, &spec.methods))
    });

    let mut records = Vec::with_capacity(jobs * spec.methods.len());
    let mut failures = Vec::new();
    for (mi, &method) in spec.methods.iter().enumerate() {
        for job in 0..jobs {
            let (ai, trial) = (job / spec.trials, job % spec.trials);
            let (seed, res) = &outcomes[job];
            let (out, opt) = match &res[mi] {
                Ok(v) => *v,
                Err(e) => {
                    failures.push(format!(
                        "{method} {}={} trial {trial}: {e}",
                        spec.axis.name.as_str(),
                        spec.axis.values[ai]
                    ));
                    (f64::NAN, f64::NAN)
                }
            };
            records.push(SweepRecord {
                method,
                axis_name: spec.axis.name.as_str(),
                axis_value: spec.axis.values[ai],
                trial,
                seed: *seed,
                output_sinr_db: out,
                optimal_sinr_db: opt,
            });
        }
    }
    let summary = summarize(&records, spec);
    Ok(SweepResult {
        records,
        summary,
        failures,
    })
}

fn summarize(records: &[SweepRecord], spec: &SweepSpec) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &method in &spec.methods {
        for &v in &spec.axis.values {
            let xs: Vec<f64> = records
                .iter()
                .filter(|r| r.method == method && r.axis_value == v && r.output_sinr_db.is_finite())
                .map(|r| r.output_sinr_db)
                .collect();
            let n = xs.len();
            let mean = if n == 0 { f64::NAN } else { xs.iter().sum::<f64>() / n as f64 };
            let std = if n < 2 {
                0.0
            } else {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            };
            rows.push(SummaryRow {
                method,
                axis_name: spec.axis.name.as_str(),
                axis_value: v,
                mean_db: mean,
                std_db: std,
                n,
            });
        }
    }
    rows
}

/// Best-fit scalar `c` minimizing `‖x − c·t‖_F` and the relative residual
/// `‖x − c·t‖_F / ‖x‖_F`.
pub fn fit_scaled(x: &CMat, t: &CMat) -> (f64, f64) {
    let num: f64 = x.iter().zip(t.iter()).map(|(a, b)| (b.conj() * a).re).sum();
    let c = num / frobenius(t).powi(2);
    let resid = frobenius(&(x - t * Complex64::new(c, 0.0))) / frobenius(x);
    (c, resid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationEntry {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    fn check(&mut self, name: &str, measured: f64, comparison: Comparison, threshold: f64) {
        let passed = match comparison {
            Comparison::AtMost => measured <= threshold,
            Comparison::AtLeast => measured >= threshold,
        };
        self.entries.push(ValidationEntry {
            name: name.to_string(),
            measured,
            threshold,
            comparison,
            passed,
        });
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let op = match e.comparison {
                Comparison::AtMost => "<=",
                Comparison::AtLeast => ">=",
            };
            let _ = writeln!(
                s,
                "{} {}: measured {:.6e} {op} {:.6e}",
                if e.passed { "PASS" } else { "FAIL" },
                e.name,
                e.measured,
                e.threshold
            );
        }
        let failed = self.entries.iter().filter(|e| !e.passed).count();
        let _ = writeln!(s, "{} checks, {failed} failed", self.entries.len());
        s
    }
}

/// Analytical oracles on the single-interferer model (`M = 10`, unit noise,
/// 30 dB INR, on-grid interferer at −40° on a 200-point grid) plus a
/// solver cross-check on the default scenario.
pub fn validate_analysis() -> Result<ValidationReport> {
    let mut rep = ValidationReport::default();
    let m = 10;
    let inr = 1000.0;
    let grid = make_grid(200)?;
    let cfg = ArrayConfig::ideal(m);
    let phi = grid.angles[grid.angle_to_index((-40f64).to_radians())?];
    let model = theoretical_single_interferer(m, inr, phi);
    let r = model.covariance();

    let capon = capon_spectrum(&r, &grid, &cfg)?;
    let cp = capon.values[capon.peak_index()];
    let exact = 1.0 / model.capon_denominator(&model.a_l);
    rep.check("capon_peak_vs_exact", (cp - exact).abs() / exact, Comparison::AtMost, 1e-6);
    let approx = model.capon_peak_approx();
    rep.check("capon_peak_vs_mainlobe_form", (cp - approx).abs() / approx, Comparison::AtMost, 1e-2);

    let me = me_spectrum(&r, &grid, &cfg)?;
    let mp = me.values[me.peak_index()];
    let me_exact = model.me_peak_exact();
    rep.check("me_peak_vs_exact", (mp - me_exact).abs() / me_exact, Comparison::AtMost, 1e-6);
    let eps = me.epsilon.unwrap_or(f64::NAN);
    rep.check("me_epsilon", (eps - model.me_epsilon()).abs() / model.me_epsilon(), Comparison::AtMost, 1e-6);
    let forced = (1.0 + m as f64 * inr) / (1.0 + (m as f64 - 1.0) * inr);
    let ratio = model.me_peak_approx() / mp;
    rep.check("me_approximation_factor", (ratio - forced).abs() / forced, Comparison::AtMost, 1e-6);

    let all: Vec<usize> = (0..grid.len()).collect();
    let capon_rec = build_inc_over(&capon, &all, &cfg, 0.0)?.to_matrix();
    let mut t_cap = identity(m);
    add_outer(&mut t_cap, &model.a_l, inr);
    rep.check("capon_reconstruction_residual", fit_scaled(&capon_rec, &t_cap).1, Comparison::AtMost, 0.15);

    let me_rec = build_inc_over(&me, &all, &cfg, 0.0)?;
    let mut t_me = identity(m);
    add_outer(&mut t_me, &model.a_l, (m * m) as f64 * inr * inr);
    rep.check("me_reconstruction_residual", fit_scaled(&me_rec.to_matrix(), &t_me).1, Comparison::AtMost, 0.15);
    let ev = me_rec.eigenvalues();
    let floor = ev[..m - 1].iter().sum::<f64>() / (m - 1) as f64;
    rep.check(
        "me_dominant_to_floor",
        ev[m - 1] / floor,
        Comparison::AtLeast,
        (m * m) as f64 * inr / 10.0,
    );

    // sine-ratio identity at 100 deterministic offsets
    let a_ref = steering_vector(&cfg, 0.0).values;
    let worst = (0..100)
        .map(|i| {
            let phi = -0.6 + 1.2 * (i as f64 + 0.5) / 100.0;
            let a = steering_vector(&cfg, phi).values;
            let direct = crate::linalg::dot_h(&a_ref, &a).norm_sqr();
            let formula = sine_ratio(m, cfg.electrical_angle(phi));
            (direct - formula).abs() / formula.max(1e-300)
        })
        .fold(0.0, f64::max);
    rep.check("sine_ratio_identity", worst, Comparison::AtMost, 1e-10);

    let loss = predicted_sinr_loss(0.07, 0.1);
    rep.check("loss_curve_point", (loss - (1.0 - 0.01 * 0.0049 / 12.0)).abs(), Comparison::AtMost, 1e-15);

    // solver cross-check on the default scenario
    let snap = simulate(&Scenario::default())?;
    let spec = me_spectrum(&sample_covariance(&snap)?, &grid, &cfg)?;
    let cov = sample_covariance(&snap)?;
    let sectors = SectorSet::from_known(&[20.0, -40.0], &grid, Sector::new(10.0, 4.0), 4.0);
    let inc = build_inc_with(&spec, &sectors, &cfg, noise_floor(&cov, 2)?, Quadrature::default())?;
    let a_hat = crate::inc::estimate_soi(&spec, Sector::new(10.0, 4.0), &cfg, 10f64.to_radians())?.a_hat;
    let opts = CgOptions {
        tol: Some(1e-10 * a_hat.norm()),
        max_iter: Some(2 * m),
    };
    let cg = cg_solve(&inc, &a_hat, opts, None)?;
    let direct = direct_weights(&inc, &a_hat)?;
    let err = (&cg.weights.w - &direct.w).norm() / direct.w.norm();
    rep.check("cg_vs_direct", err, Comparison::AtMost, 1e-6);
    Ok(rep)
}

/// Per-seed SINR of one method on a fixed scenario.
pub fn sinr_samples(scn: &Scenario, cfg: &PipelineConfig, method: Method, trials: usize, master: u64, exec: Execution) -> Vec<Result<crate::metrics::SinrReport>> {
    map_indexed(trials, exec, |trial| {
        let seed = trial_seed(master, trial as u64);
        let scn = Scenario { seed, ..scn.clone() };
        let snap = simulate(&scn)?;
        let w = method_weights(method, &snap, cfg, None)?;
        Ok(output_sinr(&w.w, &snap.truth)?.tagged(method.name(), seed))
    })
}
