//! Interferer direction finding and null-sector construction.
//!
//! A zero-padded spatial DFT of the block (or of its first snapshot) gives
//! coarse directions.
//! Each is refined per snapshot by maximizing `|x(k)ᴴa(φ)|` over a small
//! scan window, a quadratic in the snapshot index is fitted to the refined
//! track, and the fitted excursion sets the width of the grid sector that
//! the covariance reconstruction samples.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{steering_vector, AngularGrid, ArrayConfig};
use crate::linalg::{dot_h, CVec};
use crate::scene::SnapshotMatrix;

/// Closed angular interval `center ± half_width`, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub center_deg: f64,
    pub half_width_deg: f64,
}

impl Sector {
    pub fn new(center_deg: f64, half_width_deg: f64) -> Self {
        Self {
            center_deg,
            half_width_deg,
        }
    }

    pub fn contains(&self, phi: f64) -> bool {
        (phi.to_degrees() - self.center_deg).abs() <= self.half_width_deg + 1e-9
    }

    pub fn grid_indices(&self, grid: &AngularGrid) -> Vec<usize> {
        grid.indices_within(self.center_deg.to_radians(), self.half_width_deg.to_radians())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Zero-padded length of the coarse spatial DFT.
    pub dft_size: usize,
    /// Detection threshold over the median DFT bin power.
    pub peak_threshold_db: f64,
    /// Half-width `c` of the refinement scan window.
    pub scan_half_width_deg: f64,
    pub scan_step_deg: f64,
    /// Minimum null-sector half-width around each interferer.
    pub margin_deg: f64,
    /// Fixed interferer count; bypasses the threshold detector.
    pub interferer_count: Option<usize>,
    pub coarse_mode: CoarseMode,
}

/// Data behind the coarse spatial DFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseMode {
    /// DFT of the first snapshot only.
    FirstSnapshot,
    /// DFT power averaged over every snapshot of the block.
    #[default]
    Averaged,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            dft_size: 512,
            peak_threshold_db: 10.0,
            scan_half_width_deg: 5.0,
            scan_step_deg: 0.25,
            margin_deg: 4.0,
            interferer_count: None,
            coarse_mode: CoarseMode::default(),
        }
    }
}

/// Power `|a(θ_b)ᴴx|²` on `n` electrical-angle bins over `[-π, π)`, paired
/// with the physical angle of each visible bin.
pub fn spatial_dft(x: &CVec, spacing_wavelengths: f64, n: usize) -> Vec<(Option<f64>, f64)> {
    averaged_dft(std::slice::from_ref(x), spacing_wavelengths, n)
}

/// Bin power averaged over several snapshots.
pub fn averaged_dft(xs: &[CVec], spacing_wavelengths: f64, n: usize) -> Vec<(Option<f64>, f64)> {
    let m = xs.first().map_or(0, |x| x.len());
    let count = xs.len().max(1) as f64;
    (0..n)
        .map(|b| {
            let theta = -PI + 2.0 * PI * b as f64 / n as f64;
            let kernel: Vec<Complex64> = (0..m).map(|i| Complex64::from_polar(1.0, i as f64 * theta)).collect();
            let power = xs
                .iter()
                .map(|x| (0..m).map(|i| x[i] * kernel[i]).sum::<Complex64>().norm_sqr())
                .sum::<f64>()
                / count;
            let s = theta / (2.0 * PI * spacing_wavelengths);
            let phi = (s.abs() <= 1.0).then(|| s.asin());
            (phi, power)
        })
        .collect()
}

/// Coarse interferer directions (radians) from the spatial DFT, strongest
/// first.
///
/// Local maxima inside `soi` are skipped. Without an explicit count, a peak
/// must exceed the median bin power by `peak_threshold_db`; at most `M − 1`
/// directions are returned.
pub fn coarse_doas(snap: &SnapshotMatrix, soi: &Sector, cfg: &ArrayConfig, opts: &TrackerConfig) -> Vec<f64> {
    if snap.snapshots() == 0 {
        return Vec::new();
    }
    let xs: Vec<CVec> = match opts.coarse_mode {
        CoarseMode::FirstSnapshot => vec![snap.snapshot(0)],
        CoarseMode::Averaged => (0..snap.snapshots()).map(|k| snap.snapshot(k)).collect(),
    };
    let bins = averaged_dft(&xs, cfg.spacing_wavelengths, opts.dft_size.max(cfg.m));
    let n = bins.len();
    let mut visible: Vec<f64> = bins.iter().filter(|(phi, _)| phi.is_some()).map(|&(_, p)| p).collect();
    visible.sort_by(f64::total_cmp);
    let median = visible.get(visible.len() / 2).copied().unwrap_or(0.0);
    let threshold = median * 10f64.powf(opts.peak_threshold_db / 10.0);

    let mut peaks: Vec<(f64, f64)> = (0..n)
        .filter_map(|b| {
            let (phi, p) = bins[b];
            let phi = phi?;
            let prev = bins[(b + n - 1) % n].1;
            let next = bins[(b + 1) % n].1;
            (p > prev && p >= next && !soi.contains(phi)).then_some((phi, p))
        })
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    let limit = cfg.m - 1;
    match opts.interferer_count {
        Some(l) => peaks.truncate(l.min(limit)),
        None => {
            peaks.retain(|&(_, p)| p >= threshold);
            peaks.truncate(limit);
        }
    }
    peaks.into_iter().map(|(phi, _)| phi).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoaTrack {
    pub interferer_id: usize,
    pub coarse: f64,
    /// Refined DoA per snapshot, radians.
    pub per_snapshot_doa: Vec<f64>,
    /// `θ_fit(k) = c₀ + c₁k + c₂k²`, `k = 1..K`.
    pub fit_coeffs: [f64; 3],
    /// Extremes of the fitted curve over the block.
    pub theta_range: (f64, f64),
    pub theta_center: f64,
}

impl DoaTrack {
    pub fn fitted(&self, k: usize) -> f64 {
        let [c0, c1, c2] = self.fit_coeffs;
        let k = k as f64;
        c0 + c1 * k + c2 * k * k
    }

    /// Fitted excursion `max θ_fit − min θ_fit`.
    pub fn span(&self) -> f64 {
        self.theta_range.1 - self.theta_range.0
    }
}

/// Scan angles on the absolute `step` lattice inside `coarse ± c` (degrees
/// in, radians out).
fn scan_angles(coarse: f64, c_deg: f64, step_deg: f64) -> Vec<f64> {
    let lo = (coarse.to_degrees() - c_deg).max(-90.0);
    let hi = (coarse.to_degrees() + c_deg).min(90.0);
    let first = (lo / step_deg - 1e-9).ceil() as i64;
    let last = (hi / step_deg + 1e-9).floor() as i64;
    (first..=last).map(|n| (n as f64 * step_deg).to_radians()).collect()
}

/// Refines a coarse direction over every snapshot and fits the track.
pub fn refine_track(
    snap: &SnapshotMatrix,
    coarse: f64,
    c_deg: f64,
    step_deg: f64,
    cfg: &ArrayConfig,
    interferer_id: usize,
) -> DoaTrack {
    let mut scan = scan_angles(coarse, c_deg, step_deg);
    if scan.is_empty() {
        scan.push(coarse);
    }
    let steering: Vec<CVec> = scan.iter().map(|&phi| steering_vector(cfg, phi).values).collect();
    let per_snapshot_doa: Vec<f64> = (0..snap.snapshots())
        .map(|k| {
            let x = snap.data.column(k).into_owned();
            let mut best = (f64::NEG_INFINITY, scan[0]);
            for (a, &phi) in steering.iter().zip(&scan) {
                let v = dot_h(&x, a).norm_sqr();
                if v > best.0 {
                    best = (v, phi);
                }
            }
            best.1
        })
        .collect();

    let fit_coeffs = fit_quadratic(&per_snapshot_doa);
    let mut track = DoaTrack {
        interferer_id,
        coarse,
        per_snapshot_doa,
        fit_coeffs,
        theta_range: (0.0, 0.0),
        theta_center: 0.0,
    };
    let k_total = track.per_snapshot_doa.len();
    let (lo, hi) = (1..=k_total)
        .map(|k| track.fitted(k))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    track.theta_range = if k_total == 0 { (coarse, coarse) } else { (lo, hi) };
    track.theta_center = 0.5 * (track.theta_range.0 + track.theta_range.1);
    track
}

/// Ordinary least-squares quadratic through `(k, y_k)`, `k = 1..K`.
/// Constant input yields an exactly constant fit.
pub fn fit_quadratic(y: &[f64]) -> [f64; 3] {
    let n = y.len();
    if n == 0 {
        return [0.0; 3];
    }
    if y.iter().all(|&v| v == y[0]) || n == 1 {
        return [y[0], 0.0, 0.0];
    }
    // centered and scaled abscissa for conditioning
    let mu = (n as f64 + 1.0) / 2.0;
    let s = (n as f64 - 1.0) / 2.0;
    let u: Vec<f64> = (1..=n).map(|k| (k as f64 - mu) / s).collect();
    let degree = if n == 2 { 1 } else { 2 };
    let dim = degree + 1;
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (ui, yi) in u.iter().zip(y) {
        let pw = [1.0, *ui, ui * ui];
        for r in 0..dim {
            aty[r] += pw[r] * yi;
            for c in 0..dim {
                ata[r][c] += pw[r] * pw[c];
            }
        }
    }
    let sol = solve_small(ata, aty, dim);
    let (a, b, c) = (sol[0], sol[1], if dim == 3 { sol[2] } else { 0.0 });
    [
        a - b * mu / s + c * mu * mu / (s * s),
        b / s - 2.0 * c * mu / (s * s),
        c / (s * s),
    ]
}

fn solve_small(mut a: [[f64; 3]; 3], mut b: [f64; 3], n: usize) -> [f64; 3] {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in (row + 1)..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfererSector {
    pub interferer_id: usize,
    /// First grid index `b_l` of the block before clipping.
    pub start: isize,
    /// Block width `B` in grid samples.
    pub width: usize,
    /// Indices kept after clipping to the grid and removing the look sector.
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorSet {
    pub soi_sector: Sector,
    pub interferer_sectors: Vec<InterfererSector>,
    /// Sorted, deduplicated union of all interferer indices.
    pub union_indices: Vec<usize>,
    /// Interferers whose track conflicts with the look sector.
    pub dropped: Vec<usize>,
    /// Some sector lost grid points to the look sector.
    pub flagged: bool,
    pub warnings: Vec<String>,
}

impl SectorSet {
    pub fn empty(soi: Sector) -> Self {
        Self {
            soi_sector: soi,
            interferer_sectors: Vec::new(),
            union_indices: Vec::new(),
            dropped: Vec::new(),
            flagged: false,
            warnings: Vec::new(),
        }
    }

    /// Every grid point outside the look sector, for full-sector
    /// reconstructions.
    pub fn complement(grid: &AngularGrid, soi: Sector) -> Self {
        let excluded: BTreeSet<usize> = soi.grid_indices(grid).into_iter().collect();
        let indices: Vec<usize> = (0..grid.len()).filter(|j| !excluded.contains(j)).collect();
        Self {
            interferer_sectors: vec![InterfererSector {
                interferer_id: 0,
                start: 0,
                width: grid.len(),
                indices: indices.clone(),
            }],
            union_indices: indices,
            ..Self::empty(soi)
        }
    }

    /// Static sectors around known interferer directions (degrees).
    pub fn from_known(doas_deg: &[f64], grid: &AngularGrid, soi: Sector, margin_deg: f64) -> Self {
        let blocks = doas_deg
            .iter()
            .enumerate()
            .map(|(id, &d)| (id, d.to_radians(), 0.0))
            .collect::<Vec<_>>();
        assemble(&blocks, grid, soi, margin_deg)
    }

    pub fn len(&self) -> usize {
        self.union_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.union_indices.is_empty()
    }

    pub fn contains_index(&self, j: usize) -> bool {
        self.union_indices.binary_search(&j).is_ok()
    }
}

/// Grid sectors around each track: width `max(floor(Ξ/Δ), 2·floor(margin/Δ)+1)`
/// samples centered on the index of the track center, clipped to the grid,
/// with look-sector points removed. Tracks centered inside the look sector
/// are dropped.
pub fn build_sectors(tracks: &[DoaTrack], grid: &AngularGrid, soi: Sector, margin_deg: f64) -> SectorSet {
    let blocks: Vec<(usize, f64, f64)> = tracks
        .iter()
        .map(|t| (t.interferer_id, t.theta_center, t.span()))
        .collect();
    assemble(&blocks, grid, soi, margin_deg)
}

fn assemble(blocks: &[(usize, f64, f64)], grid: &AngularGrid, soi: Sector, margin_deg: f64) -> SectorSet {
    let excluded: BTreeSet<usize> = soi.grid_indices(grid).into_iter().collect();
    let margin_half = (margin_deg.to_radians() / grid.delta + 1e-9).floor().max(0.0) as usize;
    let mut set = SectorSet::empty(soi);
    let mut union = BTreeSet::new();

    for &(id, center, span) in blocks {
        if soi.contains(center) {
            set.dropped.push(id);
            set.warnings.push(format!(
                "interferer {id} at {:.2} deg lies inside the look sector; dropped",
                center.to_degrees()
            ));
            continue;
        }
        let motion_width = (span / grid.delta + 1e-9).floor().max(0.0) as usize;
        let width = motion_width.max(2 * margin_half + 1);
        let n_c = grid
            .angle_to_index(center.clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2))
            .unwrap_or(0) as isize;
        let start = n_c - (width / 2) as isize;
        let raw: Vec<usize> = (start..start + width as isize)
            .filter(|&j| j >= 0 && j < grid.len() as isize)
            .map(|j| j as usize)
            .collect();
        let indices: Vec<usize> = raw.iter().copied().filter(|j| !excluded.contains(j)).collect();
        if indices.len() < raw.len() {
            set.flagged = true;
        }
        if indices.is_empty() {
            set.dropped.push(id);
            set.warnings.push(format!("interferer {id} sector swallowed by the look sector; dropped"));
            continue;
        }
        union.extend(indices.iter().copied());
        set.interferer_sectors.push(InterfererSector {
            interferer_id: id,
            start,
            width,
            indices,
        });
    }
    set.union_indices = union.into_iter().collect();
    set
}
