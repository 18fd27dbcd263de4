//! CSV writers for every artifact the CLI emits. Floats use Rust's
//! shortest round-trip formatting, so output bytes depend only on values.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use csv::Writer;

use crate::cg::CgState;
use crate::doa::DoaTrack;
use crate::error::Result;
use crate::experiment::{SummaryRow, SweepRecord};
use crate::metrics::Beampattern;
use crate::scene::SnapshotMatrix;
use crate::spectrum::SpectrumEstimate;

pub const SPECTRUM_HEADER: [&str; 5] = ["angle_deg", "p_capon", "p_me", "p_capon_db", "p_me_db"];
pub const TRACKS_HEADER: [&str; 4] = ["snapshot_index", "interferer_id", "doa_deg", "fitted_doa_deg"];
pub const BEAMPATTERN_HEADER: [&str; 2] = ["angle_deg", "gain_db"];
pub const CONVERGENCE_HEADER: [&str; 3] = ["iter", "cost", "grad_norm"];
pub const EIGENVALUES_HEADER: [&str; 2] = ["index", "eigenvalue"];
pub const SWEEP_HEADER: [&str; 7] = [
    "method",
    "axis_name",
    "axis_value",
    "trial",
    "seed",
    "output_sinr_db",
    "optimal_sinr_db",
];
pub const SUMMARY_HEADER: [&str; 6] = ["method", "axis_name", "axis_value", "mean_db", "std_db", "n"];
pub const SNAPSHOTS_HEADER: [&str; 4] = ["k", "m", "re", "im"];

fn f(v: f64) -> String {
    format!("{v}")
}

fn writer<W: Write>(w: W) -> Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_spectrum<W: Write>(out: W, capon: &SpectrumEstimate, me: &SpectrumEstimate) -> Result<()> {
    let mut w = writer(out);
    w.write_record(SPECTRUM_HEADER)?;
    let (cdb, mdb) = (capon.to_db(), me.to_db());
    for (j, deg) in capon.grid.degrees().enumerate() {
        w.write_record([f(deg), f(capon.values[j]), f(me.values[j]), f(cdb[j]), f(mdb[j])])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tracks<W: Write>(out: W, tracks: &[DoaTrack]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(TRACKS_HEADER)?;
    for t in tracks {
        for (k, doa) in t.per_snapshot_doa.iter().enumerate() {
            w.write_record([
                (k + 1).to_string(),
                t.interferer_id.to_string(),
                f(doa.to_degrees()),
                f(t.fitted(k + 1).to_degrees()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_beampattern<W: Write>(out: W, bp: &Beampattern) -> Result<()> {
    let mut w = writer(out);
    w.write_record(BEAMPATTERN_HEADER)?;
    for (deg, g) in bp.grid.degrees().zip(&bp.gain_db) {
        w.write_record([f(deg), f(*g)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_convergence<W: Write>(out: W, state: &CgState) -> Result<()> {
    let mut w = writer(out);
    w.write_record(CONVERGENCE_HEADER)?;
    for (i, (c, g)) in state.costs.iter().zip(&state.grad_norms).enumerate() {
        w.write_record([i.to_string(), f(*c), f(*g)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_eigenvalues<W: Write>(out: W, values: &[f64]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(EIGENVALUES_HEADER)?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), f(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(out: W, records: &[SweepRecord]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in records {
        w.write_record([
            r.method.name().to_string(),
            r.axis_name.to_string(),
            f(r.axis_value),
            r.trial.to_string(),
            r.seed.to_string(),
            f(r.output_sinr_db),
            f(r.optimal_sinr_db),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.axis_name.to_string(),
            f(r.axis_value),
            f(r.mean_db),
            f(r.std_db),
            r.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per sensor sample, snapshots `k` and sensors `m` from 0.
pub fn write_snapshots<W: Write>(out: W, snap: &SnapshotMatrix) -> Result<()> {
    let mut w = writer(out);
    w.write_record(SNAPSHOTS_HEADER)?;
    for k in 0..snap.snapshots() {
        for m in 0..snap.sensors() {
            let v = snap.data[(m, k)];
            w.write_record([k.to_string(), m.to_string(), f(v.re), f(v.im)])?;
        }
    }
    w.flush()?;
    Ok(())
}
