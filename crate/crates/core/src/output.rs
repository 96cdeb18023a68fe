//! Run artifacts: CSV series, field snapshots and the manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::fields::snapshot::write_snapshot;
use crate::fields::Grid2D;
use crate::integrator::TrajectoryRecord;

pub const MANIFEST_FILE: &str = "manifest.json";

fn norm_label(p: f64) -> String {
    if p.is_infinite() {
        "Linf".to_string()
    } else {
        format!("L{p}")
    }
}

/// Columns `t,sup_norm,mass,min_value` then one `L{p}` column per recorded norm.
pub fn write_series_csv<W: Write>(record: &TrajectoryRecord, mut w: W) -> Result<()> {
    write!(w, "t,sup_norm,mass,min_value")?;
    for &p in &record.lp_exponents {
        write!(w, ",{}", norm_label(p))?;
    }
    writeln!(w)?;
    for j in 0..record.len() {
        write!(w, "{:e},{:e},{:e},{:e}", record.times[j], record.sup_norms[j], record.masses[j], record.min_values[j])?;
        for series in &record.lp_series {
            write!(w, ",{:e}", series[j])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `{stem}.csv` and one `{stem}_snap{k}.ksf` per snapshot; returns the
/// paths written.
pub fn write_record(dir: &Path, stem: &str, record: &TrajectoryRecord) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv = dir.join(format!("{stem}.csv"));
    let mut w = create(&csv)?;
    write_series_csv(record, &mut w)?;
    w.flush()?;
    written.push(csv);
    for (k, (t, field)) in record.snapshots.iter().enumerate() {
        let path = dir.join(format!("{stem}_snap{k}.ksf"));
        let mut w = create(&path)?;
        write_snapshot(&mut w, field, *t)?;
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GridInfo {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl From<&Grid2D> for GridInfo {
    fn from(g: &Grid2D) -> Self {
        Self { nx: g.nx(), ny: g.ny(), lx: g.lx(), ly: g.ly() }
    }
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub grid: GridInfo,
    /// The configuration after command-line overrides, as TOML.
    pub config: String,
    /// The configuration file as read.
    pub config_source: Option<String>,
    pub thresholds: serde_json::Value,
    pub timestamp_unix: u64,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, grid: &Grid2D, config: String) -> Self {
        let timestamp_unix =
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            grid: grid.into(),
            config,
            config_source: None,
            thresholds: serde_json::Value::Object(Default::default()),
            timestamp_unix,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::snapshot::read_snapshot;
    use crate::fields::ScalarField;
    use crate::integrator::{run_trajectory, TrajectoryOptions};
    use crate::model::{ModelParams, Noise, SourceSpec};
    use crate::noise::SeedCtx;

    fn record() -> TrajectoryRecord {
        let g = Grid2D::new(8, 8, 1.0, 1.0).unwrap();
        let u0 = ScalarField::from_fn(&g, |x, _| 1.0 + 0.1 * x);
        let p = ModelParams::new(1.0, SourceSpec::zero(), Noise::None, u0).unwrap();
        let opts = TrajectoryOptions {
            lp_norms: vec![2.0, f64::INFINITY],
            snapshot_times: vec![0.0, 0.02],
            ..Default::default()
        };
        run_trajectory(&p, 0.02, 0.01, &SeedCtx::new(0, 0), &opts).unwrap()
    }

    #[test]
    fn series_layout() {
        let mut out = Vec::new();
        write_series_csv(&record(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,sup_norm,mass,min_value,L2,Linf");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1].split(',').count(), 6);
    }

    #[test]
    fn record_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let rec = record();
        let files = write_record(dir.path(), "path0", &rec).unwrap();
        assert_eq!(files.len(), 3);
        let snap = read_snapshot(File::open(&files[2]).unwrap()).unwrap();
        assert_eq!(snap.time, 0.02);
        assert_eq!(snap.field.values(), rec.snapshots[1].1.values());

        let m = Manifest::new("simulate", 4, rec.final_field.grid(), "x = 1".into());
        m.write(dir.path()).unwrap();
        let back: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(back["seed"], 4);
        assert_eq!(back["grid"]["nx"], 8);
    }
}
