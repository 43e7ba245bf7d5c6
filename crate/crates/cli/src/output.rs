//! Run directories: per-treatment tables, snapshots, the comparison and the
//! summary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;

use phaseflow::io::{write_moments_csv, write_trajectory_csv};

use crate::run::{RunOutcome, Series};

pub const SUMMARY_FILE: &str = "summary.json";
pub const COMPARE_FILE: &str = "compare.csv";
pub const CONFIG_FILE: &str = "config.toml";

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn moments_file(label: &str) -> String {
    format!("{label}.moments.csv")
}

pub fn diagnostics_file(label: &str) -> String {
    format!("{label}.diagnostics.csv")
}

fn write_diagnostics<W: Write>(mut w: W, s: &Series) -> std::io::Result<()> {
    writeln!(w, "t,{}", s.diag_columns.join(","))?;
    for row in &s.diagnostics {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

fn write_series(dir: &Path, s: &Series) -> anyhow::Result<()> {
    if !s.moments.is_empty() {
        let mut w = create(dir, &moments_file(&s.label))?;
        let closure = s.closure.as_deref().unwrap_or("none");
        write_moments_csv(&mut w, s.times.iter().copied().zip(&s.moments), Some(closure))?;
        w.flush()?;
    }
    if let Some(se) = &s.stderr {
        let mut w = create(dir, &format!("{}.stderr.csv", s.label))?;
        write_moments_csv(&mut w, s.times.iter().copied().zip(se), Some("none"))?;
        w.flush()?;
    }
    if !s.diag_columns.is_empty() {
        let mut w = create(dir, &diagnostics_file(&s.label))?;
        write_diagnostics(&mut w, s)?;
        w.flush()?;
    }
    if !s.trajectory.is_empty() {
        let mut w = create(dir, &format!("{}.trajectory.csv", s.label))?;
        write_trajectory_csv(&mut w, &s.trajectory)?;
        w.flush()?;
    }
    if !s.lyapunov.is_empty() {
        let w = create(dir, &format!("{}.lyapunov.json", s.label))?;
        serde_json::to_writer_pretty(w, &s.lyapunov)?;
    }
    for (tag, snap) in &s.snapshots {
        let mut w = create(dir, &format!("{}.{tag}.snap", s.label))?;
        snap.write(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// Writes everything a run produced, failed treatments included.
pub fn write_run(dir: &Path, out: &RunOutcome) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join(CONFIG_FILE), out.config.to_toml())?;
    for s in &out.series {
        write_series(dir, s)?;
    }
    if let Some(c) = &out.comparison {
        let mut w = create(dir, COMPARE_FILE)?;
        c.write_csv(&mut w)?;
        w.flush()?;
    }
    let w = create(dir, SUMMARY_FILE)?;
    serde_json::to_writer_pretty(w, &out.summary)?;
    Ok(())
}
