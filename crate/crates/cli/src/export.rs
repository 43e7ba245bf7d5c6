//! Flattens a run directory into one long table for plotting.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};

use crate::output::{diagnostics_file, moments_file, SUMMARY_FILE};
use crate::summary::Summary;

pub const PLOTDATA_FILE: &str = "plotdata.csv";
pub const PLOTDATA_HEADER: &str = "treatment,kind,t,quantity,value";

/// Rows `(t, quantity, value)` of one table; `quantity` names a moment as
/// `m{n}{k}` and a diagnostic by its column.
fn read_moments(path: &Path) -> anyhow::Result<Vec<(String, String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 5 {
            bail!("{}:{}: expected at least 5 columns", path.display(), i + 1);
        }
        rows.push((
            cells[0].to_string(),
            format!("m_{}_{}", cells[1], cells[2]),
            cells[3].to_string(),
        ));
    }
    Ok(rows)
}

fn read_diagnostics(path: &Path) -> anyhow::Result<Vec<(String, String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            bail!("{}:{}: expected {} columns", path.display(), i + 2, header.len());
        }
        for (name, v) in header.iter().zip(&cells).skip(1) {
            rows.push((cells[0].to_string(), name.to_string(), v.to_string()));
        }
    }
    Ok(rows)
}

/// Writes `plotdata.csv` into `dir` and returns the number of data rows.
pub fn export(dir: &Path) -> anyhow::Result<usize> {
    let summary_path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?;
    let summary: Summary = serde_json::from_str(&text).context("parsing summary.json")?;
    let mut out = std::io::BufWriter::new(fs::File::create(dir.join(PLOTDATA_FILE))?);
    writeln!(out, "{PLOTDATA_HEADER}")?;
    let mut count = 0;
    for t in &summary.treatments {
        for (file, reader) in [
            (moments_file(&t.label), read_moments as fn(&Path) -> _),
            (diagnostics_file(&t.label), read_diagnostics),
        ] {
            let path = dir.join(file);
            if !path.exists() {
                continue;
            }
            for (time, q, v) in reader(&path)? {
                writeln!(out, "{},{},{time},{q},{v}", t.label, t.kind)?;
                count += 1;
            }
        }
        for p in &t.lyapunov {
            if let Some(r) = &p.report {
                let q = format!("lambda_{}_x{}_c{}", r.system.as_str(), p.mean_x, p.cxx);
                writeln!(out, "{},{},{},{q},{}", t.label, t.kind, r.t_total, r.lambda_max)?;
                count += 1;
            }
        }
    }
    out.flush()?;
    Ok(count)
}
