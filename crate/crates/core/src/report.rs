//! Persistence of reports: `report.json`, `summary.csv`, optional
//! `samples.csv` and a `timing.txt` sidecar. Every file is written to a
//! temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{McReport, Replication, SCHEMA_VERSION};

pub const REPORT_JSON: &str = "report.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SAMPLES_CSV: &str = "samples.csv";
pub const TIMING_TXT: &str = "timing.txt";

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn report_json(report: &McReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn summary_csv(report: &McReport) -> String {
    let mut out = String::from("quantity,n,t,s,i,j,target,mean,se,variance,variance_se,mse,mse_se\n");
    for e in &report.estimates {
        let k = &e.key;
        let q = serde_json::to_value(k.quantity).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        let _ = writeln!(
            out,
            "{q},{},{},{},{},{},{},{},{},{},{},{},{}",
            k.n, k.t, k.s, k.i, k.j, e.target, e.mean, e.se, e.variance, e.variance_se, e.mse, e.mse_se
        );
    }
    out
}

/// `h,n,t,rep,i,j,m_n,corrected`, one row per error-process entry.
pub fn samples_csv(reps: &[Replication]) -> String {
    let mut out = String::from("h,n,t,rep,i,j,m_n,corrected\n");
    for rep in reps {
        for rec in &rep.records {
            for ((i, j), v) in rec.m_n.indexed_iter() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{i},{j},{v},{}",
                    rec.h, rec.n, rec.t, rec.replication, rec.corrected[[i, j]]
                );
            }
        }
    }
    out
}

/// Writes the report files into `dir` (created if needed) and returns their paths.
pub fn write_outputs(dir: &Path, report: &McReport, samples: Option<&[Replication]>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: &[u8]| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, body)?;
        written.push(p);
        Ok(())
    };
    put(REPORT_JSON, report_json(report)?.as_bytes())?;
    put(SUMMARY_CSV, summary_csv(report).as_bytes())?;
    if let Some(reps) = samples {
        put(SAMPLES_CSV, samples_csv(reps).as_bytes())?;
    }
    put(TIMING_TXT, format!("wall_time_seconds = {}\n", report.wall_time).as_bytes())?;
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<McReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedReport {
    pub schema: u32,
    pub sources: Vec<String>,
    pub reports: Vec<McReport>,
    pub pass: bool,
}

/// Collects several reports, in the given order.
pub fn merge_reports(paths: &[PathBuf]) -> Result<MergedReport> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("nothing to merge".into()));
    }
    let reports = paths.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?;
    if let Some(r) = reports.iter().find(|r| r.schema != SCHEMA_VERSION) {
        return Err(Error::InvalidInput(format!("unsupported report schema {}", r.schema)));
    }
    Ok(MergedReport {
        schema: SCHEMA_VERSION,
        sources: paths.iter().map(|p| p.display().to_string()).collect(),
        pass: reports.iter().all(|r| r.pass),
        reports,
    })
}
