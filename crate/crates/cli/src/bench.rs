//! Batch runs over a directory of problem files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use ttrs_core::{format, solve, HybridConfig, Source, Status};

/// Fixed CSV column list; summary rows reuse it.
pub const HEADER: [&str; 11] = [
    "file",
    "n",
    "den",
    "cpu",
    "kkt",
    "obj",
    "lngm_ball",
    "lngm_ellipsoid",
    "opt_2active",
    "opt_source",
    "status",
];

/// One row of the batch table. For instance rows the count columns are 0 or
/// 1; summary rows hold per-dimension means and counts.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BenchRecord {
    pub file: String,
    pub n: usize,
    pub den: f64,
    pub cpu: Option<f64>,
    pub kkt: Option<f64>,
    pub obj: Option<f64>,
    pub lngm_ball: u32,
    pub lngm_ellipsoid: u32,
    pub opt_2active: u32,
    pub opt_source: String,
    pub status: String,
}

pub fn problem_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ttrs"))
        .collect();
    files.sort();
    Ok(files)
}

fn run_one(path: &Path, cfg: &HybridConfig) -> BenchRecord {
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let failed = |n: usize, den: f64, msg: String| BenchRecord {
        file: file.clone(),
        n,
        den,
        cpu: None,
        kkt: None,
        obj: None,
        lngm_ball: 0,
        lngm_ellipsoid: 0,
        opt_2active: 0,
        opt_source: String::new(),
        status: format!("error: {msg}"),
    };
    let problem = match std::fs::read_to_string(path)
        .map_err(anyhow::Error::from)
        .and_then(|text| Ok(format::parse(&text)?))
    {
        Ok(p) => p,
        Err(e) => return failed(0, 0.0, e.to_string()),
    };
    let n = problem.dim();
    let den = problem.hessian.density();
    let t = Instant::now();
    let report = match solve(&problem, cfg) {
        Ok(r) => r,
        Err(e) => return failed(n, den, e.to_string()),
    };
    let cpu = t.elapsed().as_secs_f64();
    let (lngm_ball, lngm_ellipsoid) = report.lngm.as_ref().map_or((0, 0), |l| {
        (u32::from(l.ball_feasible), u32::from(l.ellipsoid_feasible))
    });
    let best = report.best.as_ref();
    BenchRecord {
        file,
        n,
        den,
        cpu: Some(cpu),
        kkt: best.map(|b| b.kkt.stationarity_residual),
        obj: best.map(|b| b.objective),
        lngm_ball,
        lngm_ellipsoid,
        opt_2active: best.map_or(0, |b| u32::from(b.kkt.two_active())),
        opt_source: report
            .optimum_source()
            .map(|s| s.as_str().to_string())
            .unwrap_or_default(),
        status: report.status.as_str().to_string(),
    }
}

/// Solves every file; rows follow the sorted file order.
pub fn run(files: &[PathBuf], cfg: &HybridConfig) -> Vec<BenchRecord> {
    files.par_iter().map(|f| run_one(f, cfg)).collect()
}

fn solved(r: &BenchRecord) -> bool {
    r.status != Status::Infeasible.as_str() && !r.status.starts_with("error")
}

/// Per-dimension means over solved rows and counts over all rows.
pub fn summarize(records: &[BenchRecord]) -> Vec<BenchRecord> {
    let mut groups: BTreeMap<usize, Vec<&BenchRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.n > 0) {
        groups.entry(r.n).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(n, rows)| {
            let ok: Vec<&&BenchRecord> = rows.iter().filter(|r| solved(r)).collect();
            let mean = |f: &dyn Fn(&BenchRecord) -> Option<f64>| {
                let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            let count = |f: &dyn Fn(&BenchRecord) -> u32| rows.iter().map(|r| f(r)).sum::<u32>();
            let lngm = |s: Source| rows.iter().filter(|r| r.opt_source == s.as_str()).count();
            BenchRecord {
                file: format!("mean_n{n}"),
                n,
                den: rows.iter().map(|r| r.den).sum::<f64>() / rows.len() as f64,
                cpu: mean(&|r| r.cpu),
                kkt: mean(&|r| r.kkt),
                obj: mean(&|r| r.obj),
                lngm_ball: count(&|r| r.lngm_ball),
                lngm_ellipsoid: count(&|r| r.lngm_ellipsoid),
                opt_2active: count(&|r| r.opt_2active),
                opt_source: format!(
                    "lngm_ball={} lngm_ellipsoid={}",
                    lngm(Source::LngmBall),
                    lngm(Source::LngmEllipsoid)
                ),
                status: format!("solved {}/{}", ok.len(), rows.len()),
            }
        })
        .collect()
}

pub fn write_csv(out: impl Write, records: &[BenchRecord], summary: &[BenchRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(HEADER)?;
    for r in records.iter().chain(summary) {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
pub struct BenchJson<'a> {
    pub records: &'a [BenchRecord],
    pub summary: &'a [BenchRecord],
}
