//! Corpus runner.
//!
//! CSV columns: `instance,status,objective,time_s,nodes,conflicts,cuts,intsize,error`.
//! `status` is a competition status or `REJECTED` when the file does not
//! parse (the reason goes to `error`). `objective` is empty when no solution
//! is known. The plot file has one `index log10_seconds` pair per solved
//! instance, sorted by runtime.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use pbopt::opb::{compute_intsize, parse_with, ParseError, ParseOptions};
use pbopt::search::{solve, Config};
use pbopt::Status;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub instance: String,
    pub status: String,
    pub objective: Option<i128>,
    pub time_s: f64,
    pub nodes: u64,
    pub conflicts: u64,
    pub cuts: u64,
    pub intsize: Option<u32>,
    pub error: String,
}

pub fn corpus(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "opb" || e == "wbo"))
        .collect();
    files.sort();
    Ok(files)
}

/// Intsize of a file even when it exceeds what the parser accepts.
fn raw_intsize(text: &[u8], err: &ParseError) -> Option<u32> {
    match err {
        ParseError::UnsupportedIntsize { bits, .. } => Some(*bits),
        _ => parse_with(text, ParseOptions { max_intsize: u32::MAX })
            .ok()
            .map(|i| compute_intsize(&i)),
    }
}

pub fn run_one(path: &Path, cfg: &Config, max_intsize: u32) -> Row {
    let instance = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let text = match fs::read(path) {
        Ok(t) => t,
        Err(e) => return rejected(instance, None, e.to_string()),
    };
    let inst = match parse_with(&text, ParseOptions { max_intsize }) {
        Ok(i) => i,
        Err(e) => return rejected(instance, raw_intsize(&text, &e), e.to_string()),
    };
    let start = Instant::now();
    let res = solve(&inst, cfg);
    let time_s = start.elapsed().as_secs_f64();
    Row {
        instance,
        status: res.status.as_str().to_string(),
        objective: res.best.as_ref().filter(|_| inst.is_optimization()).map(|b| b.objective),
        time_s,
        nodes: res.stats.nodes,
        conflicts: res.stats.conflicts,
        cuts: res.stats.total_cuts(),
        intsize: Some(inst.intsize),
        error: String::new(),
    }
}

fn rejected(instance: String, intsize: Option<u32>, error: String) -> Row {
    Row {
        instance,
        status: "REJECTED".into(),
        objective: None,
        time_s: 0.0,
        nodes: 0,
        conflicts: 0,
        cuts: 0,
        intsize,
        error,
    }
}

pub fn is_solved(row: &Row) -> bool {
    row.status == Status::OptimumFound.as_str() || row.status == Status::Unsatisfiable.as_str() || {
        // decision instances finish with a model
        row.status == Status::Satisfiable.as_str() && row.objective.is_none()
    }
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["instance", "status", "objective", "time_s", "nodes", "conflicts", "cuts", "intsize", "error"])?;
    for r in rows {
        w.write_record([
            r.instance.clone(),
            r.status.clone(),
            r.objective.map_or_else(String::new, |o| o.to_string()),
            format!("{:.6}", r.time_s),
            r.nodes.to_string(),
            r.conflicts.to_string(),
            r.cuts.to_string(),
            r.intsize.map_or_else(String::new, |b| b.to_string()),
            r.error.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_plot(path: &Path, rows: &[Row]) -> Result<()> {
    let mut times: Vec<f64> = rows.iter().filter(|r| is_solved(r)).map(|r| r.time_s).collect();
    times.sort_by(f64::total_cmp);
    let mut out = String::from("# index log10_seconds\n");
    for (i, t) in times.iter().enumerate() {
        out.push_str(&format!("{} {:.6}\n", i + 1, t.max(1e-6).log10()));
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

/// Intsize bucket label used in summaries.
pub fn bucket(bits: u32) -> &'static str {
    match bits {
        0..=32 => "0-32",
        33..=47 => "33-47",
        48..=49 => "48-49",
        _ => "50+",
    }
}
