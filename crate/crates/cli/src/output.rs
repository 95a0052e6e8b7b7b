//! Report and figure-data files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;
use crate::format::number;
use crate::pipeline::Outcome;

pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const CURVES_FILE: &str = "curves.csv";
pub const DENSITY_FILE: &str = "density.csv";
pub const ORACLE_FILE: &str = "oracle.json";

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::csv(path, e))?;
    w.write_record(header).map_err(|e| CliError::csv(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| number(*v)))
            .map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `x, s, survival, tstar_<label>…, g_<label>…, sum_g_minus_x` on a uniform
/// grid of `points` layer coordinates `x = s − ess inf S`.
pub fn curves(outcome: &Outcome, labels: &[String], points: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let dist = outcome.problem.dist();
    let lo = outcome.problem.lower_bound();
    let span = outcome.problem.span();
    let mut header: Vec<String> = vec!["x".into(), "s".into(), "survival".into()];
    header.extend(labels.iter().map(|l| format!("tstar_{l}")));
    header.extend(labels.iter().map(|l| format!("g_{l}")));
    header.push("sum_g_minus_x".into());
    let n = labels.len();
    let rows = (0..points)
        .map(|k| {
            let x = span * k as f64 / (points - 1) as f64;
            let p = dist.survival(lo + x);
            let mut row = vec![x, lo + x, p];
            row.extend(outcome.solution.optimal_distortions.iter().map(|t| t.value(p)));
            let g: Vec<f64> = (0..n).map(|i| outcome.profile.g(i, x)).collect();
            let total: f64 = g.iter().sum();
            row.extend(g);
            row.push(total - x);
            row
        })
        .collect();
    (header, rows)
}

/// `s, density` on a uniform grid for continuous laws; `s, probability` per
/// atom for discrete and empirical ones.
pub fn density(outcome: &Outcome, points: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let dist = outcome.problem.dist();
    if let Some(atoms) = dist.atoms() {
        let rows = atoms
            .values
            .iter()
            .zip(&atoms.masses)
            .map(|(v, m)| vec![*v, *m])
            .collect();
        return (vec!["s".into(), "probability".into()], rows);
    }
    let (lo, hi) = dist.essential_bounds();
    let rows = (0..points)
        .map(|k| {
            let s = lo + (hi - lo) * k as f64 / (points - 1) as f64;
            vec![s, dist.density(s).unwrap_or(0.0)]
        })
        .collect();
    (vec!["s".into(), "density".into()], rows)
}

pub fn write_figures(
    dir: &Path,
    outcome: &Outcome,
    labels: &[String],
    points: usize,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let (h, r) = curves(outcome, labels, points);
    write_rows(&dir.join(CURVES_FILE), &h, &r)?;
    let (h, r) = density(outcome, points);
    write_rows(&dir.join(DENSITY_FILE), &h, &r)
}
