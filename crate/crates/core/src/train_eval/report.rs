//! Per-run RMSE rows and their aggregation over seeds.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use super::config::TrainConfig;
use super::eval::Evaluation;
use crate::error::{Error, Result};
use crate::lorenz::{Scenario, Series};

pub const REPORT_HEADER: &str =
    "model,conditional,multitask,scenario,seed,series,rmse_scaled,rmse_raw,wall_seconds";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub conditional: bool,
    pub multitask: bool,
    pub scenario: Scenario,
    pub seed: u64,
    pub series: Series,
    pub rmse_scaled: f64,
    pub rmse_raw: f64,
    pub wall_seconds: f64,
}

/// Identifies one experiment cell, i.e. everything but the seed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub model: String,
    pub conditional: bool,
    pub multitask: bool,
    pub scenario: String,
}

impl CellKey {
    pub fn of(config: &TrainConfig) -> Self {
        Self {
            model: config.label(),
            conditional: config.conditional,
            multitask: config.multitask,
            scenario: config.scenario.name().to_string(),
        }
    }
}

impl ReportRow {
    pub fn key(&self) -> CellKey {
        CellKey {
            model: self.model.clone(),
            conditional: self.conditional,
            multitask: self.multitask,
            scenario: self.scenario.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSummary {
    pub key: CellKey,
    pub series: Series,
    pub per_seed: Vec<(u64, f64)>,
    pub mean: f64,
    /// Sample standard deviation; only with two or more seeds.
    pub std: Option<f64>,
    pub best: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn from_evaluation(config: &TrainConfig, eval: &Evaluation, wall_seconds: f64) -> Self {
        let rows = eval
            .series
            .iter()
            .map(|e| ReportRow {
                model: config.label(),
                conditional: config.conditional,
                multitask: config.multitask,
                scenario: config.scenario,
                seed: config.seed,
                series: e.series,
                rmse_scaled: e.rmse_scaled,
                rmse_raw: e.rmse_raw.unwrap_or(f64::NAN),
                wall_seconds,
            })
            .collect();
        Self { rows }
    }

    pub fn merge(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Scaled RMSE of one row, if present.
    pub fn rmse(&self, key: &CellKey, seed: u64, series: Series) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| &r.key() == key && r.seed == seed && r.series == series)
            .map(|r| r.rmse_scaled)
    }

    /// Mean, sample std and best value of the scaled RMSE per cell and
    /// series, in sorted cell order.
    pub fn summaries(&self) -> Vec<SeriesSummary> {
        let mut groups: BTreeMap<(CellKey, Series), Vec<(u64, f64)>> = BTreeMap::new();
        for r in &self.rows {
            groups
                .entry((r.key(), r.series))
                .or_default()
                .push((r.seed, r.rmse_scaled));
        }
        groups
            .into_iter()
            .map(|((key, series), per_seed)| {
                let vals: Vec<f64> = per_seed.iter().map(|p| p.1).collect();
                let (mean, std) = mean_std(&vals);
                let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
                SeriesSummary {
                    key,
                    series,
                    per_seed,
                    mean,
                    std,
                    best,
                }
            })
            .collect()
    }

    pub fn summary(&self, key: &CellKey, series: Series) -> Option<SeriesSummary> {
        self.summaries()
            .into_iter()
            .find(|s| &s.key == key && s.series == series)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{REPORT_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{:e},{:e},{:.3}",
                r.model,
                r.conditional,
                r.multitask,
                r.scenario,
                r.seed,
                r.series,
                r.rmse_scaled,
                r.rmse_raw,
                r.wall_seconds
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = r.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == REPORT_HEADER => {}
            Some((_, Err(e))) => return Err(Error::io(path, e)),
            _ => return Err(parse_err(1, format!("expected header '{REPORT_HEADER}'"))),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(parse_err(
                    i + 1,
                    format!("expected 9 fields, got {}", f.len()),
                ));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| parse_err(i + 1, format!("'{s}': {e}")))
            };
            let flag = |s: &str| {
                s.parse::<bool>()
                    .map_err(|e| parse_err(i + 1, format!("'{s}': {e}")))
            };
            rows.push(ReportRow {
                model: f[0].to_string(),
                conditional: flag(f[1])?,
                multitask: flag(f[2])?,
                scenario: f[3]
                    .parse()
                    .map_err(|e: Error| parse_err(i + 1, e.to_string()))?,
                seed: f[4]
                    .parse()
                    .map_err(|e| parse_err(i + 1, format!("seed: {e}")))?,
                series: f[5]
                    .parse()
                    .map_err(|e: Error| parse_err(i + 1, e.to_string()))?,
                rmse_scaled: num(f[6])?,
                rmse_raw: num(f[7])?,
                wall_seconds: num(f[8])?,
            });
        }
        Ok(Self { rows })
    }
}

/// Mean and sample (n - 1) standard deviation; the latter needs two values.
pub fn mean_std(vals: &[f64]) -> (f64, Option<f64>) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, None);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}
