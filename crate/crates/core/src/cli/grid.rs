//! The experiment grid behind `reproduce`.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::Result;
use crate::lorenz::{Scenario, Series};
use crate::models::ModelKind;
use crate::par;
use crate::train_eval::{evaluate, mean_std, train, EvalReport, SamplingMode, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub name: String,
    /// Row label for the summary table.
    pub title: String,
    pub base: TrainConfig,
}

impl GridCell {
    /// Single-task cells train one model per series; multitask cells train
    /// one model for all three.
    pub fn configs(&self, seed: u64, epochs: Option<usize>) -> Vec<TrainConfig> {
        let mut base = TrainConfig {
            seed,
            ..self.base.clone()
        };
        if let Some(e) = epochs {
            base.epochs = e;
        }
        if base.multitask {
            vec![base]
        } else {
            Series::ALL
                .iter()
                .map(|&series| TrainConfig {
                    series,
                    ..base.clone()
                })
                .collect()
        }
    }
}

fn cell(name: &str, title: &str, base: TrainConfig) -> GridCell {
    GridCell {
        name: name.into(),
        title: title.into(),
        base,
    }
}

/// Unconditional and conditional WaveNet and LSTM on both scenarios, then
/// multitask WaveNet, adjacent-sampling LSTM and the feed-forward baseline
/// on scenario A.
pub fn default_grid() -> Vec<GridCell> {
    let mut cells = Vec::new();
    for scenario in Scenario::ALL {
        for model in [ModelKind::WaveNet, ModelKind::Lstm] {
            for conditional in [false, true] {
                let (short, long) = if conditional {
                    ("cond", "Conditional")
                } else {
                    ("uncond", "Unconditional")
                };
                let pretty = if model == ModelKind::WaveNet {
                    "WaveNet"
                } else {
                    "LSTM"
                };
                cells.push(cell(
                    &format!("{model}-{short}-{}", scenario.name().to_lowercase()),
                    &format!("{long} {pretty} ({scenario})"),
                    TrainConfig {
                        conditional,
                        scenario,
                        ..TrainConfig::new(model)
                    },
                ));
            }
        }
    }
    cells.push(cell(
        "wavenet-multitask-a",
        "Multitask Conditional WaveNet (A)",
        // one shared channel would leave all three heads reading the same scalar
        TrainConfig {
            conditional: true,
            multitask: true,
            stack_channels: 3,
            ..TrainConfig::new(ModelKind::WaveNet)
        },
    ));
    cells.push(cell(
        "lstm-adjacent-a",
        "Unconditional LSTM, adjacent sampling (A)",
        TrainConfig {
            sampling: SamplingMode::Adjacent,
            ..TrainConfig::new(ModelKind::Lstm)
        },
    ));
    cells.push(cell(
        "ffn-a",
        "Feed-forward baseline (A)",
        TrainConfig::new(ModelKind::Ffn),
    ));
    cells
}

/// Train and evaluate every config of one cell for one seed.
pub fn run_job(cell: &GridCell, seed: u64, epochs: Option<usize>) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for config in cell.configs(seed, epochs) {
        let start = Instant::now();
        let out = train(&config)?;
        let carry = config.sampling == SamplingMode::Adjacent;
        let eval = evaluate(
            &out.model,
            &out.data.test,
            out.data.scaled.scale.as_ref(),
            carry,
        )?;
        report.merge(EvalReport::from_evaluation(
            &config,
            &eval,
            start.elapsed().as_secs_f64(),
        ));
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct JobOutcome {
    pub cell: usize,
    pub seed: u64,
    pub seconds: f64,
    pub result: std::result::Result<EvalReport, String>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub cells: Vec<GridCell>,
    pub seeds: Vec<u64>,
    pub jobs: Vec<JobOutcome>,
}

impl GridOutcome {
    /// All successful rows, in grid order.
    pub fn report(&self) -> EvalReport {
        let mut r = EvalReport::default();
        for j in &self.jobs {
            if let Ok(rep) = &j.result {
                r.merge(rep.clone());
            }
        }
        r
    }

    pub fn failures(&self) -> Vec<(&GridCell, u64, &str)> {
        self.jobs
            .iter()
            .filter_map(|j| {
                j.result
                    .as_ref()
                    .err()
                    .map(|e| (&self.cells[j.cell], j.seed, e.as_str()))
            })
            .collect()
    }

    /// Seconds spent per cell, summed over seeds.
    pub fn cell_seconds(&self, cell: usize) -> f64 {
        self.jobs
            .iter()
            .filter(|j| j.cell == cell)
            .map(|j| j.seconds)
            .sum()
    }

    /// One row per cell and series with mean, sample std and best RMSE
    /// over seeds; failed seeds are listed in the status column.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "cell,title,scenario,series,mean_rmse,std_rmse,best_rmse,n_seeds,status\n",
        );
        for (ci, cell) in self.cells.iter().enumerate() {
            let failed: Vec<String> = self
                .jobs
                .iter()
                .filter(|j| j.cell == ci && j.result.is_err())
                .map(|j| j.seed.to_string())
                .collect();
            let status = if failed.is_empty() {
                "ok".to_string()
            } else {
                format!("failed seeds {}", failed.join(" "))
            };
            for s in Series::ALL {
                let vals: Vec<f64> = self
                    .jobs
                    .iter()
                    .filter(|j| j.cell == ci)
                    .filter_map(|j| j.result.as_ref().ok())
                    .flat_map(|rep| {
                        rep.rows
                            .iter()
                            .filter(|r| r.series == s)
                            .map(|r| r.rmse_scaled)
                    })
                    .collect();
                let (mean, std, best) = if vals.is_empty() {
                    (String::new(), String::new(), String::new())
                } else {
                    let (m, sd) = mean_std(&vals);
                    let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
                    (
                        format!("{m:.5}"),
                        sd.map(|v| format!("{v:.5}")).unwrap_or_default(),
                        format!("{best:.5}"),
                    )
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{mean},{std},{best},{},{status}",
                    cell.name,
                    cell.title.replace(',', ";"),
                    cell.base.scenario,
                    s,
                    vals.len()
                );
            }
        }
        out
    }
}

/// Run every (cell, seed) job. Jobs are independent and fan out over the
/// worker pool; a failing job is recorded without stopping the others.
pub fn run_grid(cells: Vec<GridCell>, seeds: &[u64], epochs: Option<usize>) -> GridOutcome {
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let outcomes = par::map(&jobs, |&(ci, seed)| {
        let start = Instant::now();
        let result = run_job(&cells[ci], seed, epochs).map_err(|e| e.to_string());
        JobOutcome {
            cell: ci,
            seed,
            seconds: start.elapsed().as_secs_f64(),
            result,
        }
    });
    GridOutcome {
        cells,
        seeds: seeds.to_vec(),
        jobs: outcomes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 11);
        let names: Vec<&str> = g.iter().map(|c| c.name.as_str()).collect();
        assert!(names.contains(&"wavenet-uncond-a"));
        assert!(names.contains(&"lstm-cond-b"));
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 11);
        for c in &g {
            c.base.validate().unwrap();
        }
        let rows: usize = g
            .iter()
            .map(|c| {
                if c.base.multitask {
                    3
                } else {
                    c.configs(1, None).len()
                }
            })
            .sum();
        assert_eq!(rows, 33);
    }

    #[test]
    fn failures_are_recorded_and_others_kept() {
        let mut cells: Vec<GridCell> = default_grid()
            .into_iter()
            .filter(|c| c.name == "ffn-a")
            .collect();
        let mut bad = cells[0].clone();
        bad.name = "ffn-diverges".into();
        bad.base.learning_rate = 1e300;
        cells.push(bad);
        let out = run_grid(cells, &[1234], Some(1));
        assert_eq!(out.report().rows.len(), 3);
        assert_eq!(out.failures().len(), 1);
        let csv = out.summary_csv();
        assert!(csv.contains("failed seeds 1234"), "{csv}");
    }
}
