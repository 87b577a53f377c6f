//! Results tables (CSV and aligned text) and the F1-vs-epoch curve.

use std::io::Write;
use std::path::Path;

use hlad_adapt::{ExperimentReport, MeanStd, MetricSummary, RunSummary, TrainingConfig};

use crate::error::{IoContext, PipelineError, Result};

pub const REPORT_JSON: &str = "report.json";

/// Rows of already formatted cells; CSV and text share them verbatim.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.4}"))
}

fn mean_std(v: Option<MeanStd>) -> [String; 2] {
    [cell(v.map(|m| m.mean)), cell(v.map(|m| m.std))]
}

fn summary_cells(s: Option<&MetricSummary>) -> Vec<String> {
    let mut out = Vec::new();
    out.extend(mean_std(s.and_then(|s| s.rmse)));
    out.extend(mean_std(s.map(|s| s.precision)));
    out.extend(mean_std(s.map(|s| s.recall)));
    out.extend(mean_std(s.map(|s| s.f1)));
    out
}

/// Test metrics per method at the final and the selected epoch.
pub fn results_table(report: &ExperimentReport) -> Table {
    let mut header = vec!["method".to_string(), "seeds".to_string()];
    for when in ["final", "selected"] {
        for metric in ["rmse", "precision", "recall", "f1"] {
            for stat in ["mean", "std"] {
                header.push(format!("{when}_{metric}_{stat}"));
            }
        }
    }
    let rows = report
        .methods
        .iter()
        .map(|m| {
            let mut row = vec![m.method.clone(), m.seeds.len().to_string()];
            row.extend(summary_cells(m.final_test.as_ref()));
            row.extend(summary_cells(m.selected_test.as_ref()));
            row
        })
        .collect();
    Table { header, rows }
}

/// Mean ± std of validation and test F1 per method and epoch.
pub fn curve_table(report: &ExperimentReport) -> Table {
    let header = ["method", "epoch", "validation_f1_mean", "validation_f1_std", "test_f1_mean", "test_f1_std"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    for m in &report.methods {
        for p in &m.curve {
            let mut row = vec![m.method.clone(), p.epoch.to_string()];
            row.extend(mean_std(Some(p.validation_f1)));
            row.extend(mean_std(p.test_f1));
            rows.push(row);
        }
    }
    Table { header, rows }
}

impl Table {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| self.rows.iter().map(|r| r[c].len().max(1)).chain([self.header[c].len()]).max().unwrap_or(1))
            .collect();
        let line = |cells: &[String]| {
            // empty cells would collapse the columns
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{:>w$}", if s.is_empty() { "-" } else { s }))
                .collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut s = line(&self.header);
        for r in &self.rows {
            s += &line(r);
        }
        s
    }
}

pub fn load_report(dir: &Path) -> Result<ExperimentReport> {
    let path = dir.join(REPORT_JSON);
    let text = std::fs::read_to_string(&path).at(&path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Merges the runs of several reports whose configs agree on everything but
/// the seed list.
pub fn combine(reports: Vec<ExperimentReport>) -> Result<ExperimentReport> {
    let mut iter = reports.into_iter();
    let first = iter.next().ok_or_else(|| PipelineError::Incompatible("no run directories".into()))?;
    let strip = |c: &TrainingConfig| TrainingConfig { seeds: Vec::new(), ..c.clone() };
    let base = strip(&first.config);
    let mut seeds = first.config.seeds.clone();
    let mut runs: Vec<RunSummary> = first.runs;
    for r in iter {
        if strip(&r.config) != base {
            return Err(PipelineError::Incompatible("training configs differ beyond their seeds".into()));
        }
        for run in r.runs {
            if runs.iter().any(|x| x.method == run.method && x.seed == run.seed) {
                return Err(PipelineError::Incompatible(format!("{} seed {} appears twice", run.method, run.seed)));
            }
            runs.push(run);
        }
        seeds.extend(r.config.seeds);
    }
    seeds.sort_unstable();
    seeds.dedup();
    Ok(ExperimentReport::from_runs(TrainingConfig { seeds, ..base }, runs))
}

/// Writes `report.json`, `report.csv`, `report.txt` and `f1_by_epoch.csv`.
pub fn write_report_files(dir: &Path, report: &ExperimentReport) -> Result<()> {
    std::fs::create_dir_all(dir).at(dir)?;
    let json = dir.join(REPORT_JSON);
    std::fs::write(&json, serde_json::to_string_pretty(report)? + "\n").at(&json)?;
    let table = results_table(report);
    let csv_path = dir.join("report.csv");
    table.write_csv(std::fs::File::create(&csv_path).at(&csv_path)?)?;
    let txt = dir.join("report.txt");
    std::fs::write(&txt, table.to_text()).at(&txt)?;
    let curve = dir.join("f1_by_epoch.csv");
    curve_table(report).write_csv(std::fs::File::create(&curve).at(&curve)?)?;
    Ok(())
}

pub fn cmd_report(dirs: &[&Path], out: &Path) -> Result<ExperimentReport> {
    let reports = dirs.iter().map(|d| load_report(d)).collect::<Result<Vec<_>>>()?;
    let merged = combine(reports)?;
    write_report_files(out, &merged)?;
    Ok(merged)
}
