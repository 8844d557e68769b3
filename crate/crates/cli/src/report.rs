//! Merging stored run reports into one comparison table.

use std::path::{Path, PathBuf};

use driftcast_core::evaluation::RunReport;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct MergedRow {
    pub series: String,
    pub model: String,
    pub strategy: String,
    pub n: usize,
    pub h: usize,
    pub seed: u64,
    pub rmse: f64,
    pub mae_percent: f64,
    pub mean_time_s: f64,
    pub updates: usize,
    pub warning: String,
}

/// Loads each directory's report.json, in argument order. Mismatched
/// n/h across runs fill the warning column instead of failing.
pub fn merge_reports(run_dirs: &[PathBuf]) -> Result<Vec<MergedRow>, CliError> {
    let mut rows: Vec<MergedRow> = Vec::new();
    for dir in run_dirs {
        let path = dir.join("report.json");
        let text = std::fs::read_to_string(&path).map_err(|e| {
            CliError::Data(format!("cannot read {}: {e}", path.display()))
        })?;
        let report: RunReport<f64> = serde_json::from_str(&text).map_err(|e| {
            CliError::Data(format!("parsing {}: {e}", path.display()))
        })?;
        let warning = match rows.first() {
            Some(first) if (report.config.n, report.config.h) != (first.n, first.h) => {
                format!(
                    "n/h {}x{} differs from first run {}x{}",
                    report.config.n, report.config.h, first.n, first.h
                )
            }
            _ => String::new(),
        };
        rows.push(MergedRow {
            series: report.series_label.clone(),
            model: report.config.model.to_string(),
            strategy: report.config.strategy.to_string(),
            n: report.config.n,
            h: report.config.h,
            seed: report.config.seed,
            rmse: report.metrics.rmse,
            mae_percent: report.metrics.mae_percent,
            mean_time_s: report.metrics.mean_time_s,
            updates: report.updates,
            warning,
        });
    }
    Ok(rows)
}

pub fn write_merged_csv(path: &Path, rows: &[MergedRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Runtime(format!("writing {}: {e}", path.display()));
    w.write_record([
        "series",
        "model",
        "strategy",
        "n",
        "h",
        "seed",
        "rmse",
        "mae_percent",
        "time_s_it",
        "updates",
        "warning",
    ])
    .map_err(io)?;
    for row in rows {
        w.write_record([
            row.series.clone(),
            row.model.clone(),
            row.strategy.clone(),
            row.n.to_string(),
            row.h.to_string(),
            row.seed.to_string(),
            row.rmse.to_string(),
            row.mae_percent.to_string(),
            row.mean_time_s.to_string(),
            row.updates.to_string(),
            row.warning.clone(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

/// Renders the comparison with the usual benchmark headers.
pub fn render_table(rows: &[MergedRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:<12} {:<12} {:>10} {:>8} {:>10} {}\n",
        "Series", "Model", "Strategy", "RMSE", "MAE %", "Time s/it", "Warning"
    ));
    for row in rows {
        out.push_str(&format!(
            "{:<16} {:<12} {:<12} {:>10.5} {:>8.3} {:>10.4} {}\n",
            row.series, row.model, row.strategy, row.rmse, row.mae_percent, row.mean_time_s,
            row.warning
        ));
    }
    out
}
