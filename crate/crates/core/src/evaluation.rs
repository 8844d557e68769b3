//! Post-hoc metrics, trace/report artifacts, and sensitivity sweeps.
//!
//! Evaluation is the one place allowed to see the whole series at once:
//! a finished run is scored against every actual that its forecasts
//! eventually predicted, including the truncated tails near the series end.

use std::fs::File;
use std::io::{BufWriter, Write as IoWrite};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::ModelKind;
use crate::protocol::{run_stream, PretrainInfo, RunConfig, RunResult, StepRecord};
use crate::scalar::Scalar;
use crate::series::SohSeries;

/// Root mean squared error over paired sequences.
pub fn rmse<F: Scalar>(pred: &[F], actual: &[F]) -> Result<F> {
    check_pair(pred, actual)?;
    let mut acc = F::zero();
    for (p, a) in pred.iter().zip(actual) {
        let d = *p - *a;
        acc += d * d;
    }
    Ok((acc / F::from_usize_lossy(pred.len())).sqrt())
}

/// Mean absolute error over paired sequences.
pub fn mae<F: Scalar>(pred: &[F], actual: &[F]) -> Result<F> {
    check_pair(pred, actual)?;
    let mut acc = F::zero();
    for (p, a) in pred.iter().zip(actual) {
        acc += (*p - *a).abs();
    }
    Ok(acc / F::from_usize_lossy(pred.len()))
}

fn check_pair<F: Scalar>(pred: &[F], actual: &[F]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(Error::invalid(
            "pred",
            format!("length {} does not match actual length {}", pred.len(), actual.len()),
        ));
    }
    if pred.is_empty() {
        return Err(Error::invalid("pred", "sequences must be nonempty"));
    }
    Ok(())
}

/// One point of the H-th-step trace: the forecast made H increments before
/// `index`, against what actually arrived there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct HStepPoint<F: Scalar> {
    pub index: usize,
    pub actual: F,
    pub pred: F,
}

/// Post-hoc accuracy and timing summary of one run.
///
/// The headline `rmse`/`mae` aggregate every (origin, horizon) pair whose
/// target lies inside the series; `hstep_rmse`/`hstep_mae` score only the
/// H-th forecast step, the curve usually plotted. `mae_percent` is the MAE
/// expressed in SoH percentage points (100x the fraction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct MetricsReport<F: Scalar> {
    pub rmse: F,
    pub mae: F,
    pub mae_percent: F,
    /// Number of (origin, horizon) pairs aggregated.
    pub pairs: usize,
    pub hstep_rmse: Option<F>,
    pub hstep_mae: Option<F>,
    /// Index j-1 holds the RMSE of forecast step j; None when the stream
    /// was too short to ever realize that horizon.
    pub per_horizon_rmse: Vec<Option<F>>,
    pub hstep_trace: Vec<HStepPoint<F>>,
    /// Absolute error of each realized next-step prediction, in record order.
    pub abs_err_next: Vec<F>,
    pub mean_time_s: f64,
    pub median_time_s: f64,
}

/// Everything report.json carries: config snapshot plus metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct RunReport<F: Scalar> {
    pub config: RunConfig<F>,
    pub series_label: String,
    pub series_len: usize,
    pub warmup_len: usize,
    pub updates: usize,
    pub pretrain: Option<PretrainInfo<F>>,
    pub metrics: MetricsReport<F>,
}

/// Scores a finished run against the full series.
///
/// Every forecast element predicting an index that exists contributes one
/// pair; tails reaching past the end are truncated, not dropped. The
/// result is a pure function of the record set: records are re-sorted by
/// index before aggregation.
pub fn posthoc_evaluate<F: Scalar>(
    result: &RunResult<F>,
    series: &SohSeries<F>,
) -> Result<MetricsReport<F>> {
    if series.len() != result.series_len {
        return Err(Error::invalid(
            "series",
            format!(
                "length {} does not match the run's recorded length {}",
                series.len(),
                result.series_len
            ),
        ));
    }
    let mut records: Vec<&StepRecord<F>> = result.records.iter().collect();
    records.sort_by_key(|r| r.index);
    let h = result.config.h;
    let values = series.values();

    let mut preds: Vec<F> = Vec::new();
    let mut actuals: Vec<F> = Vec::new();
    let mut per_horizon: Vec<(Vec<F>, Vec<F>)> = vec![(Vec::new(), Vec::new()); h];
    let mut hstep_trace: Vec<HStepPoint<F>> = Vec::new();
    let mut abs_err_next: Vec<F> = Vec::new();

    for record in &records {
        let t = record.index;
        for (offset, &p) in record.forecast.values().iter().enumerate() {
            let j = offset + 1;
            let target = t + j;
            if target >= values.len() {
                break;
            }
            let a = values[target];
            preds.push(p);
            actuals.push(a);
            per_horizon[offset].0.push(p);
            per_horizon[offset].1.push(a);
            if j == 1 {
                abs_err_next.push((p - a).abs());
            }
            if j == h {
                hstep_trace.push(HStepPoint { index: target, actual: a, pred: p });
            }
        }
    }
    if preds.is_empty() {
        return Err(Error::InsufficientData {
            required: 2,
            actual: records.len(),
            message: "no forecast ever met an actual; stream too short to evaluate".into(),
        });
    }

    let overall_rmse = rmse(&preds, &actuals)?;
    let overall_mae = mae(&preds, &actuals)?;
    let per_horizon_rmse = per_horizon
        .iter()
        .map(|(p, a)| if p.is_empty() { Ok(None) } else { rmse(p, a).map(Some) })
        .collect::<Result<Vec<_>>>()?;
    let (hstep_rmse, hstep_mae) = if hstep_trace.is_empty() {
        (None, None)
    } else {
        let hp: Vec<F> = hstep_trace.iter().map(|p| p.pred).collect();
        let ha: Vec<F> = hstep_trace.iter().map(|p| p.actual).collect();
        (Some(rmse(&hp, &ha)?), Some(mae(&hp, &ha)?))
    };

    let times: Vec<f64> = records.iter().map(|r| r.wall_time_s).collect();
    Ok(MetricsReport {
        rmse: overall_rmse,
        mae: overall_mae,
        mae_percent: F::from_f64_lossy(100.0) * overall_mae,
        pairs: preds.len(),
        hstep_rmse,
        hstep_mae,
        per_horizon_rmse,
        hstep_trace,
        abs_err_next,
        mean_time_s: mean(&times),
        median_time_s: median(&times),
    })
}

/// Assembles the report.json payload for a finished run.
pub fn build_report<F: Scalar>(
    result: &RunResult<F>,
    series: &SohSeries<F>,
) -> Result<RunReport<F>> {
    let metrics = posthoc_evaluate(result, series)?;
    Ok(RunReport {
        config: result.config.clone(),
        series_label: result.series_label.clone(),
        series_len: result.series_len,
        warmup_len: result.warmup_len,
        updates: result.updates,
        pretrain: result.pretrain.clone(),
        metrics,
    })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("wall times are finite"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

/// Which config field a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    N,
    H,
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepAxis::N => write!(f, "n"),
            SweepAxis::H => write!(f, "h"),
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" | "N" => Ok(SweepAxis::N),
            "h" | "H" => Ok(SweepAxis::H),
            other => Err(Error::invalid("axis", format!("unknown sweep axis `{other}`; expected n or h"))),
        }
    }
}

/// One sweep cell's outcome: metrics, or the error that cell hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SweepRow<F: Scalar> {
    pub model: ModelKind,
    pub value: usize,
    pub metrics: Option<MetricsReport<F>>,
    pub error: Option<String>,
}

/// Grid of runs across one axis, all models sharing the base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SweepTable<F: Scalar> {
    pub axis: SweepAxis,
    pub grid: Vec<usize>,
    pub seed: u64,
    /// Model-major: all grid values for the first model, then the next.
    pub rows: Vec<SweepRow<F>>,
}

/// Runs one full stream per (model, grid value) cell, identical seeds
/// everywhere, cells in parallel up to `jobs` workers (available
/// parallelism when None). A failing cell records its error and leaves
/// the rest of the table intact.
pub fn sweep<F: Scalar>(
    base: &RunConfig<F>,
    axis: SweepAxis,
    grid: &[usize],
    models: &[ModelKind],
    series: &SohSeries<F>,
    jobs: Option<usize>,
) -> Result<SweepTable<F>> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "sweep grid must be nonempty"));
    }
    if models.is_empty() {
        return Err(Error::invalid("models", "sweep needs at least one model"));
    }
    let cells: Vec<(ModelKind, usize)> = models
        .iter()
        .flat_map(|&m| grid.iter().map(move |&v| (m, v)))
        .collect();
    let slots: Mutex<Vec<Option<SweepRow<F>>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    let workers = jobs
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1)
        })
        .min(cells.len())
        .max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let (model, value) = cells[i];
                let mut config = base.clone();
                config.model = model;
                match axis {
                    SweepAxis::N => config.n = value,
                    SweepAxis::H => config.h = value,
                }
                let row = match run_stream(&config, series)
                    .and_then(|result| posthoc_evaluate(&result, series))
                {
                    Ok(metrics) => SweepRow { model, value, metrics: Some(metrics), error: None },
                    Err(e) => SweepRow { model, value, metrics: None, error: Some(e.to_string()) },
                };
                slots.lock().expect("sweep worker panicked")[i] = Some(row);
            });
        }
    });

    let rows = slots
        .into_inner()
        .expect("sweep worker panicked")
        .into_iter()
        .map(|slot| slot.expect("every sweep cell filled"))
        .collect();
    Ok(SweepTable { axis, grid: grid.to_vec(), seed: base.seed, rows })
}

/// Writes the per-increment trace table.
///
/// Schema: one `# seed: <seed>` comment line, a header, then one row per
/// increment with columns increment, actual, next_step_pred, hstep_pred,
/// abs_err_next, gamma, eta, loss, time_s. `next_step_pred` is what the
/// previous increment (or the warm-up boundary, for the first row)
/// predicted for this row's sample; `hstep_pred` is what the forecast H
/// increments back predicted for it, empty while no such forecast exists.
/// Losses are empty on increments that performed no update.
pub fn write_traces_csv<F: Scalar>(path: &Path, result: &RunResult<F>) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_traces(file, result)
}

fn write_traces<F: Scalar, W: IoWrite>(mut out: W, result: &RunResult<F>) -> Result<()> {
    writeln!(out, "# seed: {}", result.config.seed)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "increment",
        "actual",
        "next_step_pred",
        "hstep_pred",
        "abs_err_next",
        "gamma",
        "eta",
        "loss",
        "time_s",
    ])
    .map_err(csv_err)?;

    let h = result.config.h;
    let boundary_origin = result.warmup_len - 1;
    let forecast_at = |origin: usize| {
        if origin == boundary_origin {
            Some(&result.boundary_forecast)
        } else if origin > boundary_origin {
            result.records.get(origin - result.warmup_len).map(|r| &r.forecast)
        } else {
            None
        }
    };

    for record in &result.records {
        let t = record.index;
        let next_step = forecast_at(t - 1)
            .map(|f| f.first().to_string())
            .unwrap_or_default();
        let hstep = t
            .checked_sub(h)
            .and_then(forecast_at)
            .map(|f| f.values()[h - 1].to_string())
            .unwrap_or_default();
        w.write_record([
            t.to_string(),
            record.actual.to_string(),
            next_step,
            hstep,
            record.err_inc.to_string(),
            record.gamma.to_string(),
            record.eta.to_string(),
            record.loss.map(|l| l.to_string()).unwrap_or_default(),
            record.wall_time_s.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes report.json: the [`RunReport`] as pretty-printed JSON.
pub fn write_report_json<F: Scalar>(path: &Path, report: &RunReport<F>) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, report)
        .map_err(|e| Error::Data(format!("serializing report: {e}")))?;
    writeln!(file)?;
    Ok(())
}

/// Writes the sweep summary table.
///
/// Schema: `# seed:` comment line, then columns model, axis name, rmse,
/// mae, mae_percent, hstep_rmse, pairs, mean_time_s, median_time_s, error.
/// Failed cells leave the metric columns empty and fill `error`.
pub fn write_sweep_csv<F: Scalar>(path: &Path, table: &SweepTable<F>) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# seed: {}", table.seed)?;
    let mut w = csv::Writer::from_writer(file);
    let axis_name = table.axis.to_string();
    w.write_record([
        "model",
        axis_name.as_str(),
        "rmse",
        "mae",
        "mae_percent",
        "hstep_rmse",
        "pairs",
        "mean_time_s",
        "median_time_s",
        "error",
    ])
    .map_err(csv_err)?;
    for row in &table.rows {
        let m = row.metrics.as_ref();
        w.write_record([
            row.model.to_string(),
            row.value.to_string(),
            m.map(|m| m.rmse.to_string()).unwrap_or_default(),
            m.map(|m| m.mae.to_string()).unwrap_or_default(),
            m.map(|m| m.mae_percent.to_string()).unwrap_or_default(),
            m.and_then(|m| m.hstep_rmse).map(|v| v.to_string()).unwrap_or_default(),
            m.map(|m| m.pairs.to_string()).unwrap_or_default(),
            m.map(|m| m.mean_time_s.to_string()).unwrap_or_default(),
            m.map(|m| m.median_time_s.to_string()).unwrap_or_default(),
            row.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("writing csv: {e}"))
}
