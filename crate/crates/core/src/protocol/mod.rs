//! The prequential streaming protocol: warm-up, forecast, reveal, update.
//!
//! Each increment reveals exactly one new sample. The engine first scores
//! the forecast it issued at the previous increment against that sample,
//! then trains on a target vector whose first element is the actual and
//! whose tail is the previously extrapolated pseudo targets, and finally
//! issues a fresh forecast. Waiting for all H actuals (the `delayed`
//! strategy) and not updating at all (`frozen`) are available as controls.

mod cursor;

pub use cursor::{SohStream, StreamCursor};

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{build_model, ModelKind, ModelSpec, ModelState, OnlineForecaster};
use crate::pseudo::{generate_pseudo_targets, PseudoMode, PseudoTargets};
use crate::scalar::Scalar;
use crate::series::{window_from_prefix, ForecastVector, SohSeries};

/// Additive floor in the gamma denominator (Eq. for the confidence ratio).
const GAMMA_EPSILON: f64 = 1e-12;

/// How the model is updated as the stream advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Update every increment from one actual plus extrapolated pseudo
    /// targets, at the configured rate.
    Pseudo,
    /// Same targets, but the rate adapts to the ratio of model error to
    /// pseudo-target error.
    PseudoGamma,
    /// Update only once all h actuals for a stored forecast origin are in.
    Delayed,
    /// Never update after warm-up.
    Frozen,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Strategy::Pseudo => "pseudo",
            Strategy::PseudoGamma => "pseudo-gamma",
            Strategy::Delayed => "delayed",
            Strategy::Frozen => "frozen",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pseudo" => Ok(Strategy::Pseudo),
            "pseudo-gamma" => Ok(Strategy::PseudoGamma),
            "delayed" => Ok(Strategy::Delayed),
            "frozen" => Ok(Strategy::Frozen),
            other => Err(Error::invalid(
                "strategy",
                format!("unknown strategy `{other}`; expected pseudo|pseudo-gamma|delayed|frozen"),
            )),
        }
    }
}

/// Whether per-increment wall time is measured.
///
/// Measured times are real and therefore differ between runs; switch to
/// `Off` (all zeros) when byte-identical artifacts matter more than timing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingMode {
    Measured,
    Off,
}

impl Default for TimingMode {
    fn default() -> Self {
        TimingMode::Measured
    }
}

/// Full configuration of one streaming run.
///
/// Field names double as the config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar", default)]
pub struct RunConfig<F: Scalar> {
    /// Input window length N.
    pub n: usize,
    /// Forecast horizon H.
    pub h: usize,
    /// Fraction of the series used for warm-up training.
    pub warmup_fraction: F,
    pub warmup_epochs: usize,
    pub warmup_lr: F,
    /// Base online update rate (eta zero).
    pub eta0: F,
    /// Update calls per increment; values above 1 risk overfitting and are
    /// warned about.
    pub inner_update_epochs: usize,
    pub strategy: Strategy,
    pub pseudo_mode: PseudoMode,
    pub model: ModelKind,
    pub mlp_hidden: usize,
    pub rnn_hidden: usize,
    pub rnn_dropout: F,
    pub seed: u64,
    pub timing: TimingMode,
    /// Optional path to a source series for pretraining; loading is the
    /// caller's job, the path is carried as run metadata.
    pub pretrain_series: Option<String>,
}

impl<F: Scalar> Default for RunConfig<F> {
    fn default() -> Self {
        Self {
            n: 10,
            h: 30,
            warmup_fraction: F::from_f64_lossy(0.25),
            warmup_epochs: 8,
            warmup_lr: F::from_f64_lossy(1e-3),
            eta0: F::from_f64_lossy(1e-5),
            inner_update_epochs: 1,
            strategy: Strategy::Pseudo,
            pseudo_mode: PseudoMode::Literal,
            model: ModelKind::Mlp,
            mlp_hidden: 64,
            rnn_hidden: 50,
            rnn_dropout: F::from_f64_lossy(0.2),
            seed: 42,
            timing: TimingMode::Measured,
            pretrain_series: None,
        }
    }
}

impl<F: Scalar> RunConfig<F> {
    /// Validates every field, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n must be >= 2, got {}", self.n)));
        }
        if self.h < 1 {
            return Err(Error::Config("h must be >= 1".into()));
        }
        let zero = F::zero();
        let one = F::one();
        if !(self.warmup_fraction > zero && self.warmup_fraction < one) {
            return Err(Error::Config(format!(
                "warmup_fraction must be in (0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if self.warmup_epochs < 1 {
            return Err(Error::Config("warmup_epochs must be >= 1".into()));
        }
        if !(self.warmup_lr > zero) {
            return Err(Error::Config(format!(
                "warmup_lr must be positive, got {}",
                self.warmup_lr
            )));
        }
        if !(self.eta0 > zero) {
            return Err(Error::Config(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if self.inner_update_epochs < 1 {
            return Err(Error::Config("inner_update_epochs must be >= 1".into()));
        }
        if self.mlp_hidden == 0 || self.rnn_hidden == 0 {
            return Err(Error::Config("hidden layer sizes must be >= 1".into()));
        }
        if self.rnn_dropout < zero || self.rnn_dropout >= one {
            return Err(Error::Config(format!(
                "rnn_dropout must be in [0, 1), got {}",
                self.rnn_dropout
            )));
        }
        Ok(())
    }

    /// Model-construction view of this config.
    pub fn model_spec(&self) -> ModelSpec<F> {
        ModelSpec {
            kind: self.model,
            n: self.n,
            h: self.h,
            mlp_hidden: self.mlp_hidden,
            rnn_hidden: self.rnn_hidden,
            rnn_dropout: self.rnn_dropout,
            pseudo_mode: self.pseudo_mode,
        }
    }

    /// Warm-up prefix length for a series of `len` samples.
    pub fn warmup_len(&self, len: usize) -> usize {
        (self.warmup_fraction * F::from_usize_lossy(len))
            .floor()
            .to_f64_lossy() as usize
    }
}

/// Everything observed at one increment.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<F: Scalar> {
    /// Series index of the sample revealed this increment.
    pub index: usize,
    /// The revealed sample.
    pub actual: F,
    /// Forecast issued this increment (origin = `index`).
    pub forecast: ForecastVector<F>,
    /// Pseudo targets issued this increment (origin = `index`).
    pub pseudo: PseudoTargets<F>,
    /// Loss of the update performed this increment, if one ran.
    pub loss: Option<F>,
    /// |previous forecast's first element - actual|.
    pub err_inc: F,
    /// |previous pseudo vector's first element - actual|.
    pub err_pseudo: F,
    /// Confidence ratio used this increment (1 at the first increment).
    pub gamma: F,
    /// Learning rate actually used.
    pub eta: F,
    /// Wall time of this increment's forecast + update work, seconds.
    pub wall_time_s: f64,
}

/// Pretraining provenance carried into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PretrainInfo<F: Scalar> {
    pub label: String,
    pub len: usize,
    pub nominal_capacity: F,
    /// Whether source and target nominal capacities match.
    pub nominal_match: bool,
    /// The transfer suitability criteria this hand-off assumes.
    pub criteria: String,
}

/// Criteria a pretraining source is expected to share with the target cell.
pub const PRETRAIN_CRITERIA: &str =
    "same battery chemistry, battery geometry, and nominal capacity";

/// Output of one streaming run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<F: Scalar> {
    pub config: RunConfig<F>,
    pub series_label: String,
    pub series_len: usize,
    pub warmup_len: usize,
    /// (window, next-h) pairs per warm-up epoch.
    pub warmup_pairs: usize,
    /// Model snapshot right after warm-up.
    pub warmup_state: ModelState<F>,
    /// Forecast issued from the warm-up boundary window, before the first
    /// increment.
    pub boundary_forecast: ForecastVector<F>,
    pub boundary_pseudo: PseudoTargets<F>,
    pub records: Vec<StepRecord<F>>,
    pub final_state: ModelState<F>,
    /// Total `update` calls across the whole run (warm-up excluded).
    pub updates: usize,
    pub pretrain: Option<PretrainInfo<F>>,
}

/// Confidence ratio gamma = err_inc / (err_pseudo + epsilon).
pub fn gamma_ratio<F: Scalar>(err_inc: F, err_pseudo: F) -> F {
    err_inc / (err_pseudo + F::from_f64_lossy(GAMMA_EPSILON))
}

/// Gamma-adaptive learning rate: eta0 when the model errs at least as much
/// as the extrapolation (gamma >= 1), otherwise throttled to 0.1 * eta0 * gamma.
pub fn gamma_lr<F: Scalar>(err_inc: F, err_pseudo: F, eta0: F) -> F {
    let gamma = gamma_ratio(err_inc, err_pseudo);
    if gamma >= F::one() {
        eta0
    } else {
        F::from_f64_lossy(0.1) * eta0 * gamma
    }
}

/// Target vector for an incremental update: the newly revealed actual in
/// slot 0, the remaining pseudo targets (which predict the same cycles as
/// the previous forecast's tail) behind it.
pub fn build_update_targets<F: Scalar>(
    x_new: F,
    pseudo: &PseudoTargets<F>,
) -> Result<ForecastVector<F>> {
    let mut values = Vec::with_capacity(pseudo.len());
    values.push(x_new);
    values.extend_from_slice(&pseudo.values()[1..]);
    ForecastVector::new(values, pseudo.origin())
}

/// Trains `model` on every (window, next-h-actuals) pair lying strictly
/// inside `prefix`, for `epochs` epochs at rate `lr`, pair order shuffled
/// each epoch by `rng`. Returns the number of pairs per epoch.
pub fn warmup_train<F: Scalar>(
    model: &mut dyn OnlineForecaster<F>,
    prefix: &[F],
    n: usize,
    h: usize,
    epochs: usize,
    lr: F,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    let required = n + h;
    if prefix.len() < required {
        return Err(Error::InsufficientData {
            required,
            actual: prefix.len(),
            message: format!("warm-up needs at least n + h = {required} samples"),
        });
    }
    // Window ends at e, targets are the h samples after it; both inside the prefix.
    let ends: Vec<usize> = (n - 1..prefix.len() - h).collect();
    let pairs = ends.len();
    let mut order = ends;
    for _ in 0..epochs {
        use rand::seq::SliceRandom;
        order.shuffle(rng);
        for &e in &order {
            let window = window_from_prefix(prefix, e, n)?;
            let targets = ForecastVector::new(prefix[e + 1..=e + h].to_vec(), e)?;
            model.update(&window, &targets, lr)?;
        }
    }
    Ok(pairs)
}

/// Warm-up-style training on a different, fully historical series, for
/// hand-off to a run on a short-lived target cell.
pub fn pretrain_on_other<F: Scalar>(
    model: &mut dyn OnlineForecaster<F>,
    source: &SohSeries<F>,
    config: &RunConfig<F>,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    warmup_train(
        model,
        source.values(),
        config.n,
        config.h,
        config.warmup_epochs,
        config.warmup_lr,
        rng,
    )
}

/// Runs the full protocol: model built from config, stream over `series`.
pub fn run_stream<F: Scalar>(
    config: &RunConfig<F>,
    series: &SohSeries<F>,
) -> Result<RunResult<F>> {
    run_stream_pretrained(config, series, None)
}

/// As [`run_stream`], optionally pretraining on `pretrain` first.
pub fn run_stream_pretrained<F: Scalar>(
    config: &RunConfig<F>,
    series: &SohSeries<F>,
    pretrain: Option<&SohSeries<F>>,
) -> Result<RunResult<F>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = build_model(&config.model_spec(), &mut rng)?;
    let pretrain_info = match pretrain {
        Some(source) => {
            pretrain_on_other(model.as_mut(), source, config, &mut rng)?;
            let nominal_match = source.nominal_capacity() == series.nominal_capacity();
            if !nominal_match {
                log::warn!(
                    "pretraining source `{}` nominal capacity {} differs from target `{}` at {}",
                    source.label(),
                    source.nominal_capacity(),
                    series.label(),
                    series.nominal_capacity()
                );
            }
            Some(PretrainInfo {
                label: source.label().to_string(),
                len: source.len(),
                nominal_capacity: source.nominal_capacity(),
                nominal_match,
                criteria: PRETRAIN_CRITERIA.to_string(),
            })
        }
        None => None,
    };
    let mut cursor = StreamCursor::new(series);
    run_stream_over(
        config,
        &mut cursor,
        model,
        &mut rng,
        series.label().to_string(),
        pretrain_info,
    )
}

/// Lowest-level entry: caller supplies the stream and the (possibly
/// pre-trained or instrumented) model. `rng` drives warm-up shuffling.
pub fn run_stream_over<F: Scalar>(
    config: &RunConfig<F>,
    cursor: &mut dyn SohStream<F>,
    mut model: Box<dyn OnlineForecaster<F>>,
    rng: &mut ChaCha8Rng,
    series_label: String,
    pretrain: Option<PretrainInfo<F>>,
) -> Result<RunResult<F>> {
    config.validate()?;
    if model.input_len() != config.n || model.horizon() != config.h {
        return Err(Error::Config(format!(
            "model is shaped {}x{}, config wants n={} h={}",
            model.input_len(),
            model.horizon(),
            config.n,
            config.h
        )));
    }
    let total = cursor.len();
    let warmup_len = config.warmup_len(total);
    let required = config.n + config.h;
    if warmup_len < required {
        return Err(Error::InsufficientData {
            required,
            actual: warmup_len,
            message: format!(
                "warm-up prefix of {warmup_len} samples (fraction {} of {total}) is shorter than n + h",
                config.warmup_fraction
            ),
        });
    }
    if warmup_len >= total {
        return Err(Error::InsufficientData {
            required: warmup_len + 1,
            actual: total,
            message: "series leaves no samples to stream after warm-up".into(),
        });
    }
    if config.inner_update_epochs > 1 {
        log::warn!(
            "inner_update_epochs = {} re-trains each increment on the same pair; expect overfitting",
            config.inner_update_epochs
        );
    }

    for _ in 0..warmup_len {
        cursor.advance().ok_or_else(|| {
            Error::Internal("stream ended during warm-up despite length check".into())
        })?;
    }
    let warmup_pairs = warmup_train(
        model.as_mut(),
        cursor.revealed(),
        config.n,
        config.h,
        config.warmup_epochs,
        config.warmup_lr,
        rng,
    )?;
    let warmup_state = model.state();

    // Boundary forecast: the previous-step state the first increment scores
    // itself against.
    let boundary_window = window_from_prefix(cursor.revealed(), warmup_len - 1, config.n)?;
    let boundary_forecast = model.forecast(&boundary_window)?;
    let boundary_pseudo = generate_pseudo_targets(&boundary_window, config.h, config.pseudo_mode)?;

    let mut prev_forecast = boundary_forecast.clone();
    let mut prev_pseudo = boundary_pseudo.clone();
    let mut records: Vec<StepRecord<F>> = Vec::with_capacity(total - warmup_len);
    let mut updates = 0usize;

    while let Some(x_new) = cursor.advance() {
        let t = cursor.revealed_count() - 1;
        let first_increment = records.is_empty();
        let started = match config.timing {
            TimingMode::Measured => Some(Instant::now()),
            TimingMode::Off => None,
        };

        let err_inc = (prev_forecast.first() - x_new).abs();
        let err_pseudo = (prev_pseudo.first() - x_new).abs();
        let gamma = if first_increment {
            F::one()
        } else {
            gamma_ratio(err_inc, err_pseudo)
        };
        let eta = match config.strategy {
            Strategy::PseudoGamma if !first_increment => gamma_lr(err_inc, err_pseudo, config.eta0),
            _ => config.eta0,
        };

        let loss = match config.strategy {
            Strategy::Pseudo | Strategy::PseudoGamma => {
                let targets = build_update_targets(x_new, &prev_pseudo)?;
                let prev_window = window_from_prefix(cursor.revealed(), t - 1, config.n)?;
                let mut first_loss = None;
                for _ in 0..config.inner_update_epochs {
                    let l = model.update(&prev_window, &targets, eta)?;
                    updates += 1;
                    first_loss.get_or_insert(l);
                }
                first_loss
            }
            Strategy::Delayed => {
                // Origin t - h just became fully labeled; train on its
                // window against the h actuals that followed it.
                if t >= warmup_len - 1 + config.h {
                    let origin = t - config.h;
                    let window = window_from_prefix(cursor.revealed(), origin, config.n)?;
                    let targets = ForecastVector::new(
                        cursor.revealed()[origin + 1..=origin + config.h].to_vec(),
                        origin,
                    )?;
                    let mut first_loss = None;
                    for _ in 0..config.inner_update_epochs {
                        let l = model.update(&window, &targets, config.eta0)?;
                        updates += 1;
                        first_loss.get_or_insert(l);
                    }
                    first_loss
                } else {
                    None
                }
            }
            Strategy::Frozen => None,
        };

        let new_window = window_from_prefix(cursor.revealed(), t, config.n)?;
        let forecast = model.forecast(&new_window)?;
        let pseudo = generate_pseudo_targets(&new_window, config.h, config.pseudo_mode)?;

        let wall_time_s = started.map(|s| s.elapsed().as_secs_f64()).unwrap_or(0.0);

        records.push(StepRecord {
            index: t,
            actual: x_new,
            forecast: forecast.clone(),
            pseudo: pseudo.clone(),
            loss,
            err_inc,
            err_pseudo,
            gamma,
            eta,
            wall_time_s,
        });
        prev_forecast = forecast;
        prev_pseudo = pseudo;
    }

    debug_assert_eq!(records.len(), total - warmup_len);
    Ok(RunResult {
        config: config.clone(),
        series_label,
        series_len: total,
        warmup_len,
        warmup_pairs,
        warmup_state,
        boundary_forecast,
        boundary_pseudo,
        records,
        final_state: model.state(),
        updates,
        pretrain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::mse_loss;
    use approx::assert_abs_diff_eq;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn linear_series(len: usize) -> SohSeries<f64> {
        let values = (0..len).map(|t| 1.0 - 0.0004 * t as f64).collect();
        SohSeries::new((0..len as u32).collect(), values, 1.0, "linear").unwrap()
    }

    fn small_config() -> RunConfig<f64> {
        RunConfig {
            n: 4,
            h: 3,
            mlp_hidden: 8,
            timing: TimingMode::Off,
            ..RunConfig::default()
        }
    }

    /// Wrapper that counts update calls and remembers each first target.
    struct CountingModel {
        inner: Box<dyn OnlineForecaster<f64>>,
        update_count: Arc<AtomicUsize>,
        first_targets: Arc<std::sync::Mutex<Vec<f64>>>,
    }

    impl OnlineForecaster<f64> for CountingModel {
        fn kind(&self) -> ModelKind {
            self.inner.kind()
        }
        fn input_len(&self) -> usize {
            self.inner.input_len()
        }
        fn horizon(&self) -> usize {
            self.inner.horizon()
        }
        fn forecast(&self, window: &crate::series::Window<f64>) -> Result<ForecastVector<f64>> {
            self.inner.forecast(window)
        }
        fn update(
            &mut self,
            window: &crate::series::Window<f64>,
            targets: &ForecastVector<f64>,
            lr: f64,
        ) -> Result<f64> {
            self.update_count.fetch_add(1, Ordering::SeqCst);
            self.first_targets.lock().unwrap().push(targets.first());
            self.inner.update(window, targets, lr)
        }
        fn state(&self) -> ModelState<f64> {
            self.inner.state()
        }
    }

    #[test]
    fn gamma_lr_matches_worked_examples() {
        assert_abs_diff_eq!(gamma_lr(2e-3, 1e-3, 1e-5), 1e-5, epsilon = 1e-20);
        assert_abs_diff_eq!(gamma_lr(5e-4, 1e-3, 1e-5), 5e-7, epsilon = 5e-13);
        // Zero pseudo error: the epsilon floor keeps gamma finite and large.
        assert_abs_diff_eq!(gamma_lr(1e-3, 0.0, 1e-5), 1e-5, epsilon = 1e-20);
        assert!(gamma_ratio(1e-3_f64, 0.0).is_finite());
    }

    #[test]
    fn update_targets_replace_the_first_pseudo_with_the_actual() {
        let w = crate::series::Window::new(vec![0.93, 0.92, 0.91], 10).unwrap();
        let z = generate_pseudo_targets(&w, 3, PseudoMode::Literal).unwrap();
        let t = build_update_targets(0.905, &z).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.values()[0], 0.905);
        assert_eq!(t.values()[1..], z.values()[1..]);
        assert_eq!(t.origin(), 10);
    }

    #[test]
    fn update_targets_worked_example_loss() {
        let t = vec![0.91, 0.895, 0.885];
        let loss = mse_loss(&[0.9, 0.89, 0.88], &t).unwrap();
        assert_abs_diff_eq!(loss, 5e-5, epsilon = 1e-15);
    }

    #[test]
    fn h_equals_one_targets_reduce_to_the_actual() {
        let w = crate::series::Window::new(vec![0.93, 0.92, 0.91], 5).unwrap();
        let z = generate_pseudo_targets(&w, 1, PseudoMode::Literal).unwrap();
        let t = build_update_targets(0.9, &z).unwrap();
        assert_eq!(t.values(), &[0.9]);
    }

    #[test]
    fn warmup_pair_count_matches_the_arithmetic() {
        // 100 samples, n=10, h=30: windows end at 9..=69, 61 pairs.
        let prefix: Vec<f64> = (0..100).map(|t| 1.0 - 0.001 * t as f64).collect();
        let mut model = build_model::<f64, _>(
            &RunConfig { n: 10, h: 30, ..small_config() }.model_spec(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs =
            warmup_train(model.as_mut(), &prefix, 10, 30, 1, 1e-3, &mut rng).unwrap();
        assert_eq!(pairs, 61);
    }

    #[test]
    fn warmup_needs_n_plus_h_samples() {
        let prefix: Vec<f64> = (0..6).map(|t| 1.0 - 0.001 * t as f64).collect();
        let mut model = build_model::<f64, _>(
            &small_config().model_spec(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = warmup_train(model.as_mut(), &prefix, 4, 3, 1, 1e-3, &mut rng).unwrap_err();
        match err {
            Error::InsufficientData { required, actual, .. } => {
                assert_eq!(required, 7);
                assert_eq!(actual, 6);
            }
            other => panic!("expected InsufficientData, got {other}"),
        }
        // Exactly n + h trains on a single pair.
        let prefix: Vec<f64> = (0..7).map(|t| 1.0 - 0.001 * t as f64).collect();
        let mut model = build_model::<f64, _>(
            &small_config().model_spec(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let pairs = warmup_train(model.as_mut(), &prefix, 4, 3, 1, 1e-3, &mut rng).unwrap();
        assert_eq!(pairs, 1);
    }

    #[test]
    fn record_count_is_series_minus_warmup() {
        let series = linear_series(100);
        let result = run_stream(&small_config(), &series).unwrap();
        assert_eq!(result.warmup_len, 25);
        assert_eq!(result.records.len(), 75);
        assert_eq!(result.records[0].index, 25);
        assert_eq!(result.records.last().unwrap().index, 99);
    }

    #[test]
    fn too_short_series_is_rejected_with_the_minimum_named() {
        let series = linear_series(20);
        let config = RunConfig { n: 10, h: 30, ..small_config() };
        let err = run_stream(&config, &series).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { required: 40, .. }), "{err}");
    }

    #[test]
    fn identical_config_and_seed_reproduce_every_record() {
        let series = linear_series(60);
        let config = small_config();
        let a = run_stream(&config, &series).unwrap();
        let b = run_stream(&config, &series).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.final_state, b.final_state);
        let c = run_stream(&RunConfig { seed: 7, ..config }, &series).unwrap();
        assert_ne!(a.final_state, c.final_state);
    }

    #[test]
    fn first_increment_uses_gamma_one_and_eta0() {
        let series = linear_series(60);
        let config = RunConfig { strategy: Strategy::PseudoGamma, ..small_config() };
        let result = run_stream(&config, &series).unwrap();
        let first = &result.records[0];
        assert_eq!(first.gamma, 1.0);
        assert_eq!(first.eta, config.eta0);
    }

    #[test]
    fn pseudo_strategy_keeps_eta_at_eta0_gamma_strategy_caps_it() {
        let series = linear_series(80);
        let plain = run_stream(&small_config(), &series).unwrap();
        assert!(plain.records.iter().all(|r| r.eta == plain.config.eta0));

        let gamma_cfg = RunConfig { strategy: Strategy::PseudoGamma, ..small_config() };
        let gated = run_stream(&gamma_cfg, &series).unwrap();
        assert!(gated
            .records
            .iter()
            .all(|r| r.eta > 0.0 && r.eta <= gamma_cfg.eta0));
        assert_eq!(gated.updates, gated.records.len());
    }

    #[test]
    fn frozen_strategy_never_updates_and_keeps_weights() {
        let series = linear_series(60);
        let config = RunConfig { strategy: Strategy::Frozen, ..small_config() };
        let result = run_stream(&config, &series).unwrap();
        assert_eq!(result.updates, 0);
        assert_eq!(result.final_state, result.warmup_state);
        assert!(result.records.iter().all(|r| r.loss.is_none()));
        // Forecasts are still emitted each increment.
        assert!(result.records.iter().all(|r| r.forecast.len() == config.h));
    }

    #[test]
    fn delayed_strategy_waits_h_increments_then_updates_every_step() {
        let series = linear_series(60);
        let config = RunConfig { strategy: Strategy::Delayed, ..small_config() };

        let count = Arc::new(AtomicUsize::new(0));
        let firsts = Arc::new(std::sync::Mutex::new(Vec::new()));
        let inner = build_model::<f64, _>(
            &config.model_spec(),
            &mut ChaCha8Rng::seed_from_u64(config.seed),
        )
        .unwrap();
        let model = Box::new(CountingModel {
            inner,
            update_count: Arc::clone(&count),
            first_targets: Arc::clone(&firsts),
        });
        let mut cursor = StreamCursor::new(&series);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let result = run_stream_over(
            &config,
            &mut cursor,
            model,
            &mut rng,
            "linear".into(),
            None,
        )
        .unwrap();

        // Warm-up pairs also pass through update; isolate streaming updates.
        let warmup_updates = result.warmup_pairs * config.warmup_epochs;
        let streaming_updates = count.load(Ordering::SeqCst) - warmup_updates;
        // h - 1 waiting increments, then one update per increment.
        assert_eq!(streaming_updates, result.records.len() - (config.h - 1));
        assert_eq!(result.updates, streaming_updates);
        for r in &result.records[..config.h - 1] {
            assert!(r.loss.is_none());
        }
        for r in &result.records[config.h - 1..] {
            assert!(r.loss.is_some());
            assert_eq!(r.eta, config.eta0);
        }
        // The first delayed update trains the warm-up boundary window.
        let first_target = firsts.lock().unwrap()[warmup_updates];
        assert_eq!(first_target, series.values()[result.warmup_len]);
    }

    #[test]
    fn each_sample_is_the_actual_target_exactly_once_under_pseudo() {
        let series = linear_series(60);
        let config = small_config();
        let count = Arc::new(AtomicUsize::new(0));
        let firsts = Arc::new(std::sync::Mutex::new(Vec::new()));
        let inner = build_model::<f64, _>(
            &config.model_spec(),
            &mut ChaCha8Rng::seed_from_u64(config.seed),
        )
        .unwrap();
        let model = Box::new(CountingModel {
            inner,
            update_count: Arc::clone(&count),
            first_targets: Arc::clone(&firsts),
        });
        let mut cursor = StreamCursor::new(&series);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let result = run_stream_over(
            &config,
            &mut cursor,
            model,
            &mut rng,
            "linear".into(),
            None,
        )
        .unwrap();

        let warmup_updates = result.warmup_pairs * config.warmup_epochs;
        let firsts = firsts.lock().unwrap();
        let streamed: Vec<f64> = firsts[warmup_updates..].to_vec();
        let expected: Vec<f64> = series.values()[result.warmup_len..].to_vec();
        assert_eq!(streamed, expected);
    }

    #[test]
    fn timing_off_zeroes_wall_time_measured_does_not() {
        let series = linear_series(60);
        let off = run_stream(&small_config(), &series).unwrap();
        assert!(off.records.iter().all(|r| r.wall_time_s == 0.0));
        let measured = run_stream(
            &RunConfig { timing: TimingMode::Measured, ..small_config() },
            &series,
        )
        .unwrap();
        assert!(measured.records.iter().any(|r| r.wall_time_s > 0.0));
    }

    #[test]
    fn config_validation_names_the_bad_key() {
        let bad = RunConfig::<f64> { eta0: 0.0, ..RunConfig::default() };
        let err = bad.validate().unwrap_err();
        assert!(err.to_string().contains("eta0"), "{err}");
        assert!(RunConfig::<f64> { n: 1, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig::<f64> { warmup_fraction: 1.0, ..RunConfig::default() }
            .validate()
            .is_err());
        assert!(RunConfig::<f64> { inner_update_epochs: 0, ..RunConfig::default() }
            .validate()
            .is_err());
    }

    #[test]
    fn pretrained_run_records_provenance() {
        let target = linear_series(60);
        let source = SohSeries::new(
            (0..80u32).collect(),
            (0..80).map(|t| 0.98 - 0.0005 * t as f64).collect(),
            1.0,
            "source-cell",
        )
        .unwrap();
        let config = small_config();
        let result = run_stream_pretrained(&config, &target, Some(&source)).unwrap();
        let info = result.pretrain.unwrap();
        assert_eq!(info.label, "source-cell");
        assert!(info.nominal_match);
        assert_eq!(info.criteria, PRETRAIN_CRITERIA);
        // Pretraining changes where warm-up starts from, hence the outcome.
        let plain = run_stream(&config, &target).unwrap();
        assert_ne!(plain.final_state, result.final_state);
    }
}
