//! Online multistep forecasters and their shared contract.
//!
//! Every model consumes a fixed-length window of recent SoH values and emits
//! an H-step forecast. `update` applies exactly one optimizer step toward a
//! target vector and returns the loss measured before stepping, so the same
//! call drives warm-up training, streaming updates, and loss telemetry.

mod baseline;
mod mlp;
mod optim;
mod rnn;

pub use baseline::{PersistenceForecaster, WindowedLinearForecaster};
pub use mlp::{MlpForecaster, MlpState};
pub use optim::{exponential_lr, Adam, AdamHyper, SgdHyper, SgdMomentum};
pub use rnn::{RnnForecaster, RnnState};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudo::PseudoMode;
use crate::scalar::Scalar;
use crate::series::{ForecastVector, Window};

/// Which forecaster to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Mlp,
    Rnn,
    Persistence,
    /// Windowed line fit extrapolation, identical math to the pseudo-target
    /// generator.
    #[serde(rename = "linear")]
    WindowedLinear,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Rnn => "rnn",
            ModelKind::Persistence => "persistence",
            ModelKind::WindowedLinear => "linear",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "rnn" => Ok(ModelKind::Rnn),
            "persistence" => Ok(ModelKind::Persistence),
            "linear" | "windowed-linear" => Ok(ModelKind::WindowedLinear),
            other => Err(Error::invalid(
                "model",
                format!("unknown model `{other}`; expected mlp|rnn|persistence|linear"),
            )),
        }
    }
}

/// A forecaster that can be queried and incrementally trained online.
pub trait OnlineForecaster<F: Scalar>: Send {
    fn kind(&self) -> ModelKind;

    /// Window length N the model expects.
    fn input_len(&self) -> usize;

    /// Forecast horizon H the model emits.
    fn horizon(&self) -> usize;

    /// Deterministic multistep forecast from the current weights.
    fn forecast(&self, window: &Window<F>) -> Result<ForecastVector<F>>;

    /// Applies exactly one optimizer step toward `targets` at rate `lr` and
    /// returns the MSE loss measured before the step. `lr = 0` must leave
    /// weights bit-identical.
    fn update(&mut self, window: &Window<F>, targets: &ForecastVector<F>, lr: F) -> Result<F>;

    /// Snapshot of parameters, optimizer moments, and step count.
    fn state(&self) -> ModelState<F>;
}

/// Serializable model snapshot for checkpoint hand-off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", bound = "F: Scalar")]
pub enum ModelState<F: Scalar> {
    Mlp(MlpState<F>),
    Rnn(RnnState<F>),
    Persistence {
        n: usize,
        h: usize,
    },
    #[serde(rename = "linear")]
    WindowedLinear {
        n: usize,
        h: usize,
        mode: PseudoMode,
    },
}

/// Everything needed to construct a fresh model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<F: Scalar> {
    pub kind: ModelKind,
    pub n: usize,
    pub h: usize,
    pub mlp_hidden: usize,
    pub rnn_hidden: usize,
    pub rnn_dropout: F,
    pub pseudo_mode: PseudoMode,
}

/// Builds a fresh model, drawing any initial weights from `rng`.
pub fn build_model<F: Scalar, R: Rng>(
    spec: &ModelSpec<F>,
    rng: &mut R,
) -> Result<Box<dyn OnlineForecaster<F>>> {
    Ok(match spec.kind {
        ModelKind::Mlp => Box::new(MlpForecaster::new(spec.n, spec.mlp_hidden, spec.h, rng)?),
        ModelKind::Rnn => Box::new(RnnForecaster::new(
            spec.n,
            spec.rnn_hidden,
            spec.h,
            spec.rnn_dropout,
            rng,
        )?),
        ModelKind::Persistence => Box::new(PersistenceForecaster::new(spec.n, spec.h)?),
        ModelKind::WindowedLinear => {
            Box::new(WindowedLinearForecaster::new(spec.n, spec.h, spec.pseudo_mode)?)
        }
    })
}

/// Reconstructs a model from a snapshot.
pub fn restore_model<F: Scalar>(state: &ModelState<F>) -> Result<Box<dyn OnlineForecaster<F>>> {
    Ok(match state {
        ModelState::Mlp(s) => Box::new(MlpForecaster::from_state(s.clone())?),
        ModelState::Rnn(s) => Box::new(RnnForecaster::from_state(s.clone())?),
        ModelState::Persistence { n, h } => Box::new(PersistenceForecaster::new(*n, *h)?),
        ModelState::WindowedLinear { n, h, mode } => {
            Box::new(WindowedLinearForecaster::new(*n, *h, *mode)?)
        }
    })
}

/// Mean squared error between a prediction and a target vector.
pub fn mse_loss<F: Scalar>(pred: &[F], target: &[F]) -> Result<F> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::invalid(
            "target",
            format!(
                "prediction/target lengths must match and be nonzero, got {} and {}",
                pred.len(),
                target.len()
            ),
        ));
    }
    let mut acc = F::zero();
    for (p, t) in pred.iter().zip(target) {
        let d = *p - *t;
        acc += d * d;
    }
    Ok(acc / F::from_usize_lossy(pred.len()))
}

/// Uniform init in +/- bound, drawn in f64 space for width-stable streams.
pub(crate) fn uniform_init<F: Scalar, R: Rng>(rng: &mut R, len: usize, bound: f64) -> Vec<F> {
    (0..len)
        .map(|_| F::from_f64_lossy((rng.gen::<f64>() * 2.0 - 1.0) * bound))
        .collect()
}

pub(crate) fn check_window<F: Scalar>(expected: usize, window: &Window<F>) -> Result<()> {
    if window.len() != expected {
        return Err(Error::Config(format!(
            "model expects window length {expected}, got {}",
            window.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_targets<F: Scalar>(expected: usize, targets: &ForecastVector<F>) -> Result<()> {
    if targets.len() != expected {
        return Err(Error::Config(format!(
            "model emits horizon {expected}, got target length {}",
            targets.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mse_loss_matches_hand_arithmetic() {
        // (0.01^2 + 0.005^2 + 0.005^2) / 3 = 5e-5
        let loss = mse_loss(&[0.9, 0.89, 0.88], &[0.91, 0.895, 0.885]).unwrap();
        assert_abs_diff_eq!(loss, 5e-5, epsilon = 1e-15);
    }

    #[test]
    fn mse_loss_rejects_mismatched_lengths() {
        assert!(mse_loss(&[0.9], &[0.9, 0.8]).is_err());
        assert!(mse_loss::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn model_kind_parses_cli_names() {
        assert_eq!("mlp".parse::<ModelKind>().unwrap(), ModelKind::Mlp);
        assert_eq!("linear".parse::<ModelKind>().unwrap(), ModelKind::WindowedLinear);
        assert_eq!(
            "windowed-linear".parse::<ModelKind>().unwrap(),
            ModelKind::WindowedLinear
        );
        assert!("arima".parse::<ModelKind>().is_err());
    }
}
