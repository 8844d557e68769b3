//! Training-free reference forecasters.

use super::{check_targets, check_window, mse_loss, ModelKind, ModelState, OnlineForecaster};
use crate::error::{Error, Result};
use crate::pseudo::{generate_pseudo_targets, PseudoMode};
use crate::scalar::Scalar;
use crate::series::{ForecastVector, Window};

/// Repeats the newest window value across the whole horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceForecaster {
    n: usize,
    h: usize,
}

impl PersistenceForecaster {
    pub fn new(n: usize, h: usize) -> Result<Self> {
        if n < 2 || h == 0 {
            return Err(Error::invalid(
                "n",
                format!("need n >= 2 and h >= 1, got n={n} h={h}"),
            ));
        }
        Ok(Self { n, h })
    }
}

impl<F: Scalar> OnlineForecaster<F> for PersistenceForecaster {
    fn kind(&self) -> ModelKind {
        ModelKind::Persistence
    }

    fn input_len(&self) -> usize {
        self.n
    }

    fn horizon(&self) -> usize {
        self.h
    }

    fn forecast(&self, window: &Window<F>) -> Result<ForecastVector<F>> {
        check_window(self.n, window)?;
        ForecastVector::new(vec![window.last(); self.h], window.origin())
    }

    /// No trainable state: reports the loss and changes nothing.
    fn update(&mut self, window: &Window<F>, targets: &ForecastVector<F>, _lr: F) -> Result<F> {
        check_targets(self.h, targets)?;
        let f: ForecastVector<F> = self.forecast(window)?;
        mse_loss(f.values(), targets.values())
    }

    fn state(&self) -> ModelState<F> {
        ModelState::Persistence { n: self.n, h: self.h }
    }
}

/// Extrapolates the clamped window line fit: by construction identical to
/// the pseudo-target generator on the same window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedLinearForecaster {
    n: usize,
    h: usize,
    mode: PseudoMode,
}

impl WindowedLinearForecaster {
    pub fn new(n: usize, h: usize, mode: PseudoMode) -> Result<Self> {
        if n < 2 || h == 0 {
            return Err(Error::invalid(
                "n",
                format!("need n >= 2 and h >= 1, got n={n} h={h}"),
            ));
        }
        Ok(Self { n, h, mode })
    }
}

impl<F: Scalar> OnlineForecaster<F> for WindowedLinearForecaster {
    fn kind(&self) -> ModelKind {
        ModelKind::WindowedLinear
    }

    fn input_len(&self) -> usize {
        self.n
    }

    fn horizon(&self) -> usize {
        self.h
    }

    fn forecast(&self, window: &Window<F>) -> Result<ForecastVector<F>> {
        check_window(self.n, window)?;
        let z = generate_pseudo_targets(window, self.h, self.mode)?;
        ForecastVector::new(z.values().to_vec(), window.origin())
    }

    /// No trainable state: reports the loss and changes nothing.
    fn update(&mut self, window: &Window<F>, targets: &ForecastVector<F>, _lr: F) -> Result<F> {
        check_targets(self.h, targets)?;
        let f: ForecastVector<F> = self.forecast(window)?;
        mse_loss(f.values(), targets.values())
    }

    fn state(&self) -> ModelState<F> {
        ModelState::WindowedLinear { n: self.n, h: self.h, mode: self.mode }
    }
}
