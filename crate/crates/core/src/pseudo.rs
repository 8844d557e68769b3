//! Pseudo-target generation: windowed line fit, slope clamp, extrapolation.
//!
//! A degradation window is summarized by an ordinary least-squares line over
//! local time t = 0..N-1. The slope is clamped to be non-positive (capacity
//! fade cannot trend upward for long; apparent rises are regeneration
//! transients), and the clamped line is extrapolated over the forecast
//! horizon to stand in for future targets that have not arrived yet.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::Window;

/// Least-squares line `x = slope * t + intercept` over local window time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit<F: Scalar> {
    pub slope: F,
    pub intercept: F,
}

/// How pseudo targets anchor when the slope clamp fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PseudoMode {
    /// Extrapolate the clamped line as-is (flat at the fit intercept when
    /// the slope clamps to zero).
    Literal,
    /// When the clamp fires, hold the window mean instead of the intercept.
    MeanReanchor,
}

impl Default for PseudoMode {
    fn default() -> Self {
        PseudoMode::Literal
    }
}

impl std::fmt::Display for PseudoMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PseudoMode::Literal => write!(f, "literal"),
            PseudoMode::MeanReanchor => write!(f, "mean-reanchor"),
        }
    }
}

/// Extrapolated stand-in targets for the next `h` cycles after a window.
///
/// Element `j` stands in for series index `origin + 1 + j`, mirroring
/// [`crate::series::ForecastVector`] alignment.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PseudoTargets<F: Scalar> {
    values: Vec<F>,
    origin: usize,
    mode: PseudoMode,
}

impl<F: Scalar> PseudoTargets<F> {
    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// Index of the last observed sample these targets extend from.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn mode(&self) -> PseudoMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The stand-in for the very next cycle.
    pub fn first(&self) -> F {
        self.values[0]
    }
}

/// Fits the least-squares line over local time t = 0..N-1.
///
/// Uses the mean-centered form, which is better conditioned than raw power
/// sums for near-constant windows.
pub fn fit_line<F: Scalar>(window: &Window<F>) -> LinearFit<F> {
    let values = window.values();
    let n = values.len();
    let t_mean = F::from_usize_lossy(n - 1) / F::from_f64_lossy(2.0);
    let mut x_mean = F::zero();
    for v in values {
        x_mean += *v;
    }
    x_mean = x_mean / F::from_usize_lossy(n);

    let mut cov = F::zero();
    let mut var = F::zero();
    for (t, v) in values.iter().enumerate() {
        let dt = F::from_usize_lossy(t) - t_mean;
        cov += dt * (*v - x_mean);
        var += dt * dt;
    }
    let slope = cov / var;
    LinearFit {
        slope,
        intercept: x_mean - slope * t_mean,
    }
}

/// Clamps the fitted slope to be non-positive: degradation never trends up.
pub fn clamp_slope<F: Scalar>(fit: LinearFit<F>) -> LinearFit<F> {
    if fit.slope < F::zero() {
        fit
    } else {
        LinearFit {
            slope: F::zero(),
            intercept: fit.intercept,
        }
    }
}

/// Evaluates the line at forecast times t = n, n+1, ..., n+h-1.
pub fn extrapolate<F: Scalar>(fit: LinearFit<F>, n: usize, h: usize) -> Result<Vec<F>> {
    if h == 0 {
        return Err(Error::invalid("h", "horizon must be at least 1"));
    }
    Ok((n..n + h)
        .map(|t| fit.slope * F::from_usize_lossy(t) + fit.intercept)
        .collect())
}

/// Fit, clamp, extrapolate: the full pseudo-target pipeline for one window.
pub fn generate_pseudo_targets<F: Scalar>(
    window: &Window<F>,
    h: usize,
    mode: PseudoMode,
) -> Result<PseudoTargets<F>> {
    if h == 0 {
        return Err(Error::invalid("h", "horizon must be at least 1"));
    }
    let fit = fit_line(window);
    let clamped = clamp_slope(fit);
    let values = if mode == PseudoMode::MeanReanchor && !(fit.slope < F::zero()) {
        let n = F::from_usize_lossy(window.len());
        let mut mean = F::zero();
        for v in window.values() {
            mean += *v;
        }
        vec![mean / n; h]
    } else {
        extrapolate(clamped, window.len(), h)?
    };
    Ok(PseudoTargets {
        values,
        origin: window.origin(),
        mode,
    })
}
