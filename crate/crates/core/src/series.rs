//! Cycle-indexed state-of-health series and the fixed-length views cut from
//! it.
//!
//! SoH is stored as a fraction of nominal capacity (1.0 = fresh cell), not as
//! a percentage. Conversion to percent happens only at reporting boundaries.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Values above this are almost certainly unit mistakes (percent fed in as
/// fractions); the constructor warns but does not reject.
const SOH_CEILING: f64 = 1.5;

/// A battery degradation trajectory: per-cycle state of health.
#[derive(Debug, Clone, PartialEq)]
pub struct SohSeries<F: Scalar> {
    cycles: Vec<u32>,
    values: Vec<F>,
    nominal_capacity: F,
    label: String,
}

impl<F: Scalar> SohSeries<F> {
    /// Builds a series from parallel cycle/SoH vectors.
    ///
    /// Cycles must be strictly increasing; values must be finite and
    /// positive; `nominal_capacity` must be positive. Values above 1.5 are
    /// accepted with a logged warning (SoH slightly above 1.0 is real, a
    /// percentage fed in as a fraction is not).
    pub fn new(
        cycles: Vec<u32>,
        values: Vec<F>,
        nominal_capacity: F,
        label: impl Into<String>,
    ) -> Result<Self> {
        if cycles.len() != values.len() {
            return Err(Error::invalid(
                "values",
                format!(
                    "cycle/value length mismatch: {} cycles, {} values",
                    cycles.len(),
                    values.len()
                ),
            ));
        }
        if cycles.is_empty() {
            return Err(Error::invalid("cycles", "series must not be empty"));
        }
        if !(nominal_capacity > F::zero()) {
            return Err(Error::invalid(
                "nominal_capacity",
                format!("must be positive, got {nominal_capacity}"),
            ));
        }
        for pair in cycles.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::invalid(
                    "cycles",
                    format!("cycle indices must be strictly increasing ({} then {})", pair[0], pair[1]),
                ));
            }
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v <= F::zero() {
                return Err(Error::invalid(
                    "values",
                    format!("SoH at position {i} must be finite and positive, got {v}"),
                ));
            }
        }
        let label = label.into();
        if values.iter().any(|v| v.to_f64_lossy() > SOH_CEILING) {
            log::warn!(
                "series `{label}` contains SoH above {SOH_CEILING}; values look like percentages, expected fractions"
            );
        }
        Ok(Self {
            cycles,
            values,
            nominal_capacity,
            label,
        })
    }

    pub fn cycles(&self) -> &[u32] {
        &self.cycles
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn nominal_capacity(&self) -> F {
        self.nominal_capacity
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A fixed-length slice of the most recent SoH values, oldest first.
///
/// `origin` is the series index of the last (newest) element, so the window
/// covers indices `origin - n + 1 ..= origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<F: Scalar> {
    values: Vec<F>,
    origin: usize,
}

impl<F: Scalar> Window<F> {
    /// Builds a window from already-extracted values. Length must be >= 2.
    pub fn new(values: Vec<F>, origin: usize) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(
                "values",
                format!("window length must be at least 2, got {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "window values must be finite"));
        }
        Ok(Self { values, origin })
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// Series index of the newest element.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Newest value in the window.
    pub fn last(&self) -> F {
        *self.values.last().expect("window is never empty")
    }
}

/// A multistep forecast: element `j` predicts series index `origin + 1 + j`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ForecastVector<F: Scalar> {
    values: Vec<F>,
    origin: usize,
}

impl<F: Scalar> ForecastVector<F> {
    /// Builds a forecast vector. Length must be >= 1 and all values finite.
    pub fn new(values: Vec<F>, origin: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("values", "forecast must have length >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "forecast values must be finite"));
        }
        Ok(Self { values, origin })
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// Index of the last observed sample this forecast was issued from.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// First element: the next-step prediction.
    pub fn first(&self) -> F {
        self.values[0]
    }
}

/// Converts a measured full capacity to SoH against nominal.
///
/// Requires `q_nominal > 0` and `q_full >= 0`.
pub fn soh_from_capacity<F: Scalar>(q_full: F, q_nominal: F) -> Result<F> {
    if !(q_nominal > F::zero()) || !q_nominal.is_finite() {
        return Err(Error::invalid(
            "q_nominal",
            format!("nominal capacity must be positive and finite, got {q_nominal}"),
        ));
    }
    if q_full < F::zero() || !q_full.is_finite() {
        return Err(Error::invalid(
            "q_full",
            format!("measured capacity must be non-negative and finite, got {q_full}"),
        ));
    }
    Ok(q_full / q_nominal)
}

/// Cuts the window of the `n` most recent values of `prefix` ending at index
/// `t_end` inclusive, oldest first.
///
/// Only `prefix[..=t_end]` is touched, so this is safe to call on a revealed
/// stream prefix. Errors if fewer than `n` samples exist up to `t_end`.
pub fn window_from_prefix<F: Scalar>(prefix: &[F], t_end: usize, n: usize) -> Result<Window<F>> {
    if n < 2 {
        return Err(Error::invalid(
            "n",
            format!("window length must be at least 2, got {n}"),
        ));
    }
    if t_end >= prefix.len() {
        return Err(Error::invalid(
            "t_end",
            format!("index {t_end} out of range for {} samples", prefix.len()),
        ));
    }
    let available = t_end + 1;
    if available < n {
        return Err(Error::InsufficientData {
            required: n,
            actual: available,
            message: format!("window of length {n} ending at index {t_end}"),
        });
    }
    Window::new(prefix[available - n..available].to_vec(), t_end)
}

/// Cuts the window of the `n` most recent values of `series` ending at index
/// `t_end` inclusive.
pub fn make_window<F: Scalar>(series: &SohSeries<F>, t_end: usize, n: usize) -> Result<Window<F>> {
    window_from_prefix(series.values(), t_end, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn series(values: Vec<f64>) -> SohSeries<f64> {
        let cycles = (0..values.len() as u32).collect();
        SohSeries::new(cycles, values, 1.0, "test").unwrap()
    }

    #[test]
    fn soh_from_capacity_matches_hand_arithmetic() {
        assert_abs_diff_eq!(soh_from_capacity(1.76, 2.0).unwrap(), 0.88, epsilon = 1e-15);
        assert_abs_diff_eq!(soh_from_capacity(1.1, 1.1).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            soh_from_capacity(1.08, 1.35).unwrap(),
            0.8,
            epsilon = 1e-15
        );
    }

    #[test]
    fn soh_from_capacity_rejects_bad_nominal() {
        assert!(soh_from_capacity(1.0, 0.0).is_err());
        assert!(soh_from_capacity(1.0, -2.0).is_err());
        assert!(soh_from_capacity(-0.1, 2.0).is_err());
    }

    #[test]
    fn series_rejects_non_increasing_cycles() {
        let err = SohSeries::new(vec![0, 2, 2], vec![1.0, 0.9, 0.8], 1.0, "x").unwrap_err();
        assert!(err.to_string().contains("strictly increasing"), "{err}");
        assert!(SohSeries::new(vec![3, 1], vec![1.0, 0.9], 1.0, "x").is_err());
    }

    #[test]
    fn series_rejects_non_positive_values() {
        assert!(SohSeries::new(vec![0, 1], vec![1.0, 0.0], 1.0, "x").is_err());
        assert!(SohSeries::new(vec![0, 1], vec![1.0, f64::NAN], 1.0, "x").is_err());
        assert!(SohSeries::new(vec![0], vec![1.0], 0.0, "x").is_err());
    }

    #[test]
    fn series_accepts_values_above_ceiling_with_warning_only() {
        // 160 "percent" slipped in as a fraction: accepted, warned about.
        let s = SohSeries::new(vec![0, 1], vec![1.6, 1.59], 1.0, "x").unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn make_window_takes_the_most_recent_values_oldest_first() {
        let s = series(vec![1.0, 0.99, 0.98, 0.97, 0.96]);
        let w = make_window(&s, 4, 3).unwrap();
        assert_eq!(w.values(), &[0.98, 0.97, 0.96]);
        assert_eq!(w.origin(), 4);
        assert_eq!(w.last(), 0.96);
    }

    #[test]
    fn make_window_whole_series_when_n_equals_len() {
        let s = series(vec![1.0, 0.99, 0.98]);
        let w = make_window(&s, 2, 3).unwrap();
        assert_eq!(w.values(), s.values());
    }

    #[test]
    fn make_window_errors_instead_of_padding() {
        let s = series(vec![1.0, 0.99, 0.98]);
        let err = make_window(&s, 1, 3).unwrap_err();
        match err {
            Error::InsufficientData { required, actual, .. } => {
                assert_eq!(required, 3);
                assert_eq!(actual, 2);
            }
            other => panic!("expected InsufficientData, got {other}"),
        }
    }

    #[test]
    fn window_rejects_length_below_two() {
        assert!(Window::new(vec![1.0], 0).is_err());
        let s = series(vec![1.0, 0.99, 0.98]);
        assert!(make_window(&s, 2, 1).is_err());
    }

    #[test]
    fn forecast_vector_validates_contents() {
        assert!(ForecastVector::<f64>::new(vec![], 0).is_err());
        assert!(ForecastVector::new(vec![0.9, f64::INFINITY], 0).is_err());
        let f = ForecastVector::new(vec![0.9], 7).unwrap();
        assert_eq!(f.first(), 0.9);
        assert_eq!(f.origin(), 7);
    }

    proptest! {
        // Sliding one-step windows tile the series: window ending at t always
        // agrees element-wise with the raw slice.
        #[test]
        fn windows_agree_with_raw_slices(
            values in proptest::collection::vec(0.5f64..1.2, 5..40),
            n in 2usize..5,
        ) {
            let s = series(values.clone());
            for t_end in (n - 1)..values.len() {
                let w = make_window(&s, t_end, n).unwrap();
                prop_assert_eq!(w.values(), &values[t_end + 1 - n..=t_end]);
                prop_assert_eq!(w.last(), values[t_end]);
            }
        }
    }
}
