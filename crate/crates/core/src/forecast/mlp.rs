//! Single-hidden-layer perceptron forecaster trained with Adam.
//!
//! N inputs, one ReLU hidden layer, H linear outputs. Backpropagation is
//! written out by hand; weights live in flat row-major vectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::optim::{Adam, AdamHyper};
use super::{check_targets, check_window, mse_loss, ModelKind, ModelState, OnlineForecaster};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{ForecastVector, Window};

/// Serializable MLP snapshot: sizes, parameters, optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct MlpState<F: Scalar> {
    pub n: usize,
    pub hidden: usize,
    pub h: usize,
    pub w1: Vec<F>,
    pub b1: Vec<F>,
    pub w2: Vec<F>,
    pub b2: Vec<F>,
    pub adam: Adam<F>,
}

/// N -> hidden (ReLU) -> H forecaster.
#[derive(Debug, Clone)]
pub struct MlpForecaster<F: Scalar> {
    n: usize,
    hidden: usize,
    h: usize,
    w1: Vec<F>,
    b1: Vec<F>,
    w2: Vec<F>,
    b2: Vec<F>,
    adam: Adam<F>,
}

impl<F: Scalar> MlpForecaster<F> {
    /// Fresh model with weights uniform in +/- 1/sqrt(fan_in), drawn from
    /// `rng` in the order w1, b1, w2, b2.
    pub fn new<R: Rng>(n: usize, hidden: usize, h: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", format!("window length must be >= 2, got {n}")));
        }
        if hidden == 0 || h == 0 {
            return Err(Error::invalid(
                "hidden",
                format!("hidden and horizon must be >= 1, got hidden={hidden} h={h}"),
            ));
        }
        let in_bound = 1.0 / (n as f64).sqrt();
        let hid_bound = 1.0 / (hidden as f64).sqrt();
        Ok(Self {
            n,
            hidden,
            h,
            w1: super::uniform_init(rng, hidden * n, in_bound),
            b1: super::uniform_init(rng, hidden, in_bound),
            w2: super::uniform_init(rng, h * hidden, hid_bound),
            b2: super::uniform_init(rng, h, hid_bound),
            adam: Adam::new(&[hidden * n, hidden, h * hidden, h], AdamHyper::default()),
        })
    }

    /// Rebuilds a model from a snapshot.
    pub fn from_state(state: MlpState<F>) -> Result<Self> {
        let MlpState { n, hidden, h, w1, b1, w2, b2, adam } = state;
        if w1.len() != hidden * n || b1.len() != hidden || w2.len() != h * hidden || b2.len() != h {
            return Err(Error::Internal("mlp state has inconsistent shapes".into()));
        }
        Ok(Self { n, hidden, h, w1, b1, w2, b2, adam })
    }

    fn forward(&self, x: &[F]) -> (Vec<F>, Vec<F>, Vec<F>) {
        let mut pre = vec![F::zero(); self.hidden];
        for j in 0..self.hidden {
            let mut acc = self.b1[j];
            let row = &self.w1[j * self.n..(j + 1) * self.n];
            for (w, xi) in row.iter().zip(x) {
                acc += *w * *xi;
            }
            pre[j] = acc;
        }
        let act: Vec<F> = pre.iter().map(|&p| if p > F::zero() { p } else { F::zero() }).collect();
        let mut out = vec![F::zero(); self.h];
        for k in 0..self.h {
            let mut acc = self.b2[k];
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            for (w, a) in row.iter().zip(&act) {
                acc += *w * *a;
            }
            out[k] = acc;
        }
        (pre, act, out)
    }

    /// Loss against `targets` without touching any state.
    pub fn loss_only(&self, window: &Window<F>, targets: &ForecastVector<F>) -> Result<F> {
        check_window(self.n, window)?;
        check_targets(self.h, targets)?;
        let (_, _, out) = self.forward(window.values());
        mse_loss(&out, targets.values())
    }

    /// Analytic MSE gradients, ordered [w1, b1, w2, b2].
    ///
    /// Exposed for gradient verification and diagnostics.
    pub fn gradients(&self, window: &Window<F>, targets: &ForecastVector<F>) -> Result<Vec<Vec<F>>> {
        Ok(self.backward(window, targets)?.0)
    }

    fn backward(
        &self,
        window: &Window<F>,
        targets: &ForecastVector<F>,
    ) -> Result<(Vec<Vec<F>>, F)> {
        check_window(self.n, window)?;
        check_targets(self.h, targets)?;
        let x = window.values();
        let (pre, act, out) = self.forward(x);
        let loss = mse_loss(&out, targets.values())?;

        let two_over_h = F::from_f64_lossy(2.0) / F::from_usize_lossy(self.h);
        let d_out: Vec<F> = out
            .iter()
            .zip(targets.values())
            .map(|(y, t)| two_over_h * (*y - *t))
            .collect();

        let mut g_w2 = vec![F::zero(); self.h * self.hidden];
        let mut g_b2 = vec![F::zero(); self.h];
        for k in 0..self.h {
            g_b2[k] = d_out[k];
            for j in 0..self.hidden {
                g_w2[k * self.hidden + j] = d_out[k] * act[j];
            }
        }

        let mut d_act = vec![F::zero(); self.hidden];
        for j in 0..self.hidden {
            let mut acc = F::zero();
            for k in 0..self.h {
                acc += d_out[k] * self.w2[k * self.hidden + j];
            }
            // ReLU gate: gradient flows only where the unit was active.
            d_act[j] = if pre[j] > F::zero() { acc } else { F::zero() };
        }

        let mut g_w1 = vec![F::zero(); self.hidden * self.n];
        let mut g_b1 = vec![F::zero(); self.hidden];
        for j in 0..self.hidden {
            g_b1[j] = d_act[j];
            for i in 0..self.n {
                g_w1[j * self.n + i] = d_act[j] * x[i];
            }
        }

        Ok((vec![g_w1, g_b1, g_w2, g_b2], loss))
    }
}

impl<F: Scalar> OnlineForecaster<F> for MlpForecaster<F> {
    fn kind(&self) -> ModelKind {
        ModelKind::Mlp
    }

    fn input_len(&self) -> usize {
        self.n
    }

    fn horizon(&self) -> usize {
        self.h
    }

    fn forecast(&self, window: &Window<F>) -> Result<ForecastVector<F>> {
        check_window(self.n, window)?;
        let (_, _, out) = self.forward(window.values());
        ForecastVector::new(out, window.origin())
    }

    fn update(&mut self, window: &Window<F>, targets: &ForecastVector<F>, lr: F) -> Result<F> {
        let (grads, loss) = self.backward(window, targets)?;
        self.adam.step(
            lr,
            &mut [
                (&mut self.w1, &grads[0]),
                (&mut self.b1, &grads[1]),
                (&mut self.w2, &grads[2]),
                (&mut self.b2, &grads[3]),
            ],
        )?;
        let finite = self.w1.iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .all(|p| p.is_finite());
        if !finite {
            return Err(Error::Internal(
                "mlp parameters became non-finite after update".into(),
            ));
        }
        Ok(loss)
    }

    fn state(&self) -> ModelState<F> {
        ModelState::Mlp(MlpState {
            n: self.n,
            hidden: self.hidden,
            h: self.h,
            w1: self.w1.clone(),
            b1: self.b1.clone(),
            w2: self.w2.clone(),
            b2: self.b2.clone(),
            adam: self.adam.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(n: usize, hidden: usize, h: usize, seed: u64) -> MlpForecaster<f64> {
        MlpForecaster::new(n, hidden, h, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn window(values: Vec<f64>) -> Window<f64> {
        let origin = values.len() - 1;
        Window::new(values, origin).unwrap()
    }

    #[test]
    fn construction_is_deterministic_per_seed() {
        let a = model(10, 64, 30, 42);
        let b = model(10, 64, 30, 42);
        let c = model(10, 64, 30, 43);
        assert_eq!(a.state(), b.state());
        assert_ne!(a.state(), c.state());
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let m = model(16, 64, 8, 1);
        let in_bound = 1.0 / 4.0;
        let hid_bound = 1.0 / 8.0;
        assert!(m.w1.iter().chain(&m.b1).all(|w| w.abs() <= in_bound));
        assert!(m.w2.iter().chain(&m.b2).all(|w| w.abs() <= hid_bound));
    }

    #[test]
    fn wrong_window_length_is_a_config_error() {
        let m = model(10, 8, 5, 0);
        let w = window(vec![0.9; 7]);
        let err = m.forecast(&w).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("10"), "{err}");
    }

    #[test]
    fn wrong_target_length_is_a_config_error() {
        let mut m = model(4, 8, 5, 0);
        let w = window(vec![0.9; 4]);
        let t = ForecastVector::new(vec![0.9; 3], 3).unwrap();
        assert!(matches!(m.update(&w, &t, 1e-3), Err(Error::Config(_))));
    }

    #[test]
    fn zero_lr_update_is_bitwise_noop() {
        let mut m = model(6, 16, 4, 3);
        let before = m.state();
        let w = window(vec![1.0, 0.99, 0.98, 0.97, 0.96, 0.95]);
        let t = ForecastVector::new(vec![0.94, 0.93, 0.92, 0.91], 5).unwrap();
        let loss = m.update(&w, &t, 0.0).unwrap();
        assert!(loss >= 0.0);
        // Moments and step count move, parameters must not.
        let (sa, sb) = (m.state(), before);
        match (sa, sb) {
            (ModelState::Mlp(a), ModelState::Mlp(b)) => {
                assert_eq!(a.w1, b.w1);
                assert_eq!(a.b1, b.b1);
                assert_eq!(a.w2, b.w2);
                assert_eq!(a.b2, b.b2);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn update_toward_own_forecast_moves_nothing_on_a_fresh_model() {
        // Zero residual means zero gradient; with zeroed moments Adam stays put.
        let mut m = model(5, 8, 3, 9);
        let w = window(vec![1.0, 0.99, 0.98, 0.97, 0.96]);
        let own = m.forecast(&w).unwrap();
        let before = m.state();
        let loss = m.update(&w, &own, 1e-3).unwrap();
        assert_abs_diff_eq!(loss, 0.0, epsilon = 1e-30);
        match (m.state(), before) {
            (ModelState::Mlp(a), ModelState::Mlp(b)) => assert_eq!(a.w1, b.w1),
            _ => unreachable!(),
        }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let m = model(8, 12, 6, 7);
        let w = window(vec![1.0, 0.995, 0.99, 0.984, 0.98, 0.973, 0.969, 0.96]);
        let t = ForecastVector::new(vec![0.955, 0.95, 0.945, 0.94, 0.935, 0.93], 7).unwrap();
        let analytic = m.gradients(&w, &t).unwrap();

        let state = match m.state() {
            ModelState::Mlp(s) => s,
            _ => unreachable!(),
        };
        let delta = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        use rand::Rng;
        for (layer, len) in [(0usize, state.w1.len()), (1, state.b1.len()), (2, state.w2.len()), (3, state.b2.len())] {
            for _ in 0..20 {
                let idx = rng.gen_range(0..len);
                let mut plus = state.clone();
                let mut minus = state.clone();
                {
                    let (p, q) = match layer {
                        0 => (&mut plus.w1[idx], &mut minus.w1[idx]),
                        1 => (&mut plus.b1[idx], &mut minus.b1[idx]),
                        2 => (&mut plus.w2[idx], &mut minus.w2[idx]),
                        _ => (&mut plus.b2[idx], &mut minus.b2[idx]),
                    };
                    *p += delta;
                    *q -= delta;
                }
                let lp = MlpForecaster::from_state(plus).unwrap().loss_only(&w, &t).unwrap();
                let lm = MlpForecaster::from_state(minus).unwrap().loss_only(&w, &t).unwrap();
                let fd = (lp - lm) / (2.0 * delta);
                let an = analytic[layer][idx];
                let rel = (an - fd).abs() / (an.abs() + fd.abs()).max(1e-8);
                assert!(rel < 1e-4, "layer {layer} idx {idx}: analytic {an} vs fd {fd} (rel {rel})");
            }
        }
    }

    #[test]
    fn repeated_updates_reduce_loss_on_a_fixed_pair() {
        let mut m = model(10, 32, 5, 21);
        let w = window((0..10).map(|t| 1.0 - 0.01 * t as f64).collect());
        let t = ForecastVector::new(vec![0.90, 0.89, 0.88, 0.87, 0.86], 9).unwrap();
        let first = m.update(&w, &t, 1e-2).unwrap();
        let mut last = first;
        for _ in 0..200 {
            last = m.update(&w, &t, 1e-2).unwrap();
        }
        assert!(last < first * 0.01, "loss should collapse: {first} -> {last}");
    }

    #[test]
    fn state_round_trip_preserves_forecasts() {
        let m = model(10, 64, 30, 5);
        let w = window((0..10).map(|t| 1.0 - 0.005 * t as f64).collect());
        let json = serde_json::to_string(&m.state()).unwrap();
        let restored: ModelState<f64> = serde_json::from_str(&json).unwrap();
        let m2 = super::super::restore_model(&restored).unwrap();
        assert_eq!(
            m.forecast(&w).unwrap().values(),
            m2.forecast(&w).unwrap().values()
        );
    }
}
