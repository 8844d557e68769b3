//! Vanilla recurrent forecaster trained with momentum SGD.
//!
//! The window is fed as a length-N sequence of scalars through a tanh cell;
//! the final hidden state passes dropout (training only), a linear readout,
//! and a sigmoid, so forecasts live strictly in (0, 1). Backpropagation
//! through time is unrolled by hand over the N steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{SgdHyper, SgdMomentum};
use super::{check_targets, check_window, mse_loss, ModelKind, ModelState, OnlineForecaster};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{ForecastVector, Window};

/// Serializable RNN snapshot.
///
/// The dropout mask stream is not part of the checkpoint: restoring reseeds
/// it from `mask_seed`, so a restored model replays masks from the start.
/// Inference is unaffected (dropout is training-only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct RnnState<F: Scalar> {
    pub n: usize,
    pub hidden: usize,
    pub h: usize,
    pub dropout: F,
    pub mask_seed: u64,
    pub w_ih: Vec<F>,
    pub w_hh: Vec<F>,
    pub b_h: Vec<F>,
    pub w_out: Vec<F>,
    pub b_out: Vec<F>,
    pub sgd: SgdMomentum<F>,
}

/// Scalar-sequence tanh RNN with sigmoid readout.
#[derive(Debug, Clone)]
pub struct RnnForecaster<F: Scalar> {
    n: usize,
    hidden: usize,
    h: usize,
    dropout: F,
    mask_seed: u64,
    mask_rng: ChaCha8Rng,
    w_ih: Vec<F>,
    w_hh: Vec<F>,
    b_h: Vec<F>,
    w_out: Vec<F>,
    b_out: Vec<F>,
    sgd: SgdMomentum<F>,
}

fn sigmoid<F: Scalar>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

impl<F: Scalar> RnnForecaster<F> {
    /// Fresh model; weights uniform in +/- 1/sqrt(fan_in), drawn from `rng`
    /// in the order w_ih, w_hh, b_h, w_out, b_out. The dropout mask stream
    /// seeds itself from the same generator.
    pub fn new<R: Rng>(n: usize, hidden: usize, h: usize, dropout: F, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", format!("window length must be >= 2, got {n}")));
        }
        if hidden == 0 || h == 0 {
            return Err(Error::invalid(
                "hidden",
                format!("hidden and horizon must be >= 1, got hidden={hidden} h={h}"),
            ));
        }
        if dropout < F::zero() || dropout >= F::one() {
            return Err(Error::invalid(
                "dropout",
                format!("dropout must be in [0, 1), got {dropout}"),
            ));
        }
        let hid_bound = 1.0 / (hidden as f64).sqrt();
        let w_ih = super::uniform_init(rng, hidden, 1.0);
        let w_hh = super::uniform_init(rng, hidden * hidden, hid_bound);
        let b_h = super::uniform_init(rng, hidden, hid_bound);
        let w_out = super::uniform_init(rng, h * hidden, hid_bound);
        let b_out = super::uniform_init(rng, h, hid_bound);
        let mask_seed = rng.gen::<u64>();
        Ok(Self {
            n,
            hidden,
            h,
            dropout,
            mask_seed,
            mask_rng: ChaCha8Rng::seed_from_u64(mask_seed),
            w_ih,
            w_hh,
            b_h,
            w_out,
            b_out,
            sgd: SgdMomentum::new(
                &[hidden, hidden * hidden, hidden, h * hidden, h],
                SgdHyper::default(),
            ),
        })
    }

    /// Rebuilds a model from a snapshot.
    pub fn from_state(state: RnnState<F>) -> Result<Self> {
        let RnnState { n, hidden, h, dropout, mask_seed, w_ih, w_hh, b_h, w_out, b_out, sgd } =
            state;
        if w_ih.len() != hidden
            || w_hh.len() != hidden * hidden
            || b_h.len() != hidden
            || w_out.len() != h * hidden
            || b_out.len() != h
        {
            return Err(Error::Internal("rnn state has inconsistent shapes".into()));
        }
        Ok(Self {
            n,
            hidden,
            h,
            dropout,
            mask_seed,
            mask_rng: ChaCha8Rng::seed_from_u64(mask_seed),
            w_ih,
            w_hh,
            b_h,
            w_out,
            b_out,
            sgd,
        })
    }

    /// Runs the recurrence, returning every hidden state (for BPTT).
    fn run_cell(&self, x: &[F]) -> Vec<Vec<F>> {
        let mut states = Vec::with_capacity(x.len());
        let mut prev = vec![F::zero(); self.hidden];
        for &xt in x {
            let mut next = vec![F::zero(); self.hidden];
            for i in 0..self.hidden {
                let mut acc = self.w_ih[i] * xt + self.b_h[i];
                let row = &self.w_hh[i * self.hidden..(i + 1) * self.hidden];
                for (w, hp) in row.iter().zip(&prev) {
                    acc += *w * *hp;
                }
                next[i] = acc.tanh();
            }
            states.push(next.clone());
            prev = next;
        }
        states
    }

    fn readout(&self, hidden: &[F]) -> Vec<F> {
        (0..self.h)
            .map(|k| {
                let mut acc = self.b_out[k];
                let row = &self.w_out[k * self.hidden..(k + 1) * self.hidden];
                for (w, hj) in row.iter().zip(hidden) {
                    acc += *w * *hj;
                }
                sigmoid(acc)
            })
            .collect()
    }

    /// Inference-mode loss against `targets` (no dropout, no state change).
    pub fn loss_only(&self, window: &Window<F>, targets: &ForecastVector<F>) -> Result<F> {
        check_window(self.n, window)?;
        check_targets(self.h, targets)?;
        let states = self.run_cell(window.values());
        let out = self.readout(states.last().expect("n >= 2"));
        mse_loss(&out, targets.values())
    }

    /// Analytic BPTT gradients with dropout disabled (the gradient of
    /// [`Self::loss_only`]), ordered [w_ih, w_hh, b_h, w_out, b_out].
    ///
    /// Exposed for gradient verification and diagnostics.
    pub fn gradients(&self, window: &Window<F>, targets: &ForecastVector<F>) -> Result<Vec<Vec<F>>> {
        check_window(self.n, window)?;
        check_targets(self.h, targets)?;
        let identity = vec![F::one(); self.hidden];
        Ok(self.backward(window.values(), targets.values(), &identity).0)
    }

    /// BPTT with an explicit (already scaled) dropout mask on the final
    /// hidden state. Returns gradients and the loss of the masked forward.
    fn backward(&self, x: &[F], targets: &[F], mask: &[F]) -> (Vec<Vec<F>>, F) {
        let states = self.run_cell(x);
        let h_last = states.last().expect("n >= 2");
        let h_drop: Vec<F> = h_last.iter().zip(mask).map(|(h, m)| *h * *m).collect();

        let out = self.readout(&h_drop);
        let loss = mse_loss(&out, targets).expect("lengths checked by caller");

        let two_over_h = F::from_f64_lossy(2.0) / F::from_usize_lossy(self.h);
        // d(loss)/d(pre-sigmoid) = 2/H (y - t) * y(1 - y)
        let d_z: Vec<F> = out
            .iter()
            .zip(targets)
            .map(|(y, t)| two_over_h * (*y - *t) * *y * (F::one() - *y))
            .collect();

        let mut g_w_out = vec![F::zero(); self.h * self.hidden];
        let mut g_b_out = vec![F::zero(); self.h];
        for k in 0..self.h {
            g_b_out[k] = d_z[k];
            for j in 0..self.hidden {
                g_w_out[k * self.hidden + j] = d_z[k] * h_drop[j];
            }
        }

        let mut d_h = vec![F::zero(); self.hidden];
        for j in 0..self.hidden {
            let mut acc = F::zero();
            for k in 0..self.h {
                acc += d_z[k] * self.w_out[k * self.hidden + j];
            }
            d_h[j] = acc * mask[j];
        }

        let mut g_w_ih = vec![F::zero(); self.hidden];
        let mut g_w_hh = vec![F::zero(); self.hidden * self.hidden];
        let mut g_b_h = vec![F::zero(); self.hidden];
        for t in (0..x.len()).rev() {
            let h_t = &states[t];
            let d_pre: Vec<F> = d_h
                .iter()
                .zip(h_t)
                .map(|(dh, h)| *dh * (F::one() - *h * *h))
                .collect();
            for i in 0..self.hidden {
                g_w_ih[i] += d_pre[i] * x[t];
                g_b_h[i] += d_pre[i];
            }
            if t > 0 {
                let h_prev = &states[t - 1];
                for i in 0..self.hidden {
                    let row = &mut g_w_hh[i * self.hidden..(i + 1) * self.hidden];
                    for (g, hp) in row.iter_mut().zip(h_prev) {
                        *g += d_pre[i] * *hp;
                    }
                }
            }
            // Carry the gradient to the previous hidden state.
            let mut d_h_prev = vec![F::zero(); self.hidden];
            for i in 0..self.hidden {
                let row = &self.w_hh[i * self.hidden..(i + 1) * self.hidden];
                for (j, w) in row.iter().enumerate() {
                    d_h_prev[j] += d_pre[i] * *w;
                }
            }
            d_h = d_h_prev;
        }

        (vec![g_w_ih, g_w_hh, g_b_h, g_w_out, g_b_out], loss)
    }
}

impl<F: Scalar> OnlineForecaster<F> for RnnForecaster<F> {
    fn kind(&self) -> ModelKind {
        ModelKind::Rnn
    }

    fn input_len(&self) -> usize {
        self.n
    }

    fn horizon(&self) -> usize {
        self.h
    }

    fn forecast(&self, window: &Window<F>) -> Result<ForecastVector<F>> {
        check_window(self.n, window)?;
        let states = self.run_cell(window.values());
        let out = self.readout(states.last().expect("n >= 2"));
        ForecastVector::new(out, window.origin())
    }

    fn update(&mut self, window: &Window<F>, targets: &ForecastVector<F>, lr: F) -> Result<F> {
        check_window(self.n, window)?;
        check_targets(self.h, targets)?;
        // Inverted dropout: masked units zero out, survivors scale by 1/keep
        // so inference needs no rescaling.
        let mask: Vec<F> = if self.dropout > F::zero() {
            let keep = F::one() - self.dropout;
            let keep_f64 = keep.to_f64_lossy();
            (0..self.hidden)
                .map(|_| {
                    if self.mask_rng.gen::<f64>() < keep_f64 {
                        F::one() / keep
                    } else {
                        F::zero()
                    }
                })
                .collect()
        } else {
            vec![F::one(); self.hidden]
        };
        let (grads, loss) = self.backward(window.values(), targets.values(), &mask);
        self.sgd.step(
            lr,
            &mut [
                (&mut self.w_ih, &grads[0]),
                (&mut self.w_hh, &grads[1]),
                (&mut self.b_h, &grads[2]),
                (&mut self.w_out, &grads[3]),
                (&mut self.b_out, &grads[4]),
            ],
        )?;
        let finite = self.w_ih.iter()
            .chain(&self.w_hh)
            .chain(&self.b_h)
            .chain(&self.w_out)
            .chain(&self.b_out)
            .all(|p| p.is_finite());
        if !finite {
            return Err(Error::Internal(
                "rnn parameters became non-finite after update".into(),
            ));
        }
        Ok(loss)
    }

    fn state(&self) -> ModelState<F> {
        ModelState::Rnn(RnnState {
            n: self.n,
            hidden: self.hidden,
            h: self.h,
            dropout: self.dropout,
            mask_seed: self.mask_seed,
            w_ih: self.w_ih.clone(),
            w_hh: self.w_hh.clone(),
            b_h: self.b_h.clone(),
            w_out: self.w_out.clone(),
            b_out: self.b_out.clone(),
            sgd: self.sgd.clone(),
        })
    }
}
