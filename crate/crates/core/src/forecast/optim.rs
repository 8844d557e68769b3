//! Hand-rolled first-order optimizers.
//!
//! Both optimizers manage moment buffers for a list of parameter tensors and
//! advance a single shared step counter per logical update, so every tensor
//! sees the same bias correction / schedule position.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct AdamHyper<F: Scalar> {
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
}

impl<F: Scalar> Default for AdamHyper<F> {
    fn default() -> Self {
        Self {
            beta1: F::from_f64_lossy(0.9),
            beta2: F::from_f64_lossy(0.999),
            epsilon: F::from_f64_lossy(1e-8),
        }
    }
}

/// Adam with bias-corrected first and second moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Adam<F: Scalar> {
    hyper: AdamHyper<F>,
    step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    /// Creates zeroed moment buffers for tensors of the given sizes.
    pub fn new(sizes: &[usize], hyper: AdamHyper<F>) -> Self {
        Self {
            hyper,
            step: 0,
            m: sizes.iter().map(|&s| vec![F::zero(); s]).collect(),
            v: sizes.iter().map(|&s| vec![F::zero(); s]).collect(),
        }
    }

    /// Completed optimizer steps.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one optimizer step across all tensors.
    ///
    /// `tensors` pairs each parameter slice with its gradient; the step
    /// counter advances exactly once per call, even when every gradient is
    /// zero (moments still decay).
    pub fn step(&mut self, lr: F, tensors: &mut [(&mut [F], &[F])]) -> Result<()> {
        if lr < F::zero() {
            return Err(Error::invalid("lr", format!("must be non-negative, got {lr}")));
        }
        if tensors.len() != self.m.len() {
            return Err(Error::Internal(format!(
                "optimizer manages {} tensors, got {}",
                self.m.len(),
                tensors.len()
            )));
        }
        self.step += 1;
        let t = self.step;
        let one = F::one();
        let bias1 = one - self.hyper.beta1.powi(t as i32);
        let bias2 = one - self.hyper.beta2.powi(t as i32);
        for (idx, (params, grads)) in tensors.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[idx], &mut self.v[idx]);
            if params.len() != m.len() || grads.len() != m.len() {
                return Err(Error::Internal(format!(
                    "tensor {idx} shape mismatch: optimizer {}, params {}, grads {}",
                    m.len(),
                    params.len(),
                    grads.len()
                )));
            }
            for i in 0..m.len() {
                let g = grads[i];
                m[i] = self.hyper.beta1 * m[i] + (one - self.hyper.beta1) * g;
                v[i] = self.hyper.beta2 * v[i] + (one - self.hyper.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + self.hyper.epsilon);
            }
        }
        Ok(())
    }
}

/// SGD-with-momentum hyperparameters, including the exponential decay
/// schedule applied to whatever base rate the caller passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SgdHyper<F: Scalar> {
    /// Conventional base rate for this optimizer's users.
    pub lr0: F,
    pub momentum: F,
    /// Multiplicative decay applied every `decay_every` steps.
    pub decay: F,
    pub decay_every: u64,
}

impl<F: Scalar> Default for SgdHyper<F> {
    fn default() -> Self {
        Self {
            lr0: F::from_f64_lossy(0.1),
            momentum: F::from_f64_lossy(0.9),
            decay: F::from_f64_lossy(0.9),
            decay_every: 1000,
        }
    }
}

/// The staircase-exponential schedule: `base * decay^(step / every)`.
pub fn exponential_lr<F: Scalar>(base: F, step: u64, decay: F, every: u64) -> F {
    if every == 0 {
        return base;
    }
    let k = (step / every).min(i32::MAX as u64) as i32;
    base * decay.powi(k)
}

/// SGD with momentum and a staircase-exponential learning-rate schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SgdMomentum<F: Scalar> {
    hyper: SgdHyper<F>,
    step: u64,
    velocity: Vec<Vec<F>>,
}

impl<F: Scalar> SgdMomentum<F> {
    pub fn new(sizes: &[usize], hyper: SgdHyper<F>) -> Self {
        Self {
            hyper,
            step: 0,
            velocity: sizes.iter().map(|&s| vec![F::zero(); s]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Effective rate the next step will use for a given base rate.
    pub fn scheduled_lr(&self, base_lr: F) -> F {
        exponential_lr(base_lr, self.step, self.hyper.decay, self.hyper.decay_every)
    }

    /// Applies one step: `v <- momentum * v + g`, `p <- p - lr(step) * v`.
    pub fn step(&mut self, base_lr: F, tensors: &mut [(&mut [F], &[F])]) -> Result<()> {
        if base_lr < F::zero() {
            return Err(Error::invalid(
                "lr",
                format!("must be non-negative, got {base_lr}"),
            ));
        }
        if tensors.len() != self.velocity.len() {
            return Err(Error::Internal(format!(
                "optimizer manages {} tensors, got {}",
                self.velocity.len(),
                tensors.len()
            )));
        }
        let lr = self.scheduled_lr(base_lr);
        self.step += 1;
        for (idx, (params, grads)) in tensors.iter_mut().enumerate() {
            let v = &mut self.velocity[idx];
            if params.len() != v.len() || grads.len() != v.len() {
                return Err(Error::Internal(format!(
                    "tensor {idx} shape mismatch: optimizer {}, params {}, grads {}",
                    v.len(),
                    params.len(),
                    grads.len()
                )));
            }
            for i in 0..v.len() {
                v[i] = self.hyper.momentum * v[i] + grads[i];
                params[i] -= lr * v[i];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn adam_first_step_moves_by_lr_times_sign() {
        let mut adam = Adam::new(&[2], AdamHyper::default());
        let mut p = vec![0.5f64, -0.25];
        let g = vec![3.0f64, -0.007];
        adam.step(1e-3, &mut [(&mut p, &g)]).unwrap();
        // With zeroed moments the first update is lr * g / (|g| + eps') ~ lr * sign(g).
        assert_abs_diff_eq!(p[0], 0.5 - 1e-3, epsilon = 1e-8);
        assert_abs_diff_eq!(p[1], -0.25 + 1e-3, epsilon = 1e-8);
    }

    #[test]
    fn adam_zero_gradient_leaves_params_but_advances_step() {
        let mut adam = Adam::new(&[3], AdamHyper::default());
        let mut p = vec![0.1f64, 0.2, 0.3];
        let g = vec![0.0f64; 3];
        adam.step(1e-2, &mut [(&mut p, &g)]).unwrap();
        assert_eq!(p, vec![0.1, 0.2, 0.3]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn adam_trajectory_matches_reformulated_oracle() {
        // Oracle route: the folded formulation lr_t = lr*sqrt(1-b2^t)/(1-b1^t)
        // applied to raw moments, algebraically equal to the bias-corrected
        // form but computed differently.
        let (b1, b2, eps, lr) = (0.9f64, 0.999, 1e-8, 1e-3);
        let mut oracle_p = 0.7f64;
        let (mut m, mut v) = (0.0f64, 0.0);
        let grad_at = |p: f64| 2.0 * (p - 0.4);

        let mut adam = Adam::new(&[1], AdamHyper::default());
        let mut p = vec![0.7f64];
        for t in 1..=10u32 {
            let g = grad_at(oracle_p);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let lr_t = lr * (1.0 - b2.powi(t as i32)).sqrt() / (1.0 - b1.powi(t as i32));
            let eps_t = eps * (1.0 - b2.powi(t as i32)).sqrt();
            oracle_p -= lr_t * m / (v.sqrt() + eps_t);

            let g_impl = vec![grad_at(p[0])];
            adam.step(lr, &mut [(&mut p, &g_impl)]).unwrap();
        }
        assert_abs_diff_eq!(p[0], oracle_p, epsilon = 1e-12);
        assert_eq!(adam.step_count(), 10);
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut adam = Adam::new(&[2], AdamHyper::default());
        let mut p = vec![0.0f64; 3];
        let g = vec![0.0f64; 3];
        let err = adam.step(1e-3, &mut [(&mut p, &g)]).unwrap_err();
        assert!(matches!(err, Error::Internal(_)));
    }

    #[test]
    fn schedule_steps_down_every_thousand() {
        assert_abs_diff_eq!(exponential_lr(0.1, 0, 0.9, 1000), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(exponential_lr(0.1, 999, 0.9, 1000), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(exponential_lr(0.1, 1000, 0.9, 1000), 0.09, epsilon = 1e-15);
        assert_abs_diff_eq!(exponential_lr(0.1, 2000, 0.9, 1000), 0.081, epsilon = 1e-15);
    }

    #[test]
    fn sgd_momentum_accumulates_velocity() {
        let hyper = SgdHyper::default();
        let mut sgd = SgdMomentum::new(&[1], hyper);
        let mut p = vec![1.0f64];
        let g = vec![0.5f64];
        // Step 1: v = 0.5, p = 1 - 0.1*0.5 = 0.95
        sgd.step(0.1, &mut [(&mut p, &g)]).unwrap();
        assert_abs_diff_eq!(p[0], 0.95, epsilon = 1e-15);
        // Step 2: v = 0.9*0.5 + 0.5 = 0.95, p = 0.95 - 0.095 = 0.855
        sgd.step(0.1, &mut [(&mut p, &g)]).unwrap();
        assert_abs_diff_eq!(p[0], 0.855, epsilon = 1e-15);
        assert_eq!(sgd.step_count(), 2);
    }

    #[test]
    fn sgd_applies_the_decayed_rate_after_a_thousand_steps() {
        let mut sgd = SgdMomentum::new(&[1], SgdHyper::default());
        sgd.step = 1000;
        assert_abs_diff_eq!(sgd.scheduled_lr(0.1), 0.09, epsilon = 1e-15);
        let mut p = vec![0.0f64];
        let g = vec![1.0f64];
        sgd.step(0.1, &mut [(&mut p, &g)]).unwrap();
        assert_abs_diff_eq!(p[0], -0.09, epsilon = 1e-15);
    }

    #[test]
    fn zero_lr_is_a_no_op_for_both_optimizers() {
        let mut adam = Adam::new(&[1], AdamHyper::default());
        let mut sgd = SgdMomentum::new(&[1], SgdHyper::default());
        let mut p1 = vec![0.3f64];
        let mut p2 = vec![0.3f64];
        let g = vec![2.0f64];
        adam.step(0.0, &mut [(&mut p1, &g)]).unwrap();
        sgd.step(0.0, &mut [(&mut p2, &g)]).unwrap();
        assert_eq!(p1[0], 0.3);
        assert_eq!(p2[0], 0.3);
        assert!(adam.step(-1.0, &mut [(&mut p1, &g)]).is_err());
    }
}
