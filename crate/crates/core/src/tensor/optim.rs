use crate::error::{Error, Result};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// AdamW moments and step counter for one flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct OptState {
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub step: u64,
    pub hyper: AdamHyper,
}

impl OptState {
    pub fn new(len: usize, hyper: AdamHyper) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            hyper,
        }
    }

    /// One decoupled-weight-decay Adam step at learning rate `lr`.
    ///
    /// A non-finite gradient aborts the step with no state change.
    pub fn step(&mut self, params: &mut [f32], grads: &[f32], lr: f64) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adamw: {} params, {} grads, {} moments",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Diverged { index });
        }
        self.step += 1;
        let h = self.hyper;
        let t = self.step as i32;
        let bc1 = 1.0 - h.beta1.powi(t);
        let bc2 = 1.0 - h.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i] as f64;
            let m = h.beta1 * self.m[i] as f64 + (1.0 - h.beta1) * g;
            let v = h.beta2 * self.v[i] as f64 + (1.0 - h.beta2) * g * g;
            self.m[i] = m as f32;
            self.v[i] = v as f32;
            let update = (m / bc1) / ((v / bc2).sqrt() + h.eps);
            let p = params[i] as f64;
            params[i] = (p * (1.0 - lr * h.weight_decay) - lr * update) as f32;
        }
        Ok(())
    }
}

/// Linear warmup from 0 to `base`, then cosine decay to 0 at `total`.
pub fn lr_at(step: usize, total: usize, warmup: usize, base: f64) -> f64 {
    let step = step.min(total);
    if step < warmup {
        return base * step as f64 / warmup as f64;
    }
    let span = total.saturating_sub(warmup).max(1);
    let progress = (step - warmup) as f64 / span as f64;
    0.5 * base * (1.0 + (PI * progress).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grads_no_decay_keeps_params() {
        let mut p = vec![0.5f32, -1.25, 3.0];
        let mut opt = OptState::new(3, AdamHyper::default());
        opt.step(&mut p, &[0.0; 3], 1e-2).unwrap();
        assert_eq!(p, vec![0.5, -1.25, 3.0]);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn zero_grads_with_decay_shrinks() {
        let hyper = AdamHyper {
            weight_decay: 0.1,
            ..AdamHyper::default()
        };
        let mut p = vec![0.5f32, -1.25, 3.0];
        let mut opt = OptState::new(3, hyper);
        opt.step(&mut p, &[0.0; 3], 1e-2).unwrap();
        for (a, b) in p.iter().zip([0.5f32, -1.25, 3.0]) {
            assert!((*a as f64 - b as f64 * (1.0 - 1e-3)).abs() < 1e-7);
        }
    }

    #[test]
    fn single_step_matches_hand_calculation() {
        // from m = 0.1, v = 0.02, step 3 -> step 4 with g = 0.5
        let hyper = AdamHyper {
            lr: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        };
        let mut opt = OptState {
            m: vec![0.1],
            v: vec![0.02],
            step: 3,
            hyper,
        };
        let mut p = vec![2.0f32];
        opt.step(&mut p, &[0.5], 0.1).unwrap();
        let m = 0.9 * 0.1 + 0.1 * 0.5;
        let v = 0.999 * 0.02 + 0.001 * 0.25;
        let mhat = m / (1.0 - 0.9f64.powi(4));
        let vhat = v / (1.0 - 0.999f64.powi(4));
        let expected = 2.0 * (1.0 - 0.1 * 0.01) - 0.1 * mhat / (vhat.sqrt() + 1e-8);
        assert!((p[0] as f64 - expected).abs() < 1e-6, "{} vs {}", p[0], expected);
        assert!((opt.m[0] as f64 - m).abs() < 1e-7);
        assert_eq!(opt.step, 4);
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut p = vec![1.0f32, 2.0];
        let mut opt = OptState::new(2, AdamHyper::default());
        let err = opt.step(&mut p, &[0.1, f32::NAN], 1e-3).unwrap_err();
        assert!(matches!(err, Error::Diverged { index: 1 }));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn deterministic_bits() {
        let run = || {
            let mut p = vec![0.3f32, -0.7, 1.1];
            let mut opt = OptState::new(3, AdamHyper::default());
            for _ in 0..5 {
                opt.step(&mut p, &[0.2, -0.1, 0.05], 1e-3).unwrap();
            }
            p.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn schedule_endpoints() {
        assert_eq!(lr_at(10, 100, 10, 0.5), 0.5);
        assert!(lr_at(100, 100, 10, 0.5).abs() < 1e-15);
        assert!((lr_at(55, 100, 10, 0.5) - 0.25).abs() < 1e-12);
        assert_eq!(lr_at(0, 100, 10, 0.5), 0.0);
        assert!((lr_at(5, 100, 10, 0.5) - 0.25).abs() < 1e-12);
        assert!(lr_at(500, 100, 10, 0.5).abs() < 1e-15);
    }
}
