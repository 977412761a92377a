use serde::{Deserialize, Serialize};

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First and second moment estimates, one entry per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Self {
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }
}

impl AdamW {
    /// Applies update number `step` (1-based) in place. Entries with
    /// `decay[i] == false` skip weight decay.
    pub fn step(&self, theta: &mut [f64], grad: &[f64], moments: &mut Moments, lr: f64, step: u64, decay: &[bool]) {
        debug_assert!(step >= 1);
        let bc1 = 1.0 - self.beta1.powf(step as f64);
        let bc2 = 1.0 - self.beta2.powf(step as f64);
        for i in 0..theta.len() {
            let g = grad[i];
            let m = &mut moments.first[i];
            let v = &mut moments.second[i];
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            if decay[i] {
                theta[i] -= lr * self.weight_decay * theta[i];
            }
            theta[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Linear warmup over `warmup_steps`, constant afterwards.
pub fn warmup_lr(base: f64, step: u64, warmup_steps: u64) -> f64 {
    if warmup_steps == 0 {
        base
    } else {
        base * (step as f64 / warmup_steps as f64).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let opt = AdamW {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut theta = vec![1.0, -2.0, 0.5];
        let mut mom = Moments::zeros(3);
        opt.step(&mut theta, &[3.0, -0.1, 0.0], &mut mom, 0.01, 1, &[true; 3]);
        assert!((theta[0] - 0.99).abs() < 1e-9);
        assert!((theta[1] + 1.99).abs() < 1e-9);
        assert_eq!(theta[2], 0.5);
    }

    #[test]
    fn decay_is_decoupled_and_masked() {
        let opt = AdamW::default();
        let mut theta = vec![2.0, 2.0];
        let mut mom = Moments::zeros(2);
        opt.step(&mut theta, &[0.0, 0.0], &mut mom, 0.1, 1, &[true, false]);
        assert!((theta[0] - 2.0 * (1.0 - 0.1 * 0.01)).abs() < 1e-15);
        assert_eq!(theta[1], 2.0);
    }

    #[test]
    fn zero_lr_is_a_no_op() {
        let opt = AdamW::default();
        let mut theta = vec![0.3, -0.7];
        let mut mom = Moments::zeros(2);
        for s in 1..5 {
            opt.step(&mut theta, &[1.0, 2.0], &mut mom, 0.0, s, &[true; 2]);
        }
        assert_eq!(theta, vec![0.3, -0.7]);
    }

    #[test]
    fn warmup_ramp() {
        assert_eq!(warmup_lr(1e-3, 50, 100), 5e-4);
        assert_eq!(warmup_lr(1e-3, 100, 100), 1e-3);
        assert_eq!(warmup_lr(1e-3, 500, 100), 1e-3);
        assert_eq!(warmup_lr(1e-3, 1, 0), 1e-3);
    }
}
