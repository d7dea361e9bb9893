use serde::{Deserialize, Serialize};

/// Bias-corrected Adam state for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = flush_subnormal(self.beta1 * self.m[i] + (1.0 - self.beta1) * g);
            self.v[i] = flush_subnormal(self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g);
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Moments of parameters that stop receiving gradient (dead ReLU units)
/// decay geometrically into the subnormal range, where arithmetic is an
/// order of magnitude slower. Their contribution to a step is far below one
/// ulp of the parameter, so zeroing them leaves the trajectory unchanged.
#[inline]
fn flush_subnormal(x: f64) -> f64 {
    if x.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut opt = Adam::new(1, 1e-3);
        let mut p = [0.0];
        opt.step(&mut p, &[1.0]);
        let expected = -1e-3 * (1.0 / (1.0 + 1e-8));
        assert!((p[0] - expected).abs() < 1e-18);
        assert!((p[0] + 9.99999e-4).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_no_change() {
        let mut opt = Adam::new(3, 1e-3);
        let mut p = [1.0, -2.0, 0.5];
        opt.step(&mut p, &[0.0; 3]);
        assert_eq!(p, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn equal_gradients_update_identically() {
        let mut opt = Adam::new(2, 1e-2);
        let mut p = [0.3, 0.3];
        for k in 0..5 {
            let g = 0.1 * k as f64 - 0.2;
            opt.step(&mut p, &[g, g]);
        }
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn decayed_moments_reach_exact_zero() {
        let mut opt = Adam::new(1, 1e-3);
        let mut p = [0.5];
        opt.step(&mut p, &[1.0]);
        for _ in 0..8000 {
            opt.step(&mut p, &[0.0]);
            assert!(opt.m[0] == 0.0 || opt.m[0].is_normal());
        }
        assert_eq!(opt.m[0], 0.0);
    }
}
