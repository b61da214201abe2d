/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub(crate) struct AdamW {
    beta1: f32,
    beta2: f32,
    eps: f32,
    weight_decay: f32,
    m: Vec<f32>,
    v: Vec<f32>,
    step: i32,
}

impl AdamW {
    pub fn new(len: usize, weight_decay: f32) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f32], grad: &[f32], lr: f32) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= lr * (mhat / (vhat.sqrt() + self.eps) + self.weight_decay * params[i]);
        }
    }
}

/// Learning rate at `step` of `total`: half-cosine from `base` to zero
/// when `cosine`, constant otherwise.
pub(crate) fn learning_rate(base: f64, step: usize, total: usize, cosine: bool) -> f64 {
    if !cosine || total == 0 {
        return base;
    }
    0.5 * base * (1.0 + (std::f64::consts::PI * step as f64 / total as f64).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_leaves_parameters() {
        let mut p = vec![0.5, -1.0, 3.0];
        let before = p.clone();
        let mut opt = AdamW::new(3, 0.01);
        opt.update(&mut p, &[1.0, -2.0, 0.1], 0.0);
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_against_gradient_by_lr() {
        let mut p = vec![0.0, 0.0];
        let mut opt = AdamW::new(2, 0.0);
        opt.update(&mut p, &[3.0, -0.5], 0.1);
        assert!((p[0] + 0.1).abs() < 1e-6 && (p[1] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(learning_rate(1e-3, 0, 100, true), 1e-3);
        assert!((learning_rate(1e-3, 50, 100, true) - 5e-4).abs() < 1e-12);
        assert!(learning_rate(1e-3, 100, 100, true).abs() < 1e-18);
        assert_eq!(learning_rate(1e-3, 70, 100, false), 1e-3);
    }
}
