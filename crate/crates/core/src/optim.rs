//! Adam with bias correction and optional L2 weight decay added to the
//! gradient (the coupled form).

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Optimizer state for a flat parameter vector of fixed length. Callers
/// update contiguous regions of that vector between [`Adam::begin_step`]
/// calls.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    bias1: f64,
    bias2: f64,
}

impl Adam {
    pub fn new(n_params: usize, cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            bias1: 1.0,
            bias2: 1.0,
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    pub fn begin_step(&mut self) {
        self.t += 1;
        self.bias1 = 1.0 - self.cfg.beta1.powi(self.t);
        self.bias2 = 1.0 - self.cfg.beta2.powi(self.t);
    }

    /// Applies the current step to `params`, whose moments start at `offset`.
    pub fn update(&mut self, offset: usize, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.cfg;
        let m = &mut self.m[offset..offset + params.len()];
        let v = &mut self.v[offset..offset + params.len()];
        for k in 0..params.len() {
            let mut g = grads[k];
            if weight_decay != 0.0 {
                g += weight_decay * params[k];
            }
            m[k] = beta1 * m[k] + (1.0 - beta1) * g;
            v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
            let m_hat = m[k] / self.bias1;
            let v_hat = v[k] / self.bias2;
            params[k] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    }

    pub fn update_scalar(&mut self, offset: usize, param: &mut f64, grad: f64) {
        self.update(offset, std::slice::from_mut(param), &[grad]);
    }
}
