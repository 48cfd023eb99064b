//! AdamW with decoupled weight decay.

use crate::filter::TransFilterParams;

/// Optimizer state shaped against one model's canonical parameter walk.
/// Moment buffers are indexed by walk position, so params, grads and state
/// always line up as long as they come from the same architecture.
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl AdamW {
    pub fn new(params: &TransFilterParams, weight_decay: f64) -> Self {
        let mut m = Vec::new();
        params.for_each(&mut |_, mat| m.push(vec![0.0; mat.data().len()]));
        let v = m.clone();
        AdamW { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, m, v, t: 0 }
    }

    /// One update. Weight decay is applied directly to the parameters
    /// (decoupled), not mixed into the gradient moments.
    pub fn step(&mut self, params: &mut TransFilterParams, grads: &TransFilterParams, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let mut g_flat: Vec<&[f64]> = Vec::new();
        grads.for_each(&mut |_, mat| g_flat.push(mat.data()));
        assert_eq!(g_flat.len(), self.m.len(), "gradient walk does not match optimizer state");
        let (beta1, beta2, eps, wd) = (self.beta1, self.beta2, self.eps, self.weight_decay);
        let (m_all, v_all) = (&mut self.m, &mut self.v);
        let mut idx = 0usize;
        params.for_each_mut(&mut |_, mat| {
            let g = g_flat[idx];
            let m = &mut m_all[idx];
            let v = &mut v_all[idx];
            for (i, p) in mat.data_mut().iter_mut().enumerate() {
                *p -= lr * wd * *p;
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            idx += 1;
        });
    }
}
