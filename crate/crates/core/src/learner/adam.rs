use super::network::{Gradients, QNetwork};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with per-parameter first and second moments.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &QNetwork, lr: f64) -> Self {
        Adam { lr, step: 0, m: Gradients::zeros_like(net), v: Gradients::zeros_like(net) }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn apply(&mut self, net: &mut QNetwork, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let lr = self.lr;
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            }
        };
        for (((layer, g), m), v) in
            net.layers_mut().iter_mut().zip(&grads.layers).zip(&mut self.m.layers).zip(&mut self.v.layers)
        {
            update(&mut layer.weights, &g.weights, &mut m.weights, &mut v.weights);
            update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
        }
    }
}
