use serde::{Deserialize, Serialize};

use super::{Gradients, Network};
use crate::error::{Error, Result};

/// Adam moments for every parameter of a network, with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        let sizes: Vec<usize> = net.kinds().iter().map(|k| k.param_count()).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn apply(&mut self, net: &mut Network, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.0.len() != self.m.len()
            || grads.0.iter().zip(&self.m).any(|(g, m)| g.len() != m.len())
        {
            return Err(Error::Shape(
                "gradients do not match optimizer state".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((layer, g), m), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.0)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            layer.update(g, |k, p, gk| {
                m[k] = b1 * m[k] + (1.0 - b1) * gk;
                v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
                let mhat = m[k] / c1;
                let vhat = v[k] / c2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            });
        }
        Ok(())
    }
}
