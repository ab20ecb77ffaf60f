//! Learnable spiral input layer.
//!
//! A scalar input `q` is mapped to an angle `theta = w q + b` and then onto
//! the spiral point `((alpha + beta theta) cos theta, (alpha + beta theta) sin theta)`.
//! All four parameters are trained by backpropagation through the exact
//! derivatives of that map.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralParams {
    pub w: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl SpiralParams {
    pub fn new(w: f64, b: f64, alpha: f64, beta: f64) -> Self {
        Self { w, b, alpha, beta }
    }

    /// Three full turns over `[q_min, q_max]`, radius growing from 1 to ~2.
    pub fn for_interval(q_min: f64, q_max: f64) -> Self {
        let w = 6.0 * PI / (q_max - q_min);
        let alpha = 1.0;
        Self {
            w,
            b: -w * q_min,
            alpha,
            beta: alpha / (6.0 * PI),
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.b, self.alpha, self.beta]
    }

    pub fn from_slice(p: &[f64]) -> Self {
        Self::new(p[0], p[1], p[2], p[3])
    }

    #[inline]
    pub fn angle(&self, q: f64) -> f64 {
        self.w * q + self.b
    }

    #[inline]
    pub fn point(&self, q: f64) -> (f64, f64) {
        let theta = self.angle(q);
        let r = self.alpha + self.beta * theta;
        let (s, c) = theta.sin_cos();
        (r * c, r * s)
    }
}

/// Gradients of a scalar loss with respect to the four spiral parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpiralGrads {
    pub w: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl SpiralGrads {
    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.b, self.alpha, self.beta]
    }
}

/// Angles kept from the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SpiralCache {
    pub q: Vec<f64>,
    pub theta: Vec<f64>,
}

/// `N x 2` spiral coordinates for a batch of scalars.
pub fn spiral_forward(q: &[f64], p: &SpiralParams) -> (Matrix, SpiralCache) {
    let mut out = Matrix::zeros(q.len(), 2);
    let mut theta = Vec::with_capacity(q.len());
    for (i, &qi) in q.iter().enumerate() {
        let t = p.angle(qi);
        let r = p.alpha + p.beta * t;
        let (s, c) = t.sin_cos();
        out.set(i, 0, r * c);
        out.set(i, 1, r * s);
        theta.push(t);
    }
    (
        out,
        SpiralCache {
            q: q.to_vec(),
            theta,
        },
    )
}

/// Parameter gradients (summed over the batch) and the gradient with
/// respect to each input `q`.
pub fn spiral_backward(
    grad_out: &Matrix,
    cache: &SpiralCache,
    p: &SpiralParams,
) -> Result<(SpiralGrads, Vec<f64>)> {
    if grad_out.rows() != cache.theta.len() || grad_out.cols() != 2 {
        return Err(Error::Shape(format!(
            "spiral gradient of shape {:?} for a batch of {}",
            grad_out.shape(),
            cache.theta.len()
        )));
    }
    let mut g = SpiralGrads::default();
    let mut grad_q = Vec::with_capacity(cache.theta.len());
    for (i, (&t, &q)) in cache.theta.iter().zip(&cache.q).enumerate() {
        let (gx, gy) = (grad_out.get(i, 0), grad_out.get(i, 1));
        let (s, c) = t.sin_cos();
        let r = p.alpha + p.beta * t;
        g.alpha += gx * c + gy * s;
        g.beta += t * (gx * c + gy * s);
        let dx_dtheta = p.beta * c - r * s;
        let dy_dtheta = p.beta * s + r * c;
        let g_theta = gx * dx_dtheta + gy * dy_dtheta;
        g.w += g_theta * q;
        g.b += g_theta;
        grad_q.push(g_theta * p.w);
    }
    Ok((g, grad_q))
}
