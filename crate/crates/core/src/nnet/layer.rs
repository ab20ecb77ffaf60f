use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, Matrix};
use crate::spiral::{spiral_backward, spiral_forward, SpiralCache, SpiralParams};

pub const PRELU_INIT_SLOPE: f64 = 0.25;

/// Fully connected layer `y = W x + b` with `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `+-sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut layer = Self::zeros(inputs, outputs);
        for w in layer.weight.as_mut_slice() {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = Matrix::zeros(x.rows(), self.outputs());
        for n in 0..x.rows() {
            let xr = x.row(n);
            let yr = y.row_mut(n);
            for (o, out) in yr.iter_mut().enumerate() {
                *out = self.bias[o] + dot(self.weight.row(o), xr);
            }
        }
        y
    }

    fn backward(&self, x: &Matrix, g: &Matrix, want_input: bool) -> (Vec<f64>, Vec<f64>, Matrix) {
        let mut dw = Matrix::zeros(self.outputs(), self.inputs());
        let mut db = vec![0.0; self.outputs()];
        let mut dx = Matrix::zeros(if want_input { x.rows() } else { 0 }, self.inputs());
        for n in 0..x.rows() {
            let gr = g.row(n);
            let xr = x.row(n);
            for (o, &go) in gr.iter().enumerate() {
                if go == 0.0 {
                    continue;
                }
                db[o] += go;
                axpy(go, xr, dw.row_mut(o));
                if want_input {
                    axpy(go, self.weight.row(o), dx.row_mut(n));
                }
            }
        }
        (dw.into_vec(), db, dx)
    }
}

/// `max(0, x) + a min(0, x)` with one learnable slope per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PRelu {
    pub slope: Vec<f64>,
}

impl PRelu {
    pub fn new(units: usize) -> Self {
        Self {
            slope: vec![PRELU_INIT_SLOPE; units],
        }
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = x.clone();
        for n in 0..y.rows() {
            for (v, a) in y.row_mut(n).iter_mut().zip(&self.slope) {
                if *v < 0.0 {
                    *v *= a;
                }
            }
        }
        y
    }

    fn backward(&self, x: &Matrix, g: &Matrix) -> (Vec<f64>, Matrix) {
        let mut da = vec![0.0; self.slope.len()];
        let mut dx = g.clone();
        for n in 0..x.rows() {
            let xr = x.row(n);
            for (j, d) in dx.row_mut(n).iter_mut().enumerate() {
                if xr[j] < 0.0 {
                    da[j] += *d * xr[j];
                    *d *= self.slope[j];
                }
            }
        }
        (da, dx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Spiral(SpiralParams),
    Dense(Dense),
    PRelu(PRelu),
}

/// Serializable description of a layer's shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerKind {
    Spiral,
    Dense { inputs: usize, outputs: usize },
    Prelu { units: usize },
}

impl LayerKind {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerKind::Spiral => 4,
            LayerKind::Dense { inputs, outputs } => inputs * outputs + outputs,
            LayerKind::Prelu { units } => units,
        }
    }
}

/// What a layer needs from its forward pass to run backward.
#[derive(Debug, Clone)]
pub(crate) enum LayerCache {
    Input(Matrix),
    Spiral(SpiralCache),
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Spiral(_) => LayerKind::Spiral,
            Layer::Dense(d) => LayerKind::Dense {
                inputs: d.inputs(),
                outputs: d.outputs(),
            },
            Layer::PRelu(p) => LayerKind::Prelu {
                units: p.slope.len(),
            },
        }
    }

    pub fn input_width(&self) -> Option<usize> {
        match self {
            Layer::Spiral(_) => Some(1),
            Layer::Dense(d) => Some(d.inputs()),
            Layer::PRelu(_) => None,
        }
    }

    pub fn output_width(&self, input: usize) -> usize {
        match self {
            Layer::Spiral(_) => 2,
            Layer::Dense(d) => d.outputs(),
            Layer::PRelu(_) => input,
        }
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        let expected = match self {
            Layer::Spiral(_) => 1,
            Layer::Dense(d) => d.inputs(),
            Layer::PRelu(p) => p.slope.len(),
        };
        if x.cols() != expected {
            return Err(Error::Shape(format!(
                "{:?} layer expects width {expected}, got {}",
                self.kind(),
                x.cols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        Ok(match self {
            Layer::Spiral(p) => spiral_forward(x.as_slice(), p).0,
            Layer::Dense(d) => d.forward(x),
            Layer::PRelu(p) => p.forward(x),
        })
    }

    pub(crate) fn forward_cached(&self, x: Matrix) -> Result<(Matrix, LayerCache)> {
        self.check_input(&x)?;
        Ok(match self {
            Layer::Spiral(p) => {
                let (y, cache) = spiral_forward(x.as_slice(), p);
                (y, LayerCache::Spiral(cache))
            }
            Layer::Dense(d) => (d.forward(&x), LayerCache::Input(x)),
            Layer::PRelu(p) => (p.forward(&x), LayerCache::Input(x)),
        })
    }

    /// Parameter gradients (in `params()` order) and the input gradient.
    pub(crate) fn backward(
        &self,
        cache: &LayerCache,
        g: &Matrix,
        want_input: bool,
    ) -> Result<(Vec<f64>, Matrix)> {
        match (self, cache) {
            (Layer::Spiral(p), LayerCache::Spiral(c)) => {
                let (grads, dq) = spiral_backward(g, c, p)?;
                Ok((grads.to_array().to_vec(), Matrix::column(&dq)))
            }
            (Layer::Dense(d), LayerCache::Input(x)) => {
                check_grad(x, g, d.outputs())?;
                let (mut dw, db, dx) = d.backward(x, g, want_input);
                dw.extend_from_slice(&db);
                Ok((dw, dx))
            }
            (Layer::PRelu(p), LayerCache::Input(x)) => {
                check_grad(x, g, p.slope.len())?;
                let (da, dx) = p.backward(x, g);
                Ok((da, dx))
            }
            _ => Err(Error::Shape("layer cache does not match layer kind".into())),
        }
    }

    /// Flat parameter view: dense weights then biases; spiral `[w, b, alpha, beta]`.
    pub fn params(&self) -> Vec<f64> {
        match self {
            Layer::Spiral(p) => p.to_array().to_vec(),
            Layer::Dense(d) => {
                let mut v = d.weight.as_slice().to_vec();
                v.extend_from_slice(&d.bias);
                v
            }
            Layer::PRelu(p) => p.slope.clone(),
        }
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.kind().param_count() {
            return Err(Error::Shape(format!(
                "{:?} takes {} parameters, got {}",
                self.kind(),
                self.kind().param_count(),
                values.len()
            )));
        }
        match self {
            Layer::Spiral(p) => *p = SpiralParams::from_slice(values),
            Layer::Dense(d) => {
                let nw = d.weight.rows() * d.weight.cols();
                d.weight.as_mut_slice().copy_from_slice(&values[..nw]);
                d.bias.copy_from_slice(&values[nw..]);
            }
            Layer::PRelu(p) => p.slope.copy_from_slice(values),
        }
        Ok(())
    }

    /// Apply `update(param, grad)` over every parameter of the layer.
    pub(crate) fn update(&mut self, grads: &[f64], mut update: impl FnMut(usize, &mut f64, f64)) {
        match self {
            Layer::Spiral(p) => {
                let mut arr = p.to_array();
                for (k, (v, g)) in arr.iter_mut().zip(grads).enumerate() {
                    update(k, v, *g);
                }
                *p = SpiralParams::from_slice(&arr);
            }
            Layer::Dense(d) => {
                let nw = d.weight.rows() * d.weight.cols();
                for (k, (v, g)) in d.weight.as_mut_slice().iter_mut().zip(grads).enumerate() {
                    update(k, v, *g);
                }
                for (k, (v, g)) in d.bias.iter_mut().zip(&grads[nw..]).enumerate() {
                    update(nw + k, v, *g);
                }
            }
            Layer::PRelu(p) => {
                for (k, (v, g)) in p.slope.iter_mut().zip(grads).enumerate() {
                    update(k, v, *g);
                }
            }
        }
    }
}

fn check_grad(x: &Matrix, g: &Matrix, width: usize) -> Result<()> {
    if g.rows() != x.rows() || g.cols() != width {
        return Err(Error::Shape(format!(
            "gradient of shape {:?} for a {}-row batch of width {width}",
            g.shape(),
            x.rows()
        )));
    }
    Ok(())
}
