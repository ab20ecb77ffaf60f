//! A small dense-network engine: layers with hand-written backward passes,
//! mean-squared-error loss, Adam, step learning-rate schedules and a seeded
//! mini-batch training loop.
//!
//! Every row of a batch is evaluated with the same instruction sequence, so
//! a batched forward pass is bit-identical to evaluating rows one at a time.

mod layer;
mod optim;
mod spec;
mod train;

pub use layer::{Dense, Layer, LayerKind, PRelu, PRELU_INIT_SLOPE};
pub use optim::AdamState;
pub use spec::NetworkSpec;
pub use train::{train, TrainConfig, TrainHistory};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::spiral::SpiralParams;
use layer::LayerCache;

/// Generator for weight initialization. Uses its own ChaCha stream so that
/// it never overlaps the shuffling sequence drawn from the same seed.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Activations kept by [`Network::forward`] for [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    batch: usize,
}

/// Per-layer flat parameter gradients, aligned with [`Network::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    input_dim: usize,
    output_dim: usize,
}

impl Network {
    pub fn new(layers: Vec<Layer>, input_dim: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("network layers"));
        }
        let mut width = input_dim;
        for layer in &layers {
            if let Some(expected) = layer.input_width() {
                if expected != width {
                    return Err(Error::Shape(format!(
                        "{:?} receives width {width}, expects {expected}",
                        layer.kind()
                    )));
                }
            }
            if let Layer::PRelu(p) = layer {
                if p.slope.len() != width {
                    return Err(Error::Shape(format!(
                        "PReLU of {} units after width {width}",
                        p.slope.len()
                    )));
                }
            }
            width = layer.output_width(width);
        }
        Ok(Self {
            layers,
            input_dim,
            output_dim: width,
        })
    }

    /// `[spiral] -> (dense -> PReLU) per hidden width -> dense`.
    pub fn mlp<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        spiral: Option<SpiralParams>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::new();
        let mut width = input_dim;
        if let Some(p) = spiral {
            if input_dim != 1 {
                return Err(Error::Shape(format!(
                    "spiral layer needs scalar input, got width {input_dim}"
                )));
            }
            layers.push(Layer::Spiral(p));
            width = 2;
        }
        for &h in hidden {
            if h == 0 {
                return Err(Error::Shape("hidden width must be positive".into()));
            }
            layers.push(Layer::Dense(Dense::glorot(width, h, rng)));
            layers.push(Layer::PRelu(PRelu::new(h)));
            width = h;
        }
        layers.push(Layer::Dense(Dense::glorot(width, output_dim, rng)));
        Self::new(layers, input_dim)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn kinds(&self) -> Vec<LayerKind> {
        self.layers.iter().map(Layer::kind).collect()
    }

    pub fn param_count(&self) -> usize {
        self.kinds().iter().map(LayerKind::param_count).sum()
    }

    pub fn spiral(&self) -> Option<SpiralParams> {
        self.layers.iter().find_map(|l| match l {
            Layer::Spiral(p) => Some(*p),
            _ => None,
        })
    }

    /// All parameters concatenated in layer order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "network has {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let n = layer.kind().param_count();
            layer.set_params(&values[offset..offset + n])?;
            offset += n;
        }
        Ok(())
    }

    /// Rebuild from layer kinds and a flat parameter vector.
    pub fn from_flat(kinds: &[LayerKind], input_dim: usize, values: &[f64]) -> Result<Self> {
        let layers = kinds
            .iter()
            .map(|k| match *k {
                LayerKind::Spiral => Layer::Spiral(SpiralParams::new(0.0, 0.0, 0.0, 0.0)),
                LayerKind::Dense { inputs, outputs } => Layer::Dense(Dense::zeros(inputs, outputs)),
                LayerKind::Prelu { units } => Layer::PRelu(PRelu::new(units)),
            })
            .collect();
        let mut net = Self::new(layers, input_dim)?;
        net.set_flat_params(values)?;
        Ok(net)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "network input width {} expected, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        Ok(())
    }

    /// Inference without caching.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.predict_range(x, 0, self.layers.len())
    }

    /// Run layers `start..end` only.
    pub fn predict_range(&self, x: &Matrix, start: usize, end: usize) -> Result<Matrix> {
        if start == 0 {
            self.check_input(x)?;
        }
        let mut h = x.clone();
        for layer in &self.layers[start..end] {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let (out, cache) = layer.forward_cached(h)?;
            caches.push(cache);
            h = out;
        }
        Ok((
            h,
            ForwardCache {
                layers: caches,
                batch: x.rows(),
            },
        ))
    }

    pub fn backward(&self, cache: &ForwardCache, grad_out: &Matrix) -> Result<Gradients> {
        if cache.layers.len() != self.layers.len()
            || grad_out.rows() != cache.batch
            || grad_out.cols() != self.output_dim
        {
            return Err(Error::Shape(format!(
                "stale cache: gradient {:?} for batch {} through {} layers",
                grad_out.shape(),
                cache.batch,
                self.layers.len()
            )));
        }
        let mut grads = vec![Vec::new(); self.layers.len()];
        let mut g = grad_out.clone();
        for (k, (layer, c)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let (pg, gi) = layer.backward(c, &g, k > 0)?;
            grads[k] = pg;
            g = gi;
        }
        Ok(Gradients(grads))
    }
}

/// `(1/N) sum_i ||pred_i - target_i||^2` and its gradient `2 (pred - target) / N`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.rows().max(1) as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut total = 0.0;
    for i in 0..pred.rows() {
        let mut row_sum = 0.0;
        for ((g, p), t) in grad
            .row_mut(i)
            .iter_mut()
            .zip(pred.row(i))
            .zip(target.row(i))
        {
            let d = p - t;
            row_sum += d * d;
            *g = 2.0 * d / n;
        }
        total += row_sum;
    }
    Ok((total / n, grad))
}

/// Loss without the gradient, evaluated in chunks to bound memory.
pub fn dataset_loss(net: &Network, x: &Matrix, y: &Matrix) -> Result<f64> {
    const CHUNK: usize = 4096;
    if x.rows() != y.rows() {
        return Err(Error::Shape(format!(
            "{} inputs vs {} targets",
            x.rows(),
            y.rows()
        )));
    }
    let mut total = 0.0;
    let idx: Vec<usize> = (0..x.rows()).collect();
    for chunk in idx.chunks(CHUNK) {
        let pred = net.predict(&x.select_rows(chunk))?;
        let (l, _) = mse_loss(&pred, &y.select_rows(chunk))?;
        total += l * chunk.len() as f64;
    }
    Ok(total / x.rows().max(1) as f64)
}
