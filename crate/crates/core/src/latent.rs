//! Two-dimensional representations of the coefficient dataset: a symmetric
//! autoencoder, a PCA baseline, and diagnostics for spiral structure in the
//! resulting latent points.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eim::{CoefficientDataset, Standardizer};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nnet::{init_rng, train, Dense, Layer, Network, PRelu, TrainConfig, TrainHistory};

/// How coefficient columns are scaled before entering the autoencoder or PCA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentScaling {
    /// Zero mean and unit variance per column.
    Standardized,
    /// Zero mean per column, one shared scale for all columns.
    Pooled,
}

impl LatentScaling {
    pub fn fit(self, values: &Matrix) -> Standardizer {
        match self {
            LatentScaling::Standardized => Standardizer::fit(values),
            LatentScaling::Pooled => Standardizer::fit_pooled(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub latent_dim: usize,
    /// Widths on each side of the bottleneck, outermost first.
    pub hidden: Vec<usize>,
    pub scaling: LatentScaling,
    pub train: TrainConfig,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            latent_dim: 2,
            hidden: vec![128, 128],
            scaling: LatentScaling::Pooled,
            train: TrainConfig {
                epochs: 100,
                batch_size: 32,
                lr0: 1e-3,
                gamma: 0.9,
                step_epochs: 15,
                seed: 0,
            },
        }
    }
}

/// Encoder `g` and decoder `f` in one network; the first `encoder_layers`
/// layers form `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub network: Network,
    pub encoder_layers: usize,
    pub latent_dim: usize,
    pub scaler: Standardizer,
}

impl AutoencoderModel {
    /// `D -> h1 -> ... -> d -> ... -> h1 -> D` with PReLU after every dense
    /// layer except the output one, the bottleneck included.
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        latent_dim: usize,
        scaler: Standardizer,
        seed: u64,
    ) -> Result<Self> {
        if latent_dim == 0 || input_dim == 0 {
            return Err(Error::Shape("autoencoder widths must be positive".into()));
        }
        if scaler.dim() != input_dim {
            return Err(Error::Shape(format!(
                "scaler of width {} for input width {input_dim}",
                scaler.dim()
            )));
        }
        let mut rng = init_rng(seed);
        let mut layers = Vec::new();
        let mut width = input_dim;
        let mut widths: Vec<usize> = hidden.to_vec();
        widths.push(latent_dim);
        widths.extend(hidden.iter().rev());
        widths.push(input_dim);
        let last = widths.len() - 1;
        let mut encoder_layers = 0;
        for (k, &w) in widths.iter().enumerate() {
            layers.push(Layer::Dense(Dense::glorot(width, w, &mut rng)));
            if k != last {
                layers.push(Layer::PRelu(PRelu::new(w)));
            }
            if k == hidden.len() {
                encoder_layers = layers.len();
            }
            width = w;
        }
        Ok(Self {
            network: Network::new(layers, input_dim)?,
            encoder_layers,
            latent_dim,
            scaler,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.network.input_dim()
    }

    fn scaled(&self, values: &Matrix) -> Result<Matrix> {
        if values.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "autoencoder takes width {}, got {}",
                self.input_dim(),
                values.cols()
            )));
        }
        Ok(self.scaler.apply(values))
    }

    /// Bottleneck activations for raw coefficient rows.
    pub fn encode_values(&self, values: &Matrix) -> Result<Matrix> {
        self.network
            .predict_range(&self.scaled(values)?, 0, self.encoder_layers)
    }

    /// Raw coefficient rows from latent points.
    pub fn decode(&self, latent: &Matrix) -> Result<Matrix> {
        if latent.cols() != self.latent_dim {
            return Err(Error::Shape(format!(
                "latent width {} expected, got {}",
                self.latent_dim,
                latent.cols()
            )));
        }
        let out =
            self.network
                .predict_range(latent, self.encoder_layers, self.network.layers().len())?;
        Ok(self.scaler.invert(&out))
    }

    /// Mean squared reconstruction error in scaled units.
    pub fn reconstruction_mse(&self, values: &Matrix) -> Result<f64> {
        let x = self.scaled(values)?;
        mean_sq_row_distance(&self.network.predict(&x)?, &x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderFit {
    pub model: AutoencoderModel,
    pub history: TrainHistory,
    /// Final reconstruction MSE on the training rows, in scaled units.
    pub mse: f64,
}

pub fn train_autoencoder(
    dataset: &CoefficientDataset,
    config: &AutoencoderConfig,
) -> Result<AutoencoderFit> {
    if dataset.is_empty() {
        return Err(Error::Empty("coefficient dataset"));
    }
    let scaler = config.scaling.fit(&dataset.values);
    let mut model = AutoencoderModel::new(
        dataset.values.cols(),
        &config.hidden,
        config.latent_dim,
        scaler,
        config.train.seed,
    )?;
    let x = model.scaler.apply(&dataset.values);
    let history = train(&mut model.network, &x, &x, None, &config.train)?;
    let mse = model.reconstruction_mse(&dataset.values)?;
    Ok(AutoencoderFit {
        model,
        history,
        mse,
    })
}

/// Latent point for every row of the dataset, in dataset (q) order.
pub fn encode(model: &AutoencoderModel, dataset: &CoefficientDataset) -> Result<Matrix> {
    model.encode_values(&dataset.values)
}

fn mean_sq_row_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    Ok(crate::nnet::mse_loss(a, b)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k x D`, orthonormal rows.
    pub components: Matrix,
    pub singular_values: Vec<f64>,
    pub scaler: Standardizer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaFit {
    pub model: PcaModel,
    /// Mean squared reconstruction residual in scaled units.
    pub mse: f64,
    pub warnings: Vec<String>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.rows()
    }

    fn centered(&self, values: &Matrix) -> Result<Matrix> {
        if values.cols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "PCA takes width {}, got {}",
                self.mean.len(),
                values.cols()
            )));
        }
        let mut x = self.scaler.apply(values);
        for i in 0..x.rows() {
            for (v, m) in x.row_mut(i).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        Ok(x)
    }

    /// Scores `N x k` for raw coefficient rows.
    pub fn transform(&self, values: &Matrix) -> Result<Matrix> {
        let x = self.centered(values)?;
        let mut out = Matrix::zeros(x.rows(), self.k());
        for i in 0..x.rows() {
            for c in 0..self.k() {
                out.set(i, c, crate::matrix::dot(self.components.row(c), x.row(i)));
            }
        }
        Ok(out)
    }

    /// Reconstruction in scaled units, `mean + scores * components`.
    fn reconstruct_scaled(&self, scores: &Matrix) -> Matrix {
        let d = self.mean.len();
        let mut out = Matrix::zeros(scores.rows(), d);
        for i in 0..scores.rows() {
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for c in 0..self.k() {
                crate::matrix::axpy(scores.get(i, c), self.components.row(c), row);
            }
        }
        out
    }

    pub fn reconstruction_mse(&self, values: &Matrix) -> Result<f64> {
        let scores = self.transform(values)?;
        mean_sq_row_distance(
            &self.reconstruct_scaled(&scores),
            &self.scaler.apply(values),
        )
    }
}

/// Top-`k` right singular vectors of the centered, scaled data.
pub fn pca_fit(values: &Matrix, k: usize, scaling: LatentScaling) -> Result<PcaFit> {
    let (n, d) = values.shape();
    if k == 0 {
        return Err(Error::Shape("PCA needs at least one component".into()));
    }
    if n < k || d < k {
        return Err(Error::Shape(format!(
            "{k} components from a {n} x {d} data matrix"
        )));
    }
    let scaler = scaling.fit(values);
    let x = scaler.apply(values);
    let mut mean = vec![0.0; d];
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| x.get(i, j) - mean[j]);
    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Shape("SVD returned no right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s_max = svd.singular_values.max();
    let mut warnings = Vec::new();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-12 * s_max.max(f64::MIN_POSITIVE))
        .count();
    if rank < k {
        warnings.push(format!(
            "data has numerical rank {rank} < {k}; padding with null-space directions"
        ));
    }
    let mut components = Matrix::zeros(k, d);
    let mut singular_values = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        for j in 0..d {
            components.set(c, j, v_t[(idx, j)]);
        }
        singular_values.push(svd.singular_values[idx]);
    }
    let model = PcaModel {
        mean,
        components,
        singular_values,
        scaler,
    };
    let mse = model.reconstruction_mse(values)?;
    Ok(PcaFit {
        model,
        mse,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDiagnostics {
    pub q: Vec<f64>,
    pub points: Matrix,
    pub center: [f64; 2],
    pub unwrapped_angle: Vec<f64>,
    pub radius: Vec<f64>,
    pub angle_q_spearman: f64,
    pub linear_fit_r2: f64,
    /// Least-squares `angle ~ slope q + intercept`.
    pub slope: f64,
    pub intercept: f64,
}

/// Angles about the centroid, unwrapped along increasing `q`, and how well
/// they follow `q`.
pub fn latent_spiral_diagnostics(points: &Matrix, q_values: &[f64]) -> Result<LatentDiagnostics> {
    if points.cols() != 2 {
        return Err(Error::Shape(format!(
            "latent points must be 2-D, got width {}",
            points.cols()
        )));
    }
    if points.rows() != q_values.len() {
        return Err(Error::LengthMismatch {
            expected: points.rows(),
            actual: q_values.len(),
        });
    }
    let n = q_values.len();
    if n < 3 {
        return Err(Error::Empty("at least three latent points"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| q_values[a].total_cmp(&q_values[b]));
    let points = points.select_rows(&order);
    let q: Vec<f64> = order.iter().map(|&i| q_values[i]).collect();

    let cx = points.column_values(0).iter().sum::<f64>() / n as f64;
    let cy = points.column_values(1).iter().sum::<f64>() / n as f64;
    let raw: Vec<f64> = points
        .iter_rows()
        .map(|p| (p[1] - cy).atan2(p[0] - cx))
        .collect();
    let radius = points
        .iter_rows()
        .map(|p| (p[0] - cx).hypot(p[1] - cy))
        .collect();
    let unwrapped_angle = unwrap(&raw);
    let (slope, intercept, linear_fit_r2) = linear_fit(&q, &unwrapped_angle);
    Ok(LatentDiagnostics {
        angle_q_spearman: spearman(&unwrapped_angle, &q),
        q,
        points,
        center: [cx, cy],
        unwrapped_angle,
        radius,
        linear_fit_r2,
        slope,
        intercept,
    })
}

impl LatentDiagnostics {
    /// Columns `q, y1, y2, angle_unwrapped, radius`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "q,y1,y2,angle_unwrapped,radius")?;
        for i in 0..self.q.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.q[i],
                self.points.get(i, 0),
                self.points.get(i, 1),
                self.unwrapped_angle[i],
                self.radius[i]
            )?;
        }
        Ok(())
    }
}

/// Add multiples of `2 pi` so consecutive values differ by at most `pi`.
pub fn unwrap(angles: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    for (i, &a) in angles.iter().enumerate() {
        if i > 0 {
            let d = a + offset - out[i - 1];
            offset -= 2.0 * PI * ((d + PI) / (2.0 * PI)).floor();
        }
        out.push(a + offset);
    }
    out
}

/// Average ranks, ties sharing their mean rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// `(slope, intercept, R^2)` of the least-squares line `y ~ x`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let r = b - (slope * a + intercept);
        ss_res += r * r;
        ss_tot += (b - my) * (b - my);
    }
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        0.0
    };
    (slope, intercept, r2)
}
