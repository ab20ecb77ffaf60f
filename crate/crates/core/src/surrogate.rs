//! Coefficient regressors (with or without the spiral module), the cubic
//! spline baseline, and the evaluation of waveform mismatch and throughput.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eim::{eim_reconstruct, stack, unstack, CoefficientDataset, EimModel, Standardizer};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nnet::{init_rng, train, Network, NetworkSpec, TrainConfig, TrainHistory};
use crate::spiral::SpiralParams;
use crate::waveform::{mismatch, Alignment, FiducialModel, WaveformSet};

/// Anything that maps mass ratios to EIM coefficients.
pub trait CoefficientPredictor {
    /// One row of `m` complex coefficients per input.
    fn predict(&self, q: &[f64]) -> Result<Vec<Vec<Complex64>>>;
    /// Interval the predictor was fitted on.
    fn q_range(&self) -> (f64, f64);
}

/// How `q` is presented to the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputMap {
    /// Raw `q`; the spiral layer carries its own affine angle map.
    Raw,
    /// `[lo, hi]` mapped linearly onto `[-1, 1]`.
    Affine { lo: f64, hi: f64 },
}

impl InputMap {
    fn apply(&self, q: &[f64]) -> Matrix {
        match *self {
            InputMap::Raw => Matrix::column(q),
            InputMap::Affine { lo, hi } => {
                let scale = if hi > lo { 2.0 / (hi - lo) } else { 1.0 };
                Matrix::column(&q.iter().map(|v| (v - lo) * scale - 1.0).collect::<Vec<_>>())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel {
    pub spec: NetworkSpec,
    pub network: Network,
    /// Target statistics of the training split.
    pub standardizer: Standardizer,
    pub input: InputMap,
    pub q_min: f64,
    pub q_max: f64,
}

impl RegressorModel {
    /// Untrained model for `m` complex coefficients on `[q_min, q_max]`.
    pub fn new(
        spec: &NetworkSpec,
        standardizer: Standardizer,
        q_min: f64,
        q_max: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(q_max > q_min) {
            return Err(Error::Domain(format!(
                "empty training interval [{q_min}, {q_max}]"
            )));
        }
        let out = standardizer.dim();
        if out == 0 || !out.is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "target width {out} is not a stacked complex vector"
            )));
        }
        let (spiral, input) = if spec.use_spiral {
            (
                Some(SpiralParams::for_interval(q_min, q_max)),
                InputMap::Raw,
            )
        } else {
            (
                None,
                InputMap::Affine {
                    lo: q_min,
                    hi: q_max,
                },
            )
        };
        let network = Network::mlp(1, &spec.layer_widths, out, spiral, &mut init_rng(seed))?;
        Ok(Self {
            spec: spec.clone(),
            network,
            standardizer,
            input,
            q_min,
            q_max,
        })
    }

    pub fn n_coefficients(&self) -> usize {
        self.network.output_dim() / 2
    }

    /// Network outputs before destandardization.
    pub fn predict_standardized(&self, q: &[f64]) -> Result<Matrix> {
        self.network.predict(&self.input.apply(q))
    }

    /// Destandardized stacked `[Re | Im]` rows.
    pub fn predict_stacked(&self, q: &[f64]) -> Result<Matrix> {
        Ok(self.standardizer.invert(&self.predict_standardized(q)?))
    }
}

impl CoefficientPredictor for RegressorModel {
    fn predict(&self, q: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        Ok(self.predict_stacked(q)?.iter_rows().map(unstack).collect())
    }

    fn q_range(&self) -> (f64, f64) {
        (self.q_min, self.q_max)
    }
}

pub fn predict_coefficients(
    model: &impl CoefficientPredictor,
    q: &[f64],
) -> Result<Vec<Vec<Complex64>>> {
    model.predict(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorFit {
    pub model: RegressorModel,
    pub history: TrainHistory,
}

/// Fit a regressor on standardized targets; `validation` is scored with the
/// training statistics and only monitored.
pub fn train_regressor(
    train_set: &CoefficientDataset,
    validation: Option<&CoefficientDataset>,
    spec: &NetworkSpec,
    config: &TrainConfig,
) -> Result<RegressorFit> {
    if train_set.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let (q_min, q_max) = min_max(&train_set.q);
    let mut model = RegressorModel::new(
        spec,
        train_set.standardizer.clone(),
        q_min,
        q_max,
        config.seed,
    )?;
    let x = model.input.apply(&train_set.q);
    let y = train_set.standardized();
    let val = match validation {
        Some(v) => {
            if v.values.cols() != train_set.values.cols() {
                return Err(Error::Shape(format!(
                    "validation width {} vs training width {}",
                    v.values.cols(),
                    train_set.values.cols()
                )));
            }
            Some((
                model.input.apply(&v.q),
                train_set.standardizer.apply(&v.values),
            ))
        }
        None => None,
    };
    let history = train(
        &mut model.network,
        &x,
        &y,
        val.as_ref().map(|(a, b)| (a, b)),
        config,
    )?;
    Ok(RegressorFit { model, history })
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Natural cubic splines through every stacked coefficient column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineModel {
    pub knots: Vec<f64>,
    /// Knot values, `N x 2m`.
    pub values: Matrix,
    /// Second derivatives at the knots, `N x 2m`.
    pub second: Matrix,
}

pub fn fit_spline_baseline(dataset: &CoefficientDataset) -> Result<SplineModel> {
    SplineModel::fit(&dataset.q, &dataset.values)
}

impl SplineModel {
    pub fn fit(knots: &[f64], values: &Matrix) -> Result<Self> {
        let n = knots.len();
        if n < 4 {
            return Err(Error::Domain(format!(
                "spline needs at least 4 knots, got {n}"
            )));
        }
        if values.rows() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: values.rows(),
            });
        }
        if let Some(w) = knots.windows(2).find(|w| !(w[1] > w[0])) {
            return if w[1] == w[0] {
                Err(Error::DuplicateKnot(w[0]))
            } else {
                Err(Error::Domain("spline knots must be increasing".into()))
            };
        }
        let d = values.cols();
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        // tridiagonal system for interior second derivatives, shared by all columns
        let k = n - 2;
        let sub: Vec<f64> = (0..k).map(|i| h[i]).collect();
        let diag: Vec<f64> = (0..k).map(|i| 2.0 * (h[i] + h[i + 1])).collect();
        let sup: Vec<f64> = (0..k).map(|i| h[i + 1]).collect();
        let mut c = vec![0.0; k];
        let mut denom = vec![0.0; k];
        for i in 0..k {
            let prev = if i == 0 { 0.0 } else { c[i - 1] };
            denom[i] = diag[i] - sub[i] * prev;
            c[i] = sup[i] / denom[i];
        }
        let mut second = Matrix::zeros(n, d);
        let mut rhs = vec![0.0; k];
        let mut m = vec![0.0; k];
        for j in 0..d {
            for i in 0..k {
                let y0 = values.get(i, j);
                let y1 = values.get(i + 1, j);
                let y2 = values.get(i + 2, j);
                rhs[i] = 6.0 * ((y2 - y1) / h[i + 1] - (y1 - y0) / h[i]);
            }
            for i in 0..k {
                let prev = if i == 0 { 0.0 } else { rhs[i - 1] };
                rhs[i] = (rhs[i] - sub[i] * prev) / denom[i];
            }
            for i in (0..k).rev() {
                let next = if i + 1 < k { m[i + 1] } else { 0.0 };
                m[i] = rhs[i] - c[i] * next;
            }
            for (i, &mi) in m.iter().enumerate() {
                second.set(i + 1, j, mi);
            }
        }
        Ok(Self {
            knots: knots.to_vec(),
            values: values.clone(),
            second,
        })
    }

    /// Interval index `i` with `knots[i] <= x <= knots[i + 1]`, clamped to the ends.
    fn interval(&self, x: f64) -> usize {
        let n = self.knots.len();
        match self.knots.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    pub fn eval_row(&self, x: f64) -> Vec<f64> {
        let i = self.interval(x);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let (y0, y1) = (self.values.row(i), self.values.row(i + 1));
        let (m0, m1) = (self.second.row(i), self.second.row(i + 1));
        (0..self.values.cols())
            .map(|j| {
                a * y0[j]
                    + b * y1[j]
                    + ((a * a * a - a) * m0[j] + (b * b * b - b) * m1[j]) * h * h / 6.0
            })
            .collect()
    }

    pub fn eval(&self, q: &[f64]) -> Matrix {
        let rows: Vec<Vec<f64>> = q.iter().map(|&x| self.eval_row(x)).collect();
        let mut out = Matrix::zeros(q.len(), self.values.cols());
        for (i, r) in rows.iter().enumerate() {
            out.row_mut(i).copy_from_slice(r);
        }
        out
    }
}

impl CoefficientPredictor for SplineModel {
    fn predict(&self, q: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        Ok(q.iter().map(|&x| unstack(&self.eval_row(x))).collect())
    }

    fn q_range(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }
}

/// Ground truth waveforms on the same frame as the reduced basis.
#[derive(Debug, Clone, Copy)]
pub struct Fiducial<'a, M: FiducialModel> {
    pub model: &'a M,
    pub alignment: &'a Alignment,
}

impl<M: FiducialModel> Fiducial<'_, M> {
    pub fn waveform(&self, q: f64) -> Result<crate::waveform::ComplexWaveform> {
        self.alignment
            .apply(&self.model.generate(q, &self.alignment.source)?)
    }
}

/// Node values of the true waveform: the best any regressor can do.
pub struct ExactCoefficients<'a, M: FiducialModel> {
    pub fiducial: Fiducial<'a, M>,
    pub eim: &'a EimModel,
    pub range: (f64, f64),
}

impl<M: FiducialModel> CoefficientPredictor for ExactCoefficients<'_, M> {
    fn predict(&self, q: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        q.iter()
            .map(|&x| crate::eim::eim_coefficients(&self.fiducial.waveform(x)?, self.eim))
            .collect()
    }

    fn q_range(&self) -> (f64, f64) {
        self.range
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchReport {
    pub q: Vec<f64>,
    pub per_sample: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    /// Nearest-rank 95th percentile.
    pub p95: f64,
    /// Test points outside the fitted interval.
    pub extrapolated: Vec<usize>,
}

impl MismatchReport {
    pub fn from_samples(
        q: Vec<f64>,
        per_sample: Vec<f64>,
        extrapolated: Vec<usize>,
    ) -> Result<Self> {
        if per_sample.is_empty() {
            return Err(Error::Empty("mismatch samples"));
        }
        let mut sorted = per_sample.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Ok(Self {
            min: sorted[0],
            max: sorted[n - 1],
            median,
            p95: nearest_rank(&sorted, 95.0),
            q,
            per_sample,
            extrapolated,
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "q,mismatch")?;
        for (q, m) in self.q.iter().zip(&self.per_sample) {
            writeln!(out, "{q},{m}")?;
        }
        Ok(())
    }
}

/// Smallest value with at least `p` percent of the sample at or below it.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Predict coefficients for every test `q`, rebuild the waveform through the
/// interpolant and compare against the fiducial model.
pub fn evaluate<M: FiducialModel>(
    predictor: &impl CoefficientPredictor,
    test_q: &[f64],
    fiducial: Fiducial<'_, M>,
    eim: &EimModel,
) -> Result<MismatchReport> {
    if test_q.is_empty() {
        return Err(Error::Empty("test q values"));
    }
    let (lo, hi) = predictor.q_range();
    let extrapolated: Vec<usize> = test_q
        .iter()
        .enumerate()
        .filter(|(_, &q)| q < lo || q > hi)
        .map(|(i, _)| i)
        .collect();
    let coeffs = predictor.predict(test_q)?;
    let per_sample = test_q
        .iter()
        .zip(&coeffs)
        .map(|(&q, a)| {
            let truth = fiducial.waveform(q)?;
            let approx = eim_reconstruct(a, eim)?;
            mismatch(&truth, &approx)
        })
        .collect::<Result<Vec<_>>>()?;
    MismatchReport::from_samples(test_q.to_vec(), per_sample, extrapolated)
}

/// Like [`evaluate`], against stored reference waveforms on the EIM grid.
pub fn evaluate_set(
    predictor: &impl CoefficientPredictor,
    reference: &WaveformSet,
    eim: &EimModel,
) -> Result<MismatchReport> {
    if reference.is_empty() {
        return Err(Error::Empty("reference waveforms"));
    }
    if reference.grid != eim.grid {
        return Err(Error::GridMismatch(format!(
            "reference set on {:?}, interpolant on {:?}",
            reference.grid, eim.grid
        )));
    }
    let (lo, hi) = predictor.q_range();
    let q = &reference.q_values;
    let extrapolated = (0..q.len()).filter(|&i| q[i] < lo || q[i] > hi).collect();
    let coeffs = predictor.predict(q)?;
    let per_sample = coeffs
        .iter()
        .enumerate()
        .map(|(i, a)| mismatch(&reference.waveform(i), &eim_reconstruct(a, eim)?))
        .collect::<Result<Vec<_>>>()?;
    MismatchReport::from_samples(q.clone(), per_sample, extrapolated)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRow {
    pub batch_size: usize,
    pub repetitions: usize,
    pub median_seconds: f64,
    pub q_per_second: f64,
    /// Real coefficient values produced per second (`2m` per input).
    pub coefficients_per_second: f64,
}

/// Median wall time of `predict_stacked` per batch size.
pub fn benchmark(
    model: &RegressorModel,
    batch_sizes: &[usize],
    repetitions: usize,
) -> Result<Vec<ThroughputRow>> {
    if repetitions == 0 {
        return Err(Error::Config(
            "benchmark needs at least one repetition".into(),
        ));
    }
    let width = 2 * model.n_coefficients();
    batch_sizes
        .iter()
        .map(|&b| {
            if b == 0 {
                return Err(Error::Config("batch size must be positive".into()));
            }
            let q: Vec<f64> = (0..b)
                .map(|i| model.q_min + (model.q_max - model.q_min) * (i as f64 + 0.5) / b as f64)
                .collect();
            model.predict_stacked(&q)?;
            let mut times = Vec::with_capacity(repetitions);
            for _ in 0..repetitions {
                let t = Instant::now();
                let out = model.predict_stacked(&q)?;
                times.push(t.elapsed().as_secs_f64());
                std::hint::black_box(out);
            }
            times.sort_by(f64::total_cmp);
            let median = times[times.len() / 2].max(1e-9);
            Ok(ThroughputRow {
                batch_size: b,
                repetitions,
                median_seconds: median,
                q_per_second: b as f64 / median,
                coefficients_per_second: (b * width) as f64 / median,
            })
        })
        .collect()
}

/// Largest batch whose activations fit in `budget_bytes`, counting one
/// input and one output buffer per layer plus the parameters.
pub fn max_batch_for_budget(model: &RegressorModel, budget_bytes: u64) -> u64 {
    let net = &model.network;
    let mut width = net.input_dim();
    let mut per_row = width;
    for layer in net.layers() {
        width = layer.output_width(width);
        per_row += width;
    }
    let fixed = (net.param_count() * 8) as u64;
    let per_row = (per_row * 8) as u64;
    budget_bytes.saturating_sub(fixed) / per_row.max(1)
}

/// Stacked coefficient rows for a set of `q`, from any predictor.
pub fn predicted_matrix(model: &impl CoefficientPredictor, q: &[f64]) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = model.predict(q)?.iter().map(|a| stack(a)).collect();
    Matrix::from_rows(&rows)
}
