//! Empirical interpolation: node selection, the interpolant operator, and
//! the `(q, coefficients)` dataset the regressors are trained on.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rom::ReducedBasis;
use crate::waveform::{normalize_in_place, peak_index, ComplexWaveform, TimeGrid, WaveformSet};

/// Node condition numbers above this are treated as singular.
const MAX_NODE_CONDITION: f64 = 1e12;

/// Empirical nodes `T_j` and the `L x m` operator `B` with `h ~ B a`.
#[derive(Debug, Clone, PartialEq)]
pub struct EimModel {
    pub grid: TimeGrid,
    pub node_indices: Vec<usize>,
    /// 2-norm condition number of the node matrix `V`.
    pub condition: f64,
    interpolant: Vec<Complex64>,
}

impl EimModel {
    pub fn from_parts(
        grid: TimeGrid,
        node_indices: Vec<usize>,
        interpolant: Vec<Complex64>,
        condition: f64,
    ) -> Result<Self> {
        let m = node_indices.len();
        if m == 0 {
            return Err(Error::Empty("empirical nodes"));
        }
        if interpolant.len() != m * grid.n_samples {
            return Err(Error::LengthMismatch {
                expected: m * grid.n_samples,
                actual: interpolant.len(),
            });
        }
        if let Some(&bad) = node_indices.iter().find(|&&k| k >= grid.n_samples) {
            return Err(Error::Domain(format!("node index {bad} outside the grid")));
        }
        Ok(Self {
            grid,
            node_indices,
            condition,
            interpolant,
        })
    }

    pub fn size(&self) -> usize {
        self.node_indices.len()
    }

    /// Row `t` of `B`.
    pub fn interpolant_row(&self, t: usize) -> &[Complex64] {
        let m = self.size();
        &self.interpolant[t * m..(t + 1) * m]
    }

    pub fn interpolant(&self) -> &[Complex64] {
        &self.interpolant
    }

    /// `B a` without normalization.
    pub fn interpolate(&self, a: &[Complex64]) -> Result<Vec<Complex64>> {
        if a.len() != self.size() {
            return Err(Error::LengthMismatch {
                expected: self.size(),
                actual: a.len(),
            });
        }
        Ok(self
            .interpolant
            .chunks_exact(self.size())
            .map(|row| row.iter().zip(a).map(|(b, x)| b * x).sum())
            .collect())
    }
}

/// Residual-argmax node selection followed by `B = E V^{-1}`.
pub fn build_eim(basis: &ReducedBasis) -> Result<EimModel> {
    let m = basis.size();
    let l = basis.grid.n_samples;
    let e = DMatrix::from_fn(l, m, |t, j| basis.vector(j)[t]);

    let mut nodes = vec![peak_index(basis.vector(0))];
    for k in 1..m {
        let v = DMatrix::from_fn(k, k, |r, c| e[(nodes[r], c)]);
        let rhs = DMatrix::from_fn(k, 1, |r, _| e[(nodes[r], k)]);
        let c = v.lu().solve(&rhs).ok_or(Error::SingularNodes {
            condition: f64::INFINITY,
        })?;
        let residual: Vec<Complex64> = (0..l)
            .map(|t| {
                let fit: Complex64 = (0..k).map(|j| e[(t, j)] * c[(j, 0)]).sum();
                e[(t, k)] - fit
            })
            .collect();
        let node = peak_index(&residual);
        if nodes.contains(&node) {
            return Err(Error::SingularNodes {
                condition: f64::INFINITY,
            });
        }
        nodes.push(node);
    }

    let v = DMatrix::from_fn(m, m, |r, c| e[(nodes[r], c)]);
    let sv = v.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = smax / smin;
    if !condition.is_finite() || condition > MAX_NODE_CONDITION {
        return Err(Error::SingularNodes { condition });
    }
    let v_inv = v
        .lu()
        .try_inverse()
        .ok_or(Error::SingularNodes { condition })?;
    let b = &e * v_inv;
    let mut interpolant = Vec::with_capacity(l * m);
    for t in 0..l {
        for j in 0..m {
            interpolant.push(b[(t, j)]);
        }
    }
    EimModel::from_parts(basis.grid, nodes, interpolant, condition)
}

/// Waveform values at the empirical nodes.
pub fn eim_coefficients(h: &ComplexWaveform, eim: &EimModel) -> Result<Vec<Complex64>> {
    if h.len() != eim.grid.n_samples {
        return Err(Error::LengthMismatch {
            expected: eim.grid.n_samples,
            actual: h.len(),
        });
    }
    Ok(sample_nodes(h.values(), &eim.node_indices))
}

fn sample_nodes(values: &[Complex64], nodes: &[usize]) -> Vec<Complex64> {
    nodes.iter().map(|&k| values[k]).collect()
}

/// Unit-norm waveform `normalize(B a)`.
pub fn eim_reconstruct(a: &[Complex64], eim: &EimModel) -> Result<ComplexWaveform> {
    let mut values = eim.interpolate(a)?;
    normalize_in_place(&mut values, eim.grid.dt())?;
    ComplexWaveform::new(eim.grid, values)
}

/// Real parts followed by imaginary parts.
pub fn stack(a: &[Complex64]) -> Vec<f64> {
    a.iter()
        .map(|c| c.re)
        .chain(a.iter().map(|c| c.im))
        .collect()
}

pub fn unstack(x: &[f64]) -> Vec<Complex64> {
    let m = x.len() / 2;
    (0..m).map(|j| Complex64::new(x[j], x[m + j])).collect()
}

/// Per-column affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics; a column with (numerically) zero spread gets std 1.
    pub fn fit(values: &Matrix) -> Self {
        let (n, d) = values.shape();
        let mut mean = vec![0.0; d];
        for row in values.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
        let mut var = vec![0.0; d];
        for row in values.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n.max(1) as f64).sqrt();
                if n < 2 || sd <= 1e-12 * m.abs().max(1.0) {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Self { mean, std }
    }

    /// Column means with a single shared scale: the root-mean-square deviation
    /// from those means over every entry. Keeps the relative size of the
    /// columns intact.
    pub fn fit_pooled(values: &Matrix) -> Self {
        let per_column = Self::fit(values);
        let (n, d) = values.shape();
        let mut total = 0.0;
        for row in values.iter_rows() {
            for (v, m) in row.iter().zip(&per_column.mean) {
                total += (v - m) * (v - m);
            }
        }
        let sd = (total / (n * d).max(1) as f64).sqrt();
        let level = per_column.mean.iter().fold(1.0f64, |a, m| a.max(m.abs()));
        let scale = if n < 2 || !(sd > 1e-12 * level) {
            1.0
        } else {
            sd
        };
        Self {
            std: vec![scale; d],
            mean: per_column.mean,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, values: &Matrix) -> Matrix {
        let mut out = values.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn invert_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = *v * s + m;
        }
    }

    pub fn invert(&self, values: &Matrix) -> Matrix {
        let mut out = values.clone();
        for i in 0..out.rows() {
            self.invert_row(out.row_mut(i));
        }
        out
    }
}

/// Pairs `(q_i, a(q_i))` with coefficients stacked as `[Re a | Im a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientDataset {
    pub q: Vec<f64>,
    /// Raw (un-standardized) stacked coefficients, `N x 2m`.
    pub values: Matrix,
    pub standardizer: Standardizer,
}

impl CoefficientDataset {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Number of complex coefficients `m`.
    pub fn n_coefficients(&self) -> usize {
        self.values.cols() / 2
    }

    pub fn standardized(&self) -> Matrix {
        self.standardizer.apply(&self.values)
    }

    pub fn complex_row(&self, i: usize) -> Vec<Complex64> {
        unstack(self.values.row(i))
    }

    /// The same rows under another split's statistics.
    pub fn with_standardizer(mut self, standardizer: Standardizer) -> Result<Self> {
        if standardizer.dim() != self.values.cols() {
            return Err(Error::Shape(format!(
                "standardizer of width {} for {} columns",
                standardizer.dim(),
                self.values.cols()
            )));
        }
        self.standardizer = standardizer;
        Ok(self)
    }
}

/// Sample every waveform at the nodes, order rows by q, and fit the
/// standardization statistics on this set.
pub fn build_dataset(train: &WaveformSet, eim: &EimModel) -> Result<CoefficientDataset> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if train.n_samples() != eim.grid.n_samples {
        return Err(Error::LengthMismatch {
            expected: eim.grid.n_samples,
            actual: train.n_samples(),
        });
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.sort_by(|&a, &b| train.q_values[a].total_cmp(&train.q_values[b]));
    let q: Vec<f64> = order.iter().map(|&i| train.q_values[i]).collect();
    let rows: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| stack(&sample_nodes(train.row(i), &eim.node_indices)))
        .collect();
    let values = Matrix::from_rows(&rows)?;
    let standardizer = Standardizer::fit(&values);
    Ok(CoefficientDataset {
        q,
        values,
        standardizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rom::greedy_build;
    use crate::waveform::{build_training_set, equispaced, mismatch, NewtonianChirp};

    fn setup(n: usize) -> (WaveformSet, ReducedBasis, EimModel) {
        let grid = TimeGrid::new(0.0, 4990.0, 1024).unwrap();
        let set = build_training_set(&NewtonianChirp::default(), &equispaced(1.0, 2.0, n), &grid)
            .unwrap();
        let basis = greedy_build(&set, 1e-10).unwrap();
        let eim = build_eim(&basis).unwrap();
        (set, basis, eim)
    }

    #[test]
    fn single_vector_interpolant() {
        let (_, basis, eim) = setup(1);
        let e1 = basis.vector(0);
        let node = peak_index(e1);
        assert_eq!(eim.node_indices, vec![node]);
        for (t, v) in e1.iter().enumerate() {
            assert!((eim.interpolant_row(t)[0] - v / e1[node]).norm() < 1e-12);
        }
    }

    #[test]
    fn interpolation_property() {
        let (set, basis, eim) = setup(120);
        let m = eim.size();
        let mut seen = eim.node_indices.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), m);
        for (j, &node) in eim.node_indices.iter().enumerate() {
            for (k, b) in eim.interpolant_row(node).iter().enumerate() {
                let target = if j == k { 1.0 } else { 0.0 };
                assert!((b - target).norm() <= 1e-10);
            }
        }
        for i in 0..basis.size() {
            let e = basis.waveform(i);
            let a = eim_coefficients(&e, &eim).unwrap();
            let rec = eim.interpolate(&a).unwrap();
            for (x, y) in rec.iter().zip(e.values()) {
                assert!((x - y).norm() <= 1e-9);
            }
        }
        let rec =
            eim_reconstruct(&eim_coefficients(&basis.waveform(0), &eim).unwrap(), &eim).unwrap();
        assert!(mismatch(&rec, &basis.waveform(0)).unwrap() < 1e-12);
        let h = set.waveform(37);
        let rec = eim_reconstruct(&eim_coefficients(&h, &eim).unwrap(), &eim).unwrap();
        let mm = mismatch(&h, &rec).unwrap();
        assert!(mm <= 1e-9, "{mm}");
    }

    #[test]
    fn zero_coefficients_cannot_be_normalized() {
        let (_, _, eim) = setup(20);
        let a = vec![Complex64::new(0.0, 0.0); eim.size()];
        assert!(matches!(eim_reconstruct(&a, &eim), Err(Error::ZeroNorm)));
        assert!(eim_reconstruct(&a[1..], &eim).is_err());
    }

    #[test]
    fn dataset_rows_are_node_samples() {
        let (set, _, eim) = setup(40);
        let ds = build_dataset(&set, &eim).unwrap();
        assert_eq!(ds.len(), 40);
        assert_eq!(ds.values.cols(), 2 * eim.size());
        let a = eim_coefficients(&set.waveform(5), &eim).unwrap();
        assert_eq!(ds.values.row(5), stack(&a).as_slice());
        assert_eq!(ds.complex_row(5), a);
        let z = ds.standardized();
        for j in 0..z.cols() {
            let col = z.column_values(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-10);
            assert!((var.sqrt() - 1.0).abs() < 1e-10);
        }
        let back = ds.standardizer.invert(&z);
        for (x, y) in back.as_slice().iter().zip(ds.values.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn dataset_sorts_by_q_and_handles_single_row() {
        let grid = TimeGrid::new(0.0, 4990.0, 1024).unwrap();
        let model = NewtonianChirp::default();
        let set = build_training_set(&model, &[1.5, 1.0, 2.0], &grid).unwrap();
        let basis = greedy_build(&set, 1e-10).unwrap();
        let eim = build_eim(&basis).unwrap();
        let ds = build_dataset(&set, &eim).unwrap();
        assert_eq!(ds.q, vec![1.0, 1.5, 2.0]);
        assert_eq!(
            ds.values.row(1),
            stack(&eim_coefficients(&set.waveform(0), &eim).unwrap()).as_slice()
        );

        let one = build_training_set(&model, &[1.2], &grid).unwrap();
        let ds1 = build_dataset(&one, &eim_for(&one)).unwrap();
        assert!(ds1.standardizer.std.iter().all(|&s| s == 1.0));
    }

    fn eim_for(set: &WaveformSet) -> EimModel {
        build_eim(&greedy_build(set, 1e-10).unwrap()).unwrap()
    }

    #[test]
    fn stacking_round_trip() {
        let a = vec![Complex64::new(1.0, -2.0), Complex64::new(3.5, 0.25)];
        assert_eq!(stack(&a), vec![1.0, 3.5, -2.0, 0.25]);
        assert_eq!(unstack(&stack(&a)), a);
    }
}
