//! Greedy reduced-basis construction and projection.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::waveform::{inner, norm_sq, ComplexWaveform, TimeGrid, WaveformSet};

/// Orthonormal basis rows `e_i` selected by the greedy sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    pub grid: TimeGrid,
    /// Parameter of the training waveform each row was built from.
    pub greedy_q: Vec<f64>,
    /// Worst training projection error after each iteration.
    pub greedy_errors: Vec<f64>,
    pub tol: f64,
    vectors: Vec<Complex64>,
}

impl ReducedBasis {
    pub fn from_parts(
        grid: TimeGrid,
        vectors: Vec<Complex64>,
        greedy_q: Vec<f64>,
        greedy_errors: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        let m = greedy_q.len();
        if m == 0 {
            return Err(Error::Empty("reduced basis"));
        }
        if vectors.len() != m * grid.n_samples {
            return Err(Error::LengthMismatch {
                expected: m * grid.n_samples,
                actual: vectors.len(),
            });
        }
        if greedy_errors.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                actual: greedy_errors.len(),
            });
        }
        Ok(Self {
            grid,
            greedy_q,
            greedy_errors,
            tol,
            vectors,
        })
    }

    pub fn size(&self) -> usize {
        self.greedy_q.len()
    }

    pub fn vector(&self, i: usize) -> &[Complex64] {
        let l = self.grid.n_samples;
        &self.vectors[i * l..(i + 1) * l]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[Complex64]> {
        self.vectors.chunks_exact(self.grid.n_samples)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.vectors
    }

    pub fn waveform(&self, i: usize) -> ComplexWaveform {
        ComplexWaveform::new(self.grid, self.vector(i).to_vec()).expect("row length matches grid")
    }

    /// `max |<e_i, e_j> - delta_ij|` over all pairs.
    pub fn orthonormality_defect(&self) -> f64 {
        let dt = self.grid.dt();
        let mut worst: f64 = 0.0;
        for i in 0..self.size() {
            for j in i..self.size() {
                let g = inner(self.vector(i), self.vector(j), dt);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }

    fn check(&self, h: &ComplexWaveform) -> Result<()> {
        if h.len() != self.grid.n_samples {
            return Err(Error::LengthMismatch {
                expected: self.grid.n_samples,
                actual: h.len(),
            });
        }
        if *h.grid() != self.grid {
            return Err(Error::GridMismatch(format!(
                "waveform on {:?}, basis on {:?}",
                h.grid(),
                self.grid
            )));
        }
        Ok(())
    }
}

/// Projection coefficients `c_i = <e_i, h>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionCoefficients(pub Vec<Complex64>);

impl ProjectionCoefficients {
    pub fn reconstruct(&self, basis: &ReducedBasis) -> ComplexWaveform {
        let mut out = vec![Complex64::new(0.0, 0.0); basis.grid.n_samples];
        for (c, e) in self.0.iter().zip(basis.vectors()) {
            for (o, v) in out.iter_mut().zip(e) {
                *o += c * v;
            }
        }
        ComplexWaveform::new(basis.grid, out).expect("length matches grid")
    }
}

fn orthogonalize(v: &mut [Complex64], basis: &[Complex64], len: usize, dt: f64) {
    for e in basis.chunks_exact(len) {
        let c = inner(e, v, dt);
        for (x, y) in v.iter_mut().zip(e) {
            *x -= c * y;
        }
    }
}

/// Greedy sweep: seed with the first training row, then repeatedly add the
/// worst-projected row (orthonormalized by two Gram-Schmidt passes) until
/// every training projection error is at most `tol`.
pub fn greedy_build(train: &WaveformSet, tol: f64) -> Result<ReducedBasis> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let len = train.n_samples();
    let dt = train.grid.dt();
    let n = train.len();
    let norms: Vec<f64> = train.rows().map(|r| norm_sq(r, dt)).collect();
    if let Some((i, nrm)) = norms
        .iter()
        .enumerate()
        .find(|(_, &s)| (s - 1.0).abs() > 1e-10)
    {
        return Err(Error::Domain(format!(
            "training row {i} is not unit norm (squared norm {nrm})"
        )));
    }

    let mut vectors: Vec<Complex64> = Vec::new();
    let mut greedy_q = Vec::new();
    let mut greedy_errors = Vec::new();
    let mut captured = vec![0.0; n];
    let mut selected = 0usize;

    loop {
        let mut v = train.row(selected).to_vec();
        orthogonalize(&mut v, &vectors, len, dt);
        orthogonalize(&mut v, &vectors, len, dt);
        let residual = norm_sq(&v, dt).sqrt();
        if !(residual > 1e-14) {
            return Err(Error::GreedyStalled {
                iterations: greedy_q.len(),
                achieved: greedy_errors.last().copied().unwrap_or(f64::NAN),
                tol,
            });
        }
        let inv = 1.0 / residual;
        v.iter_mut().for_each(|x| *x *= inv);

        let mut worst = f64::NEG_INFINITY;
        let mut worst_idx = 0;
        for (i, row) in train.rows().enumerate() {
            captured[i] += inner(&v, row, dt).norm_sqr();
            let sigma = norms[i] - captured[i];
            if sigma > worst {
                worst = sigma;
                worst_idx = i;
            }
        }
        vectors.extend_from_slice(&v);
        greedy_q.push(train.q_values[selected]);
        greedy_errors.push(worst.max(0.0));

        if worst <= tol {
            break;
        }
        if greedy_q.len() >= n {
            return Err(Error::GreedyStalled {
                iterations: greedy_q.len(),
                achieved: worst,
                tol,
            });
        }
        selected = worst_idx;
    }

    ReducedBasis::from_parts(train.grid, vectors, greedy_q, greedy_errors, tol)
}

pub fn project(h: &ComplexWaveform, basis: &ReducedBasis) -> Result<ProjectionCoefficients> {
    basis.check(h)?;
    let dt = basis.grid.dt();
    Ok(ProjectionCoefficients(
        basis.vectors().map(|e| inner(e, h.values(), dt)).collect(),
    ))
}

/// Squared norm of the residual `h - sum_i <e_i, h> e_i`.
pub fn reconstruction_error(h: &ComplexWaveform, basis: &ReducedBasis) -> Result<f64> {
    let c = project(h, basis)?;
    let rec = c.reconstruct(basis);
    let diff: Vec<Complex64> = h
        .values()
        .iter()
        .zip(rec.values())
        .map(|(a, b)| a - b)
        .collect();
    Ok(norm_sq(&diff, basis.grid.dt()))
}
