//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Arrays cross the boundary as flat `Float64Array`s: points and complex
//! samples are interleaved (`x0, y0, x1, y1, ...` and `re0, im0, ...`).

use gwsurr::eim::{build_dataset, build_eim, eim_coefficients, eim_reconstruct, EimModel};
use gwsurr::rom::greedy_build;
use gwsurr::spiral::SpiralParams;
use gwsurr::surrogate::{fit_spline_baseline, CoefficientPredictor, SplineModel};
use gwsurr::waveform::{
    build_training_set, equispaced, mismatch, Alignment, ComplexWaveform, FiducialModel,
    NewtonianChirp, TimeGrid,
};
use num_complex::Complex64;
use wasm_bindgen::prelude::*;

const T_END: f64 = 4990.0;
const T_C: f64 = 5000.0;

fn interleave(values: &[Complex64]) -> Vec<f64> {
    values.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// `n` points of the spiral for `q` spanning `[q_min, q_max]`.
#[wasm_bindgen]
pub fn spiral_curve(
    w: f64,
    b: f64,
    alpha: f64,
    beta: f64,
    q_min: f64,
    q_max: f64,
    n: usize,
) -> Vec<f64> {
    let p = SpiralParams::new(w, b, alpha, beta);
    equispaced(q_min, q_max, n)
        .into_iter()
        .flat_map(|q| {
            let (x, y) = p.point(q);
            [x, y]
        })
        .collect()
}

/// Spiral parameters the regressors start from for a given interval.
#[wasm_bindgen]
pub fn spiral_init(q_min: f64, q_max: f64) -> Vec<f64> {
    SpiralParams::for_interval(q_min, q_max).to_array().to_vec()
}

fn chirp_waveform(q: f64, n_samples: usize) -> gwsurr::Result<ComplexWaveform> {
    let grid = TimeGrid::new(0.0, T_END, n_samples)?;
    let h = NewtonianChirp::new(T_C).generate(q, &grid)?;
    gwsurr::waveform::normalize(&h)
}

/// Unit-norm chirp samples, interleaved re/im; empty for invalid input.
#[wasm_bindgen]
pub fn chirp(q: f64, n_samples: usize) -> Vec<f64> {
    chirp_waveform(q, n_samples)
        .map(|h| interleave(h.values()))
        .unwrap_or_default()
}

/// Mismatch between the chirps at two mass ratios, NaN for invalid input.
#[wasm_bindgen]
pub fn chirp_mismatch(q1: f64, q2: f64, n_samples: usize) -> f64 {
    let pair = chirp_waveform(q1, n_samples).and_then(|a| Ok((a, chirp_waveform(q2, n_samples)?)));
    match pair {
        Ok((a, b)) => mismatch(&a, &b).unwrap_or(f64::NAN),
        Err(_) => f64::NAN,
    }
}

/// Reduced basis, interpolant and spline baseline for q in [1, 2].
#[wasm_bindgen]
pub struct Surrogate {
    model: NewtonianChirp,
    alignment: Alignment,
    greedy_errors: Vec<f64>,
    eim: EimModel,
    q: Vec<f64>,
    coeffs: Vec<Vec<Complex64>>,
    spline: SplineModel,
}

impl Surrogate {
    pub fn build(n_train: usize, n_samples: usize, tol: f64) -> gwsurr::Result<Self> {
        let model = NewtonianChirp::new(T_C);
        let grid = TimeGrid::new(0.0, T_END, n_samples)?;
        let set = build_training_set(&model, &equispaced(1.0, 2.0, n_train), &grid)?;
        let basis = greedy_build(&set, tol)?;
        let eim = build_eim(&basis)?;
        let data = build_dataset(&set, &eim)?;
        let spline = fit_spline_baseline(&data)?;
        Ok(Self {
            model,
            alignment: set.alignment,
            greedy_errors: basis.greedy_errors.clone(),
            coeffs: (0..data.len()).map(|i| data.complex_row(i)).collect(),
            q: data.q,
            eim,
            spline,
        })
    }

    fn truth(&self, q: f64) -> gwsurr::Result<ComplexWaveform> {
        self.alignment
            .apply(&self.model.generate(q, &self.alignment.source)?)
    }

    fn mismatch_of(&self, q: f64, a: &[Complex64]) -> gwsurr::Result<f64> {
        mismatch(&self.truth(q)?, &eim_reconstruct(a, &self.eim)?)
    }
}

#[wasm_bindgen]
impl Surrogate {
    #[wasm_bindgen(constructor)]
    pub fn new(n_train: usize, n_samples: usize, tol: f64) -> Result<Surrogate, JsError> {
        Self::build(n_train, n_samples, tol).map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn size(&self) -> usize {
        self.eim.size()
    }

    pub fn condition(&self) -> f64 {
        self.eim.condition
    }

    pub fn greedy_errors(&self) -> Vec<f64> {
        self.greedy_errors.clone()
    }

    /// Node times, in greedy order.
    pub fn node_times(&self) -> Vec<f64> {
        self.eim
            .node_indices
            .iter()
            .map(|&i| self.eim.grid.time(i))
            .collect()
    }

    pub fn q_values(&self) -> Vec<f64> {
        self.q.clone()
    }

    /// Coefficient `j` over the training q, interleaved re/im.
    pub fn coefficient(&self, j: usize) -> Vec<f64> {
        if j >= self.size() {
            return Vec::new();
        }
        self.coeffs
            .iter()
            .flat_map(|a| [a[j].re, a[j].im])
            .collect()
    }

    /// Real part of the true waveform followed by the real part of its
    /// interpolant built from spline-predicted coefficients.
    pub fn compare(&self, q: f64) -> Vec<f64> {
        let Ok(truth) = self.truth(q) else {
            return Vec::new();
        };
        let Ok(pred) = self.spline.predict(&[q]) else {
            return Vec::new();
        };
        let Ok(approx) = eim_reconstruct(&pred[0], &self.eim) else {
            return Vec::new();
        };
        truth.real().into_iter().chain(approx.real()).collect()
    }

    /// Mismatch when the coefficients are the true node values.
    pub fn exact_mismatch(&self, q: f64) -> f64 {
        self.truth(q)
            .and_then(|h| eim_coefficients(&h, &self.eim))
            .and_then(|a| self.mismatch_of(q, &a))
            .unwrap_or(f64::NAN)
    }

    /// Mismatch with spline-interpolated coefficients.
    pub fn spline_mismatch(&self, q: f64) -> f64 {
        self.spline
            .predict(&[q])
            .and_then(|a| self.mismatch_of(q, &a[0]))
            .unwrap_or(f64::NAN)
    }
}
