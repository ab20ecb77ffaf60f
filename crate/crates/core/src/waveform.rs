//! Complex time-domain waveforms on a uniform grid, the closed-form chirp
//! family used as the fiducial model, and the inner-product geometry
//! (norm, overlap, mismatch) every later stage is measured in.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled time interval `[t_start, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_samples: usize) -> Result<Self> {
        if !(t_start < t_end) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::Domain(format!(
                "time grid needs finite t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        if n_samples < 2 {
            return Err(Error::Domain(format!(
                "time grid needs at least 2 samples, got {n_samples}"
            )));
        }
        Ok(Self {
            t_start,
            t_end,
            n_samples,
        })
    }

    /// The desk-scale grid used throughout the pipeline.
    pub fn default_grid() -> Self {
        Self {
            t_start: 0.0,
            t_end: DEFAULT_T_END,
            n_samples: DEFAULT_SAMPLES,
        }
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_samples - 1) as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.dt();
        (0..self.n_samples).map(move |k| self.t_start + k as f64 * dt)
    }

    /// Sub-grid of `len` samples starting at sample `offset`.
    pub fn window(&self, offset: usize, len: usize) -> Result<Self> {
        if offset + len > self.n_samples {
            return Err(Error::Domain(format!(
                "window [{offset}, {}) exceeds grid of {} samples",
                offset + len,
                self.n_samples
            )));
        }
        let dt = self.dt();
        let t_start = self.time(offset);
        Self::new(t_start, t_start + (len as f64 - 1.0) * dt, len)
    }
}

pub const DEFAULT_T_END: f64 = 19990.0;
pub const DEFAULT_SAMPLES: usize = 16384;
pub const DEFAULT_T_COALESCENCE: f64 = 20000.0;

/// One complex strain series `h = h_plus - i h_cross` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexWaveform {
    grid: TimeGrid,
    values: Vec<Complex64>,
}

impl ComplexWaveform {
    pub fn new(grid: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_samples {
            return Err(Error::LengthMismatch {
                expected: grid.n_samples,
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.values, self.grid.dt()).sqrt()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Index of the first sample with the largest modulus.
    pub fn peak_index(&self) -> usize {
        peak_index(&self.values)
    }

    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn imag(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }
}

/// `sum_k conj(a_k) b_k dt` over raw sample slices of equal length.
#[inline]
pub fn inner(a: &[Complex64], b: &[Complex64], dt: f64) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re * dt, im * dt)
}

#[inline]
pub fn norm_sq(a: &[Complex64], dt: f64) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>() * dt
}

pub(crate) fn peak_index(values: &[Complex64]) -> usize {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (k, v) in values.iter().enumerate() {
        let a = v.norm_sqr();
        if a > best_abs {
            best_abs = a;
            best = k;
        }
    }
    best
}

fn check_same_grid(h1: &ComplexWaveform, h2: &ComplexWaveform) -> Result<()> {
    if h1.grid != h2.grid {
        return Err(Error::GridMismatch(format!(
            "{:?} vs {:?}",
            h1.grid, h2.grid
        )));
    }
    Ok(())
}

/// Discrete complex inner product, conjugate-linear in the first argument.
pub fn inner_product(h1: &ComplexWaveform, h2: &ComplexWaveform) -> Result<Complex64> {
    check_same_grid(h1, h2)?;
    Ok(inner(&h1.values, &h2.values, h1.grid.dt()))
}

pub fn normalize(h: &ComplexWaveform) -> Result<ComplexWaveform> {
    let n = h.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok(h.scale(Complex64::new(1.0 / n, 0.0)))
}

pub(crate) fn normalize_in_place(values: &mut [Complex64], dt: f64) -> Result<()> {
    let n = norm_sq(values, dt).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let inv = 1.0 / n;
    for v in values.iter_mut() {
        *v *= inv;
    }
    Ok(())
}

/// Real part of the inner product of two unit-norm waveforms.
pub fn overlap(h: &ComplexWaveform, hs: &ComplexWaveform) -> Result<f64> {
    Ok(inner_product(h, hs)?.re)
}

pub fn mismatch(h: &ComplexWaveform, hs: &ComplexWaveform) -> Result<f64> {
    Ok(1.0 - overlap(h, hs)?)
}

/// A generator of waveforms parameterized by the mass ratio alone.
pub trait FiducialModel {
    fn generate(&self, q: f64, grid: &TimeGrid) -> Result<ComplexWaveform>;
}

/// Leading-order inspiral chirp with coalescence at `t_c`.
///
/// With `tau = t_c - t`, `nu = q/(1+q)^2` and `mu = nu^(3/5)`:
/// phase `-2 (tau / 5 mu)^(5/8)`, amplitude `mu (tau / 5 mu)^(-1/4)`,
/// and `h = A exp(-i phase)` scaled to unit norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonianChirp {
    pub t_c: f64,
}

impl Default for NewtonianChirp {
    fn default() -> Self {
        Self {
            t_c: DEFAULT_T_COALESCENCE,
        }
    }
}

pub fn symmetric_mass_ratio(q: f64) -> f64 {
    q / ((1.0 + q) * (1.0 + q))
}

impl NewtonianChirp {
    pub fn new(t_c: f64) -> Self {
        Self { t_c }
    }

    fn mass_scale(q: f64) -> f64 {
        symmetric_mass_ratio(q).powf(0.6)
    }

    pub fn phase(&self, t: f64, q: f64) -> f64 {
        let mu = Self::mass_scale(q);
        -2.0 * ((self.t_c - t) / (5.0 * mu)).powf(0.625)
    }

    pub fn amplitude(&self, t: f64, q: f64) -> f64 {
        let mu = Self::mass_scale(q);
        mu * ((self.t_c - t) / (5.0 * mu)).powf(-0.25)
    }

    fn check(&self, q: f64, grid: &TimeGrid) -> Result<()> {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::Domain(format!("mass ratio must be >= 1, got {q}")));
        }
        if !(self.t_c > grid.t_end) {
            return Err(Error::Domain(format!(
                "coalescence time {} must exceed the grid end {}",
                self.t_c, grid.t_end
            )));
        }
        Ok(())
    }
}

impl FiducialModel for NewtonianChirp {
    fn generate(&self, q: f64, grid: &TimeGrid) -> Result<ComplexWaveform> {
        self.check(q, grid)?;
        let mu = Self::mass_scale(q);
        let values: Vec<Complex64> = grid
            .times()
            .map(|t| {
                let x = (self.t_c - t) / (5.0 * mu);
                let phase = -2.0 * x.powf(0.625);
                let amp = mu * x.powf(-0.25);
                Complex64::from_polar(amp, -phase)
            })
            .collect();
        normalize(&ComplexWaveform::new(*grid, values)?)
    }
}

pub fn generate_waveform(
    model: &impl FiducialModel,
    q: f64,
    grid: &TimeGrid,
) -> Result<ComplexWaveform> {
    model.generate(q, grid)
}

/// Where the shared peak sits after cropping, and how to re-crop new
/// waveforms from the same source grid onto the common frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub source: TimeGrid,
    pub peak_index: usize,
    pub len: usize,
}

impl Alignment {
    /// Shift `h` so its peak lands on `peak_index`, crop to `len`, renormalize.
    pub fn apply(&self, h: &ComplexWaveform) -> Result<ComplexWaveform> {
        if h.grid != self.source {
            return Err(Error::GridMismatch(format!(
                "waveform on {:?}, alignment expects {:?}",
                h.grid, self.source
            )));
        }
        let peak = h.peak_index();
        if peak < self.peak_index || peak - self.peak_index + self.len > h.len() {
            return Err(Error::Domain(format!(
                "peak at sample {peak} cannot be aligned to {} with length {}",
                self.peak_index, self.len
            )));
        }
        let start = peak - self.peak_index;
        let grid = self.source.window(start, self.len)?;
        let mut values = h.values[start..start + self.len].to_vec();
        normalize_in_place(&mut values, grid.dt())?;
        ComplexWaveform::new(grid, values)
    }
}

/// N unit-norm waveforms on a common cropped grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet {
    pub grid: TimeGrid,
    pub q_values: Vec<f64>,
    pub alignment: Alignment,
    data: Vec<Complex64>,
}

impl WaveformSet {
    pub fn from_parts(
        grid: TimeGrid,
        q_values: Vec<f64>,
        alignment: Alignment,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if data.len() != q_values.len() * grid.n_samples {
            return Err(Error::LengthMismatch {
                expected: q_values.len() * grid.n_samples,
                actual: data.len(),
            });
        }
        Ok(Self {
            grid,
            q_values,
            alignment,
            data,
        })
    }

    /// Peak-align and crop waveforms that share one source grid.
    pub fn from_waveforms(q_values: Vec<f64>, waveforms: Vec<ComplexWaveform>) -> Result<Self> {
        if waveforms.is_empty() {
            return Err(Error::Empty("waveform list"));
        }
        if waveforms.len() != q_values.len() {
            return Err(Error::LengthMismatch {
                expected: q_values.len(),
                actual: waveforms.len(),
            });
        }
        let source = waveforms[0].grid;
        if let Some(bad) = waveforms.iter().find(|h| h.grid != source) {
            return Err(Error::GridMismatch(format!(
                "training waveforms on {:?} and {:?}",
                source, bad.grid
            )));
        }
        let peaks: Vec<usize> = waveforms.iter().map(|h| h.peak_index()).collect();
        let before = *peaks.iter().min().unwrap();
        let after = peaks.iter().map(|&p| source.n_samples - p).min().unwrap();
        let len = before + after;
        let alignment = Alignment {
            source,
            peak_index: before,
            len,
        };
        let grid = source.window(peaks[0] - before, len)?;
        let mut data = Vec::with_capacity(waveforms.len() * len);
        for h in &waveforms {
            data.extend_from_slice(alignment.apply(h)?.values());
        }
        Self::from_parts(grid, q_values, alignment, data)
    }

    pub fn len(&self) -> usize {
        self.q_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_values.is_empty()
    }

    pub fn n_samples(&self) -> usize {
        self.grid.n_samples
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        let l = self.grid.n_samples;
        &self.data[i * l..(i + 1) * l]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.grid.n_samples)
    }

    pub fn waveform(&self, i: usize) -> ComplexWaveform {
        ComplexWaveform {
            grid: self.grid,
            values: self.row(i).to_vec(),
        }
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
}

/// Generate, align and crop a training set for the given mass ratios.
pub fn build_training_set(
    model: &impl FiducialModel,
    q_values: &[f64],
    grid: &TimeGrid,
) -> Result<WaveformSet> {
    if q_values.is_empty() {
        return Err(Error::Empty("q_values"));
    }
    let waveforms = q_values
        .iter()
        .map(|&q| model.generate(q, grid))
        .collect::<Result<Vec<_>>>()?;
    WaveformSet::from_waveforms(q_values.to_vec(), waveforms)
}

/// Generate waveforms on the frame of an existing set, so validation and
/// test sets share the training grid.
pub fn build_aligned_set(
    model: &impl FiducialModel,
    q_values: &[f64],
    alignment: &Alignment,
) -> Result<WaveformSet> {
    if q_values.is_empty() {
        return Err(Error::Empty("q_values"));
    }
    let mut data = Vec::with_capacity(q_values.len() * alignment.len);
    let mut grid = None;
    for &q in q_values {
        let h = alignment.apply(&model.generate(q, &alignment.source)?)?;
        grid.get_or_insert(h.grid);
        data.extend_from_slice(h.values());
    }
    WaveformSet::from_parts(grid.unwrap(), q_values.to_vec(), *alignment, data)
}

/// `n` equispaced values spanning `[lo, hi]` inclusive.
pub fn equispaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + i as f64 * step })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn aligned_set_reproduces_training_rows() {
        let grid = TimeGrid::new(0.0, 4990.0, 256).unwrap();
        let model = NewtonianChirp::default();
        let train = build_training_set(&model, &[1.0, 1.3, 2.0], &grid).unwrap();
        let again = build_aligned_set(&model, &[2.0, 1.0], &train.alignment).unwrap();
        assert_eq!(again.grid, train.grid);
        assert_eq!(again.row(0), train.row(2));
        assert_eq!(again.row(1), train.row(0));
        assert!(build_aligned_set(&model, &[], &train.alignment).is_err());
    }

    fn chirp(q: f64) -> ComplexWaveform {
        NewtonianChirp::default()
            .generate(q, &TimeGrid::default_grid())
            .unwrap()
    }

    #[test]
    fn equal_masses_give_quarter_symmetric_ratio() {
        assert_eq!(symmetric_mass_ratio(1.0), 0.25);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = chirp(1.0);
        let b = chirp(1.0);
        assert_eq!(a, b);
        assert!(mismatch(&a, &b).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn accumulated_phase_matches_closed_form_endpoints() {
        // independent endpoint evaluation of the closed-form phase at q = 1
        let expected = 5.947_280_092_473_607e2;
        let model = NewtonianChirp::default();
        let g = TimeGrid::default_grid();
        let total = (model.phase(g.t_end, 1.0) - model.phase(g.t_start, 1.0)).abs();
        assert!((total - expected).abs() < 1e-9 * expected, "{total}");
    }

    #[test]
    fn phase_is_monotone_and_frequency_increases() {
        let model = NewtonianChirp::default();
        let g = TimeGrid::default_grid();
        let phases: Vec<f64> = g.times().map(|t| model.phase(t, 1.3)).collect();
        let freq: Vec<f64> = phases.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(freq.iter().all(|&f| f > 0.0));
        assert!(freq.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_out_of_domain_inputs() {
        let model = NewtonianChirp::default();
        let g = TimeGrid::default_grid();
        assert!(matches!(model.generate(0.9, &g), Err(Error::Domain(_))));
        assert!(matches!(
            model.generate(f64::NAN, &g),
            Err(Error::Domain(_))
        ));
        let late = TimeGrid::new(0.0, 21000.0, 100).unwrap();
        assert!(matches!(model.generate(1.0, &late), Err(Error::Domain(_))));
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn inner_product_basics() {
        let h = chirp(1.5);
        let ip = inner_product(&h, &h).unwrap();
        assert_abs_diff_eq!(ip.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-12);
        let ih = h.scale(Complex64::i());
        let ip = inner_product(&h, &ih).unwrap();
        assert_abs_diff_eq!(ip.re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ip.im, 1.0, epsilon = 1e-12);
    }

    #[test]
    #[allow(clippy::neg_multiply)]
    fn inner_product_matches_hand_sum() {
        let g = TimeGrid::new(0.0, 3.0, 4).unwrap();
        let a = [
            Complex64::new(0.3, -1.2),
            Complex64::new(-0.7, 0.4),
            Complex64::new(1.1, 0.0),
            Complex64::new(0.05, 2.0),
        ];
        let b = [
            Complex64::new(-0.2, 0.9),
            Complex64::new(1.5, 1.5),
            Complex64::new(-0.6, 0.25),
            Complex64::new(0.0, -1.0),
        ];
        // conj(a) . b term by term, dt = 1
        let expected = Complex64::new(
            (0.3 * -0.2 + -1.2 * 0.9)
                + (-0.7 * 1.5 + 0.4 * 1.5)
                + (1.1 * -0.6 + 0.0 * 0.25)
                + (0.05 * 0.0 + 2.0 * -1.0),
            (0.3 * 0.9 - -1.2 * -0.2)
                + (-0.7 * 1.5 - 0.4 * 1.5)
                + (1.1 * 0.25 - 0.0 * -0.6)
                + (0.05 * -1.0 - 2.0 * 0.0),
        );
        let ha = ComplexWaveform::new(g, a.to_vec()).unwrap();
        let hb = ComplexWaveform::new(g, b.to_vec()).unwrap();
        let ip = inner_product(&ha, &hb).unwrap();
        assert_abs_diff_eq!(ip.re, expected.re, epsilon = 1e-14);
        assert_abs_diff_eq!(ip.im, expected.im, epsilon = 1e-14);
        let back = inner_product(&hb, &ha).unwrap();
        assert_eq!(back, ip.conj());
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = chirp(1.0);
        let other = TimeGrid::new(0.0, 4990.0, 4095).unwrap();
        let b = NewtonianChirp::default().generate(1.0, &other).unwrap();
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch(_))));
        assert!(mismatch(&a, &b).is_err());
    }

    #[test]
    fn normalize_cases() {
        let h = chirp(1.2);
        let again = normalize(&h).unwrap();
        for (x, y) in h.values().iter().zip(again.values()) {
            assert!((x - y).norm() < 1e-12);
        }
        let doubled = normalize(&h.scale(Complex64::new(2.0, 0.0))).unwrap();
        for (x, y) in h.values().iter().zip(doubled.values()) {
            assert!((x - y).norm() < 1e-12);
        }
        // 100 ones with dt = 0.01 already have unit norm
        let g = TimeGrid::new(0.0, 0.99, 100).unwrap();
        let ones = ComplexWaveform::new(g, vec![Complex64::new(1.0, 0.0); 100]).unwrap();
        let n = normalize(&ones).unwrap();
        assert!(n
            .values()
            .iter()
            .all(|v| (v.re - 1.0).abs() < 1e-12 && v.im == 0.0));
        let zero = ComplexWaveform::new(g, vec![Complex64::new(0.0, 0.0); 100]).unwrap();
        assert!(matches!(normalize(&zero), Err(Error::ZeroNorm)));
    }

    #[test]
    fn overlap_and_mismatch_of_rotations() {
        let h = chirp(1.7);
        let neg = h.scale(Complex64::new(-1.0, 0.0));
        let rot = h.scale(Complex64::i());
        assert_abs_diff_eq!(overlap(&h, &h).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(overlap(&h, &neg).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(overlap(&h, &rot).unwrap(), 0.0, epsilon = 1e-12);
        assert!(mismatch(&h, &h).unwrap().abs() <= 1e-12);
        assert_abs_diff_eq!(mismatch(&h, &neg).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mismatch(&h, &rot).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn training_set_shapes() {
        let model = NewtonianChirp::default();
        let g = TimeGrid::default_grid();
        let one = build_training_set(&model, &[1.4], &g).unwrap();
        assert_eq!(one.len(), 1);
        assert_abs_diff_eq!(norm_sq(one.row(0), one.grid.dt()), 1.0, epsilon = 1e-12);

        let twin = build_training_set(&model, &[1.4, 1.4], &g).unwrap();
        assert_eq!(twin.row(0), twin.row(1));

        let qs = equispaced(1.0, 2.0, 5);
        let set = build_training_set(&model, &qs, &g).unwrap();
        assert_eq!(set.n_samples(), g.n_samples);
        for row in set.rows() {
            assert_abs_diff_eq!(norm_sq(row, set.grid.dt()), 1.0, epsilon = 1e-12);
            assert_eq!(peak_index(row), set.n_samples() - 1);
        }
        assert!(build_training_set(&model, &[], &g).is_err());
    }

    #[test]
    fn shifted_peaks_are_aligned_and_cropped() {
        let g = TimeGrid::new(0.0, 9.0, 10).unwrap();
        let bump = |peak: usize| {
            let v = (0..10)
                .map(|k| Complex64::new(1.0 / (1.0 + (k as f64 - peak as f64).abs()), 0.0))
                .collect();
            ComplexWaveform::new(g, v).unwrap()
        };
        let set = WaveformSet::from_waveforms(vec![1.0, 2.0], vec![bump(3), bump(6)]).unwrap();
        // 3 samples before the earliest peak, 4 after (and including) the latest
        assert_eq!(set.alignment.peak_index, 3);
        assert_eq!(set.n_samples(), 7);
        assert_eq!(peak_index(set.row(0)), 3);
        assert_eq!(peak_index(set.row(1)), 3);
        for (x, y) in set.row(0).iter().zip(set.row(1)) {
            assert!((x - y).norm() < 1e-15);
        }

        let other = TimeGrid::new(0.0, 9.0, 11).unwrap();
        let odd = ComplexWaveform::new(other, vec![Complex64::new(1.0, 0.0); 11]).unwrap();
        assert!(matches!(
            WaveformSet::from_waveforms(vec![1.0, 2.0], vec![bump(3), odd]),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn equispaced_endpoints() {
        assert_eq!(equispaced(1.0, 2.0, 5), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(equispaced(1.0, 2.0, 1), vec![1.0]);
    }

    fn random_waveform(g: TimeGrid, seed: &[(f64, f64)]) -> ComplexWaveform {
        ComplexWaveform::new(g, seed.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn cauchy_schwarz(a in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 16),
                          b in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 16)) {
            let g = TimeGrid::new(0.0, 1.5, 16).unwrap();
            let (ha, hb) = (random_waveform(g, &a), random_waveform(g, &b));
            let ip = inner_product(&ha, &hb).unwrap();
            prop_assert!(ip.norm() <= ha.norm() * hb.norm() + 1e-12);
        }

        #[test]
        fn overlap_matches_distance_identity(
            a in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 32),
            b in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 32)) {
            let g = TimeGrid::new(0.0, 3.1, 32).unwrap();
            let ha = random_waveform(g, &a);
            let hb = random_waveform(g, &b);
            prop_assume!(ha.norm() > 1e-6 && hb.norm() > 1e-6);
            let (ha, hb) = (normalize(&ha).unwrap(), normalize(&hb).unwrap());
            let diff: Vec<Complex64> = ha.values().iter().zip(hb.values()).map(|(x, y)| x - y).collect();
            let o = overlap(&ha, &hb).unwrap();
            prop_assert!((o - (1.0 - 0.5 * norm_sq(&diff, g.dt()))).abs() <= 1e-10);
            let m = mismatch(&ha, &hb).unwrap();
            prop_assert!((-1e-12..=2.0 + 1e-12).contains(&m));
        }

        #[test]
        fn phase_is_monotone_in_mass_ratio(t in 0.0..4990.0f64, q in 1.0..7.9f64) {
            let model = NewtonianChirp::default();
            prop_assert!(model.phase(t, q + 0.1) < model.phase(t, q));
        }
    }
}
