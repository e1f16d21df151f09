//! Periodic-box discretization and spectral transforms.
//!
//! The box is `[-L, L)^n` sampled with `N` points per axis, `x_j = -L + j·h`,
//! `h = 2L/N`.  The transform convention is
//!
//! ```text
//!   f̂(ξ) = ∫ e^{-i x·ξ} f(x) dx,      f(x) = (2π)^{-n} ∫ e^{i x·ξ} f̂(ξ) dξ,
//! ```
//!
//! discretized with `h^n` quadrature weights on the physical side and
//! `(π/L)^n` on the frequency side.  Frequencies live on the lattice
//! `(π/L)·Z^n`, stored in FFT order (`k = m` for `m < N/2`, `k = m - N`
//! otherwise); the single `k = -N/2` Nyquist mode per axis is unpaired and is
//! treated like any other mode by multipliers.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};
use thiserror::Error;

use crate::weights::WeightSpec;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3, got {0}")]
    InvalidDimension(usize),
    #[error("points per axis must be a power of two >= 8, got {0}")]
    InvalidPointCount(usize),
    #[error("half width must be positive and finite, got {0}")]
    InvalidHalfWidth(f64),
    #[error("field is on the {got:?} side, expected {expected:?}")]
    SideMismatch { expected: Side, got: Side },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("negative fractional power requires an exactly zero mean mode")]
    DegenerateZeroMode,
    #[error("weight evaluates negative at a grid point: {0}")]
    InvalidWeight(String),
    #[error("weight error: {0}")]
    Weight(#[from] crate::weights::WeightError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed field dump: {0}")]
    MalformedDump(String),
}

/// Which side of the transform a field's samples live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Physical,
    Frequency,
}

/// Immutable description of a periodic-box grid.
///
/// Cheap to clone (FFT plans are shared) and safe to share across threads.
#[derive(Clone)]
pub struct GridSpec {
    dim: usize,
    points_per_axis: usize,
    half_width: f64,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
    freq_norm_cache: Arc<OnceLock<Arc<Vec<f64>>>>,
}

impl std::fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridSpec")
            .field("dim", &self.dim)
            .field("points_per_axis", &self.points_per_axis)
            .field("half_width", &self.half_width)
            .finish()
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.points_per_axis == other.points_per_axis
            && self.half_width == other.half_width
    }
}

/// Builds a grid; rejects unsupported dimensions and point counts.
pub fn make_grid(dim: usize, points_per_axis: usize, half_width: f64) -> Result<GridSpec, GridError> {
    GridSpec::new(dim, points_per_axis, half_width)
}

impl GridSpec {
    pub fn new(dim: usize, points_per_axis: usize, half_width: f64) -> Result<Self, GridError> {
        if !(1..=3).contains(&dim) {
            return Err(GridError::InvalidDimension(dim));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(GridError::InvalidPointCount(points_per_axis));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::InvalidHalfWidth(half_width));
        }
        let mut planner = FftPlanner::new();
        Ok(GridSpec {
            dim,
            points_per_axis,
            half_width,
            fft_forward: planner.plan_fft_forward(points_per_axis),
            fft_inverse: planner.plan_fft_inverse(points_per_axis),
            freq_norm_cache: Arc::new(OnceLock::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Physical spacing `h = 2L/N`; `h·N = 2L` holds exactly.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    /// Frequency lattice step `π/L`.
    pub fn freq_step(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    /// Total number of samples `N^n`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical coordinate of axis index `i`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Signed frequency index for FFT-order axis index `m`.
    #[inline]
    pub fn freq_index(&self, m: usize) -> i64 {
        let n = self.points_per_axis;
        if m < n / 2 {
            m as i64
        } else {
            m as i64 - n as i64
        }
    }

    /// Frequency coordinate of FFT-order axis index `m`.
    #[inline]
    pub fn freq_coord(&self, m: usize) -> f64 {
        self.freq_index(m) as f64 * self.freq_step()
    }

    /// Decomposes a linear index into per-axis indices (unused axes are 0).
    #[inline]
    pub fn decompose(&self, idx: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        match self.dim {
            1 => [idx, 0, 0],
            2 => [idx / n, idx % n, 0],
            _ => [idx / (n * n), (idx / n) % n, idx % n],
        }
    }

    /// Writes the physical point for linear index `idx` into `out[..dim]`.
    #[inline]
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let parts = self.decompose(idx);
        for a in 0..self.dim {
            out[a] = self.coord(parts[a]);
        }
    }

    /// Writes the frequency point for linear index `idx` into `out[..dim]`.
    #[inline]
    pub fn freq_point(&self, idx: usize, out: &mut [f64]) {
        let parts = self.decompose(idx);
        for a in 0..self.dim {
            out[a] = self.freq_coord(parts[a]);
        }
    }

    /// `|ξ|` for every linear index, cached on first use.
    pub fn freq_norms(&self) -> Arc<Vec<f64>> {
        self.freq_norm_cache
            .get_or_init(|| {
                let mut v = vec![0.0; self.len()];
                let mut xi = [0.0; 3];
                for (idx, slot) in v.iter_mut().enumerate() {
                    self.freq_point(idx, &mut xi);
                    *slot = xi[..self.dim].iter().map(|c| c * c).sum::<f64>().sqrt();
                }
                Arc::new(v)
            })
            .clone()
    }

    /// `(-1)^{m_0 + … + m_{n-1}}` for FFT-order linear index `idx`.
    #[inline]
    fn parity_sign(&self, idx: usize) -> f64 {
        let parts = self.decompose(idx);
        let sum: usize = parts[..self.dim].iter().sum();
        if sum % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Complex samples on a grid, tagged with the side they live on.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub side: Side,
    pub samples: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: &GridSpec, side: Side) -> Self {
        ComplexField {
            grid: grid.clone(),
            side,
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_samples(grid: &GridSpec, side: Side, samples: Vec<Complex64>) -> Self {
        assert_eq!(samples.len(), grid.len(), "sample count must match grid");
        ComplexField {
            grid: grid.clone(),
            side,
            samples,
        }
    }

    /// Physical-side field sampled from a closure of the point coordinates.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let mut samples = vec![Complex64::new(0.0, 0.0); grid.len()];
        let mut x = [0.0; 3];
        for (idx, s) in samples.iter_mut().enumerate() {
            grid.point(idx, &mut x);
            *s = f(&x[..grid.dim()]);
        }
        ComplexField {
            grid: grid.clone(),
            side: Side::Physical,
            samples,
        }
    }

    /// `e^{i k·x}` for a lattice wave vector `k` (entries multiples of `π/L`).
    pub fn plane_wave(grid: &GridSpec, k: &[f64]) -> Self {
        let k = k.to_vec();
        Self::from_fn(grid, |x| {
            let phase: f64 = x.iter().zip(&k).map(|(xi, ki)| xi * ki).sum();
            Complex64::new(0.0, phase).exp()
        })
    }

    fn expect_side(&self, expected: Side) -> Result<(), GridError> {
        if self.side != expected {
            return Err(GridError::SideMismatch {
                expected,
                got: self.side,
            });
        }
        Ok(())
    }
}

fn fft_along_axes(data: &mut [Complex64], dim: usize, n: usize, fft: &Arc<dyn Fft<f64>>) {
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // Last axis is contiguous.
    for line in data.chunks_exact_mut(n) {
        fft.process_with_scratch(line, &mut scratch);
    }
    if dim >= 2 {
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let planes = if dim == 3 { n } else { 1 };
        // Middle axis (stride n) within each plane of n*n entries.
        for p in 0..planes {
            let plane = &mut data[p * n * n..(p + 1) * n * n];
            for c in 0..n {
                for i in 0..n {
                    line[i] = plane[i * n + c];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for i in 0..n {
                    plane[i * n + c] = line[i];
                }
            }
        }
        if dim == 3 {
            // First axis, stride n*n.
            let stride = n * n;
            for rest in 0..stride {
                for i in 0..n {
                    line[i] = data[i * stride + rest];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for i in 0..n {
                    data[i * stride + rest] = line[i];
                }
            }
        }
    }
}

/// Physical → frequency transform with the crate convention.
pub fn forward_transform(field: &ComplexField) -> Result<ComplexField, GridError> {
    field.expect_side(Side::Physical)?;
    let grid = &field.grid;
    let mut samples = field.samples.clone();
    fft_along_axes(&mut samples, grid.dim(), grid.points_per_axis(), &grid.fft_forward);
    let scale = grid.spacing().powi(grid.dim() as i32);
    for (idx, s) in samples.iter_mut().enumerate() {
        *s *= scale * grid.parity_sign(idx);
    }
    Ok(ComplexField {
        grid: grid.clone(),
        side: Side::Frequency,
        samples,
    })
}

/// Frequency → physical transform with the crate convention.
pub fn inverse_transform(field: &ComplexField) -> Result<ComplexField, GridError> {
    field.expect_side(Side::Frequency)?;
    let grid = &field.grid;
    let mut samples = field.samples.clone();
    for (idx, s) in samples.iter_mut().enumerate() {
        *s *= grid.parity_sign(idx);
    }
    fft_along_axes(&mut samples, grid.dim(), grid.points_per_axis(), &grid.fft_inverse);
    let scale = (2.0 * grid.half_width()).powi(-(grid.dim() as i32));
    for s in samples.iter_mut() {
        *s *= scale;
    }
    Ok(ComplexField {
        grid: grid.clone(),
        side: Side::Physical,
        samples,
    })
}

/// Applies the multiplier `|ξ|^s` to a frequency-side field.
///
/// Zero-mode convention: `|0|^s := 0` for `s > 0`; the mode passes through
/// unchanged for `s = 0`; for `s < 0` the input mean mode must be exactly
/// zero (see [`zero_out_mean`]), otherwise `DegenerateZeroMode` is returned.
pub fn fractional_multiplier(field: &ComplexField, s: f64) -> Result<ComplexField, GridError> {
    field.expect_side(Side::Frequency)?;
    if s == 0.0 {
        return Ok(field.clone());
    }
    let zero_mode = field.samples[0];
    if s < 0.0 && (zero_mode.re != 0.0 || zero_mode.im != 0.0) {
        return Err(GridError::DegenerateZeroMode);
    }
    let norms = field.grid.freq_norms();
    let mut samples = field.samples.clone();
    for (s_out, &r) in samples.iter_mut().zip(norms.iter()) {
        if r == 0.0 {
            *s_out = Complex64::new(0.0, 0.0);
        } else {
            *s_out *= r.powf(s);
        }
    }
    Ok(ComplexField {
        grid: field.grid.clone(),
        side: Side::Frequency,
        samples,
    })
}

/// Returns a copy with the mean (zero-frequency) mode set to zero.
pub fn zero_out_mean(field: &ComplexField) -> Result<ComplexField, GridError> {
    field.expect_side(Side::Frequency)?;
    let mut out = field.clone();
    out.samples[0] = Complex64::new(0.0, 0.0);
    Ok(out)
}

/// Plain `L²` norm with the side's quadrature weight.
pub fn l2_norm(field: &ComplexField) -> f64 {
    let grid = &field.grid;
    let w = match field.side {
        Side::Physical => grid.spacing().powi(grid.dim() as i32),
        Side::Frequency => grid.freq_step().powi(grid.dim() as i32),
    };
    (field.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * w).sqrt()
}

/// Samples a weight on the grid with the half-cell cap; rejects negatives.
pub fn sample_weight(grid: &GridSpec, w: &WeightSpec) -> Result<Vec<f64>, GridError> {
    let half_cell = 0.5 * grid.spacing();
    let mut out = vec![0.0; grid.len()];
    let mut x = [0.0; 3];
    for (idx, slot) in out.iter_mut().enumerate() {
        grid.point(idx, &mut x);
        let v = w.eval_capped(&x[..grid.dim()], half_cell)?;
        if v < 0.0 {
            return Err(GridError::InvalidWeight(format!(
                "w({:?}) = {}",
                &x[..grid.dim()],
                v
            )));
        }
        *slot = v;
    }
    Ok(out)
}

/// `(Σ w(x_i) |f(x_i)|² h^n)^{1/2}` for a physical-side field.
pub fn weighted_l2_norm(field: &ComplexField, w: &WeightSpec) -> Result<f64, GridError> {
    field.expect_side(Side::Physical)?;
    let samples = sample_weight(&field.grid, w)?;
    Ok(weighted_l2_norm_sampled(field, &samples))
}

/// Same as [`weighted_l2_norm`] with the weight pre-sampled on the grid.
pub fn weighted_l2_norm_sampled(field: &ComplexField, weight_samples: &[f64]) -> f64 {
    let vol = field.grid.spacing().powi(field.grid.dim() as i32);
    let sum: f64 = field
        .samples
        .iter()
        .zip(weight_samples)
        .map(|(z, &wv)| wv * z.norm_sqr())
        .sum();
    (sum * vol).sqrt()
}

/// Evaluates `f̂` at arbitrary (off-lattice) frequency points by direct
/// summation, `f̂(ξ) = h^n Σ_j f(x_j) e^{-i x_j·ξ}`.
///
/// Cells with `|f| <= prune · max|f|` are skipped; pass `0.0` to keep all.
pub fn transform_at(field: &ComplexField, points: &[Vec<f64>], prune: f64) -> Result<Vec<Complex64>, GridError> {
    field.expect_side(Side::Physical)?;
    let grid = &field.grid;
    let dim = grid.dim();
    let vol = grid.spacing().powi(dim as i32);
    let max = field
        .samples
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    let cutoff = prune * max;
    let mut support: Vec<(usize, Complex64)> = Vec::new();
    for (idx, z) in field.samples.iter().enumerate() {
        if z.norm() > cutoff {
            support.push((idx, *z));
        }
    }
    let mut coords = vec![[0.0f64; 3]; support.len()];
    for (slot, (idx, _)) in coords.iter_mut().zip(&support) {
        grid.point(*idx, slot);
    }
    use rayon::prelude::*;
    let out: Vec<Complex64> = points
        .par_iter()
        .map(|xi| {
            let mut acc = Complex64::new(0.0, 0.0);
            for ((_, z), x) in support.iter().zip(&coords) {
                let phase: f64 = x[..dim].iter().zip(xi.iter()).map(|(a, b)| a * b).sum();
                acc += z * Complex64::new(0.0, -phase).exp();
            }
            acc * vol
        })
        .collect();
    Ok(out)
}

/// Field dumps: 32-byte header (dim, N, L, side as u64/f64 little-endian)
/// followed by interleaved little-endian `f64` re/im pairs.
pub mod io {
    use super::*;

    pub fn write_field<W: Write>(field: &ComplexField, mut out: W) -> Result<(), GridError> {
        let g = &field.grid;
        out.write_all(&(g.dim() as u64).to_le_bytes())?;
        out.write_all(&(g.points_per_axis() as u64).to_le_bytes())?;
        out.write_all(&g.half_width().to_le_bytes())?;
        let side: u64 = match field.side {
            Side::Physical => 0,
            Side::Frequency => 1,
        };
        out.write_all(&side.to_le_bytes())?;
        for z in &field.samples {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_field<R: Read>(mut input: R) -> Result<ComplexField, GridError> {
        let mut u = [0u8; 8];
        input.read_exact(&mut u)?;
        let dim = u64::from_le_bytes(u) as usize;
        input.read_exact(&mut u)?;
        let n = u64::from_le_bytes(u) as usize;
        input.read_exact(&mut u)?;
        let half_width = f64::from_le_bytes(u);
        input.read_exact(&mut u)?;
        let side = match u64::from_le_bytes(u) {
            0 => Side::Physical,
            1 => Side::Frequency,
            other => return Err(GridError::MalformedDump(format!("side flag {other}"))),
        };
        let grid = GridSpec::new(dim, n, half_width)?;
        let mut samples = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            input.read_exact(&mut u)?;
            let re = f64::from_le_bytes(u);
            input.read_exact(&mut u)?;
            let im = f64::from_le_bytes(u);
            samples.push(Complex64::new(re, im));
        }
        Ok(ComplexField::from_samples(&grid, side, samples))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    pub(crate) fn random_field(grid: &GridSpec, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..grid.len())
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        ComplexField::from_samples(grid, Side::Physical, samples)
    }

    #[test]
    fn make_grid_examples() {
        let g = make_grid(1, 8, PI).unwrap();
        assert_relative_eq!(g.spacing(), PI / 4.0);
        let freqs: Vec<i64> = (0..8).map(|m| g.freq_index(m)).collect();
        assert_eq!(freqs, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_relative_eq!(g.freq_step(), 1.0);

        let g = make_grid(2, 16, 8.0).unwrap();
        assert_eq!(g.len(), 256);
        assert_relative_eq!(g.spacing(), 1.0);

        let g = make_grid(3, 8, 4.0).unwrap();
        assert_eq!(g.len(), 512);
        assert_relative_eq!(g.freq_step(), PI / 4.0);
    }

    #[test]
    fn make_grid_rejections() {
        assert!(matches!(make_grid(4, 8, 1.0), Err(GridError::InvalidDimension(4))));
        assert!(matches!(make_grid(0, 8, 1.0), Err(GridError::InvalidDimension(0))));
        assert!(matches!(make_grid(1, 12, 1.0), Err(GridError::InvalidPointCount(12))));
        assert!(matches!(make_grid(1, 4, 1.0), Err(GridError::InvalidPointCount(4))));
        assert!(matches!(make_grid(1, 8, 0.0), Err(GridError::InvalidHalfWidth(_))));
    }

    #[test]
    fn spacing_times_n_is_exact() {
        for n in [8usize, 32, 128] {
            for l in [0.7, 1.0, PI, 13.25] {
                let g = make_grid(1, n, l).unwrap();
                assert_eq!(g.spacing() * n as f64, 2.0 * l);
            }
        }
    }

    #[test]
    fn plane_wave_concentrates_on_single_mode() {
        for (dim, n, l) in [(1usize, 16usize, 2.0), (2, 8, 1.5), (3, 8, 1.0)] {
            let g = make_grid(dim, n, l).unwrap();
            let step = g.freq_step();
            let k: Vec<f64> = (0..dim).map(|a| (a as f64 + 1.0) * step).collect();
            let f = ComplexField::plane_wave(&g, &k);
            let fh = forward_transform(&f).unwrap();
            let volume = (2.0 * l).powi(dim as i32);
            let mut hits = 0;
            let mut xi = [0.0; 3];
            for (idx, z) in fh.samples.iter().enumerate() {
                g.freq_point(idx, &mut xi);
                let on_mode = (0..dim).all(|a| (xi[a] - k[a]).abs() < 1e-9);
                if on_mode {
                    hits += 1;
                    assert_relative_eq!(z.re, volume, max_relative = 1e-10);
                    assert!(z.im.abs() < 1e-9 * volume);
                } else {
                    assert!(z.norm() < 1e-9 * volume, "leak at {idx}: {z}");
                }
            }
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn zero_field_transforms_to_zero() {
        let g = make_grid(2, 16, 3.0).unwrap();
        let z = ComplexField::zeros(&g, Side::Physical);
        let zh = forward_transform(&z).unwrap();
        assert!(zh.samples.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn round_trip_and_parseval() {
        for (dim, n) in [(1usize, 64usize), (2, 16), (3, 8)] {
            let g = make_grid(dim, n, 2.5).unwrap();
            for seed in 0..100 {
                let f = random_field(&g, seed);
                let fh = forward_transform(&f).unwrap();
                let back = inverse_transform(&fh).unwrap();
                let err: f64 = f
                    .samples
                    .iter()
                    .zip(&back.samples)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                let scale = l2_norm(&f);
                assert!(err / scale < 1e-12, "round trip err {err}");

                let lhs = l2_norm(&f).powi(2);
                let rhs = l2_norm(&fh).powi(2) * (2.0 * PI).powi(-(dim as i32));
                assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn side_mismatch_rejected() {
        let g = make_grid(1, 8, 1.0).unwrap();
        let f = ComplexField::zeros(&g, Side::Frequency);
        assert!(matches!(
            forward_transform(&f),
            Err(GridError::SideMismatch { .. })
        ));
        let f = ComplexField::zeros(&g, Side::Physical);
        assert!(matches!(
            inverse_transform(&f),
            Err(GridError::SideMismatch { .. })
        ));
    }

    #[test]
    fn fractional_multiplier_identity_and_plane_wave() {
        let g = make_grid(2, 16, 4.0).unwrap();
        let f = random_field(&g, 7);
        let fh = forward_transform(&f).unwrap();
        let same = fractional_multiplier(&fh, 0.0).unwrap();
        assert_eq!(fh.samples, same.samples);

        let k = [2.0 * g.freq_step(), -g.freq_step()];
        let pw = ComplexField::plane_wave(&g, &k);
        let pwh = forward_transform(&pw).unwrap();
        let scaled = fractional_multiplier(&pwh, 0.5).unwrap();
        let out = inverse_transform(&scaled).unwrap();
        let knorm = (k[0] * k[0] + k[1] * k[1]).sqrt();
        let expect = knorm.sqrt();
        for (a, b) in out.samples.iter().zip(&pw.samples) {
            assert_relative_eq!(a.re, expect * b.re, max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(a.im, expect * b.im, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn fractional_multiplier_additivity() {
        let g = make_grid(1, 64, 3.0).unwrap();
        let f = random_field(&g, 3);
        let fh = zero_out_mean(&forward_transform(&f).unwrap()).unwrap();
        let a = fractional_multiplier(&fractional_multiplier(&fh, 0.3).unwrap(), 0.7).unwrap();
        let b = fractional_multiplier(&fh, 1.0).unwrap();
        let scale = l2_norm(&fh);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x - y).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn fractional_multiplier_negative_requires_zero_mean() {
        let g = make_grid(1, 16, 1.0).unwrap();
        let ones = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        let oh = forward_transform(&ones).unwrap();
        assert!(matches!(
            fractional_multiplier(&oh, -0.5),
            Err(GridError::DegenerateZeroMode)
        ));
        let cleaned = zero_out_mean(&oh).unwrap();
        assert!(fractional_multiplier(&cleaned, -0.5).is_ok());
    }

    #[test]
    fn weighted_norm_uniform_matches_plain_and_zero_field() {
        let g = make_grid(2, 16, 2.0).unwrap();
        let f = random_field(&g, 11);
        let w = WeightSpec::uniform(1.0);
        assert_relative_eq!(
            weighted_l2_norm(&f, &w).unwrap(),
            l2_norm(&f),
            max_relative = 1e-13
        );
        let z = ComplexField::zeros(&g, Side::Physical);
        assert_eq!(weighted_l2_norm(&z, &w).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norm_half_box_indicator() {
        // w = indicator of {x_0 >= 0} (half of the box), f ≡ 1.
        for (dim, n, l) in [(1usize, 64usize, 1.5), (2, 16, 2.0)] {
            let g = make_grid(dim, n, l).unwrap();
            let f = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0));
            let mut corner = vec![0.0; dim];
            let mut side = 2.0 * l;
            // half-box: [0, L) x [-L, L)^{n-1}; use a box weight via indicator cube
            // of side 2L clipped by corner at 0 on axis 0.
            corner[0] = 0.0;
            for c in corner.iter_mut().skip(1) {
                *c = -l;
            }
            side = side / 2.0;
            // indicator cube has equal sides; for dim >= 2 a cube of side L
            // anchored at (0, -L, ..) covers only part; build the half-box as
            // a product of per-axis indicators instead.
            let w = WeightSpec::box_indicator(&corner, &{
                let mut sides = vec![2.0 * l; dim];
                sides[0] = side;
                sides
            });
            let norm = weighted_l2_norm(&f, &w).unwrap();
            let volume = (2.0 * l).powi(dim as i32);
            assert_relative_eq!(norm, (volume / 2.0).sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn field_dump_round_trip() {
        let g = make_grid(2, 8, 1.25).unwrap();
        let f = random_field(&g, 5);
        let mut buf = Vec::new();
        io::write_field(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 16 * g.len());
        let back = io::read_field(buf.as_slice()).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn transform_at_matches_lattice_transform() {
        let g = make_grid(2, 16, 2.0).unwrap();
        let f = random_field(&g, 9);
        let fh = forward_transform(&f).unwrap();
        let mut pts = Vec::new();
        let mut xi = [0.0; 3];
        for idx in [0usize, 3, 17, 100] {
            g.freq_point(idx, &mut xi);
            pts.push(xi[..2].to_vec());
        }
        let direct = transform_at(&f, &pts, 0.0).unwrap();
        for (p, idx) in direct.iter().zip([0usize, 3, 17, 100]) {
            assert!((p - fh.samples[idx]).norm() < 1e-10 * l2_norm(&fh).max(1.0));
        }
    }
}
