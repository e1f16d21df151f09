//! The fractional evolution `e^{-it(-Δ)^{γ/2}}`, its smoothed variant
//! `|∇|^s e^{-it(-Δ)^{γ/2}}`, and weighted space-time norms over a finite
//! time window `[-T, T]` with trapezoid quadrature.
//!
//! The window and box must be compatible: a wave packet with top frequency
//! `ξ_max` travels at group speed `γ ξ_max^{γ-1}`, so experiments keep
//! `γ ξ_max^{γ-1} T < L/2` to stop wrap-around from contaminating the norm.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{
    forward_transform, inverse_transform, sample_weight, ComplexField, GridError, GridSpec, Side,
};
use crate::quadrature::{gauss_legendre, rescale};
use crate::sphere::{SphereError, SphereRule};
use crate::weights::WeightSpec;

#[derive(Debug, Error)]
pub enum PropagatorError {
    #[error("invalid evolution parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
}

type Result<T> = std::result::Result<T, PropagatorError>;

/// Evolution order, smoothing exponent and time discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionParams {
    pub gamma: f64,
    pub s: f64,
    /// Half-width `T` of the window `[-T, T]`.
    pub time_half_width: f64,
    /// Number of uniform time nodes, endpoints included.
    pub time_nodes: usize,
}

impl EvolutionParams {
    pub fn new(gamma: f64, s: f64, time_half_width: f64, time_nodes: usize) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(PropagatorError::InvalidParameters(format!(
                "gamma must exceed 1, got {gamma}"
            )));
        }
        if !(time_half_width > 0.0 && time_half_width.is_finite()) {
            return Err(PropagatorError::InvalidParameters(format!(
                "time half-width must be positive, got {time_half_width}"
            )));
        }
        if time_nodes < 16 {
            return Err(PropagatorError::InvalidParameters(format!(
                "need at least 16 time nodes, got {time_nodes}"
            )));
        }
        Ok(EvolutionParams {
            gamma,
            s,
            time_half_width,
            time_nodes,
        })
    }

    /// Time nodes and trapezoid weights on `[-T, T]`.
    pub fn time_rule(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.time_nodes;
        let t = self.time_half_width;
        let dt = 2.0 * t / (m - 1) as f64;
        let nodes = (0..m).map(|k| -t + k as f64 * dt).collect();
        let weights = (0..m)
            .map(|k| if k == 0 || k == m - 1 { 0.5 * dt } else { dt })
            .collect();
        (nodes, weights)
    }
}

/// Frequency-side evolution spectrum: multiplies by `|ξ|^s e^{-it|ξ|^γ}`.
///
/// The zero mode follows the fractional-multiplier convention: zeroed for
/// `s > 0`, kept (and evolved trivially) for `s = 0`, and for `s < 0` the
/// input mean must be exactly zero.
fn smoothed_spectrum(
    spectrum: &ComplexField,
    t: f64,
    gamma: f64,
    s: f64,
) -> std::result::Result<ComplexField, GridError> {
    let zero_mode = spectrum.samples[0];
    if s < 0.0 && (zero_mode.re != 0.0 || zero_mode.im != 0.0) {
        return Err(GridError::DegenerateZeroMode);
    }
    let norms = spectrum.grid.freq_norms();
    let mut out = spectrum.clone();
    for (v, &r) in out.samples.iter_mut().zip(norms.iter()) {
        if r == 0.0 {
            if s != 0.0 {
                *v = Complex64::new(0.0, 0.0);
            }
            continue;
        }
        let amp = if s == 0.0 { 1.0 } else { r.powf(s) };
        *v *= Complex64::from_polar(amp, -t * r.powf(gamma));
    }
    Ok(out)
}

/// `e^{-it(-Δ)^{γ/2}} f` for a physical-side field; exactly norm-preserving.
pub fn evolve(f: &ComplexField, t: f64, gamma: f64) -> Result<ComplexField> {
    let spectrum = forward_transform(f)?;
    let evolved = smoothed_spectrum(&spectrum, t, gamma, 0.0)?;
    Ok(inverse_transform(&evolved)?)
}

/// `|∇|^s e^{-it(-Δ)^{γ/2}} f`; the diagonal multipliers commute, so the
/// order of smoothing and evolution is irrelevant.
pub fn smoothed_evolve(f: &ComplexField, t: f64, gamma: f64, s: f64) -> Result<ComplexField> {
    let spectrum = forward_transform(f)?;
    let evolved = smoothed_spectrum(&spectrum, t, gamma, s)?;
    Ok(inverse_transform(&evolved)?)
}

/// `‖ |∇|^s e^{-it(-Δ)^{γ/2}} f ‖_{L²_{x,t}(w)}` over `[-T, T]`:
/// trapezoid in time of the weighted spatial norms squared.
pub fn spacetime_weighted_norm(
    f: &ComplexField,
    params: &EvolutionParams,
    w: &WeightSpec,
) -> Result<f64> {
    let weight_samples = sample_weight(&f.grid, w)?;
    spacetime_weighted_norm_sampled(f, params, &weight_samples)
}

/// Same with the weight pre-sampled on the grid.
pub fn spacetime_weighted_norm_sampled(
    f: &ComplexField,
    params: &EvolutionParams,
    weight_samples: &[f64],
) -> Result<f64> {
    let spectrum = forward_transform(f)?;
    if params.s < 0.0 {
        let zm = spectrum.samples[0];
        if zm.re != 0.0 || zm.im != 0.0 {
            return Err(PropagatorError::Grid(GridError::DegenerateZeroMode));
        }
    }
    let (nodes, tw) = params.time_rule();
    let vol = f.grid.spacing().powi(f.grid.dim() as i32);
    let contributions: Vec<f64> = nodes
        .par_iter()
        .map(|&t| {
            let evolved = smoothed_spectrum(&spectrum, t, params.gamma, params.s)
                .expect("zero mode checked above");
            let u = inverse_transform(&evolved).expect("inverse transform");
            u.samples
                .iter()
                .zip(weight_samples)
                .map(|(z, &wv)| wv * z.norm_sqr())
                .sum::<f64>()
                * vol
        })
        .collect();
    let total: f64 = contributions.iter().zip(&tw).map(|(c, w)| c * w).sum();
    Ok(total.sqrt())
}

/// Polar-coordinate route for the space-time norm of band-limited data:
/// resamples `f̂` on spheres of radius `r^{1/γ}` and applies the
/// Plancherel-in-time identity
///
/// ```text
///   ‖u‖²_{L²_{x,t}(w)} = 2π (2π)^{-2n} γ^{-2}
///        ∫ r^{2((s+n)/γ - 1)} ‖Σ_i w_i f̂(ρω_i) e^{i x·ρω_i}‖²_{L²(w)} dr,
/// ```
///
/// with `ρ = r^{1/γ}`, exact on annular spectra in the infinite-window limit.
pub fn polar_route_norm(
    f: &ComplexField,
    gamma: f64,
    s: f64,
    w: &WeightSpec,
    rule: &SphereRule,
    rho_range: (f64, f64),
    radial_nodes: usize,
) -> Result<f64> {
    let grid = &f.grid;
    let dim = grid.dim();
    let n = dim as f64;
    let weight_samples = sample_weight(grid, w)?;
    let vol = grid.spacing().powi(dim as i32);
    // Targets restricted to the weight's numerical support.
    let wmax = weight_samples.iter().cloned().fold(0.0f64, f64::max);
    let mut targets = Vec::new();
    let mut target_w = Vec::new();
    let mut x = [0.0; 3];
    for (idx, &wv) in weight_samples.iter().enumerate() {
        if wv > 1e-14 * wmax {
            grid.point(idx, &mut x);
            targets.push(x[..dim].to_vec());
            target_w.push(wv);
        }
    }
    let (r_lo, r_hi) = (rho_range.0.powf(gamma), rho_range.1.powf(gamma));
    let (gx, gw) = gauss_legendre(radial_nodes);
    let (rs, rws) = rescale(&gx, &gw, r_lo, r_hi);
    let mut integral = 0.0;
    for (&r, &rw) in rs.iter().zip(&rws) {
        let rho = r.powf(1.0 / gamma);
        let freq_points: Vec<Vec<f64>> = rule
            .nodes
            .iter()
            .map(|node| node[..dim].iter().map(|c| c * rho).collect())
            .collect();
        let fhat = crate::grid::transform_at(f, &freq_points, 1e-13)?;
        // A_ρ(x) = Σ_i w_i f̂(ρω_i) e^{+i x·ρω_i}; per-target values reduced
        // sequentially to keep the result thread-count independent.
        let contributions: Vec<f64> = targets
            .par_iter()
            .zip(target_w.par_iter())
            .map(|(xt, &wv)| {
                let mut acc = Complex64::new(0.0, 0.0);
                for ((node, qw), fh) in rule.nodes.iter().zip(&rule.weights).zip(&fhat) {
                    let phase: f64 =
                        node[..dim].iter().zip(xt.iter()).map(|(a, b)| a * b).sum::<f64>() * rho;
                    acc += fh * qw * Complex64::new(0.0, phase).exp();
                }
                wv * acc.norm_sqr()
            })
            .collect();
        let norm_sq: f64 = contributions.iter().sum::<f64>() * vol;
        integral += rw * r.powf(2.0 * ((s + n) / gamma - 1.0)) * norm_sq;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let constant = two_pi * two_pi.powf(-2.0 * n) / (gamma * gamma);
    Ok((constant * integral).sqrt())
}

/// Specification of the canonical band-limited localized input family:
/// a physical Gaussian envelope modulated by random plane waves with wave
/// vectors drawn from an annulus.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLimitedSpec {
    pub rho_min: f64,
    pub rho_max: f64,
    pub modes: usize,
    /// Envelope width; boundary decay needs `half_width / sigma_x >= 6.8`.
    pub sigma_x: f64,
}

impl BandLimitedSpec {
    /// Nominal top frequency of the family including the spectral envelope
    /// tail, used for the group-velocity window bound.
    pub fn xi_max(&self) -> f64 {
        self.rho_max + 3.0 / self.sigma_x
    }
}

/// Draws one normalized field from the family (deterministic in the rng).
pub fn band_limited_field(
    grid: &GridSpec,
    spec: &BandLimitedSpec,
    rng: &mut ChaCha8Rng,
) -> Result<ComplexField> {
    if spec.rho_min < 0.0 || spec.rho_max <= spec.rho_min || spec.modes == 0 {
        return Err(PropagatorError::InvalidParameters(format!(
            "bad annulus [{}, {}] or mode count {}",
            spec.rho_min, spec.rho_max, spec.modes
        )));
    }
    let dim = grid.dim();
    // Rejection-sample wave vectors from the annulus.
    let mut waves = Vec::with_capacity(spec.modes);
    while waves.len() < spec.modes {
        let xi: Vec<f64> = (0..dim)
            .map(|_| spec.rho_max * (2.0 * rng.gen::<f64>() - 1.0))
            .collect();
        let r = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r >= spec.rho_min && r <= spec.rho_max {
            let amp = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            waves.push((xi, amp));
        }
    }
    let inv_two_sigma_sq = 1.0 / (2.0 * spec.sigma_x * spec.sigma_x);
    let field = ComplexField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        let env = (-r2 * inv_two_sigma_sq).exp();
        let mut acc = Complex64::new(0.0, 0.0);
        for (xi, amp) in &waves {
            let phase: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
            acc += amp * Complex64::new(0.0, phase).exp();
        }
        acc * env
    });
    let norm = crate::grid::l2_norm(&field);
    if norm == 0.0 {
        return Err(PropagatorError::InvalidParameters(
            "degenerate zero draw".into(),
        ));
    }
    let samples = field.samples.iter().map(|z| z / norm).collect();
    Ok(ComplexField::from_samples(grid, Side::Physical, samples))
}
