//! Quadrature on `S^{n-1}`, the surface-measure Fourier transform, the
//! extension operator and the dyadic kernel pieces.
//!
//! Transform convention `e^{-i x·ξ}` throughout, matching [`crate::grid`]:
//! `\widehat{f dσ_r}(x) = Σ_nodes f(ω) e^{-i x·rω} r^{n-1} w(ω)`.  For the
//! sphere this makes `\widehat{dσ}` real and even, `4π sin|x|/|x|` in n = 3
//! and `2π J₀(|x|)` in n = 2.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{forward_transform, inverse_transform, ComplexField, GridError, GridSpec, Side};
use crate::quadrature::gauss_legendre;

#[derive(Debug, Error)]
pub enum SphereError {
    #[error("sphere rules support n = 2 or 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("exactness degree must be >= 4, got {0}")]
    DegreeTooLow(usize),
    #[error("rule has {rule} nodes but {values} values were supplied")]
    NodeCountMismatch { rule: usize, values: usize },
    #[error("annulus of piece {j} (radius {radius}) exceeds the box half-width {half_width}")]
    AnnulusExceedsBox { j: u32, radius: f64, half_width: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

type Result<T> = std::result::Result<T, SphereError>;

/// Quadrature nodes and weights on `S^{n-1}` with declared polynomial
/// exactness.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl SphereRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total measure `Σ w_i`, `2π` for n = 2 and `4π` for n = 3.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ w_i f(ω_i)`.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(node, w)| w * f(&node[..self.dim]))
            .sum()
    }
}

/// Builds a sphere rule: uniform nodes on the circle for n = 2, a
/// Gauss–Legendre × uniform-azimuth product for n = 3.
pub fn sphere_rule(dim: usize, exactness_degree: usize) -> Result<SphereRule> {
    if exactness_degree < 4 {
        return Err(SphereError::DegreeTooLow(exactness_degree));
    }
    match dim {
        2 => {
            let m = (exactness_degree + 1).max(8);
            let w = 2.0 * std::f64::consts::PI / m as f64;
            let nodes = (0..m)
                .map(|i| {
                    let theta = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                    [theta.cos(), theta.sin(), 0.0]
                })
                .collect();
            Ok(SphereRule {
                dim,
                nodes,
                weights: vec![w; m],
                exactness: m - 1,
            })
        }
        3 => {
            let q = (exactness_degree + 2) / 2;
            let m = exactness_degree + 1;
            let (gx, gw) = gauss_legendre(q);
            let mut nodes = Vec::with_capacity(q * m);
            let mut weights = Vec::with_capacity(q * m);
            let az_w = 2.0 * std::f64::consts::PI / m as f64;
            for (u, wu) in gx.iter().zip(&gw) {
                let s = (1.0 - u * u).sqrt();
                for i in 0..m {
                    let phi = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                    nodes.push([s * phi.cos(), s * phi.sin(), *u]);
                    weights.push(wu * az_w);
                }
            }
            Ok(SphereRule {
                dim,
                nodes,
                weights,
                exactness: exactness_degree,
            })
        }
        other => Err(SphereError::UnsupportedDimension(other)),
    }
}

/// `J₀` by a power series for `|x| <= 12` and the Hankel asymptotic
/// expansion beyond, summed to its optimal truncation.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 12.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut acc = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -q / (kf * kf);
            acc += term;
            if term.abs() < 1e-18 * acc.abs().max(1.0) {
                break;
            }
        }
        acc
    } else {
        // J₀(x) ≈ sqrt(2/(πx)) [cos ω · P(x) - sin ω · Q(x)], ω = x - π/4,
        // a_k = a_{k-1} · (-(2k-1)²) / (8k); P sums a_{2k}/x^{2k} with
        // alternating signs folded into a_k, Q the odd terms.
        let omega = x - std::f64::consts::FRAC_PI_4;
        let mut p = 0.0;
        let mut qsum = 0.0;
        let mut a = 1.0f64;
        let mut pow = 1.0f64;
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let term = a * pow;
            if term.abs() > last {
                break; // asymptotic series: stop at the smallest term
            }
            last = term.abs();
            if k % 2 == 0 {
                let sign = if k % 4 == 0 { 1.0 } else { -1.0 };
                p += sign * term.abs();
            } else {
                let sign = if k % 4 == 1 { -1.0 } else { 1.0 };
                qsum += sign * term.abs();
            }
            let kf = (k + 1) as f64;
            a *= (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (8.0 * kf);
            pow /= x;
        }
        (2.0 / (std::f64::consts::PI * x)).sqrt() * (omega.cos() * p - omega.sin() * qsum)
    }
}

/// `\widehat{dσ}(x)`: `4π sin|x|/|x|` (n = 3, removable singularity filled
/// with `4π`) or `2π J₀(|x|)` (n = 2).  Real-valued; returned as complex for
/// API uniformity with [`extension`].
pub fn surface_measure_ft(dim: usize, x: &[f64]) -> Complex64 {
    Complex64::new(surface_measure_ft_radial(dim, norm(x)), 0.0)
}

/// Radial profile of `\widehat{dσ}` as a real number.
pub fn surface_measure_ft_radial(dim: usize, r: f64) -> f64 {
    match dim {
        3 => {
            if r == 0.0 {
                4.0 * std::f64::consts::PI
            } else {
                4.0 * std::f64::consts::PI * r.sin() / r
            }
        }
        2 => 2.0 * std::f64::consts::PI * bessel_j0(r),
        _ => panic!("surface measure transform defined for n = 2, 3"),
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Smooth radial partition of unity built from one polynomial step.
///
/// `phi` is 1 on `[0,1]`, 0 on `[2,∞)` with a quintic-smoothstep transition;
/// `psi_j(t) = phi(t/2^j) - phi(t/2^{j-1})` telescopes so that
/// `Σ_{j=0}^{J} psi_j(t) = phi(t/2^J)`, identically 1 for `t <= 2^J`.
/// Supports: `psi_0 ⊂ [0,2]`, `psi_j ⊂ [2^{j-1}, 2^{j+1}]` for `j >= 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DyadicCutoff;

impl DyadicCutoff {
    /// The smooth step: 1 for `t <= 1`, 0 for `t >= 2`.
    pub fn phi(t: f64) -> f64 {
        if t <= 1.0 {
            1.0
        } else if t >= 2.0 {
            0.0
        } else {
            let u = t - 1.0;
            1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
        }
    }

    pub fn psi(j: u32, t: f64) -> f64 {
        if j == 0 {
            Self::phi(t)
        } else {
            Self::phi(t / (2.0f64).powi(j as i32)) - Self::phi(t / (2.0f64).powi(j as i32 - 1))
        }
    }

    /// Support interval of `psi_j`.
    pub fn support(j: u32) -> (f64, f64) {
        if j == 0 {
            (0.0, 2.0)
        } else {
            ((2.0f64).powi(j as i32 - 1), (2.0f64).powi(j as i32 + 1))
        }
    }
}

/// `K_j(x) = \widehat{dσ}(x) ψ_j(|x|)`, supported on the `ψ_j` annulus.
pub fn dyadic_kernel(dim: usize, j: u32, x: &[f64]) -> Complex64 {
    dyadic_kernel_radial(dim, j, norm(x)).into()
}

pub fn dyadic_kernel_radial(dim: usize, j: u32, r: f64) -> f64 {
    let psi = DyadicCutoff::psi(j, r);
    if psi == 0.0 {
        0.0
    } else {
        surface_measure_ft_radial(dim, r) * psi
    }
}

/// Samples `K_j` on the physical grid.
pub fn sample_dyadic_kernel(grid: &GridSpec, j: u32) -> ComplexField {
    ComplexField::from_fn(grid, |x| Complex64::new(dyadic_kernel_radial(grid.dim(), j, norm(x)), 0.0))
}

fn check_annulus(grid: &GridSpec, j: u32) -> Result<()> {
    let radius = (2.0f64).powi(j as i32 + 1);
    if radius > grid.half_width() {
        return Err(SphereError::AnnulusExceedsBox {
            j,
            radius,
            half_width: grid.half_width(),
        });
    }
    Ok(())
}

/// `K_j ∗ f` on the periodic box, realized by frequency-side multiplication
/// with the transform of the sampled, box-truncated `K_j`.
pub fn convolve_kernel(j: u32, f: &ComplexField) -> Result<ComplexField> {
    check_annulus(&f.grid, j)?;
    let kernel = sample_dyadic_kernel(&f.grid, j);
    let kernel_hat = forward_transform(&kernel)?;
    let f_hat = forward_transform(f)?;
    let mut prod = kernel_hat;
    for (k, fv) in prod.samples.iter_mut().zip(&f_hat.samples) {
        *k *= fv;
    }
    Ok(inverse_transform(&prod)?)
}

/// Extension operator: values of `\widehat{f dσ_r}` at the target points.
pub fn extension(
    rule: &SphereRule,
    node_values: &[Complex64],
    radius: f64,
    targets: &[Vec<f64>],
) -> Result<Vec<Complex64>> {
    if node_values.len() != rule.len() {
        return Err(SphereError::NodeCountMismatch {
            rule: rule.len(),
            values: node_values.len(),
        });
    }
    let dim = rule.dim;
    let measure_scale = radius.powi(dim as i32 - 1);
    let out = targets
        .par_iter()
        .map(|x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for ((node, w), v) in rule.nodes.iter().zip(&rule.weights).zip(node_values) {
                let phase: f64 = node[..dim].iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                acc += v * w * Complex64::new(0.0, -radius * phase).exp();
            }
            acc * measure_scale
        })
        .collect();
    Ok(out)
}

/// Extension evaluated on every grid point, returned as a physical field.
pub fn extension_to_grid(
    rule: &SphereRule,
    node_values: &[Complex64],
    radius: f64,
    grid: &GridSpec,
) -> Result<ComplexField> {
    if node_values.len() != rule.len() {
        return Err(SphereError::NodeCountMismatch {
            rule: rule.len(),
            values: node_values.len(),
        });
    }
    let dim = rule.dim;
    let measure_scale = radius.powi(dim as i32 - 1);
    let samples: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let mut x = [0.0; 3];
            grid.point(idx, &mut x);
            let mut acc = Complex64::new(0.0, 0.0);
            for ((node, w), v) in rule.nodes.iter().zip(&rule.weights).zip(node_values) {
                let phase: f64 = node[..dim].iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                acc += v * w * Complex64::new(0.0, -radius * phase).exp();
            }
            acc * measure_scale
        })
        .collect();
    Ok(ComplexField::from_samples(grid, Side::Physical, samples))
}

/// Linear (non-periodic) convolution with a radial kernel evaluated at true
/// displacements, via zero-padded FFT.  The kernel transform is precomputed
/// once so repeated applies (power iteration) stay cheap.
pub struct RadialConvolution {
    grid: GridSpec,
    padded: GridSpec,
    kernel_hat: Vec<Complex64>,
}

impl RadialConvolution {
    pub fn new(grid: &GridSpec, kernel: impl Fn(f64) -> f64) -> Result<Self> {
        let n = grid.points_per_axis();
        // Padded grid holds displacements in (-2L, 2L); spacing unchanged.
        let padded = GridSpec::new(grid.dim(), 2 * n, 2.0 * grid.half_width())
            .expect("padded grid parameters are valid");
        // Kernel sampled at the padded box's own coordinates: plain index m
        // per axis carries displacement (m - N)·h, which is exactly the index
        // relation the half-box output shift of the transform pair needs.
        let field = ComplexField::from_fn(&padded, |x| {
            Complex64::new(kernel(x.iter().map(|c| c * c).sum::<f64>().sqrt()), 0.0)
        });
        let hat = forward_transform(&field)?;
        Ok(RadialConvolution {
            grid: grid.clone(),
            padded,
            kernel_hat: hat.samples,
        })
    }

    /// `(K ∗ f)(x_j) = Σ_l K(x_j - x_l) f_l h^n` for all grid points.
    pub fn apply(&self, f: &ComplexField) -> Result<ComplexField> {
        if f.grid != self.grid {
            return Err(SphereError::Grid(GridError::GridMismatch));
        }
        let n = self.grid.points_per_axis();
        let dim = self.grid.dim();
        let pn = 2 * n;
        let mut fpad = ComplexField::zeros(&self.padded, Side::Physical);
        for (idx, v) in f.samples.iter().enumerate() {
            let parts = self.grid.decompose(idx);
            let mut pidx = 0usize;
            for a in 0..dim {
                pidx = pidx * pn + parts[a];
            }
            fpad.samples[pidx] = *v;
        }
        let mut hat = forward_transform(&fpad)?;
        for (v, k) in hat.samples.iter_mut().zip(&self.kernel_hat) {
            *v *= k;
        }
        let conv = inverse_transform(&hat)?;
        // Product of two forward transforms and one inverse: the quadrature
        // factors compose to h^n · (circular sum), the parity factors to a
        // half-box output shift absorbed by the kernel's coordinate layout.
        // Restricting to the original window removes wrap-around because the
        // embedded f is zero on the padding.
        let mut out = ComplexField::zeros(&self.grid, Side::Physical);
        for idx in 0..self.grid.len() {
            let parts = self.grid.decompose(idx);
            let mut pidx = 0usize;
            for a in 0..dim {
                pidx = pidx * pn + parts[a];
            }
            out.samples[idx] = conv.samples[pidx];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{l2_norm, make_grid};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn rule_weights_sum_to_sphere_measure() {
        let r2 = sphere_rule(2, 8).unwrap();
        assert!(r2.len() >= 9);
        assert_relative_eq!(r2.total_weight(), 2.0 * PI, max_relative = 1e-13);
        let r3 = sphere_rule(3, 14).unwrap();
        assert_relative_eq!(r3.total_weight(), 4.0 * PI, max_relative = 1e-13);
        assert!(matches!(sphere_rule(4, 8), Err(SphereError::UnsupportedDimension(4))));
        assert!(matches!(sphere_rule(2, 2), Err(SphereError::DegreeTooLow(2))));
    }

    #[test]
    fn rule_integrates_monomials() {
        let r2 = sphere_rule(2, 10).unwrap();
        assert!(r2.integrate(|w| w[0]).abs() < 1e-13);
        assert_relative_eq!(r2.integrate(|w| w[0] * w[0]), PI, max_relative = 1e-12);
        assert_relative_eq!(
            r2.integrate(|w| w[0].powi(4)),
            0.75 * PI,
            max_relative = 1e-12
        );
        let r3 = sphere_rule(3, 10).unwrap();
        assert!(r3.integrate(|w| w[2]).abs() < 1e-12);
        assert_relative_eq!(
            r3.integrate(|w| w[0] * w[0]),
            4.0 * PI / 3.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            r3.integrate(|w| w[0] * w[0] * w[1] * w[1]),
            4.0 * PI / 15.0,
            max_relative = 1e-11
        );
    }

    fn trapezoid_circle_ft(r: f64, nodes: usize) -> f64 {
        // ∫₀^{2π} cos(r cos θ) dθ (the sine part cancels); periodic trapezoid.
        let mut acc = 0.0;
        for i in 0..nodes {
            let theta = 2.0 * PI * i as f64 / nodes as f64;
            acc += (r * theta.cos()).cos();
        }
        acc * 2.0 * PI / nodes as f64
    }

    #[test]
    fn surface_ft_point_values() {
        assert_relative_eq!(surface_measure_ft(3, &[0.0; 3]).re, 4.0 * PI);
        assert!(surface_measure_ft(3, &[PI, 0.0, 0.0]).re.abs() < 1e-10);
        // n = 2 at |x| = 1 against the dense trapezoid oracle.
        let oracle = trapezoid_circle_ft(1.0, 10_000);
        let v = surface_measure_ft(2, &[1.0, 0.0]).re;
        assert_relative_eq!(v, oracle, epsilon = 1e-10);
        // Frozen value of 2π J₀(1).
        assert_relative_eq!(v, 4.807878861269, epsilon = 1e-9);
    }

    #[test]
    fn bessel_split_agrees_with_quadrature() {
        for r in [0.3, 1.7, 5.0, 11.5, 12.0, 12.5, 14.0, 25.0, 40.0, 80.0] {
            let oracle = trapezoid_circle_ft(r, 20_000) / (2.0 * PI);
            assert_relative_eq!(bessel_j0(r), oracle, epsilon = 5e-11);
        }
    }

    #[test]
    fn decay_quotient_stable_in_window() {
        for dim in [2usize, 3] {
            let q = |r_max: f64| {
                let mut sup: f64 = 0.0;
                let steps = (r_max * 400.0) as usize;
                for i in 0..=steps {
                    let r = r_max * i as f64 / steps as f64;
                    let v = surface_measure_ft_radial(dim, r).abs()
                        * (1.0 + r).powf((dim as f64 - 1.0) / 2.0);
                    sup = sup.max(v);
                }
                sup
            };
            let qs = [q(10.0), q(20.0), q(40.0)];
            for v in &qs {
                assert!((v - qs[0]).abs() / qs[0] < 0.05, "{dim}: {qs:?}");
            }
        }
    }

    #[test]
    fn cutoff_partition_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let t = rng.gen::<f64>() * 60.0;
            let total: f64 = (0..=8).map(|j| DyadicCutoff::psi(j, t)).sum();
            assert!((total - 1.0).abs() < 1e-12, "t={t}");
            for j in 0..=8 {
                let v = DyadicCutoff::psi(j, t);
                assert!((-1e-15..=1.0 + 1e-15).contains(&v));
            }
        }
    }

    #[test]
    fn kernel_partition_reconstruction() {
        // Σ_{j<=J} K_j = \widehat{dσ} for |x| < 2^{J-1}.
        let j_max = 5u32;
        for r in [0.0, 0.5, 3.0, 7.9, 15.5] {
            let sum: f64 = (0..=j_max).map(|j| dyadic_kernel_radial(3, j, r)).sum();
            let full = surface_measure_ft_radial(3, r);
            assert!((sum - full).abs() <= 1e-12 * full.abs().max(1.0), "r={r}");
        }
    }

    #[test]
    fn kernel_support() {
        let eps = 1e-9;
        assert_eq!(dyadic_kernel_radial(3, 3, 4.0 - eps), 0.0);
        assert_eq!(dyadic_kernel_radial(3, 3, 16.0 + eps), 0.0);
        assert!(dyadic_kernel_radial(3, 3, 8.0).abs() > 0.0);
        let (lo, hi) = DyadicCutoff::support(3);
        assert_eq!((lo, hi), (4.0, 16.0));
    }

    #[test]
    fn kernel_sup_scaling() {
        // sup |K_j| · 2^{j(n-1)/2} stable within a factor 2 for j = 2..6, n=3.
        let mut quotients = Vec::new();
        for j in 2u32..=6 {
            let (lo, hi) = DyadicCutoff::support(j);
            let samples = 4000;
            let mut sup: f64 = 0.0;
            for i in 0..=samples {
                let r = lo + (hi - lo) * i as f64 / samples as f64;
                sup = sup.max(dyadic_kernel_radial(3, j, r).abs());
            }
            quotients.push(sup * (2.0f64).powf(j as f64));
        }
        let max = quotients.iter().cloned().fold(f64::MIN, f64::max);
        let min = quotients.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 2.0, "{quotients:?}");
    }

    #[test]
    fn extension_examples() {
        let rule = sphere_rule(3, 24).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); rule.len()];
        // f ≡ 1, r = 2, x = 0 → 4π r² = 16π.
        let v = extension(&rule, &ones, 2.0, &[vec![0.0, 0.0, 0.0]]).unwrap();
        assert_relative_eq!(v[0].re, 16.0 * PI, max_relative = 1e-12);
        assert!(v[0].im.abs() < 1e-12);
        // f ≡ 0 → 0.
        let zeros = vec![Complex64::new(0.0, 0.0); rule.len()];
        let v = extension(&rule, &zeros, 1.0, &[vec![0.3, 0.1, -0.4]]).unwrap();
        assert_eq!(v[0], Complex64::new(0.0, 0.0));
        // Node count mismatch is rejected.
        assert!(matches!(
            extension(&rule, &ones[..3], 1.0, &[vec![0.0; 3]]),
            Err(SphereError::NodeCountMismatch { .. })
        ));
    }

    #[test]
    fn extension_matches_closed_form_at_random_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2usize, 3] {
            let rule = sphere_rule(dim, 48).unwrap();
            let ones = vec![Complex64::new(1.0, 0.0); rule.len()];
            let targets: Vec<Vec<f64>> = (0..200)
                .map(|_| (0..dim).map(|_| 8.0 * (rng.gen::<f64>() - 0.5)).collect())
                .collect();
            let vals = extension(&rule, &ones, 1.0, &targets).unwrap();
            for (x, v) in targets.iter().zip(&vals) {
                let exact = surface_measure_ft(dim, x);
                assert!(
                    (v - exact).norm() < 1e-8,
                    "dim={dim} x={x:?}: {v} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn convolve_kernel_annulus_bound() {
        let g = make_grid(2, 32, 4.0).unwrap();
        let f = ComplexField::zeros(&g, Side::Physical);
        assert!(matches!(
            convolve_kernel(2, &f),
            Err(SphereError::AnnulusExceedsBox { .. })
        ));
    }

    #[test]
    fn convolve_kernel_zero_and_spike() {
        let g = make_grid(2, 64, 16.0).unwrap();
        let zero = ComplexField::zeros(&g, Side::Physical);
        let out = convolve_kernel(2, &zero).unwrap();
        assert!(l2_norm(&out) < 1e-14);

        // Delta-like single-cell spike of unit mass reproduces the sampled
        // kernel translated to the spike location.
        let h = g.spacing();
        let mut spike = ComplexField::zeros(&g, Side::Physical);
        let center = g.len() / 2 + g.points_per_axis() / 2; // index of x = 0
        spike.samples[center] = Complex64::new(1.0 / (h * h), 0.0);
        let out = convolve_kernel(2, &spike).unwrap();
        let kernel = sample_dyadic_kernel(&g, 2);
        let scale = l2_norm(&kernel).max(1.0);
        let err = out
            .samples
            .iter()
            .zip(&kernel.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-10 * scale, "err {err}");
    }

    #[test]
    fn convolve_kernel_matches_direct_sum() {
        // Periodic double-sum oracle on a coarse grid, random localized f.
        let g = make_grid(2, 64, 16.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = ComplexField::from_fn(&g, |x| {
            let r2 = x.iter().map(|c| c * c).sum::<f64>();
            let env = (-r2 / 8.0).exp();
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * env
        });
        let fast = convolve_kernel(2, &f).unwrap();
        let kernel = sample_dyadic_kernel(&g, 2);
        let n = g.points_per_axis();
        let h = g.spacing();
        let mut direct = ComplexField::zeros(&g, Side::Physical);
        for j0 in 0..n {
            for j1 in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for l0 in 0..n {
                    for l1 in 0..n {
                        let d0 = (j0 + n - l0) % n;
                        let d1 = (j1 + n - l1) % n;
                        // displacement sample of the kernel: index of x_d
                        // with wrap, matching the periodic convolution.
                        let k0 = (d0 + n / 2) % n;
                        let k1 = (d1 + n / 2) % n;
                        acc += kernel.samples[k0 * n + k1] * f.samples[l0 * n + l1];
                    }
                }
                direct.samples[j0 * n + j1] = acc * h * h;
            }
        }
        let scale = l2_norm(&direct).max(1e-12);
        let err = fast
            .samples
            .iter()
            .zip(&direct.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(err / scale < 0.01, "relative error {}", err / scale);
        assert!(err / scale < 1e-10, "fft and direct periodic sums should agree to roundoff");
    }

    #[test]
    fn radial_convolution_matches_direct_linear_sum() {
        let g = make_grid(2, 16, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = ComplexField::from_fn(&g, |_| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let kernel = |r: f64| surface_measure_ft_radial(2, r);
        let conv = RadialConvolution::new(&g, kernel).unwrap();
        let fast = conv.apply(&f).unwrap();
        let n = g.points_per_axis();
        let h = g.spacing();
        let mut direct = ComplexField::zeros(&g, Side::Physical);
        let mut xj = [0.0; 3];
        let mut xl = [0.0; 3];
        for j in 0..g.len() {
            g.point(j, &mut xj);
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..g.len() {
                g.point(l, &mut xl);
                let d = ((xj[0] - xl[0]).powi(2) + (xj[1] - xl[1]).powi(2)).sqrt();
                acc += f.samples[l] * kernel(d);
            }
            direct.samples[j] = acc * h * h;
        }
        let _ = n;
        let scale = l2_norm(&direct);
        for (a, b) in fast.samples.iter().zip(&direct.samples) {
            assert!((a - b).norm() < 1e-10 * scale);
        }
    }
}
