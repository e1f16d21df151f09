//! Gauss–Legendre nodes shared by the weight and sphere quadratures.

/// Nodes and weights of the `p`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Newton iteration on the Legendre recurrence; exact for polynomials of
/// degree `2p - 1`.
pub(crate) fn gauss_legendre(p: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(p >= 1);
    let mut nodes = vec![0.0; p];
    let mut weights = vec![0.0; p];
    for i in 0..p {
        // Chebyshev-like initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (p as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dpn) = legendre_with_derivative(p, x);
            let dx = pn / dpn;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dpn) = legendre_with_derivative(p, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dpn * dpn);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// `(P_p(x), P_p'(x))` by the three-term recurrence.
fn legendre_with_derivative(p: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if p == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=p {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = p as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Rescales a `[-1, 1]` rule to `[a, b]`.
pub(crate) fn rescale(nodes: &[f64], weights: &[f64], a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        nodes.iter().map(|t| mid + half * t).collect(),
        weights.iter().map(|w| w * half).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
        // ∫_{-1}^{1} t^10 dt = 2/11 needs p >= 6.
        let v: f64 = x.iter().zip(&w).map(|(t, w)| t.powi(10) * w).sum();
        assert_relative_eq!(v, 2.0 / 11.0, max_relative = 1e-12);
        // Odd powers vanish.
        let v: f64 = x.iter().zip(&w).map(|(t, w)| t.powi(7) * w).sum();
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn rescaled_rule_integrates_on_interval() {
        let (x, w) = gauss_legendre(8);
        let (x, w) = rescale(&x, &w, 0.0, 3.0);
        let v: f64 = x.iter().zip(&w).map(|(t, w)| t * t * w).sum();
        assert_relative_eq!(v, 9.0, max_relative = 1e-13);
    }
}
