//! Fixed and adaptive quadrature rules.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tanh-sinh integration of `f` over `[0, ∞)` using the map `x = t / (1 - t)`.
///
/// Levels are refined (step halving) until two successive estimates agree to
/// `abs_tol`. The integrand must be finite on `(0, ∞)`; endpoint singularities are fine.
pub fn tanh_sinh_semi_infinite<F: Fn(f64) -> f64>(f: F, abs_tol: f64) -> Result<f64> {
    // t in (0,1) ← u in (-∞,∞): t = (1 + tanh(π/2 sinh u)) / 2.
    let g = |u: f64| -> f64 {
        let s = std::f64::consts::FRAC_PI_2 * u.sinh();
        let c = std::f64::consts::FRAC_PI_2 * u.cosh();
        // 1 - t and t computed without cancellation.
        let e = (-2.0 * s.abs()).exp();
        let (t, one_minus_t) = if s >= 0.0 {
            (1.0 / (1.0 + e), e / (1.0 + e))
        } else {
            (e / (1.0 + e), 1.0 / (1.0 + e))
        };
        let dt = c / (2.0 * s.cosh().powi(2));
        if one_minus_t <= 0.0 || t <= 0.0 || !dt.is_finite() || dt == 0.0 {
            return 0.0;
        }
        let x = t / one_minus_t;
        let dx = dt / (one_minus_t * one_minus_t);
        let v = f(x) * dx;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };

    const U_MAX: f64 = 4.5;
    let mut h = 0.5;
    let mut sum = g(0.0);
    let mut k = 1;
    while (k as f64) * h <= U_MAX {
        let u = k as f64 * h;
        sum += g(u) + g(-u);
        k += 1;
    }
    let mut estimate = sum * h;
    let mut last_change = f64::INFINITY;
    for _level in 0..12 {
        h /= 2.0;
        let mut k = 1;
        while (k as f64) * h <= U_MAX {
            let u = k as f64 * h;
            sum += g(u) + g(-u);
            k += 2;
        }
        let refined = sum * h;
        last_change = (refined - estimate).abs();
        estimate = refined;
        if last_change <= abs_tol {
            return Ok(estimate);
        }
    }
    Err(Error::Quadrature(last_change))
}
