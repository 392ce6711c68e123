//! Gauss–Legendre rules and an adaptive bisection integrator.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
///
/// Nodes are found by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn gl15() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(15))
}

/// Fixed 15-point rule on [a, b].
pub fn gl15_fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = gl15();
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    h * x.iter().zip(w).map(|(xi, wi)| wi * f(c + h * xi)).sum::<f64>()
}

/// Adaptive 15-point Gauss–Legendre integration with interval bisection.
///
/// A panel is accepted once the two-half estimate agrees with the whole-panel
/// estimate to within its share of `tol`. Fails if the depth limit is reached
/// with the tolerance unmet or a non-finite value appears.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let whole = gl15_fixed(f, a, b);
    let mut err = 0.0;
    let v = recurse(f, a, b, whole, tol, 0, &mut err)?;
    if !v.is_finite() {
        return Err(Error::Divergent("quadrature produced a non-finite value".into()));
    }
    Ok(v)
}

/// Adaptive integration that accepts any panel narrower than `min_width`.
///
/// Meant for integrands that are themselves numerical integrals: their
/// noise would otherwise drive bisection to the depth limit.
pub fn integrate_to_width<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, min_width: f64) -> Result<f64> {
    fn go<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, min_width: f64) -> f64 {
        let m = 0.5 * (a + b);
        let left = gl15_fixed(f, a, m);
        let right = gl15_fixed(f, m, b);
        if (left + right - whole).abs() <= tol || b - a <= min_width {
            return left + right;
        }
        go(f, a, m, left, 0.5 * tol, min_width) + go(f, m, b, right, 0.5 * tol, min_width)
    }
    if a == b {
        return Ok(0.0);
    }
    let v = go(f, a, b, gl15_fixed(f, a, b), tol, min_width.max(1e-300));
    if !v.is_finite() {
        return Err(Error::Divergent("quadrature produced a non-finite value".into()));
    }
    Ok(v)
}

const MAX_DEPTH: usize = 48;

fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    err: &mut f64,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let left = gl15_fixed(f, a, m);
    let right = gl15_fixed(f, m, b);
    let diff = (left + right - whole).abs();
    if diff <= tol || depth >= MAX_DEPTH || m <= a || m >= b {
        if diff > tol && depth >= MAX_DEPTH && diff > 1e3 * tol {
            return Err(Error::Divergent(format!(
                "adaptive quadrature did not converge on [{a}, {b}]"
            )));
        }
        *err += diff;
        return Ok(left + right);
    }
    let l = recurse(f, a, m, left, 0.5 * tol, depth + 1, err)?;
    let r = recurse(f, m, b, right, 0.5 * tol, depth + 1, err)?;
    Ok(l + r)
}
