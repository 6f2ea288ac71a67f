//! Adaptive quadrature on top of the double-exponential rule, plus
//! Gauss–Legendre tables.

use crate::error::{Error, Result};
use gauss_quad::GaussLegendre;

#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

const MAX_DEPTH: u32 = 24;

/// `∫_a^b f` to absolute tolerance `tol`, bisecting wherever the
/// double-exponential rule reports a larger error.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<Quad> {
    if a == b {
        return Ok(Quad { value: 0.0, error: 0.0 });
    }
    adapt(f, a, b, tol, 0)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Result<Quad> {
    let out = quadrature::double_exponential::integrate(f, a, b, tol);
    if out.error_estimate <= tol {
        return Ok(Quad { value: out.integral, error: out.error_estimate });
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature(format!(
            "[{a}, {b}]: error {:.2e} above {:.2e}",
            out.error_estimate, tol
        )));
    }
    let m = 0.5 * (a + b);
    let l = adapt(f, a, m, 0.5 * tol, depth + 1)?;
    let r = adapt(f, m, b, 0.5 * tol, depth + 1)?;
    Ok(Quad { value: l.value + r.value, error: l.error + r.error })
}

/// Integral over consecutive breakpoints; the tolerance is split evenly.
pub fn integrate_breaks<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: f64) -> Result<Quad> {
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    let mut acc = Quad { value: 0.0, error: 0.0 };
    for w in breaks.windows(2) {
        let q = integrate(f, w[0], w[1], tol / pieces)?;
        acc.value += q.value;
        acc.error += q.error;
    }
    Ok(acc)
}

/// `∫_a^∞ f` through `x = a + u/(1-u)`.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> Result<Quad> {
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let v = 1.0 - u;
        f(a + u / v) / (v * v)
    };
    integrate(&g, 0.0, 1.0, tol)
}

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(n.max(1).try_into().expect("n >= 1"));
    let c = 0.5 * (b - a);
    let d = 0.5 * (a + b);
    rule.iter().map(|(x, w)| (c * x + d, c * w)).unzip()
}

/// Composite Gauss–Legendre on the given breakpoints.
pub fn composite_gl(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for w in breaks.windows(2) {
        let (x, wt) = gauss_legendre(order, w[0], w[1]);
        xs.extend(x);
        ws.extend(wt);
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_exact() {
        let q = integrate(&|x: f64| x * x * x - x, 0.0, 2.0, 1e-13).unwrap();
        assert_abs_diff_eq!(q.value, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn semi_infinite_gaussian() {
        let q = integrate_to_inf(&|x: f64| (-x * x).exp(), 0.0, 1e-12).unwrap();
        assert_abs_diff_eq!(q.value, 0.5 * std::f64::consts::PI.sqrt(), epsilon = 1e-11);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let q = integrate_breaks(&|x: f64| x.abs(), &[-1.0, 0.0, 2.0], 1e-12).unwrap();
        assert_abs_diff_eq!(q.value, 2.5, epsilon = 1e-11);
    }

    #[test]
    fn gauss_legendre_degree() {
        let (x, w) = gauss_legendre(6, 1.0, 3.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(11)).sum();
        assert_abs_diff_eq!(s, (3f64.powi(12) - 1.0) / 12.0, epsilon = 1e-8);
    }
}
