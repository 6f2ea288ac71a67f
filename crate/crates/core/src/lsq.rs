//! Weighted linear least squares through an SVD.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LsqFit {
    pub coeffs: Vec<f64>,
    /// One-sigma uncertainties scaled by the residual.
    pub sigma: Vec<f64>,
    /// Weighted root-mean-square residual.
    pub rms: f64,
    /// Largest absolute residual, unweighted.
    pub max_abs_residual: f64,
    /// Ratio of extreme singular values of the column-scaled design matrix.
    pub condition: f64,
}

/// Solve `min Σ w_i (y_i − Σ_j c_j φ_j(x_i))²` where `design[i][j] = φ_j(x_i)`.
pub fn fit(design: &[Vec<f64>], y: &[f64], weights: Option<&[f64]>) -> Result<LsqFit> {
    let n = y.len();
    let p = design.first().map_or(0, |r| r.len());
    if n < p || p == 0 {
        return Err(Error::Fit(format!("{n} samples for {p} unknowns")));
    }
    let w: Vec<f64> = match weights {
        Some(w) => w.iter().map(|v| v.sqrt()).collect(),
        None => vec![1.0; n],
    };
    let mut a = DMatrix::from_fn(n, p, |i, j| design[i][j] * w[i]);
    // column equilibration keeps the SVD honest across disparate powers
    let mut colscale = vec![1.0; p];
    for j in 0..p {
        let norm = a.column(j).norm();
        if norm > 0.0 {
            colscale[j] = norm;
            a.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    let b = DVector::from_iterator(n, y.iter().zip(&w).map(|(y, w)| y * w));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !condition.is_finite() || condition > 1e14 {
        return Err(Error::Fit(format!("design matrix condition {condition:.2e}")));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let res = &b - &a * &x;
    let dof = (n - p).max(1) as f64;
    let s2 = res.norm_squared() / dof;
    // covariance of the scaled unknowns: V Σ^{-2} Vᵀ
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut sigma = vec![0.0; p];
    for (j, sj) in sigma.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in 0..p {
            let sv = svd.singular_values[k];
            acc += (v_t[(k, j)] / sv).powi(2);
        }
        *sj = (acc * s2).sqrt() / colscale[j];
    }
    let coeffs: Vec<f64> = x.iter().zip(&colscale).map(|(c, s)| c / s).collect();
    let mut max_abs = 0.0f64;
    for i in 0..n {
        let pred: f64 = design[i].iter().zip(&coeffs).map(|(d, c)| d * c).sum();
        max_abs = max_abs.max((pred - y[i]).abs());
    }
    Ok(LsqFit {
        coeffs,
        sigma,
        rms: (res.norm_squared() / n as f64).sqrt(),
        max_abs_residual: max_abs,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovers_quadratic() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let design: Vec<Vec<f64>> = xs.iter().map(|x| vec![1.0, *x, x * x]).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 - 3.0 * x + 0.5 * x * x).collect();
        let f = fit(&design, &y, None).unwrap();
        assert_abs_diff_eq!(f.coeffs[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.coeffs[1], -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.coeffs[2], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_underdetermined() {
        assert!(fit(&[vec![1.0, 2.0]], &[1.0], None).is_err());
    }
}
