//! Browser bindings for three small computations: the conformal log det
//! along an ε ladder, the cone heat kernel against the plane, and the
//! low eigenvalues of one Fourier mode of `Ω_ε`.

use conedet::geometry::{build_omega0, build_z, glue, Profile};
use conedet::spectrum::{auto_mesh, mode_eigenvalues, Surface};
use conedet::{conekernel, zetadet};
use wasm_bindgen::prelude::*;

fn js(e: conedet::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn glued(gamma: f64, eps: f64) -> conedet::Result<Profile> {
    let o = build_omega0(gamma, "polyblend", &[])?;
    let z = build_z(gamma, "polyblend", &[])?;
    Ok(glue(&o, &z, eps)?.profile)
}

/// `[ε, log ε, log det, …]` for `ε = 2^{−k}`, `k = k_min..=k_max`, then the
/// least-squares slope in `log ε` as the last entry.
pub fn log_det_ladder(gamma: f64, k_min: u32, k_max: u32) -> conedet::Result<Vec<f64>> {
    if k_min < 2 || k_max < k_min || k_max > 10 {
        return Err(conedet::Error::InvalidInput(format!("need 2 <= k_min <= k_max <= 10, got {k_min}, {k_max}")));
    }
    let mut out = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in k_min..=k_max {
        let eps = 2f64.powi(-(k as i32));
        let d = zetadet::conformal_log_det(&glued(gamma, eps)?)?;
        out.extend([eps, eps.ln(), d.log_det]);
        xs.push(eps.ln());
        ys.push(d.log_det);
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    out.push(if sxx > 0.0 { sxy / sxx } else { 0.0 });
    Ok(out)
}

/// `[r, H_cone(t, r, r)/H_plane(t), …]` on `n` points of `(0, r_max]`.
pub fn cone_kernel_ratio(gamma: f64, t: f64, r_max: f64, n: usize) -> conedet::Result<Vec<f64>> {
    let plane = conekernel::plane_diag(t)?;
    let mut out = Vec::with_capacity(2 * n);
    for i in 1..=n {
        let r = r_max * i as f64 / n as f64;
        out.extend([r, conekernel::cone_diag(t, r, gamma)? / plane]);
    }
    Ok(out)
}

/// Eigenvalues of mode `m` of `Ω_ε` below `lambda_max` (`ε = 0` gives `Ω₀`).
pub fn mode_spectrum(gamma: f64, eps: f64, m: u32, lambda_max: f64) -> conedet::Result<Vec<f64>> {
    let p = if eps == 0.0 { build_omega0(gamma, "polyblend", &[])? } else { glued(gamma, eps)? };
    let s = Surface::closed(p);
    let mesh = auto_mesh(&s, lambda_max, 16.0);
    Ok(mode_eigenvalues(&s, m, lambda_max, mesh)?.into_iter().map(|e| e.lambda).collect())
}

#[wasm_bindgen(js_name = logDetLadder)]
pub fn log_det_ladder_js(gamma: f64, k_min: u32, k_max: u32) -> Result<Vec<f64>, JsError> {
    log_det_ladder(gamma, k_min, k_max).map_err(js)
}

#[wasm_bindgen(js_name = coneKernelRatio)]
pub fn cone_kernel_ratio_js(gamma: f64, t: f64, r_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    cone_kernel_ratio(gamma, t, r_max, n).map_err(js)
}

#[wasm_bindgen(js_name = modeSpectrum)]
pub fn mode_spectrum_js(gamma: f64, eps: f64, m: u32, lambda_max: f64) -> Result<Vec<f64>, JsError> {
    mode_spectrum(gamma, eps, m, lambda_max).map_err(js)
}
