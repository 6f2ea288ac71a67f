//! Renormalized heat trace, zeta function and determinant of the model
//! surface `Z`, and the cutoff coefficients `l_k`, `l_log`, `D_k`, `L`.
//!
//! `Z` is exactly the cone `C` of the same angle for `r ≥ 1/2`. The finite
//! part of `∫_{r≤R} H^Z(τ, z, z) dz` is computed as
//! `Tr H^{Z_R}(τ) − Tr H^{C_R}(τ) + c(γ)` with both surfaces cut off
//! (Dirichlet) at the same `R` and discretized on one mesh: the boundary
//! layers at `R` cancel up to `e^{−(R−1/2)²/τ}`, the volume terms cancel
//! exactly, and `c(γ)` is the finite part of the exact cone.

use crate::conekernel::{cone_diag, cone_trace_excess, u_coefficients};
use crate::error::{Error, Result};
use crate::geometry::{area, total_curvature, Cutoff, CutoffFamily, Profile, Warp, Z_CONIC_START};
use crate::heattrace::{self, AsymptoticFit, FitBasis, TailBoundCertificate};
use crate::laurent::Laurent;
use crate::lsq;
use crate::quad;
use crate::spectrum::{full_spectrum, Grading, MeshSpec, RadialWeight, SpectrumResult, Surface};
use crate::zetadet::{apply_inv_gamma, LaurentData};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenormConfig {
    /// Truncation radii tried in order.
    pub radii: Vec<f64>,
    /// `R ≥ 1/2 + margin·√τ`.
    pub margin: f64,
    /// `Λ = lambda_factor / τ` at the smallest `τ` served by a radius.
    pub lambda_factor: f64,
    pub points_per_wavelength: f64,
    /// Cell size required inside `r ≤ 1/2` whatever `Λ` is.
    pub core_cell: f64,
    pub max_lambda: f64,
}

impl Default for RenormConfig {
    fn default() -> Self {
        RenormConfig {
            radii: vec![0.75, 1.0, 1.5, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            margin: 8.0,
            lambda_factor: 40.0,
            points_per_wavelength: 12.0,
            core_cell: 0.008,
            max_lambda: 5e5,
        }
    }
}

impl RenormConfig {
    /// Largest `τ` a radius certifies.
    pub fn tau_max(&self, radius: f64) -> f64 {
        ((radius - Z_CONIC_START) / self.margin).powi(2).min((radius / 4.0).powi(2))
    }

    pub fn radius_for(&self, tau: f64) -> Option<f64> {
        self.radii.iter().copied().find(|&r| self.tau_max(r) >= tau)
    }
}

/// Mesh fine inside the core of `Z` and at the wavelength scale outside.
pub fn renorm_mesh(radius: f64, lambda_max: f64, cfg: &RenormConfig) -> MeshSpec {
    let wave = 2.0 * PI / lambda_max.max(1e-6).sqrt() / cfg.points_per_wavelength;
    let hx = wave;
    let h_core = wave.min(cfg.core_cell);
    let s = Z_CONIC_START;
    let a = (s * s + 0.25).sqrt() * (hx / h_core - 1.0).max(0.0);
    let grading = Grading { a, s, c: 1.0 };
    let cells = ((grading.x(radius) / hx).ceil() as usize).max(64);
    MeshSpec { grading, cells }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RenormSample {
    pub tau: f64,
    pub value: f64,
    pub uncertainty: f64,
    pub radius: f64,
    /// `τ ≤ τ_max(R)`.
    pub certified: bool,
}

/// Spectra of `Z_R` and `C_R` serving one `τ` range.
#[derive(Debug, Clone)]
pub struct RenormGroup {
    pub radius: f64,
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub z: SpectrumResult,
    pub c: SpectrumResult,
    cert_z: TailBoundCertificate,
    cert_c: TailBoundCertificate,
}

impl RenormGroup {
    pub fn build(zp: &Profile, radius: f64, tau_lo: f64, tau_hi: f64, cfg: &RenormConfig) -> Result<RenormGroup> {
        let lambda = (cfg.lambda_factor / tau_lo).min(cfg.max_lambda);
        let mesh = renorm_mesh(radius, lambda, cfg);
        let cone = crate::geometry::cone(zp.gamma)?;
        let z = full_spectrum(&Surface::truncated(zp.clone(), radius), lambda, mesh, &[])?;
        let c = full_spectrum(&Surface::truncated(cone, radius), lambda, mesh, &[])?;
        let cert_z = TailBoundCertificate::from_spectrum(&z)?;
        let cert_c = TailBoundCertificate::from_spectrum(&c)?;
        Ok(RenormGroup { radius, tau_lo, tau_hi, z, c, cert_z, cert_c })
    }

    pub fn eval(&self, tau: f64, c_gamma: f64) -> Result<RenormSample> {
        let hz = heattrace::trace_from_spectrum(&self.z, tau, &self.cert_z, None)?;
        let hc = heattrace::trace_from_spectrum(&self.c, tau, &self.cert_c, None)?;
        // discretization errors of Z_R and C_R are correlated, so the
        // estimate is built from the difference itself: the fine-mesh
        // difference is one Richardson order behind the extrapolated one
        let fine = fine_trace(&self.z, tau) - fine_trace(&self.c, tau);
        let disc = (hz.value - hc.value - fine).abs();
        let trunc = (-(self.radius - Z_CONIC_START).powi(2) / tau).exp() * hz.value.abs().max(1.0);
        Ok(RenormSample {
            tau,
            value: hz.value - hc.value + c_gamma,
            uncertainty: hz.tail_bound + hc.tail_bound + disc + trunc,
            radius: self.radius,
            certified: tau <= self.tau_hi * (1.0 + 1e-12),
        })
    }
}

fn fine_trace(spec: &SpectrumResult, tau: f64) -> f64 {
    spec.eigenvalues.iter().map(|e| e.multiplicity as f64 * (-e.lambda_fine * tau).exp()).sum()
}

/// `ᴿTr H^Z` on `[tau_min, tau_max]`, one spectral pair per radius.
#[derive(Debug, Clone)]
pub struct RenormModel {
    pub gamma: f64,
    pub c_gamma: f64,
    pub groups: Vec<RenormGroup>,
    pub z_hash: String,
    pub trivial: bool,
}

impl RenormModel {
    pub fn build(zp: &Profile, tau_min: f64, tau_max: f64, cfg: &RenormConfig) -> Result<RenormModel> {
        if !matches!(zp.warp, Warp::ZBlend { .. }) {
            return Err(Error::InvalidInput("renormalized traces need a model surface Z".into()));
        }
        if !(tau_min > 0.0 && tau_max > tau_min) {
            return Err(Error::InvalidInput(format!("bad τ range [{tau_min}, {tau_max}]")));
        }
        let gamma = zp.gamma;
        let c_gamma = cone_trace_excess(gamma)?;
        let trivial = gamma == 1.0;
        let mut groups = Vec::new();
        let mut lo = tau_min;
        for &r in &cfg.radii {
            let hi = cfg.tau_max(r);
            if hi < lo {
                continue;
            }
            let top = hi.min(tau_max);
            groups.push(RenormGroup::build(zp, r, lo, top, cfg)?);
            if hi >= tau_max {
                break;
            }
            lo = hi;
        }
        if groups.last().map_or(true, |g| g.tau_hi < tau_max) {
            return Err(Error::InvalidInput(format!(
                "τ = {tau_max} needs a radius beyond {}",
                cfg.radii.last().copied().unwrap_or(0.0)
            )));
        }
        Ok(RenormModel { gamma, c_gamma, groups, z_hash: zp.hash(), trivial })
    }

    pub fn tau_range(&self) -> (f64, f64) {
        match (self.groups.first(), self.groups.last()) {
            (Some(a), Some(b)) => (a.tau_lo, b.tau_hi),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn eval(&self, tau: f64) -> Result<RenormSample> {
        let g = self
            .groups
            .iter()
            .find(|g| tau >= g.tau_lo * (1.0 - 1e-12) && tau <= g.tau_hi * (1.0 + 1e-12))
            .or_else(|| if tau > self.tau_range().1 { self.groups.last() } else { None })
            .ok_or_else(|| Error::InvalidInput(format!("τ = {tau} outside the computed range")))?;
        g.eval(tau, self.c_gamma)
    }
}

/// `ᴿTr H^Z(τ)` at the given points.
pub fn renorm_trace(zp: &Profile, taus: &[f64], cfg: &RenormConfig) -> Result<Vec<RenormSample>> {
    let lo = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = taus.iter().copied().fold(0.0, f64::max);
    let model = RenormModel::build(zp, lo, hi.max(lo * 1.0001), cfg)?;
    taus.iter().map(|&t| model.eval(t)).collect()
}

/// Split-radius form
/// `∫_{r<r₀} H^Z + ∫_{r≥r₀} (H^Z − H^C) + FP∫_{r≥r₀} H^C`.
///
/// Diagonal integrals of `H^Z` come from eigenvector weights on `Z_R` with
/// sharp cuts placed on shared mesh faces; cone integrals are quadratures
/// of the exact kernel. `H^Z − H^C` is dropped beyond the face nearest to
/// `R − margin·√τ/2`, where both are exponentially close.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitTrace {
    pub tau: f64,
    pub r0: f64,
    pub rho: f64,
    pub inner: f64,
    pub middle: f64,
    pub outer_finite_part: f64,
    pub value: f64,
    pub uncertainty: f64,
}

pub fn renorm_trace_split(zp: &Profile, tau: f64, r0s: &[f64], radius: f64, cfg: &RenormConfig) -> Result<Vec<SplitTrace>> {
    let gamma = zp.gamma;
    let lambda = (cfg.lambda_factor / tau).min(cfg.max_lambda);
    let mesh = renorm_mesh(radius, lambda, cfg);
    let coarse = crate::spectrum::Mesh::new(mesh.grading, radius, mesh.cells);
    let snap = |r: f64| {
        *coarse
            .r_face
            .iter()
            .min_by(|a, b| (*a - r).abs().partial_cmp(&(*b - r).abs()).unwrap())
            .unwrap()
    };
    let rho = snap(radius - 0.5 * cfg.margin * tau.sqrt());
    if rho <= Z_CONIC_START + 4.0 * tau.sqrt() {
        return Err(Error::InvalidInput(format!("radius {radius} too small for τ = {tau}")));
    }
    let faces: Vec<f64> = r0s.iter().map(|&r| snap(r)).collect();
    let mut weights: Vec<RadialWeight> = Vec::new();
    for &f in &faces {
        weights.push(Arc::new(move |r: f64| if r < f { 1.0 } else { 0.0 }));
        weights.push(Arc::new(move |r: f64| if r >= f && r < rho { 1.0 } else { 0.0 }));
    }
    let spec = full_spectrum(&Surface::truncated(zp.clone(), radius), lambda, mesh, &weights)?;
    let cert = TailBoundCertificate::from_spectrum(&spec)?;
    let c = cone_trace_excess(gamma)?;
    let cone_int = |a: f64, b: f64| -> Result<f64> {
        let g = |r: f64| cone_diag(tau, r, gamma).map(|v| v * 2.0 * PI * gamma * r).unwrap_or(f64::NAN);
        let mut br = vec![a];
        let mut x = a;
        let step = 2.0 * tau.sqrt();
        while x + step < b {
            x += step;
            br.push(x);
        }
        br.push(b);
        Ok(quad::integrate_breaks(&g, &br, 1e-12 * (1.0 + b * b / tau))?.value)
    };
    let mut out = Vec::new();
    for (i, &f) in faces.iter().enumerate() {
        let wi = heattrace::weighted_trace(&spec, 2 * i, tau, &cert)?;
        let wm = heattrace::weighted_trace(&spec, 2 * i + 1, tau, &cert)?;
        let inner = wi.value;
        let middle = wm.value - cone_int(f, rho)?;
        let outer = c - cone_int(0.0, f)?;
        out.push(SplitTrace {
            tau,
            r0: f,
            rho,
            inner,
            middle,
            outer_finite_part: outer,
            value: inner + middle + outer,
            uncertainty: wi.disc_error + wm.disc_error + wi.tail_bound + wm.tail_bound,
        });
    }
    Ok(out)
}

/// `∫_Z χ₁(εz) H^Z(τ, z, z) dz` for each `ε`, the literal cutoff
/// regularization, with the predicted divergent part `D₀/(ε²τ)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CutoffTrace {
    pub epsilon: f64,
    pub value: f64,
    pub divergent: f64,
    /// `value − divergent`, which tends to `ᴿTr H^Z(τ)`.
    pub finite: f64,
    pub uncertainty: f64,
}

pub fn cutoff_regularized_trace(zp: &Profile, tau: f64, epsilons: &[f64], cfg: &RenormConfig) -> Result<Vec<CutoffTrace>> {
    let cut = CutoffFamily;
    let coeffs = expansion_coefficients(&cut, zp.gamma, 2, 0.0)?;
    let (_, top) = cut.transition(Cutoff::Chi1);
    let e_min = epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let radius = top / e_min + cfg.margin * tau.sqrt();
    let lambda = (cfg.lambda_factor / tau).min(cfg.max_lambda);
    let mesh = renorm_mesh(radius, lambda, cfg);
    let weights: Vec<RadialWeight> = epsilons
        .iter()
        .map(|&e| -> RadialWeight { Arc::new(move |r: f64| CutoffFamily.value(Cutoff::Chi1, e * r)) })
        .collect();
    let spec = full_spectrum(&Surface::truncated(zp.clone(), radius), lambda, mesh, &weights)?;
    let cert = TailBoundCertificate::from_spectrum(&spec)?;
    epsilons
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let w = heattrace::weighted_trace(&spec, i, tau, &cert)?;
            let divergent = coeffs.d_k[0] / (e * e * tau) + coeffs.d_k[1] / (e * tau.sqrt());
            Ok(CutoffTrace {
                epsilon: e,
                value: w.value,
                divergent,
                finite: w.value - divergent,
                uncertainty: w.disc_error + w.tail_bound,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients {
    pub n: usize,
    /// `L = ∫_N u_n`.
    pub big_l: f64,
    /// `D_k = l_k/(n−k) · ∫_N u_k`, `k < n`.
    pub d_k: Vec<f64>,
    /// `l_k = −∫ χ₁′(r) r^{n−k} dr`.
    pub l_k: Vec<f64>,
    pub l_log: f64,
    pub f_infty: f64,
}

pub fn expansion_coefficients(cut: &CutoffFamily, gamma: f64, n: usize, f_infty: f64) -> Result<ExpansionCoefficients> {
    if n != 2 {
        return Err(Error::Unsupported(format!("expansion coefficients for n = {n}")));
    }
    let (lo, hi) = cut.transition(Cutoff::Chi1);
    let d1 = |r: f64| cut.eval(Cutoff::Chi1, r).1;
    let mut l_k = Vec::new();
    let mut d_k = Vec::new();
    let cross = 2.0 * PI * gamma;
    for k in 0..n {
        let p = (n - k) as i32;
        let l = -quad::integrate(&|r: f64| d1(r) * r.powi(p), lo, hi, 1e-14)?.value;
        d_k.push(l / (n - k) as f64 * cross * u_coefficients(gamma, k)?);
        l_k.push(l);
    }
    let l_log = -quad::integrate(&|r: f64| d1(r) * r.ln(), lo, hi, 1e-14)?.value;
    let big_l = cross * u_coefficients(gamma, n)?;
    Ok(ExpansionCoefficients { n, big_l, d_k, l_k, l_log, f_infty })
}

/// `(1/4π)·FP ∫ dA` over `Z`: the area with `γπr²` removed.
pub fn renormalized_area(zp: &Profile) -> Result<f64> {
    let r = Z_CONIC_START;
    Ok(area(zp, Some(r))?.value - PI * zp.gamma * r * r)
}

/// `(1/12π) ∫_Z K dA`.
pub fn curvature_coefficient(zp: &Profile) -> Result<f64> {
    Ok(total_curvature(zp, Some(Z_CONIC_START))? / (12.0 * PI))
}

/// Large-τ fit `f_∞ + Σ_j b_j τ^{−p_j}` (plus `−L log √τ` when asked).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LargeTauFit {
    pub f_infty: f64,
    pub f_infty_sigma: f64,
    pub powers: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub log_coeff: Option<f64>,
    pub window: (f64, f64),
    pub max_residual: f64,
    /// Spread of `f_∞` over refits on shifted windows and bases.
    pub stability: f64,
}

impl LargeTauFit {
    pub fn eval(&self, tau: f64) -> f64 {
        let mut v = self.f_infty;
        for (p, c) in self.powers.iter().zip(&self.coeffs) {
            v += c * tau.powf(-p);
        }
        if let Some(l) = self.log_coeff {
            v -= l * tau.sqrt().ln();
        }
        v
    }
}

fn large_fit_once(pts: &[RenormSample], powers: &[f64], with_log: bool) -> Result<(lsq::LsqFit, f64)> {
    let design: Vec<Vec<f64>> = pts
        .iter()
        .map(|s| {
            let mut row = vec![1.0];
            row.extend(powers.iter().map(|p| s.tau.powf(-p)));
            if with_log {
                row.push(-s.tau.sqrt().ln());
            }
            row
        })
        .collect();
    let y: Vec<f64> = pts.iter().map(|s| s.value).collect();
    let w: Vec<f64> = pts.iter().map(|s| 1.0 / s.uncertainty.max(1e-12)).collect();
    let f = lsq::fit(&design, &y, Some(&w))?;
    let v0 = f.coeffs[0];
    Ok((f, v0))
}

pub fn fit_large_tau(pts: &[RenormSample], powers: &[f64], with_log: bool) -> Result<LargeTauFit> {
    if pts.len() < powers.len() + 3 {
        return Err(Error::Fit("too few large-τ samples".into()));
    }
    let (f, f_inf) = large_fit_once(pts, powers, with_log)?;
    let mut stability = 0.0f64;
    let cut = pts.len() / 5;
    for sub in [&pts[cut..], &pts[..pts.len() - cut]] {
        if let Ok((_, v)) = large_fit_once(sub, powers, with_log) {
            stability = stability.max((v - f_inf).abs());
        }
    }
    if powers.len() > 1 {
        if let Ok((_, v)) = large_fit_once(pts, &powers[..powers.len() - 1], with_log) {
            stability = stability.max((v - f_inf).abs());
        }
    }
    let np = powers.len();
    Ok(LargeTauFit {
        f_infty: f_inf,
        f_infty_sigma: f.sigma[0],
        powers: powers.to_vec(),
        coeffs: f.coeffs[1..=np].to_vec(),
        log_coeff: if with_log { Some(f.coeffs[np + 1]) } else { None },
        window: (pts[0].tau, pts[pts.len() - 1].tau),
        max_residual: f.max_abs_residual,
        stability,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenormZetaConfig {
    pub tau_min: f64,
    /// Small-τ fit window `[tau_min, small_max]`.
    pub small_max: f64,
    pub small_basis: FitBasis,
    /// Large-τ fit window.
    pub large_window: (f64, f64),
    pub large_powers: Vec<f64>,
    pub samples: usize,
    /// Quadrature panels per decade on `[small_max, large_window.0]`.
    pub panels_per_decade: usize,
}

impl Default for RenormZetaConfig {
    fn default() -> Self {
        RenormZetaConfig {
            tau_min: 1e-4,
            small_max: 1e-2,
            small_basis: FitBasis { n: 2, k_max: 8, include_odd: true, allow_log: false },
            large_window: (25.0, 400.0),
            large_powers: vec![1.0, 2.0],
            samples: 40,
            panels_per_decade: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenormZeta {
    /// Coefficient of `s^{-1}`; `−L/4`.
    pub pole: f64,
    pub rzeta0: f64,
    pub rzeta_prime0: f64,
    pub log_rdet: f64,
    pub rzeta0_uncertainty: f64,
    pub rzeta_prime0_uncertainty: f64,
    pub small_fit: Option<AsymptoticFit>,
    pub large_fit: Option<LargeTauFit>,
    pub middle_integral: f64,
}

impl RenormZeta {
    pub fn trivial() -> RenormZeta {
        RenormZeta {
            pole: 0.0,
            rzeta0: 0.0,
            rzeta_prime0: 0.0,
            log_rdet: 0.0,
            rzeta0_uncertainty: 0.0,
            rzeta_prime0_uncertainty: 0.0,
            small_fit: None,
            large_fit: None,
            middle_integral: 0.0,
        }
    }
}

/// Small-τ samples and fit of `ᴿTr`.
pub fn fit_small_tau(model: &RenormModel, cfg: &RenormZetaConfig) -> Result<AsymptoticFit> {
    let pts: Vec<(f64, f64, f64)> = heattrace::log_grid(cfg.tau_min, cfg.small_max, cfg.samples)
        .into_iter()
        .map(|t| model.eval(t).map(|s| (t, s.value, s.uncertainty)))
        .collect::<Result<_>>()?;
    heattrace::fit_points(&pts, cfg.small_basis, true)
}

pub fn large_tau_samples(model: &RenormModel, cfg: &RenormZetaConfig) -> Result<Vec<RenormSample>> {
    heattrace::log_grid(cfg.large_window.0, cfg.large_window.1, cfg.samples)
        .into_iter()
        .map(|t| model.eval(t))
        .collect()
}

/// Laurent data at `s = 0` of `Γ(s)^{-1} ∫₀^∞ τ^{s−1} ᴿTr(τ) dτ`.
pub fn renorm_zeta(model: &RenormModel, cfg: &RenormZetaConfig) -> Result<RenormZeta> {
    let small = fit_small_tau(model, cfg)?;
    let large_pts = large_tau_samples(model, cfg)?;
    let large = fit_large_tau(&large_pts, &cfg.large_powers, false)?;
    let (d, mid, mid_err) = assemble_renorm(model, &small, &large, cfg.small_max, cfg.large_window.0, cfg.panels_per_decade)?;

    // spread over alternative fits
    let mut spread0 = 0.0f64;
    let mut spread1 = 0.0f64;
    for kmax in [cfg.small_basis.k_max - 2, cfg.small_basis.k_max + 2] {
        let b = FitBasis { k_max: kmax, ..cfg.small_basis };
        if let Ok(f) = fit_small_tau(model, &RenormZetaConfig { small_basis: b, ..cfg.clone() }) {
            let (a, _, _) = assemble_renorm(model, &f, &large, cfg.small_max, cfg.large_window.0, cfg.panels_per_decade)?;
            spread0 = spread0.max((a.value - d.value).abs());
            spread1 = spread1.max((a.derivative - d.derivative).abs());
        }
    }
    if cfg.large_powers.len() > 1 {
        let lf = fit_large_tau(&large_pts, &cfg.large_powers[..cfg.large_powers.len() - 1], false)?;
        let (a, _, _) = assemble_renorm(model, &small, &lf, cfg.small_max, cfg.large_window.0, cfg.panels_per_decade)?;
        spread0 = spread0.max((a.value - d.value).abs());
        spread1 = spread1.max((a.derivative - d.derivative).abs());
    }
    let f_unc = large.f_infty_sigma + large.stability;
    let a2_unc = small.sigma(2) + small.stability(2);
    Ok(RenormZeta {
        pole: d.pole,
        rzeta0: d.value,
        rzeta_prime0: d.derivative,
        log_rdet: -d.derivative,
        rzeta0_uncertainty: spread0 + f_unc + a2_unc,
        rzeta_prime0_uncertainty: spread1 + mid_err + f_unc * (1.0 + cfg.large_window.0.ln().abs()) + a2_unc,
        small_fit: Some(small),
        large_fit: Some(large),
        middle_integral: mid,
    })
}

/// Small fit on `(0, τ_a)`, data on `(τ_a, τ_c)`, large fit on `(τ_c, ∞)`.
pub fn assemble_renorm(
    model: &RenormModel,
    small: &AsymptoticFit,
    large: &LargeTauFit,
    tau_a: f64,
    tau_c: f64,
    panels_per_decade: usize,
) -> Result<(LaurentData, f64, f64)> {
    let mut inner = crate::zetadet::fit_laurent(small, tau_a);
    inner = inner + Laurent::mellin_power_upper(0.0, tau_c).scale(large.f_infty);
    for (p, c) in large.powers.iter().zip(&large.coeffs) {
        inner = inner + Laurent::mellin_power_upper(-p, tau_c).scale(*c);
    }
    if let Some(l) = large.log_coeff {
        // −L log√τ = −(L/2) log τ
        inner = inner + Laurent::mellin_log_upper(tau_c).scale(-0.5 * l);
    }
    let decades = (tau_c / tau_a).log10();
    let panels = ((decades * panels_per_decade as f64).ceil() as usize).max(1);
    let mut breaks: Vec<f64> = (0..=panels).map(|i| tau_a * (tau_c / tau_a).powf(i as f64 / panels as f64)).collect();
    // every group boundary is a kink in the error model
    for g in &model.groups {
        if g.tau_hi > tau_a && g.tau_hi < tau_c {
            breaks.push(g.tau_hi);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (xs, ws) = quad::composite_gl(&breaks, 12);
    let mut mid = 0.0;
    let mut err = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        let s = model.eval(*x)?;
        mid += w * s.value / x;
        err += w * s.uncertainty / x;
    }
    let (xs6, ws6) = quad::composite_gl(&breaks, 6);
    let mut mid6 = 0.0;
    for (x, w) in xs6.iter().zip(&ws6) {
        mid6 += w * model.eval(*x)?.value / x;
    }
    err += (mid - mid6).abs();
    inner = inner + Laurent::monomial(mid, 0);
    Ok((apply_inv_gamma(inner), mid, err))
}
