//! ε-sweeps of `log det Δ_{Ω_ε}` and the predicted small-ε expansion
//! `½L (log ε)² − 2·ᴿζ_Z(0) log ε + log det Δ_{Ω₀} + log ᴿdet Δ_Z`.
//!
//! The measured side uses the conformal determinant of each smooth `Ω_ε`;
//! the predicted side is assembled from the spectral determinant of `Ω₀`
//! and the renormalized zeta function of `Z`, which share no code path
//! with the measurement.

use crate::error::{invalid, Error, Result};
use crate::geometry::{self, Cutoff, CutoffFamily, GluedSurface, Profile};
use crate::heattrace::{self, AsymptoticFit, FitBasis, HeatTraceSample, HtConvTable, TailBoundCertificate};
use crate::lsq;
use crate::renorm::{self, ExpansionCoefficients, RenormConfig, RenormModel, RenormZeta, RenormZetaConfig};
use crate::spectrum::{self, ConvergenceReport, MeshSpec, RadialWeight, SpectrumResult, Surface};
use crate::zetadet::{self, MellinConfig, ZetaResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub gamma: f64,
    pub omega0_cap: String,
    pub omega0_params: Vec<f64>,
    pub z_cap: String,
    pub z_params: Vec<f64>,
    /// Descending, inside `(0, 1/2)`.
    pub epsilons: Vec<f64>,
    pub omega0_lambda: f64,
    pub omega0_points_per_wavelength: f64,
    pub mellin: MellinConfig,
    pub renorm: RenormConfig,
    pub renorm_zeta: RenormZetaConfig,
    /// Rows whose uncertainty exceeds this are excluded from the fit.
    pub row_budget: f64,
    /// Also fit `c₃ ε^δ` with free `δ`.
    pub fit_remainder: bool,
    /// Relative agreement threshold.
    pub rel_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            gamma: 0.7,
            omega0_cap: "polyblend".into(),
            omega0_params: vec![],
            z_cap: "polyblend".into(),
            z_params: vec![],
            epsilons: (3..=7).map(|k| 2f64.powi(-k)).collect(),
            omega0_lambda: 10_000.0,
            omega0_points_per_wavelength: 12.0,
            mellin: MellinConfig::default(),
            renorm: RenormConfig::default(),
            renorm_zeta: RenormZetaConfig::default(),
            row_budget: 1e-6,
            fit_remainder: true,
            rel_tol: 0.05,
        }
    }
}

impl SweepConfig {
    /// The `Z = ℝ²` family: `γ = 1`, where every `Ω_ε` equals `Ω₀`.
    pub fn trivial() -> SweepConfig {
        SweepConfig {
            gamma: 1.0,
            omega0_lambda: 12_000.0,
            renorm_zeta: RenormZetaConfig { tau_min: 1e-3, small_max: 0.05, ..Default::default() },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return invalid("empty ε ladder");
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
            return invalid(format!("ε must lie in (0, 1/2): {:?}", self.epsilons));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return invalid("ε ladder must be strictly descending");
        }
        if !(self.row_budget > 0.0 && self.rel_tol > 0.0 && self.omega0_lambda > 0.0) {
            return invalid("budgets and tolerances must be positive");
        }
        Ok(())
    }

    pub fn omega0(&self) -> Result<Profile> {
        geometry::build_omega0(self.gamma, &self.omega0_cap, &self.omega0_params)
    }

    pub fn z(&self) -> Result<Profile> {
        geometry::build_z(self.gamma, &self.z_cap, &self.z_params)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub log_epsilon: f64,
    pub log_det: f64,
    pub uncertainty: f64,
    pub area: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExcludedRow {
    pub epsilon: f64,
    pub reason: String,
}

/// `log det Δ_{Ω_ε}` for every ε in the ladder; rows over budget are
/// reported separately.
pub fn measure_rows(cfg: &SweepConfig) -> Result<(Vec<SweepRow>, Vec<ExcludedRow>)> {
    cfg.validate()?;
    let (o, z) = (cfg.omega0()?, cfg.z()?);
    let out: Vec<Result<SweepRow>> = cfg
        .epsilons
        .par_iter()
        .map(|&eps| {
            let g = geometry::glue(&o, &z, eps)?;
            let d = zetadet::conformal_log_det(&g.profile)?;
            Ok(SweepRow { epsilon: eps, log_epsilon: eps.ln(), log_det: d.log_det, uncertainty: d.quad_error, area: d.area })
        })
        .collect();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for (r, &eps) in out.into_iter().zip(&cfg.epsilons) {
        match r {
            Ok(row) if row.uncertainty <= cfg.row_budget => rows.push(row),
            Ok(row) => excluded.push(ExcludedRow {
                epsilon: eps,
                reason: format!("uncertainty {:.2e} exceeds budget {:.2e}", row.uncertainty, cfg.row_budget),
            }),
            Err(e) => excluded.push(ExcludedRow { epsilon: eps, reason: e.to_string() }),
        }
    }
    Ok((rows, excluded))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFit {
    /// `(c₂, c₁, c₀)`.
    pub coeffs: [f64; 3],
    /// Residual-scaled σ plus the drop-largest-ε change.
    pub sigma: [f64; 3],
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// `|Δ(c₂, c₁, c₀)|` when the largest ε is dropped.
    pub drop_change: [f64; 3],
    pub remainder: Option<RemainderFit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemainderFit {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    pub c3: f64,
    pub delta: f64,
    pub c2_pinned: bool,
    pub max_residual: f64,
}

fn quad_row(x: f64) -> Vec<f64> {
    vec![x * x, x, 1.0]
}

fn quad_fit(rows: &[SweepRow]) -> Result<lsq::LsqFit> {
    let d: Vec<Vec<f64>> = rows.iter().map(|r| quad_row(r.log_epsilon)).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.log_det).collect();
    // every row has quadrature-level error, so the remainder dominates
    // the weights and they are taken equal
    lsq::fit(&d, &y, None)
}

/// `c₂(log ε)² + c₁ log ε + c₀` by least squares, with the optional
/// `c₃ε^δ` remainder fitted on a grid in `δ`. Without a sixth row the
/// remainder fit pins `c₂` to `c2_pin`.
pub fn fit_model(rows: &[SweepRow], fit_remainder: bool, c2_pin: f64) -> Result<ModelFit> {
    if rows.len() < 4 {
        return Err(Error::Fit(format!("{} rows for a three-parameter model", rows.len())));
    }
    let main = quad_fit(rows)?;
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| b.epsilon.partial_cmp(&a.epsilon).unwrap());
    let dropped = quad_fit(&sorted[1..])?;
    let mut coeffs = [0.0; 3];
    let mut sigma = [0.0; 3];
    let mut drop_change = [0.0; 3];
    for i in 0..3 {
        coeffs[i] = main.coeffs[i];
        drop_change[i] = (dropped.coeffs[i] - main.coeffs[i]).abs();
        sigma[i] = main.sigma[i] + drop_change[i];
    }
    let residuals: Vec<f64> = rows
        .iter()
        .map(|r| r.log_det - quad_row(r.log_epsilon).iter().zip(&coeffs).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let max_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let remainder = if fit_remainder { Some(fit_with_remainder(rows, c2_pin)?) } else { None };
    Ok(ModelFit { coeffs, sigma, residuals, max_residual, drop_change, remainder })
}

fn fit_with_remainder(rows: &[SweepRow], c2_pin: f64) -> Result<RemainderFit> {
    let free = rows.len() >= 6;
    let solve = |delta: f64| -> Result<(Vec<f64>, f64)> {
        let d: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let x = r.log_epsilon;
                let mut v = if free { vec![x * x] } else { vec![] };
                v.extend([x, 1.0, r.epsilon.powf(delta)]);
                v
            })
            .collect();
        let y: Vec<f64> =
            rows.iter().map(|r| r.log_det - if free { 0.0 } else { c2_pin * r.log_epsilon.powi(2) }).collect();
        let f = lsq::fit(&d, &y, None)?;
        Ok((f.coeffs, f.max_abs_residual))
    };
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for i in 0..=350 {
        let delta = 0.5 + 0.01 * i as f64;
        let (c, res) = solve(delta)?;
        if best.as_ref().map_or(true, |b| res < b.2) {
            best = Some((delta, c, res));
        }
    }
    let (delta, c, res) = best.unwrap();
    let (c2, rest) = if free { (c[0], &c[1..]) } else { (c2_pin, &c[..]) };
    Ok(RemainderFit { c2, c1: rest[0], c0: rest[1], c3: rest[2], delta, c2_pinned: !free, max_residual: res })
}

/// Spectral data of `Ω₀` entering the prediction and the coefficient
/// identities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Omega0Data {
    pub zeta: ZetaResult,
    /// Fit of `Σ e^{−λt}⟨χ₂φ, φ⟩`: the coefficients `ã_k`.
    pub weighted_fit: AsymptoticFit,
    /// Fit of the full trace with a free `K log t`.
    pub log_fit: AsymptoticFit,
    /// `(1/12π)∫K dA` over the smooth part.
    pub smooth_a2: f64,
    pub area: f64,
    /// `(1/4π)∫χ₂ dA`.
    pub chi2_area: f64,
}

impl Omega0Data {
    pub fn compute(p: &Profile, lambda_max: f64, points_per_wavelength: f64, mellin: &MellinConfig) -> Result<Self> {
        let s = Surface::closed(p.clone());
        let cut = CutoffFamily;
        let chi2: RadialWeight = Arc::new(move |r| cut.value(Cutoff::Chi2, r));
        let spec = spectrum::full_spectrum(&s, lambda_max, spectrum::auto_mesh(&s, lambda_max, points_per_wavelength), &[chi2])?;
        Self::from_spectrum(p, &spec, mellin)
    }

    /// `spec` must carry the `χ₂` weight first.
    pub fn from_spectrum(p: &Profile, spec: &SpectrumResult, mellin: &MellinConfig) -> Result<Self> {
        let zeta = zetadet::det_laplacian(spec, mellin)?;
        let cert = TailBoundCertificate::from_spectrum(spec)?;
        let (t_lo, t_hi) = zeta.diagnostics.fit_window;
        let ts = heattrace::log_grid(t_lo, t_hi, mellin.samples);
        let weighted: Vec<HeatTraceSample> =
            ts.iter().map(|&t| heattrace::weighted_trace(spec, 0, t, &cert)).collect::<Result<_>>()?;
        let weighted_fit = heattrace::fit_short_time(&weighted, mellin.basis)?;
        let plain = zetadet::trace_samples(spec, &cert, t_lo, t_hi, mellin.samples)?;
        let log_fit = heattrace::fit_short_time(&plain, FitBasis { allow_log: true, ..mellin.basis })?;
        let smooth_a2 = geometry::total_curvature(p, None)? / (12.0 * PI);
        let cut = CutoffFamily;
        let chi2_area = crate::quad::integrate(&|r: f64| cut.value(Cutoff::Chi2, r) * p.f(r), 0.0, p.r_max(), 1e-13)?.value / 2.0;
        Ok(Omega0Data { zeta, weighted_fit, log_fit, smooth_a2, area: spec.area, chi2_area })
    }

    /// `a₂ − (1/12π)∫K`: the cone's contribution to the `t⁰` coefficient.
    pub fn cone_excess(&self) -> (f64, f64) {
        (self.zeta.diagnostics.a2 - self.smooth_a2, self.zeta.zeta0_uncertainty)
    }

    pub fn k_log(&self) -> (f64, f64) {
        self.log_fit.k_log
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenormData {
    pub zeta: RenormZeta,
    pub coefficients: ExpansionCoefficients,
}

impl RenormData {
    pub fn compute(z: &Profile, cfg: &RenormConfig, zc: &RenormZetaConfig) -> Result<Self> {
        let model = RenormModel::build(z, zc.tau_min, zc.large_window.1, cfg)?;
        let zeta = renorm::renorm_zeta(&model, zc)?;
        let f_inf = zeta.large_fit.as_ref().map_or(0.0, |f| f.f_infty);
        let coefficients = renorm::expansion_coefficients(&CutoffFamily, z.gamma, 2, f_inf)?;
        Ok(RenormData { zeta, coefficients })
    }

    fn f_infty_sigma(&self) -> f64 {
        self.zeta.large_fit.as_ref().map_or(0.0, |f| f.f_infty_sigma + f.stability)
    }
}

/// A value with its propagated one-sided bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Identity {
    pub k: usize,
    pub residual: f64,
    pub uncertainty: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    /// `½L`.
    pub c2: Estimate,
    /// `−2·ᴿζ_Z(0)`.
    pub c1: Estimate,
    /// `log det Δ_{Ω₀} + log ᴿdet Δ_Z`.
    pub c0: Estimate,
    /// `−a_k + ã_k + D_k`, `k < 2`.
    pub lower_identities: Vec<Identity>,
    /// `−a₂ + ã₂ − L·l_log + f_∞`.
    pub top_identity: Identity,
    pub k_log: Estimate,
}

fn identity(k: usize, residual: f64, uncertainty: f64) -> Identity {
    // floor for identities that hold exactly in floating point
    let u = uncertainty.max(1e-12 * (1.0 + residual.abs()));
    Identity { k, residual, uncertainty: u, holds: residual.abs() <= 2.0 * u }
}

pub fn prediction(omega0: &Omega0Data, renorm: &RenormData) -> Result<Prediction> {
    let z = &omega0.zeta;
    let rz = &renorm.zeta;
    let co = &renorm.coefficients;
    if co.d_k.len() < 2 || co.l_k.len() < 2 {
        return invalid("expansion coefficients are incomplete");
    }
    let w = &omega0.weighted_fit;
    let a0_sigma = omega0.log_fit.sigma(0) + omega0.log_fit.stability(0);
    // a₀ is the area term exactly; the fit supplies only its error bar
    let lower = vec![
        identity(0, -z.diagnostics.a0 + w.a(0) + co.d_k[0], a0_sigma + w.sigma(0) + w.stability(0)),
        identity(1, co.d_k[1], 0.0),
    ];
    let top_u = z.zeta0_uncertainty + w.sigma(2) + w.stability(2) + renorm.f_infty_sigma();
    let top = identity(2, -z.diagnostics.a2 + w.a(2) - co.big_l * co.l_log + co.f_infty, top_u);
    Ok(Prediction {
        c2: Estimate { value: 0.5 * co.big_l, uncertainty: 0.0 },
        c1: Estimate { value: -2.0 * rz.rzeta0, uncertainty: 2.0 * rz.rzeta0_uncertainty },
        c0: Estimate {
            value: z.log_det + rz.log_rdet,
            uncertainty: z.zeta_prime0_uncertainty + rz.rzeta_prime0_uncertainty,
        },
        lower_identities: lower,
        top_identity: top,
        k_log: Estimate { value: omega0.log_fit.k_log.0, uncertainty: omega0.log_fit.k_log.1 },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub fitted: f64,
    pub fitted_sigma: f64,
    pub predicted: f64,
    pub predicted_sigma: f64,
    pub difference: f64,
    /// `max(rel_tol·|predicted|, 2·(σ_fit + σ_pred))`, or an absolute bound.
    pub allowed: f64,
    pub agrees: bool,
}

fn compare(name: &str, fit: (f64, f64), pred: Estimate, rel_tol: f64, abs_floor: f64) -> Comparison {
    let difference = fit.0 - pred.value;
    let allowed = (rel_tol * pred.value.abs()).max(2.0 * (fit.1 + pred.uncertainty)).max(abs_floor);
    Comparison {
        name: name.into(),
        fitted: fit.0,
        fitted_sigma: fit.1,
        predicted: pred.value,
        predicted_sigma: pred.uncertainty,
        difference,
        allowed,
        agrees: difference.abs() <= allowed,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    pub excluded: Vec<ExcludedRow>,
    pub fit: ModelFit,
    pub prediction: Prediction,
    pub omega0: Omega0Data,
    pub renorm: RenormData,
    pub comparisons: Vec<Comparison>,
    /// Measured minus predicted, per row.
    pub deviations: Vec<(f64, f64)>,
    pub agrees: bool,
}

/// Measure, predict, fit and compare.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let (rows, excluded) = measure_rows(cfg)?;
    let o = cfg.omega0()?;
    let omega0 = Omega0Data::compute(&o, cfg.omega0_lambda, cfg.omega0_points_per_wavelength, &cfg.mellin)?;
    let renorm = RenormData::compute(&cfg.z()?, &cfg.renorm, &cfg.renorm_zeta)?;
    finish_sweep(cfg, rows, excluded, omega0, renorm)
}

/// Fit and comparison once every upstream stage is available.
pub fn finish_sweep(
    cfg: &SweepConfig,
    rows: Vec<SweepRow>,
    excluded: Vec<ExcludedRow>,
    omega0: Omega0Data,
    renorm: RenormData,
) -> Result<SweepResult> {
    let pred = prediction(&omega0, &renorm)?;
    let fit = fit_model(&rows, cfg.fit_remainder, pred.c2.value)?;
    let comparisons = vec![
        // |c₂| < 0.01 is the headline bound on the quadratic term
        compare("c2", (fit.coeffs[0], fit.sigma[0]), pred.c2, 0.0, 0.01),
        compare("c1", (fit.coeffs[1], fit.sigma[1]), pred.c1, cfg.rel_tol, 0.0),
        compare("c0", (fit.coeffs[2], fit.sigma[2]), pred.c0, cfg.rel_tol, 0.0),
    ];
    let deviations = rows
        .iter()
        .map(|r| {
            let x = r.log_epsilon;
            (r.epsilon, r.log_det - (pred.c2.value * x * x + pred.c1.value * x + pred.c0.value))
        })
        .collect();
    let agrees = comparisons.iter().all(|c| c.agrees);
    Ok(SweepResult {
        config: cfg.clone(),
        rows,
        excluded,
        fit,
        prediction: pred,
        omega0,
        renorm,
        comparisons,
        deviations,
        agrees,
    })
}

/// Spectral and heat-trace convergence of the family on one common mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyConfig {
    pub lambda_max: f64,
    pub points_per_wavelength: f64,
    /// Eigenvalue indices `1..=i_max`, counted with multiplicity.
    pub i_max: usize,
    pub t_conv: f64,
    pub decay_times: Vec<f64>,
    /// `C = margin·(Tr₀(1) − 1)·e^{λ₀₁/2}`.
    pub decay_margin: f64,
    pub gap_factor: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            lambda_max: 60.0,
            points_per_wavelength: 8.0,
            i_max: 10,
            t_conv: 1.0,
            decay_times: heattrace::log_grid(1.0, 10.0, 10),
            decay_margin: 2.0,
            gap_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayRow {
    pub epsilon: f64,
    /// `max_t (Tr_ε(t) − 1)·e^{λ₀₁t/2}/C`.
    pub worst_ratio: f64,
    pub worst_t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyReport {
    pub epsilons: Vec<f64>,
    pub cells: usize,
    pub spectral: ConvergenceReport,
    /// Indices `1..=i_max` decrease along the ladder.
    pub gaps_decrease: bool,
    /// Smallest-ε gap within `gap_factor` × its discretization error.
    pub final_gap_ok: bool,
    pub trace: HtConvTable,
    pub trace_decreases: bool,
    pub lambda01: f64,
    pub decay_constant: f64,
    pub decay: Vec<DecayRow>,
    pub decay_ok: bool,
}

pub fn family_convergence(sweep: &SweepConfig, cfg: &FamilyConfig) -> Result<FamilyReport> {
    sweep.validate()?;
    let (o, z) = (sweep.omega0()?, sweep.z()?);
    let glued: Vec<GluedSurface> = sweep.epsilons.iter().map(|&e| geometry::glue(&o, &z, e)).collect::<Result<_>>()?;
    // the mesh that resolves the smallest ε serves every member
    let finest = Surface::closed(glued.last().unwrap().profile.clone());
    let mesh: MeshSpec = spectrum::auto_mesh(&finest, cfg.lambda_max, cfg.points_per_wavelength);
    let s0 = spectrum::full_spectrum(&Surface::closed(o), cfg.lambda_max, mesh, &[])?;
    let family: Vec<(f64, SpectrumResult)> = glued
        .iter()
        .map(|g| Ok((g.epsilon, spectrum::full_spectrum(&Surface::closed(g.profile.clone()), cfg.lambda_max, mesh, &[])?)))
        .collect::<Result<_>>()?;
    let spectral = spectrum::spectral_convergence_report(&family, &s0, cfg.i_max)?;
    let gaps_decrease = spectral.rows.iter().skip(1).all(|r| r.decreasing);
    let final_gap_ok = spectral.rows.iter().skip(1).all(|r| {
        let (g, e) = (*r.gaps.last().unwrap(), *r.errors.last().unwrap());
        g <= cfg.gap_factor * e
    });

    let samples = |s: &SpectrumResult, eps: f64, ts: &[f64]| -> Result<Vec<HeatTraceSample>> {
        let cert = TailBoundCertificate::from_spectrum(s)?;
        ts.iter()
            .map(|&t| heattrace::trace_from_spectrum(s, t, &cert, None).map(|x| HeatTraceSample { epsilon: eps, ..x }))
            .collect()
    };
    let mut ts = cfg.decay_times.clone();
    ts.push(cfg.t_conv);
    let base = samples(&s0, 0.0, &ts)?;
    let fam_samples: Vec<Vec<HeatTraceSample>> =
        family.iter().map(|(e, s)| samples(s, *e, &ts)).collect::<Result<_>>()?;
    let trace = heattrace::htconv_check(&fam_samples, &base, &[cfg.t_conv])?;
    let trace_decreases = trace.decreasing.iter().all(|d| d.1);

    let lambda01 = s0
        .eigenvalues
        .iter()
        .find(|e| e.lambda > 1e-8)
        .map(|e| e.lambda)
        .ok_or_else(|| Error::InvalidInput("no nonzero eigenvalue below the cutoff".into()))?;
    let tr1 = base.last().unwrap();
    let decay_constant = cfg.decay_margin * (tr1.value + tr1.uncertainty() - 1.0) * (0.5 * lambda01 * cfg.t_conv).exp();
    let decay: Vec<DecayRow> = fam_samples
        .iter()
        .zip(&family)
        .map(|(s, (eps, _))| {
            let mut worst = (f64::NEG_INFINITY, 0.0);
            for x in s.iter().filter(|x| cfg.decay_times.contains(&x.t)) {
                let r = (x.value + x.uncertainty() - 1.0) * (0.5 * lambda01 * x.t).exp() / decay_constant;
                if r > worst.0 {
                    worst = (r, x.t);
                }
            }
            DecayRow { epsilon: *eps, worst_ratio: worst.0, worst_t: worst.1 }
        })
        .collect();
    let decay_ok = decay.iter().all(|d| d.worst_ratio <= 1.0);
    Ok(FamilyReport {
        epsilons: sweep.epsilons.clone(),
        cells: mesh.cells,
        spectral,
        gaps_decrease,
        final_gap_ok,
        trace,
        trace_decreases,
        lambda01,
        decay_constant,
        decay,
        decay_ok,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    pub epsilon: f64,
    pub rows: Vec<heattrace::StructureResidual>,
    pub slope: f64,
    pub slope_sigma: f64,
}

/// `R(ε,t)` on `times` and the log-log slope of `|R|`.
pub fn structure_report(glued: &GluedSurface, lambda_max: f64, points_per_wavelength: f64, times: &[f64]) -> Result<StructureReport> {
    let mesh = spectrum::auto_mesh(&Surface::closed(glued.profile.clone()), lambda_max, points_per_wavelength);
    let bundle = heattrace::StructureBundle::compute(glued, lambda_max, mesh, 6.0)?;
    let rows: Vec<heattrace::StructureResidual> =
        times.iter().map(|&t| heattrace::structure_decomposition(&bundle, t)).collect::<Result<_>>()?;
    let ys: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    let (slope, slope_sigma) = crate::parametrix::slope_with_error(times, &ys);
    Ok(StructureReport { epsilon: glued.epsilon, rows, slope, slope_sigma })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(eps: &[f64], c: [f64; 3], rem: f64, delta: f64) -> Vec<SweepRow> {
        eps.iter()
            .map(|&e| {
                let x = e.ln();
                SweepRow { epsilon: e, log_epsilon: x, log_det: c[0] * x * x + c[1] * x + c[2] + rem * e.powf(delta), uncertainty: 1e-12, area: 1.0 }
            })
            .collect()
    }

    #[test]
    fn exact_quadratic_is_recovered() {
        let eps: Vec<f64> = (3..=7).map(|k| 2f64.powi(-k)).collect();
        let rows = synthetic(&eps, [0.003, 0.02, 1.3], 0.0, 2.0);
        let f = fit_model(&rows, false, 0.0).unwrap();
        for (a, b) in f.coeffs.iter().zip([0.003, 0.02, 1.3]) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(f.max_residual < 1e-12);
    }

    #[test]
    fn remainder_exponent_is_found() {
        let eps: Vec<f64> = (3..=7).map(|k| 2f64.powi(-k)).collect();
        let rows = synthetic(&eps, [0.0, 0.0214, 1.37], -0.05, 2.0);
        let r = fit_model(&rows, true, 0.0).unwrap().remainder.unwrap();
        assert!(r.c2_pinned);
        assert!((r.delta - 2.0).abs() < 0.02, "{}", r.delta);
        assert!((r.c1 - 0.0214).abs() < 1e-8);
        assert!((r.c3 + 0.05).abs() < 1e-4);
    }

    #[test]
    fn ladder_validation() {
        let mut c = SweepConfig::default();
        c.epsilons = vec![0.1, 0.2];
        assert!(c.validate().is_err());
        c.epsilons = vec![0.6];
        assert!(c.validate().is_err());
        c.epsilons = vec![0.25, 0.125];
        assert!(c.validate().is_ok());
    }

    #[test]
    fn plane_family_has_constant_rows() {
        let c = SweepConfig::trivial();
        let (rows, excluded) = measure_rows(&c).unwrap();
        assert!(excluded.is_empty());
        let d0 = zetadet::conformal_log_det(&c.omega0().unwrap()).unwrap().log_det;
        for r in &rows {
            assert!((r.log_det - d0).abs() < 1e-8, "{} {}", r.log_det, d0);
        }
    }

    #[test]
    fn over_budget_rows_are_reported() {
        let c = SweepConfig { row_budget: 1e-30, epsilons: vec![0.25, 0.125], ..Default::default() };
        let (rows, excluded) = measure_rows(&c).unwrap();
        assert!(rows.is_empty());
        assert_eq!(excluded.len(), 2);
        assert!(excluded[0].reason.contains("budget"));
    }
}
