//! Heat traces from computed spectra, with certified tails, short-time
//! fits, and coordinates on the blown-up quadrant `Q₀`.

use crate::error::{Error, Result};
use crate::geometry::{CutoffFamily, Cutoff, GluedSurface};
use crate::lsq;
use crate::spectrum::{self, Mesh, MeshSpec, RadialWeight, SpectrumResult, Surface};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Face of the blown-up quadrant nearest to a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Face {
    /// `√τ = 0`: `t → 0` with `ε` fixed.
    L,
    /// The front face `t ~ ε²`.
    F,
    /// `η = 0`: `ε → 0` with `t` fixed.
    R,
}

/// A point `(t, ε)` of `Q` with both projective charts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Q0Point {
    pub t: f64,
    pub eps: f64,
}

impl Q0Point {
    pub fn tau(&self) -> f64 {
        self.t / (self.eps * self.eps)
    }

    pub fn eta(&self) -> f64 {
        self.eps / self.t.sqrt()
    }

    /// Chart A: `(√τ, ε)`.
    pub fn from_chart_a(sqrt_tau: f64, eps: f64) -> Q0Point {
        Q0Point { t: sqrt_tau * sqrt_tau * eps * eps, eps }
    }

    /// Chart B: `(η, √t)`.
    pub fn from_chart_b(eta: f64, sqrt_t: f64) -> Q0Point {
        Q0Point { t: sqrt_t * sqrt_t, eps: eta * sqrt_t }
    }

    /// `L` when `τ < 1/4`, `R` when `η < 1/4`, else `F`.
    pub fn face(&self) -> Face {
        if self.tau() < 0.25 {
            Face::L
        } else if self.eta() < 0.25 {
            Face::R
        } else {
            Face::F
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Spectral,
    Parametrix,
    Model,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatTraceSample {
    pub t: f64,
    /// `0` for the limit surface.
    pub epsilon: f64,
    pub value: f64,
    /// Bound on the omitted eigenvalues above the cutoff.
    pub tail_bound: f64,
    /// Propagated discretization error of the retained eigenvalues.
    pub disc_error: f64,
    pub source: Source,
}

impl HeatTraceSample {
    pub fn uncertainty(&self) -> f64 {
        self.tail_bound + self.disc_error
    }

    pub fn tau(&self) -> f64 {
        if self.epsilon > 0.0 {
            self.t / (self.epsilon * self.epsilon)
        } else {
            f64::INFINITY
        }
    }

    pub fn eta(&self) -> f64 {
        self.epsilon / self.t.sqrt()
    }
}

/// Lower bound `λ_k ≥ C′ k` (eigenvalues counted with multiplicity from
/// `k = 0`) and the heat bound `Tr H(t) ≤ C/t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailBoundCertificate {
    pub n0: usize,
    pub c_prime: f64,
    pub c: f64,
    /// Index of the first eigenvalue not computed.
    pub k_lambda: usize,
}

/// Safety factor applied to the Weyl constant `4π/Area`.
pub const TAIL_MARGIN: f64 = 0.8;

impl TailBoundCertificate {
    /// Derive `C′` from the computed spectrum and the Weyl envelope, then
    /// re-check every computed eigenvalue with index `≥ N₀`.
    pub fn from_spectrum(spec: &SpectrumResult) -> Result<Self> {
        let lam = spec.expanded();
        let k_lambda = lam.len();
        if k_lambda < 8 {
            return Err(Error::InvalidInput("too few eigenvalues for a tail certificate".into()));
        }
        let n0 = (k_lambda / 4).max(1);
        let weyl = 4.0 * std::f64::consts::PI / spec.area;
        let observed = lam[n0..]
            .iter()
            .enumerate()
            .map(|(i, l)| l / (n0 + i) as f64)
            .fold(f64::INFINITY, f64::min);
        let c_prime = TAIL_MARGIN * weyl.min(observed);
        for (k, l) in lam.iter().enumerate().skip(n0) {
            if *l < c_prime * k as f64 {
                return Err(Error::InvalidInput(format!("lambda_{k} = {l} violates the lower bound")));
            }
        }
        Ok(TailBoundCertificate { n0, c_prime, c: 0.0, k_lambda })
    }

    /// `Σ_{k ≥ K} e^{−t C′ k}`.
    pub fn tail(&self, t: f64) -> f64 {
        let q = (-t * self.c_prime).exp();
        q.powi(self.k_lambda as i32) / (1.0 - q)
    }

    /// `Σ_{k ≥ K} E₁(t_b C′ k)`, bounded by the integral from `K − 1`.
    pub fn e1_tail(&self, t_b: f64) -> f64 {
        // ∫_{K−1}^∞ E₁(a k) dk = (e^{−x} − x E₁(x))/a with x = a(K−1)
        let a = t_b * self.c_prime;
        let x = a * (self.k_lambda.saturating_sub(1)).max(1) as f64;
        ((-x).exp() - x * crate::special::exp_int_e1(x)).max(0.0) / a
    }

    /// Smallest `Λ` for which the tail at `t` falls below `tol`.
    pub fn lambda_needed(&self, area: f64, t: f64, tol: f64) -> f64 {
        let weyl = 4.0 * std::f64::consts::PI / area;
        let per_k = t * self.c_prime;
        let k = ((1.0 / (tol * per_k)).ln() / per_k).max(0.0);
        k / TAIL_MARGIN * weyl
    }
}

/// `Σ mult·e^{−λt}` over the computed spectrum with its certified tail.
pub fn trace_from_spectrum(
    spec: &SpectrumResult,
    t: f64,
    cert: &TailBoundCertificate,
    tol: Option<f64>,
) -> Result<HeatTraceSample> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    let tail_bound = cert.tail(t);
    if let Some(tol) = tol {
        if tail_bound > tol {
            return Err(Error::TailTooLarge {
                bound: tail_bound,
                tol,
                needed: cert.lambda_needed(spec.area, t, tol),
            });
        }
    }
    let (value, disc_error) = sum_weighted(spec, t, None);
    Ok(HeatTraceSample { t, epsilon: 0.0, value, tail_bound, disc_error, source: Source::Spectral })
}

fn sum_weighted(spec: &SpectrumResult, t: f64, weight: Option<usize>) -> (f64, f64) {
    let mut v = 0.0;
    let mut err = 0.0;
    // ascending order: small terms last
    for e in &spec.eigenvalues {
        let w = weight.map_or(1.0, |j| e.weights[j]);
        let x = (-e.lambda * t).exp() * e.multiplicity as f64;
        v += w * x;
        err += w.abs() * x * t * e.error;
    }
    (v, err)
}

/// `Σ e^{−λt} ⟨w φ, φ⟩` using the `index`-th weight stored with the spectrum.
pub fn weighted_trace(
    spec: &SpectrumResult,
    index: usize,
    t: f64,
    cert: &TailBoundCertificate,
) -> Result<HeatTraceSample> {
    if spec.eigenvalues.first().map_or(true, |e| e.weights.len() <= index) {
        return Err(Error::InvalidInput(format!("weight {index} was not stored with the spectrum")));
    }
    let (value, disc_error) = sum_weighted(spec, t, Some(index));
    Ok(HeatTraceSample {
        t,
        epsilon: 0.0,
        value,
        // weights lie in [0, 1]
        tail_bound: cert.tail(t),
        disc_error,
        source: Source::Spectral,
    })
}

/// Basis for short-time fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBasis {
    pub n: usize,
    /// Powers `t^{(k−n)/2}` for `k = 0..=k_max`.
    pub k_max: usize,
    /// Keep odd `k`; otherwise only integer powers of `t` enter.
    pub include_odd: bool,
    pub allow_log: bool,
}

impl FitBasis {
    pub fn ks(&self) -> Vec<usize> {
        (0..=self.k_max).filter(|k| self.include_odd || k % 2 == 0).collect()
    }

    pub fn alpha(&self, k: usize) -> f64 {
        (k as f64 - self.n as f64) / 2.0
    }

    fn row(&self, t: f64) -> Vec<f64> {
        let mut r: Vec<f64> = self.ks().iter().map(|&k| t.powf(self.alpha(k))).collect();
        if self.allow_log {
            r.push(t.ln());
        }
        r
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub basis: FitBasis,
    /// `(k, a_k, σ_k)`.
    pub coeffs: Vec<(usize, f64, f64)>,
    /// Coefficient of `log t` and its σ (zero when not fitted).
    pub k_log: (f64, f64),
    pub window: (f64, f64),
    pub max_residual: f64,
    pub condition: f64,
    /// Largest coefficient change, per coefficient, on a shifted window.
    pub shift_change: Vec<f64>,
}

impl AsymptoticFit {
    pub fn a(&self, k: usize) -> f64 {
        self.coeffs.iter().find(|c| c.0 == k).map_or(0.0, |c| c.1)
    }

    pub fn sigma(&self, k: usize) -> f64 {
        self.coeffs.iter().find(|c| c.0 == k).map_or(0.0, |c| c.2)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut v: f64 = self.coeffs.iter().map(|(k, a, _)| a * t.powf(self.basis.alpha(*k))).sum();
        v += self.k_log.0 * t.ln();
        v
    }

    /// Shift-change of `a_k` (index into `coeffs` order).
    pub fn stability(&self, k: usize) -> f64 {
        self.coeffs.iter().position(|c| c.0 == k).map_or(0.0, |i| self.shift_change[i])
    }
}

fn fit_once(samples: &[(f64, f64, f64)], basis: &FitBasis) -> Result<lsq::LsqFit> {
    let design: Vec<Vec<f64>> = samples.iter().map(|s| basis.row(s.0)).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    // relative weighting: each sample counts by its own scale
    // exact zeros (trivial surfaces) fall back to the size of the basis row
    let w: Vec<f64> = samples
        .iter()
        .zip(&design)
        .map(|(s, row)| {
            let scale = if s.1 != 0.0 { s.1.abs() + s.2 } else { row.iter().fold(0.0f64, |m, x| m.max(x.abs())) };
            scale.powi(-2)
        })
        .collect();
    lsq::fit(&design, &y, Some(&w))
}

/// Least-squares fit of `Σ a_k t^{(k−n)/2} (+ K log t)` to `(t, value)`.
///
/// Refuses windows shorter than 1.5 decades, samples whose uncertainty is
/// not small against the smallest retained basis term, and ill-conditioned
/// designs.
pub fn fit_short_time(samples: &[HeatTraceSample], basis: FitBasis) -> Result<AsymptoticFit> {
    let pts: Vec<(f64, f64, f64)> = samples.iter().map(|s| (s.t, s.value, s.uncertainty())).collect();
    fit_points(&pts, basis, true)
}

/// As [`fit_short_time`] on raw `(t, value, uncertainty)` triples.
pub fn fit_points(pts: &[(f64, f64, f64)], basis: FitBasis, require_span: bool) -> Result<AsymptoticFit> {
    let mut pts = pts.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (t_lo, t_hi) = (pts[0].0, pts[pts.len() - 1].0);
    if require_span && (t_hi / t_lo).log10() < 1.5 {
        return Err(Error::Fit(format!("window [{t_lo}, {t_hi}] spans less than 1.5 decades")));
    }
    let main = fit_once(&pts, &basis)?;
    let cut = pts.len() / 5;
    let shifted_lo = fit_once(&pts[cut..], &basis)?;
    let shifted_hi = fit_once(&pts[..pts.len() - cut], &basis)?;
    let nk = basis.ks().len();
    let shift_change: Vec<f64> = (0..main.coeffs.len())
        .map(|i| {
            (shifted_lo.coeffs[i] - main.coeffs[i]).abs().max((shifted_hi.coeffs[i] - main.coeffs[i]).abs())
        })
        .collect();
    let coeffs = basis
        .ks()
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, main.coeffs[i], main.sigma[i]))
        .collect();
    let k_log = if basis.allow_log { (main.coeffs[nk], main.sigma[nk]) } else { (0.0, 0.0) };
    Ok(AsymptoticFit {
        basis,
        coeffs,
        k_log,
        window: (t_lo, t_hi),
        max_residual: main.max_abs_residual,
        condition: main.condition,
        shift_change,
    })
}

/// Log-spaced grid of `n` points on `[a, b]`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Spectra needed to evaluate the structure residual at one `ε`.
#[derive(Debug, Clone)]
pub struct StructureBundle {
    pub epsilon: f64,
    pub omega_eps: SpectrumResult,
    /// `εZ`, Dirichlet-truncated, carrying the weight `χ₁`.
    pub eps_z: SpectrumResult,
    /// `Ω₀` carrying the weight `χ₂`.
    pub omega0: SpectrumResult,
    pub certs: [TailBoundCertificate; 3],
}

impl StructureBundle {
    /// All three spectra on one graded mesh; the `εZ` mesh is the same mesh
    /// continued to `z_radius`.
    pub fn compute(glued: &GluedSurface, lambda_max: f64, mesh: MeshSpec, z_radius: f64) -> Result<Self> {
        let cut = CutoffFamily;
        let chi1: RadialWeight = Arc::new(move |r| cut.value(Cutoff::Chi1, r));
        let chi2: RadialWeight = Arc::new(move |r| cut.value(Cutoff::Chi2, r));
        let om_eps = Surface::closed(glued.profile.clone());
        let om0 = Surface::closed(glued.omega0.clone());
        let base = Mesh::new(mesh.grading, om_eps.r_end(), mesh.cells);
        let ext = base.extend_to(z_radius);
        let ez = crate::geometry::scale(&glued.z, glued.epsilon)?;
        let ez = Surface::truncated(ez, ext.r_end);
        let ez_mesh = MeshSpec { grading: mesh.grading, cells: ext.cells() };
        let omega_eps = spectrum::full_spectrum(&om_eps, lambda_max, mesh, &[])?;
        let eps_z = spectrum::full_spectrum(&ez, lambda_max, ez_mesh, &[chi1])?;
        let omega0 = spectrum::full_spectrum(&om0, lambda_max, mesh, &[chi2])?;
        let certs = [
            TailBoundCertificate::from_spectrum(&omega_eps)?,
            TailBoundCertificate::from_spectrum(&eps_z)?,
            TailBoundCertificate::from_spectrum(&omega0)?,
        ];
        Ok(StructureBundle { epsilon: glued.epsilon, omega_eps, eps_z, omega0, certs })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureResidual {
    pub t: f64,
    pub epsilon: f64,
    pub trace: f64,
    pub z_part: f64,
    pub omega0_part: f64,
    pub residual: f64,
    pub uncertainty: f64,
    /// `|R|` does not exceed its uncertainty.
    pub inconclusive: bool,
}

/// `R(ε,t) = Tr H^{Ω_ε}(t) − ∫χ₁ H^{εZ}(t) − ∫χ₂ H^{Ω₀}(t)`.
pub fn structure_decomposition(bundle: &StructureBundle, t: f64) -> Result<StructureResidual> {
    let tr = trace_from_spectrum(&bundle.omega_eps, t, &bundle.certs[0], None)?;
    let z = weighted_trace(&bundle.eps_z, 0, t, &bundle.certs[1])?;
    let o = weighted_trace(&bundle.omega0, 0, t, &bundle.certs[2])?;
    let residual = tr.value - z.value - o.value;
    let uncertainty = tr.tail_bound + z.tail_bound + o.tail_bound;
    Ok(StructureResidual {
        t,
        epsilon: bundle.epsilon,
        trace: tr.value,
        z_part: z.value,
        omega0_part: o.value,
        residual,
        uncertainty,
        inconclusive: residual.abs() <= uncertainty,
    })
}

/// Slope of `log|y|` against `log t` by least squares.
pub fn log_log_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ls.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub t: f64,
    pub epsilon: f64,
    pub gap: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HtConvTable {
    pub entries: Vec<ConvergenceEntry>,
    /// Per `t`: gaps non-increasing along the supplied (decreasing) ε order.
    pub decreasing: Vec<(f64, bool)>,
}

/// `|Tr H^{Ω_ε}(t) − Tr H^{Ω₀}(t)|` over a family; samples are matched by
/// `t` and the family is expected in decreasing-ε order.
pub fn htconv_check(
    family: &[Vec<HeatTraceSample>],
    omega0: &[HeatTraceSample],
    t_grid: &[f64],
) -> Result<HtConvTable> {
    let find = |s: &[HeatTraceSample], t: f64| -> Result<HeatTraceSample> {
        s.iter()
            .find(|x| (x.t - t).abs() <= 1e-12 * t)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("no sample at t = {t}")))
    };
    let mut entries = Vec::new();
    let mut decreasing = Vec::new();
    for &t in t_grid {
        let base = find(omega0, t)?;
        let mut gaps = Vec::new();
        for fam in family {
            let s = find(fam, t)?;
            let gap = (s.value - base.value).abs();
            gaps.push(gap);
            entries.push(ConvergenceEntry {
                t,
                epsilon: s.epsilon,
                gap,
                uncertainty: s.uncertainty() + base.uncertainty(),
            });
        }
        decreasing.push((t, gaps.windows(2).all(|w| w[1] <= w[0])));
    }
    Ok(HtConvTable { entries, decreasing })
}
