//! Gluing parametrix for the heat kernel of `Ω_ε`, its error kernel, and the
//! Neumann series that corrects it.
//!
//! Everything is mode-resolved and discrete. `Ω_ε`, `Ω₀` and the truncated
//! `εZ` share one graded radial mesh (the `εZ` mesh continues it to
//! `z_radius`), so their finite-volume operators agree row by row wherever
//! the warps agree. The discrete parametrix then satisfies
//! `(∂_t + S_ε) G = E` and `H = G − G∗K` exactly, and the only errors left are
//! time quadrature and the Dirichlet cut of `εZ`.
//!
//! Kernels are stored as operator matrices in symmetric coordinates
//! `M^{1/2} A M^{-1/2}`, `M` the lumped radial measure `f dr`. The mode-`m`
//! kernel at `(r_i, r_j)` is `A_ij/√(μ_i μ_j)`, and the kernel on the surface
//! is `Σ_m k_m(r, r′) e^{im(θ−θ′)}/2π`.

use crate::error::{Error, Result};
use crate::geometry::{self, Cutoff, CutoffFamily, GluedSurface};
use crate::heattrace::{log_grid, log_log_slope};
use crate::quad;
use crate::spectrum::{feature_scale, Grading, Mesh, ModeOperator, Surface};
use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

type C64 = Complex<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParametrixConfig {
    pub epsilon: f64,
    pub m_max: u32,
    /// The mesh resolves wavelengths down to `2π/√lambda_mesh`.
    pub lambda_mesh: f64,
    pub points_per_wavelength: f64,
    /// Dirichlet radius of the truncated `εZ`.
    pub z_radius: f64,
    pub talbot_nodes: usize,
    pub neumann_max: usize,
    pub neumann_tol: f64,
    pub times: Vec<f64>,
}

impl Default for ParametrixConfig {
    fn default() -> Self {
        ParametrixConfig {
            epsilon: 0.125,
            m_max: 32,
            lambda_mesh: 800.0,
            points_per_wavelength: 8.0,
            z_radius: 6.0,
            talbot_nodes: 24,
            neumann_max: 12,
            neumann_tol: 1e-13,
            times: log_grid(0.05, 0.5, 6),
        }
    }
}

/// `R_ε` and `W_ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightFunction {
    pub epsilon: f64,
}

impl WeightFunction {
    pub fn r_eps(&self, r: f64) -> f64 {
        r.clamp(self.epsilon, 1.0)
    }

    pub fn w_eps(&self, r: f64) -> f64 {
        if r >= self.epsilon && r <= 1.5 {
            r
        } else {
            1.5
        }
    }
}

/// Per-mode kernels on a time grid.
#[derive(Debug, Clone)]
pub struct RadialKernelGrid {
    pub times: Vec<f64>,
    /// Cell centres.
    pub r: Vec<f64>,
    /// Lumped radial measure `f dr` per cell.
    pub mass: Vec<f64>,
    /// Row indices held in each matrix.
    pub rows: Vec<usize>,
    /// `data[m][it]`, `rows.len() × r.len()`.
    pub data: Vec<Vec<DMatrix<f64>>>,
}

impl RadialKernelGrid {
    pub fn m_max(&self) -> u32 {
        self.data.len() as u32 - 1
    }

    /// Kernel value `k_m(t, r_{rows[a]}, r_j)`.
    pub fn kernel(&self, m: u32, it: usize, a: usize, j: usize) -> f64 {
        let i = self.rows[a];
        self.data[m as usize][it][(a, j)] / (self.mass[i] * self.mass[j]).sqrt()
    }

    /// `sup |W_ε(z′)^a k_m(t, z, z′)|`.
    pub fn weighted_sup(&self, m: u32, it: usize, w: &WeightFunction, a: f64) -> f64 {
        let mat = &self.data[m as usize][it];
        let mut s = 0.0f64;
        for (ai, &i) in self.rows.iter().enumerate() {
            for j in 0..self.r.len() {
                let k = mat[(ai, j)] / (self.mass[i] * self.mass[j]).sqrt();
                s = s.max((w.w_eps(self.r[j]).powf(a) * k).abs());
            }
        }
        s
    }

    pub fn sup(&self, m: u32, it: usize) -> f64 {
        self.weighted_sup(m, it, &WeightFunction { epsilon: 1.0 }, 0.0)
    }

    /// Operator trace summed over modes `|m| ≤ m_max`; rows must be complete.
    pub fn trace(&self, it: usize) -> f64 {
        self.data
            .iter()
            .enumerate()
            .map(|(m, d)| mult(m as u32) * self.rows.iter().enumerate().map(|(a, &i)| d[it][(a, i)]).sum::<f64>())
            .sum()
    }
}

fn mult(m: u32) -> f64 {
    if m == 0 {
        1.0
    } else {
        2.0
    }
}

/// Eigendata of one mode for `εZ`, `Ω₀` and `Ω_ε`, and the commutator rows.
#[derive(Debug, Clone)]
pub struct ModeData {
    pub m: u32,
    pub lam_z: DVector<f64>,
    /// `n_z × n_z`.
    pub vz: DMatrix<f64>,
    pub lam_0: DVector<f64>,
    pub v0: DMatrix<f64>,
    pub lam_eps: Vec<f64>,
    /// `[S_{εZ}, χ̃₁]` and `[S_{Ω₀}, χ̃₂]` restricted to band rows, `b × n`.
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
}

/// Component heat kernels of `εZ` and `Ω₀`, spectrally, on the shared mesh.
#[derive(Debug, Clone)]
pub struct ComponentKernels {
    pub epsilon: f64,
    pub r: Vec<f64>,
    pub mass: Vec<f64>,
    pub n_z: usize,
    pub z_radius: f64,
    pub chi1: Vec<f64>,
    pub chi2: Vec<f64>,
    pub chi1t: Vec<f64>,
    pub chi2t: Vec<f64>,
    /// Rows on which `E` can be nonzero: the two `χ̃` transition bands
    /// widened by one cell.
    pub band: Vec<usize>,
    pub modes: Vec<ModeData>,
}

/// Graded mesh for `Ω_ε` used by the parametrix.
pub fn parametrix_mesh(glued: &GluedSurface, cfg: &ParametrixConfig) -> Mesh {
    let grading = Grading { a: 0.25, s: feature_scale(&glued.profile), c: 1.0 };
    let hx = 2.0 * std::f64::consts::PI / (cfg.lambda_mesh.sqrt() * cfg.points_per_wavelength);
    let r_end = glued.profile.r_max();
    let cells = (grading.x(r_end) / hx).ceil() as usize;
    Mesh::new(grading, r_end, cells)
}

fn dense_eigen(op: &ModeOperator) -> (DVector<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(op.dense());
    (e.eigenvalues, e.eigenvectors)
}

/// Rows where `[S, χ]` is nonzero (`χ` differs from a neighbour).
fn commutator_rows(chi: &[f64]) -> Vec<usize> {
    (0..chi.len())
        .filter(|&i| (i > 0 && chi[i - 1] != chi[i]) || (i + 1 < chi.len() && chi[i + 1] != chi[i]))
        .collect()
}

fn commutator(op: &ModeOperator, chi: &[f64], rows: &[usize], n: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(rows.len(), n);
    for (a, &i) in rows.iter().enumerate() {
        if i > 0 {
            c[(a, i - 1)] = op.off[i - 1] * (chi[i - 1] - chi[i]);
        }
        if i + 1 < n {
            c[(a, i + 1)] = op.off[i] * (chi[i + 1] - chi[i]);
        }
    }
    c
}

/// `H^{εZ}` from `H^Z` by parabolic scaling, and `H^{Ω₀}`, mode by mode, on
/// the parametrix mesh. Also the `Ω_ε` eigenvalues used as truth.
pub fn component_heat_kernels(glued: &GluedSurface, cfg: &ParametrixConfig) -> Result<ComponentKernels> {
    if !(cfg.z_radius > 1.25) {
        return Err(Error::InvalidInput(format!("z_radius {} must exceed 5/4", cfg.z_radius)));
    }
    let eps = glued.epsilon;
    let base = parametrix_mesh(glued, cfg);
    let ext = base.extend_to(cfg.z_radius.max(base.r_end));
    let n = base.cells();
    let n_z = ext.cells();
    let cut = CutoffFamily;
    let (t1, t2) = (cut.transition(Cutoff::Chi1Tilde), cut.transition(Cutoff::Chi2Tilde));
    let width = (t1.1 - t1.0).min(t2.1 - t2.0);
    let h_max = base.r_face.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
    if h_max > width / 3.0 {
        return Err(Error::MeshTooCoarse(format!(
            "cell size {h_max:.3e} does not resolve cutoff bands of width {width}"
        )));
    }
    // Z on the mesh scaled by 1/ε: same cells, operator scaled by ε²
    let g = ext.grading;
    let z_mesh = Mesh::new(Grading { a: g.a, s: g.s / eps, c: g.c / eps }, ext.r_end / eps, n_z);
    let z_surface = Surface::truncated(glued.z.clone(), ext.r_end / eps);
    let om0 = Surface::closed(glued.omega0.clone());
    let om_eps = Surface::closed(glued.profile.clone());
    let r = base.r.clone();
    let ev = |w: Cutoff| -> Vec<f64> { r.iter().map(|&x| cut.value(w, x)).collect() };
    let (chi1, chi2, chi1t, chi2t) = (ev(Cutoff::Chi1), ev(Cutoff::Chi2), ev(Cutoff::Chi1Tilde), ev(Cutoff::Chi2Tilde));
    let b1 = commutator_rows(&chi1t);
    let b2 = commutator_rows(&chi2t);
    let mut band: Vec<usize> = b1.iter().chain(&b2).copied().collect();
    band.sort_unstable();
    band.dedup();
    let op_eps0 = ModeOperator::assemble(&om_eps, &base, 0)?;
    let mass = op_eps0.mass.clone();
    let modes: Vec<Result<ModeData>> = (0..=cfg.m_max)
        .into_par_iter()
        .map(|m| {
            let oz = ModeOperator::assemble(&z_surface, &z_mesh, m)?;
            let (lz, vz) = dense_eigen(&oz);
            let lam_z = lz / (eps * eps);
            let o0 = ModeOperator::assemble(&om0, &base, m)?;
            let (lam_0, v0) = dense_eigen(&o0);
            let oe = ModeOperator::assemble(&om_eps, &base, m)?;
            let lam_eps = dense_eigen(&oe).0.iter().copied().collect();
            // commutator with the εZ operator in physical scaling
            let mut oz_phys = oz.clone();
            oz_phys.off.iter_mut().for_each(|x| *x /= eps * eps);
            let c1 = commutator(&oz_phys, &pad(&chi1t, n_z), &band, n);
            let c2 = commutator(&o0, &chi2t, &band, n);
            Ok(ModeData { m, lam_z, vz, lam_0, v0, lam_eps, c1, c2 })
        })
        .collect();
    Ok(ComponentKernels {
        epsilon: eps,
        r: base.r.clone(),
        mass,
        n_z,
        z_radius: ext.r_end,
        chi1,
        chi2,
        chi1t,
        chi2t,
        band,
        modes: modes.into_iter().collect::<Result<_>>()?,
    })
}

fn pad(v: &[f64], n: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(n, 0.0);
    out
}

fn heat(lam: &DVector<f64>, v: &DMatrix<f64>, t: f64, n: usize) -> DMatrix<f64> {
    let vn = v.rows(0, n);
    let mut scaled = vn.clone_owned();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= (-lam[k] * t).exp();
    }
    scaled * vn.transpose()
}

fn scale_rows(mut a: DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row *= s[i];
    }
    a
}

fn scale_cols(mut a: DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    for (j, mut col) in a.column_iter_mut().enumerate() {
        col *= s[j];
    }
    a
}

impl ComponentKernels {
    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn mode(&self, m: u32) -> &ModeData {
        &self.modes[m as usize]
    }

    /// `H^{εZ}_m(t)` on the shared cells.
    pub fn heat_z(&self, m: u32, t: f64) -> DMatrix<f64> {
        let d = self.mode(m);
        heat(&d.lam_z, &d.vz, t, self.n())
    }

    pub fn heat_omega0(&self, m: u32, t: f64) -> DMatrix<f64> {
        let d = self.mode(m);
        heat(&d.lam_0, &d.v0, t, self.n())
    }

    /// `Tr H^{Ω_ε}` restricted to `|m| ≤ m_max`.
    pub fn spectral_trace(&self, t: f64) -> f64 {
        self.modes.iter().map(|d| mult(d.m) * d.lam_eps.iter().map(|l| (-l * t).exp()).sum::<f64>()).sum()
    }

    /// Bound on the modes `|m| > m_max` of any of the traces involved.
    pub fn mode_tail(&self, t: f64, f_max: f64) -> f64 {
        let m0 = self.modes.len() as f64;
        let n = self.n_z as f64;
        // λ ≥ m²/f_max² for every eigenvalue of mode m
        let mut s = 0.0;
        let mut m = m0;
        loop {
            let term = 2.0 * n * (-m * m * t / (f_max * f_max)).exp();
            s += term;
            if term < 1e-18 * s.max(1e-300) || m > m0 + 1e5 {
                break;
            }
            m += 1.0;
        }
        s
    }

    /// `G_m(t) = χ̃₁ H^{εZ} χ₁ + χ̃₂ H^{Ω₀} χ₂`.
    pub fn parametrix(&self, m: u32, t: f64) -> DMatrix<f64> {
        let z = scale_cols(scale_rows(self.heat_z(m, t), &self.chi1t), &self.chi1);
        let o = scale_cols(scale_rows(self.heat_omega0(m, t), &self.chi2t), &self.chi2);
        z + o
    }

    /// Band rows of `E_m(t) = [S, χ̃₁] H^{εZ} χ₁ + [S, χ̃₂] H^{Ω₀} χ₂`.
    pub fn error_rows(&self, m: u32, t: f64) -> DMatrix<f64> {
        let d = self.mode(m);
        let n = self.n();
        let half = |c: &DMatrix<f64>, lam: &DVector<f64>, v: &DMatrix<f64>, chi: &[f64]| {
            let vn = v.rows(0, n);
            let cv = scale_cols(c * vn, &lam.iter().map(|l| (-l * t).exp()).collect::<Vec<_>>());
            scale_cols(cv * vn.transpose(), chi)
        };
        half(&d.c1, &d.lam_z, &d.vz, &self.chi1) + half(&d.c2, &d.lam_0, &d.v0, &self.chi2)
    }

    /// `E_m(t)` as a full `n × n` matrix.
    pub fn error_full(&self, m: u32, t: f64) -> DMatrix<f64> {
        let rows = self.error_rows(m, t);
        let mut e = DMatrix::zeros(self.n(), self.n());
        for (a, &i) in self.band.iter().enumerate() {
            e.set_row(i, &rows.row(a));
        }
        e
    }

    /// `Tr G(t) = ∫χ₁ H^{εZ} + ∫χ₂ H^{Ω₀}`, summed over modes.
    pub fn parametrix_trace(&self, t: f64) -> f64 {
        let n = self.n();
        self.modes
            .iter()
            .map(|d| {
                let diag = |lam: &DVector<f64>, v: &DMatrix<f64>, w: &[f64]| -> f64 {
                    (0..lam.len())
                        .map(|k| {
                            let e = (-lam[k] * t).exp();
                            e * (0..n).map(|i| w[i] * v[(i, k)] * v[(i, k)]).sum::<f64>()
                        })
                        .sum()
                };
                mult(d.m) * (diag(&d.lam_z, &d.vz, &self.chi1) + diag(&d.lam_0, &d.v0, &self.chi2))
            })
            .sum()
    }

    /// Radial measure of the band rows.
    pub fn band_volume(&self) -> f64 {
        self.band.iter().map(|&i| self.mass[i]).sum()
    }
}

/// `G` on a time grid, all rows.
pub fn build_parametrix(kern: &ComponentKernels, times: &[f64]) -> RadialKernelGrid {
    let data = (0..kern.modes.len() as u32)
        .map(|m| times.iter().map(|&t| kern.parametrix(m, t)).collect())
        .collect();
    RadialKernelGrid {
        times: times.to_vec(),
        r: kern.r.clone(),
        mass: kern.mass.clone(),
        rows: (0..kern.n()).collect(),
        data,
    }
}

/// `E` on a time grid; only band rows are stored, every other row is zero.
pub fn error_kernel(kern: &ComponentKernels, times: &[f64]) -> RadialKernelGrid {
    let data = (0..kern.modes.len() as u32)
        .map(|m| times.iter().map(|&t| kern.error_rows(m, t)).collect())
        .collect();
    RadialKernelGrid {
        times: times.to_vec(),
        r: kern.r.clone(),
        mass: kern.mass.clone(),
        rows: kern.band.clone(),
        data,
    }
}

/// Whether a time-dependent operator vanishes to high order as `t → 0`
/// (error type) or tends to the identity (heat type).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Heat,
    Error,
}

/// Graded composite Gauss–Legendre rule on `[0, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionRule {
    pub order: usize,
    /// Geometric panels toward each endpoint.
    pub levels: usize,
    pub ratio: f64,
}

impl Default for ConvolutionRule {
    fn default() -> Self {
        ConvolutionRule { order: 16, levels: 6, ratio: 0.35 }
    }
}

impl ConvolutionRule {
    pub fn nodes(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let mut left = vec![0.0];
        let mut x = 0.5 * self.ratio.powi(self.levels as i32);
        for _ in 0..self.levels {
            left.push(x);
            x /= self.ratio;
        }
        let mut breaks: Vec<f64> = left.iter().map(|u| u * t).collect();
        breaks.push(0.5 * t);
        breaks.extend(left.iter().rev().map(|u| (1.0 - u) * t));
        quad::composite_gl(&breaks, self.order)
    }
}

/// `(A∗B)(t) = ∫₀ᵗ A(t−s) B(s) ds` by product quadrature. At least one
/// factor must be of error type.
pub fn t_convolve<A, B>(
    a: (&A, KernelKind),
    b: (&B, KernelKind),
    t: f64,
    rule: ConvolutionRule,
) -> Result<DMatrix<f64>>
where
    A: Fn(f64) -> DMatrix<f64> + Sync,
    B: Fn(f64) -> DMatrix<f64> + Sync,
{
    if a.1 == KernelKind::Heat && b.1 == KernelKind::Heat {
        return Err(Error::Unsupported(
            "t-convolution of two heat-type kernels has a singular integrand".into(),
        ));
    }
    let (s, w) = rule.nodes(t);
    let parts: Vec<DMatrix<f64>> = s.par_iter().zip(&w).map(|(&s, &w)| (a.0(t - s) * b.0(s)) * w).collect();
    let mut it = parts.into_iter();
    let first = it.next().ok_or_else(|| Error::InvalidInput("empty quadrature".into()))?;
    Ok(it.fold(first, |acc, x| acc + x))
}

/// Inverse Laplace transform on the optimized cotangent (Talbot) contour:
/// `f(t) ≈ (2/N) Σ_{θ_k>0} Im(e^{z_k t} F(z_k) z′_k)`.
pub fn talbot_nodes(t: f64, n: usize) -> Vec<(C64, C64)> {
    const SIGMA: f64 = -0.6122;
    const MU: f64 = 0.5017;
    const ALPHA: f64 = 0.6407;
    const NU: f64 = 0.2645;
    let nn = n as f64;
    let h = 2.0 * std::f64::consts::PI / nn;
    (0..n / 2)
        .map(|k| {
            let th = (k as f64 + 0.5) * h;
            let (s, c) = (ALPHA * th).sin_cos();
            let z = C64::new(SIGMA + MU * th * c / s, NU * th) * (nn / t);
            let dz = C64::new(MU * (c / s - ALPHA * th / (s * s)), NU) * (nn / t);
            let w = (z * t).exp() * dz * (2.0 / nn);
            (z, w)
        })
        .collect()
}

/// Scalar Talbot inversion.
pub fn talbot<F: Fn(C64) -> C64>(f: F, t: f64, n: usize) -> f64 {
    talbot_nodes(t, n).into_iter().map(|(z, w)| (w * f(z)).im).sum()
}

/// Per-mode Laplace-domain pieces: `Ê` on band rows and `Ĝ` on band columns.
struct Resolvents {
    pz: DMatrix<C64>,
    qz: DMatrix<C64>,
    p0: DMatrix<C64>,
    q0: DMatrix<C64>,
    lz: DMatrix<C64>,
    rz: DMatrix<C64>,
    l0: DMatrix<C64>,
    r0: DMatrix<C64>,
    lam_z: Vec<f64>,
    lam_0: Vec<f64>,
    band: Vec<usize>,
}

fn cplx(a: &DMatrix<f64>) -> DMatrix<C64> {
    a.map(|x| C64::new(x, 0.0))
}

impl Resolvents {
    fn new(kern: &ComponentKernels, m: u32) -> Self {
        let d = kern.mode(m);
        let n = kern.n();
        let vz = d.vz.rows(0, n).clone_owned();
        let pz = &d.c1 * &vz;
        let qz = scale_cols(vz.transpose(), &kern.chi1);
        let p0 = &d.c2 * &d.v0;
        let q0 = scale_cols(d.v0.transpose(), &kern.chi2);
        let lz = scale_rows(vz.clone(), &kern.chi1t);
        let l0 = scale_rows(d.v0.clone(), &kern.chi2t);
        let rz = qz.select_columns(kern.band.iter());
        let r0 = q0.select_columns(kern.band.iter());
        Resolvents {
            pz: cplx(&pz),
            qz: cplx(&qz),
            p0: cplx(&p0),
            q0: cplx(&q0),
            lz: cplx(&lz),
            rz: cplx(&rz),
            l0: cplx(&l0),
            r0: cplx(&r0),
            lam_z: d.lam_z.iter().copied().collect(),
            lam_0: d.lam_0.iter().copied().collect(),
            band: kern.band.clone(),
        }
    }

    fn diag(lam: &[f64], z: C64) -> Vec<C64> {
        lam.iter().map(|&l| (z + l).inv()).collect()
    }

    fn cols(a: &DMatrix<C64>, s: &[C64]) -> DMatrix<C64> {
        let mut a = a.clone();
        for (j, mut col) in a.column_iter_mut().enumerate() {
            col *= s[j];
        }
        a
    }

    fn rows(a: &DMatrix<C64>, s: &[C64]) -> DMatrix<C64> {
        let mut a = a.clone();
        for (i, mut row) in a.row_iter_mut().enumerate() {
            row *= s[i];
        }
        a
    }

    /// `Ê(z)` on band rows, `b × n`.
    fn e_hat(&self, dz: &[C64], d0: &[C64]) -> DMatrix<C64> {
        Self::cols(&self.pz, dz) * &self.qz + Self::cols(&self.p0, d0) * &self.q0
    }

    /// `Ĝ(z)` on band columns, `n × b`.
    fn g_hat(&self, dz: &[C64], d0: &[C64]) -> DMatrix<C64> {
        &self.lz * Self::rows(&self.rz, dz) + &self.l0 * Self::rows(&self.r0, d0)
    }
}

/// Laplace-domain values at one contour node.
struct NodeValues {
    tr_eg: C64,
    tr_keg: C64,
    /// `Ê_BB^{k−1} Ê` for `k = 1..`.
    terms: Vec<DMatrix<C64>>,
    /// `K̂ = (I + Ê_BB)^{-1} Ê` when terms are requested.
    k: Option<DMatrix<C64>>,
}

fn node_values(res: &Resolvents, z: C64, k_max: usize) -> Result<NodeValues> {
    let dz = Resolvents::diag(&res.lam_z, z);
    let d0 = Resolvents::diag(&res.lam_0, z);
    let e = res.e_hat(&dz, &d0);
    let g = res.g_hat(&dz, &d0);
    let ebb = e.select_columns(res.band.iter());
    let eg = &e * &g;
    let b = ebb.nrows();
    let lu = (DMatrix::<C64>::identity(b, b) + &ebb).lu();
    let singular = || Error::Quadrature("I + Ê is singular on the contour".into());
    let kbb = lu.solve(&ebb).ok_or_else(singular)?;
    let tr_keg = (&kbb * &eg).trace();
    let mut terms = Vec::with_capacity(k_max);
    let mut k = None;
    if k_max > 0 {
        k = Some(lu.solve(&e).ok_or_else(singular)?);
        terms.push(e.clone());
        for _ in 1..k_max {
            let next = &ebb * terms.last().unwrap();
            terms.push(next);
        }
    }
    Ok(NodeValues { tr_eg: eg.trace(), tr_keg, terms, k })
}

/// Time-domain values for one mode at one `t`.
#[derive(Debug, Clone)]
pub struct ModeTimeValues {
    pub tr_eg: f64,
    pub tr_keg: f64,
    /// Roundoff floor of the two traces.
    pub trace_floor: f64,
    /// Band rows of `E^{∗k}(t)`, `k = 1..`.
    pub terms: Vec<DMatrix<f64>>,
    /// Entrywise roundoff floor of each term.
    pub term_floors: Vec<DMatrix<f64>>,
    /// Band rows of `K(t)`, when terms were requested.
    pub k: Option<DMatrix<f64>>,
}

fn invert_mode(res: &Resolvents, t: f64, nodes: usize, k_max: usize) -> Result<ModeTimeValues> {
    let mut out = ModeTimeValues {
        tr_eg: 0.0,
        tr_keg: 0.0,
        trace_floor: 0.0,
        terms: Vec::new(),
        term_floors: Vec::new(),
        k: None,
    };
    let eps = 8.0 * f64::EPSILON;
    for (z, w) in talbot_nodes(t, nodes) {
        let v = node_values(res, z, k_max)?;
        out.tr_eg += (w * v.tr_eg).im;
        out.tr_keg += (w * v.tr_keg).im;
        out.trace_floor += eps * w.norm() * (v.tr_eg.norm() + v.tr_keg.norm()) * res.band.len() as f64;
        if out.terms.is_empty() {
            out.terms = v.terms.iter().map(|x| DMatrix::zeros(x.nrows(), x.ncols())).collect();
            out.term_floors = out.terms.clone();
        }
        for ((acc, fl), x) in out.terms.iter_mut().zip(out.term_floors.iter_mut()).zip(&v.terms) {
            acc.zip_apply(x, |a, c| *a += (w * c).im);
            fl.zip_apply(x, |a, c| *a += eps * (w * c).norm());
        }
        if let Some(k) = v.k {
            let acc = out.k.get_or_insert_with(|| DMatrix::zeros(k.nrows(), k.ncols()));
            acc.zip_apply(&k, |a, c| *a += (w * c).im);
        }
    }
    Ok(out)
}

/// `E∗E` of one mode at `t`, through the Laplace domain.
pub fn error_square_laplace(kern: &ComponentKernels, m: u32, t: f64, nodes: usize) -> Result<DMatrix<f64>> {
    let res = Resolvents::new(kern, m);
    let v = invert_mode(&res, t, nodes, 2)?;
    Ok(v.terms[1].clone())
}

/// `Tr(E∗G)` and `Tr(K∗(E∗G))` of one mode at `t`.
pub fn mode_convolution_traces(kern: &ComponentKernels, m: u32, t: f64, nodes: usize) -> Result<(f64, f64)> {
    let res = Resolvents::new(kern, m);
    let v = invert_mode(&res, t, nodes, 0)?;
    Ok((v.tr_eg, v.tr_keg))
}

/// Neumann series diagnostics at one `t`, worst case over modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeumannRow {
    pub t: f64,
    /// `max_m sup|E_m^{∗k}(t)|`, `k = 1..`.
    pub term_sup: Vec<f64>,
    /// `max_m sup|E^{∗k}| / (C₀ (V C₀ t)^{k−1}/(k−1)!)`.
    pub envelope_fraction: Vec<f64>,
    /// `max_m (‖E^{∗(k+1)}‖/‖E^{∗k}‖) / (V C₀ t/k)`, `k = 1..`.
    pub ratio_fraction: Vec<f64>,
    /// Terms resolved above the inversion floor.
    pub resolved: usize,
    pub converged: bool,
    /// `sup|K − Σ_{k≤resolved} (−1)^{k+1}E^{∗k}|`.
    pub partial_sum_gap: f64,
    pub k_sup: f64,
}

/// One row of the three-term report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThreeTermRow {
    pub t: f64,
    pub tr_g: f64,
    pub tr_eg: f64,
    pub tr_keg: f64,
    /// `Tr G − Tr(E∗G) + Tr(K∗(E∗G))`.
    pub reconstructed: f64,
    pub spectral: f64,
    pub difference: f64,
    /// Inversion error (two node counts), roundoff of the inversion and of
    /// the eigensolver, and the `εZ` truncation bound.
    pub error: f64,
    pub g_minus_h: f64,
    pub sup_error_kernel: f64,
    pub mode_tail: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParametrixReport {
    pub epsilon: f64,
    pub m_max: u32,
    pub cells: usize,
    pub cells_z: usize,
    pub band_rows: usize,
    pub rows: Vec<ThreeTermRow>,
    pub neumann: Vec<NeumannRow>,
    /// Log-log slope of `|Tr G − Tr H|` over the time grid.
    pub slope_g_minus_h: f64,
    pub slope_g_minus_h_sigma: f64,
    pub all_match: bool,
    pub envelope_ok: bool,
    pub ratio_ok: bool,
}

fn mode_sup(a: &DMatrix<f64>, rows: &[usize], mass: &[f64]) -> f64 {
    let mut s = 0.0f64;
    for (ai, &i) in rows.iter().enumerate() {
        for j in 0..a.ncols() {
            s = s.max((a[(ai, j)] / (mass[i] * mass[j]).sqrt()).abs());
        }
    }
    s
}

/// Least-squares log-log slope and its standard error.
pub fn slope_with_error(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let slope = log_log_slope(ts, ys);
    let n = ts.len() as f64;
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ls.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let ss: f64 = xs.iter().zip(&ls).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    (slope, (ss / (n - 2.0).max(1.0) / sxx).sqrt())
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// `sup_{0<s≤t} sup|E_m(s)|`, sampled.
fn error_sup_up_to(kern: &ComponentKernels, m: u32, t: f64) -> f64 {
    let mut ts = log_grid(t * 1e-3, t, 48);
    ts.extend((1..=16).map(|k| t * k as f64 / 16.0));
    ts.iter().map(|&s| mode_sup(&kern.error_rows(m, s), &kern.band, &kern.mass)).fold(0.0, f64::max)
}

/// Full report: three-term reconstruction of the trace and the Neumann
/// series diagnostics on the configured time grid.
pub fn parametrix_report(glued: &GluedSurface, cfg: &ParametrixConfig) -> Result<ParametrixReport> {
    if cfg.neumann_max < 2 {
        return Err(Error::InvalidInput("neumann_max must be at least 2".into()));
    }
    if (glued.epsilon - cfg.epsilon).abs() > 0.0 {
        return Err(Error::InvalidInput(format!(
            "glued surface has epsilon {} but config asks for {}",
            glued.epsilon, cfg.epsilon
        )));
    }
    let kern = component_heat_kernels(glued, cfg)?;
    let f_max = glued.profile.f_max(glued.profile.r_max());
    let vol = kern.band_volume();
    let hi = cfg.talbot_nodes + 8;
    struct PerMode {
        coarse: Vec<ModeTimeValues>,
        fine: Vec<ModeTimeValues>,
        c0: Vec<f64>,
    }
    let per_mode: Vec<Result<PerMode>> = (0..=cfg.m_max)
        .into_par_iter()
        .map(|m| {
            let res = Resolvents::new(&kern, m);
            let mut coarse = Vec::new();
            let mut fine = Vec::new();
            let mut c0 = Vec::new();
            for &t in &cfg.times {
                coarse.push(invert_mode(&res, t, cfg.talbot_nodes, 0)?);
                fine.push(invert_mode(&res, t, hi, cfg.neumann_max)?);
                c0.push(error_sup_up_to(&kern, m, t));
            }
            Ok(PerMode { coarse, fine, c0 })
        })
        .collect();
    let per_mode: Vec<PerMode> = per_mode.into_iter().collect::<Result<_>>()?;
    let z_trunc = |t: f64| {
        let d = kern.z_radius - 1.25;
        let d1 = kern.z_radius - 17.0 / 16.0;
        (-(d * d1) / t).exp() * kern.n() as f64
    };
    let mut rows = Vec::new();
    let mut neumann = Vec::new();
    for (it, &t) in cfg.times.iter().enumerate() {
        let mut tr_eg = 0.0;
        let mut tr_keg = 0.0;
        let mut err = 0.0;
        let mut sup_e = 0.0f64;
        let k_max = cfg.neumann_max;
        let mut term_sup = vec![0.0f64; k_max];
        let mut env = vec![0.0f64; k_max];
        let mut ratio = vec![0.0f64; k_max - 1];
        let mut resolved = 0;
        let mut gap = 0.0f64;
        let mut k_sup = 0.0f64;
        for (m, pm) in per_mode.iter().enumerate() {
            let (c, f) = (&pm.coarse[it], &pm.fine[it]);
            let w = mult(m as u32);
            tr_eg += w * f.tr_eg;
            tr_keg += w * f.tr_keg;
            err += w * ((f.tr_eg - c.tr_eg).abs() + (f.tr_keg - c.tr_keg).abs() + f.trace_floor + c.trace_floor);
            let c0 = pm.c0[it];
            sup_e = sup_e.max(mult(m as u32) * c0 / (2.0 * std::f64::consts::PI));
            let sups: Vec<f64> = f.terms.iter().map(|x| mode_sup(x, &kern.band, &kern.mass)).collect();
            // terms within 100× of their roundoff floor are not resolved
            let res_m = sups
                .iter()
                .zip(&f.term_floors)
                .position(|(&s, fl)| s <= 100.0 * mode_sup(fl, &kern.band, &kern.mass))
                .unwrap_or(k_max);
            resolved = resolved.max(res_m);
            let mut partial = DMatrix::<f64>::zeros(kern.band.len(), kern.n());
            for k in 1..=k_max {
                let s = sups[k - 1];
                term_sup[k - 1] = term_sup[k - 1].max(s);
                if k <= res_m {
                    let bound = c0 * (vol * c0 * t).powi(k as i32 - 1) / factorial(k - 1);
                    env[k - 1] = env[k - 1].max(s / bound);
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    partial += &f.terms[k - 1] * sign;
                }
                if k < k_max && k < res_m {
                    let r = sups[k] / sups[k - 1];
                    ratio[k - 1] = ratio[k - 1].max(r / (vol * c0 * t / k as f64));
                }
            }
            let kt = f.k.as_ref().expect("terms requested");
            k_sup = k_sup.max(mode_sup(kt, &kern.band, &kern.mass));
            gap = gap.max(mode_sup(&(kt - &partial), &kern.band, &kern.mass));
        }
        let tr_g = kern.parametrix_trace(t);
        let spectral = kern.spectral_trace(t);
        let reconstructed = tr_g - tr_eg + tr_keg;
        // backward-error allowance of the dense eigensolver
        let roundoff = 16.0 * kern.n_z as f64 * f64::EPSILON * spectral.abs();
        let error = err + z_trunc(t) + roundoff;
        rows.push(ThreeTermRow {
            t,
            tr_g,
            tr_eg,
            tr_keg,
            reconstructed,
            spectral,
            difference: reconstructed - spectral,
            error,
            g_minus_h: tr_g - spectral,
            sup_error_kernel: sup_e,
            mode_tail: kern.mode_tail(t, f_max),
        });
        let last_sup = term_sup[resolved.max(1) - 1];
        if resolved >= 2 && term_sup[1] > term_sup[0] * 10.0 {
            return Err(Error::Quadrature(format!("Neumann terms grow at t = {t}: grid or inversion failure")));
        }
        neumann.push(NeumannRow {
            t,
            term_sup,
            envelope_fraction: env,
            ratio_fraction: ratio,
            resolved,
            converged: last_sup < cfg.neumann_tol || resolved < k_max,
            partial_sum_gap: gap,
            k_sup,
        });
    }
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let gh: Vec<f64> = rows.iter().map(|r| r.g_minus_h).collect();
    let (slope, sigma) = slope_with_error(&ts, &gh);
    let all_match = rows.iter().all(|r| r.difference.abs() <= r.error);
    let envelope_ok = neumann.iter().all(|n| n.envelope_fraction.iter().all(|&x| x <= 1.0));
    let ratio_ok = neumann.iter().all(|n| n.ratio_fraction.iter().all(|&x| x <= 1.0));
    Ok(ParametrixReport {
        epsilon: glued.epsilon,
        m_max: cfg.m_max,
        cells: kern.n(),
        cells_z: kern.n_z,
        band_rows: kern.band.len(),
        rows,
        neumann,
        slope_g_minus_h: slope,
        slope_g_minus_h_sigma: sigma,
        all_match,
        envelope_ok,
        ratio_ok,
    })
}

/// Convenience: glue the default surfaces for a parametrix run.
pub fn default_glued(gamma: f64, epsilon: f64) -> Result<GluedSurface> {
    let o = geometry::build_omega0(gamma, "polyblend", &[])?;
    let z = geometry::build_z(gamma, "polyblend", &[])?;
    geometry::glue(&o, &z, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_cfg() -> ParametrixConfig {
        ParametrixConfig { m_max: 3, lambda_mesh: 400.0, points_per_wavelength: 8.0, ..Default::default() }
    }

    fn kern() -> ComponentKernels {
        let g = default_glued(0.7, 0.125).unwrap();
        component_heat_kernels(&g, &small_cfg()).unwrap()
    }

    #[test]
    fn talbot_inverts_simple_transforms() {
        for t in [0.05, 0.3, 2.0] {
            let f = talbot(|z| (z + 1.0).inv(), t, 24);
            assert_abs_diff_eq!(f, (-t as f64).exp(), epsilon = 1e-12);
            let g = talbot(|z| (z * z).inv(), t, 24);
            assert_abs_diff_eq!(g, t, epsilon = 1e-11 * t.max(1.0));
        }
    }

    #[test]
    fn weight_functions_piecewise() {
        let w = WeightFunction { epsilon: 0.1 };
        assert_eq!(w.r_eps(0.05), 0.1);
        assert_eq!(w.r_eps(0.5), 0.5);
        assert_eq!(w.r_eps(3.0), 1.0);
        assert_eq!(w.w_eps(0.05), 1.5);
        assert_eq!(w.w_eps(1.2), 1.2);
        assert_eq!(w.w_eps(2.0), 1.5);
        let cut = CutoffFamily;
        for k in 0..200 {
            let r = 0.7 + 0.6 * k as f64 / 199.0;
            let (lo, hi) = (cut.value(Cutoff::Chi1Tilde, r), cut.value(Cutoff::Chi2Tilde, r));
            if (lo > 0.0 && lo < 1.0) || (hi > 0.0 && hi < 1.0) {
                assert!((0.5..=1.5).contains(&w.w_eps(r)));
            }
        }
    }

    #[test]
    fn cutoff_values_pin_the_parametrix() {
        let k = kern();
        let t = 0.1;
        let g = k.parametrix(1, t);
        let hz = k.heat_z(1, t);
        let h0 = k.heat_omega0(1, t);
        for i in 0..k.n() {
            for j in 0..k.n() {
                let (ri, rj) = (k.r[i], k.r[j]);
                if ri <= 0.75 && rj <= 0.75 {
                    assert_eq!(g[(i, j)], hz[(i, j)]);
                }
                if ri >= 1.25 && rj >= 1.25 {
                    assert_eq!(g[(i, j)], h0[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn error_kernel_lives_on_bands() {
        let k = kern();
        for &i in &k.band {
            let r = k.r[i];
            let h = 0.05;
            assert!((0.75 - h..=0.875 + h).contains(&r) || (1.125 - h..=1.25 + h).contains(&r), "row at {r}");
        }
        let e = k.error_full(2, 0.2);
        for i in 0..k.n() {
            if !k.band.contains(&i) {
                assert!(e.row(i).iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn heat_and_parametrix_identities() {
        let k = kern();
        let g = default_glued(0.7, 0.125).unwrap();
        let mesh = parametrix_mesh(&g, &small_cfg());
        let s_eps = ModeOperator::assemble(&Surface::closed(g.profile.clone()), &mesh, 1).unwrap().dense();
        let t = 0.2;
        let dt = 1e-4;
        let dg = (k.parametrix(1, t + dt) - k.parametrix(1, t - dt)) / (2.0 * dt);
        let resid = dg + &s_eps * k.parametrix(1, t) - k.error_full(1, t);
        let scale = k.parametrix(1, t).amax();
        assert!(resid.amax() < 1e-6 * scale, "{}", resid.amax() / scale);
        let dh = (k.heat_omega0(1, t + dt) - k.heat_omega0(1, t - dt)) / (2.0 * dt);
        let s0 = ModeOperator::assemble(&Surface::closed(g.omega0.clone()), &mesh, 1).unwrap().dense();
        let r0 = dh + &s0 * k.heat_omega0(1, t);
        assert!(r0.amax() < 1e-6 * scale);
        let h = k.heat_omega0(0, t);
        assert_abs_diff_eq!((&h - h.transpose()).amax(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn heat_kernels_conserve_mass() {
        let k = kern();
        let g = default_glued(0.7, 0.125).unwrap();
        let mesh = parametrix_mesh(&g, &small_cfg());
        let m0 = ModeOperator::assemble(&Surface::closed(g.omega0.clone()), &mesh, 0).unwrap().mass;
        let s0 = DVector::from_iterator(m0.len(), m0.iter().map(|m| m.sqrt()));
        let h0 = k.heat_omega0(0, 0.3) * &s0;
        for i in 0..k.n() {
            assert_abs_diff_eq!(h0[i] / s0[i], 1.0, epsilon = 1e-10);
        }
        let sq: Vec<f64> = k.mass.iter().map(|m| m.sqrt()).collect();
        let one = DVector::from_vec(sq.clone());
        let hz = k.heat_z(0, 0.01) * &one;
        for i in 0..k.n() {
            if k.r[i] < 1.5 {
                assert_abs_diff_eq!(hz[i] / sq[i], 1.0, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn parametrix_tends_to_identity() {
        let k = kern();
        let sq: Vec<f64> = k.mass.iter().map(|m| m.sqrt()).collect();
        let probes: [fn(f64) -> f64; 3] = [|r| (r).cos(), |r| r * r, |r| (-r).exp()];
        for p in probes {
            let mut prev = f64::INFINITY;
            for t in [1e-2, 1e-3, 1e-4] {
                let v = DVector::from_iterator(k.n(), k.r.iter().zip(&sq).map(|(&r, s)| p(r) * s));
                let gv = k.parametrix(0, t) * v;
                let err = (0..k.n()).filter(|&i| k.r[i] < 3.0).map(|i| (gv[i] / sq[i] - p(k.r[i])).abs()).fold(0.0, f64::max);
                assert!(err < prev);
                prev = err;
            }
            assert!(prev < 2e-2, "{prev}");
        }
    }

    #[test]
    fn scaled_z_matches_direct_solve() {
        let g = default_glued(0.7, 0.25).unwrap();
        let cfg = ParametrixConfig { epsilon: 0.25, ..small_cfg() };
        let k = component_heat_kernels(&g, &cfg).unwrap();
        let base = parametrix_mesh(&g, &cfg);
        let ext = base.extend_to(cfg.z_radius);
        let ez = geometry::scale(&g.z, 0.25).unwrap();
        let op = ModeOperator::assemble(&Surface::truncated(ez, ext.r_end), &ext, 2).unwrap();
        let mut direct: Vec<f64> = SymmetricEigen::new(op.dense()).eigenvalues.iter().copied().collect();
        direct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut scaled: Vec<f64> = k.mode(2).lam_z.iter().copied().collect();
        scaled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in direct.iter().zip(&scaled).take(40) {
            assert!((a - b).abs() < 1e-9 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn convolution_refuses_heat_pairs_and_handles_zero() {
        let k = kern();
        let g = |t: f64| k.parametrix(0, t);
        let e = |t: f64| k.error_full(0, t);
        let z = |_: f64| DMatrix::<f64>::zeros(k.n(), k.n());
        assert!(t_convolve((&g, KernelKind::Heat), (&g, KernelKind::Heat), 0.1, Default::default()).is_err());
        let c = t_convolve((&e, KernelKind::Error), (&z, KernelKind::Error), 0.1, Default::default()).unwrap();
        assert_eq!(c.amax(), 0.0);
    }

    #[test]
    fn scalar_convolution_model() {
        // a(t)P * b(t)P with a rank-one projector P
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let a = |t: f64| &p * (t * t * (-1.0 / t).exp());
        let b = |t: f64| &p * t.sin();
        let t = 0.7;
        let c = t_convolve((&a, KernelKind::Error), (&b, KernelKind::Heat), t, Default::default()).unwrap();
        let exact = quad::integrate(&|s: f64| {
            let u = t - s;
            if u <= 0.0 { 0.0 } else { u * u * (-1.0 / u).exp() * s.sin() }
        }, 0.0, t, 1e-14)
        .unwrap()
        .value;
        assert_abs_diff_eq!(c[(0, 1)], 0.5 * exact, epsilon = 1e-13);
    }

    #[test]
    fn trace_cyclicity_and_laplace_agree() {
        let k = kern();
        let t = 0.2;
        let m = 1;
        let g = |s: f64| k.parametrix(m, s);
        let e = |s: f64| k.error_full(m, s);
        let rule = ConvolutionRule::default();
        let eg = t_convolve((&e, KernelKind::Error), (&g, KernelKind::Heat), t, rule).unwrap();
        let ge = t_convolve((&g, KernelKind::Heat), (&e, KernelKind::Error), t, rule).unwrap();
        let scale = eg.trace().abs().max(1e-12);
        assert!((eg.trace() - ge.trace()).abs() < 1e-9 * scale.max(1.0));
        let (tr_eg, _) = mode_convolution_traces(&k, m, t, 32).unwrap();
        assert!((tr_eg - eg.trace()).abs() < 1e-9 * scale.max(1.0), "{tr_eg} vs {}", eg.trace());
        let ee = t_convolve((&e, KernelKind::Error), (&e, KernelKind::Error), t, rule).unwrap();
        let lap = error_square_laplace(&k, m, t, 32).unwrap();
        let ee_rows = ee.select_rows(k.band.iter());
        let d = (&ee_rows - &lap).amax();
        assert!(d < 1e-7 * ee_rows.amax(), "{d:e} vs {:e}", ee_rows.amax());
    }
}
