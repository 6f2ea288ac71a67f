//! Laplace spectra of warped surfaces, one Fourier mode at a time.
//!
//! For `u(r) e^{imθ}` the eigenproblem is `−(1/f)(f u′)′ + m² u/f² = λu`.
//! It is discretized by a cell-centred, second-order finite-volume scheme in
//! a mapped coordinate `x(r) = a·asinh(r/s) + r/c` with uniform cells in
//! `x`, which clusters cells logarithmically between `s` and `a·c`. The
//! resulting symmetric tridiagonal matrix is solved by Sturm-count
//! bisection, and every eigenvalue is Richardson-extrapolated from meshes of
//! `N` and `2N` cells.

use crate::error::{Error, Result};
use crate::geometry::{LeftEnd, Profile};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Coordinate map `x(r) = a·asinh(r/s) + r/c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grading {
    pub a: f64,
    pub s: f64,
    pub c: f64,
}

impl Grading {
    pub const UNIFORM: Grading = Grading { a: 0.0, s: 1.0, c: 1.0 };

    /// Log-graded between `s` and `a·c`, uniform outside.
    pub fn clustered(s: f64) -> Grading {
        Grading { a: 0.25, s, c: 1.0 }
    }

    pub fn x(&self, r: f64) -> f64 {
        self.a * (r / self.s).asinh() + r / self.c
    }

    /// `dr/dx`.
    pub fn rho(&self, r: f64) -> f64 {
        1.0 / (self.a / (self.s * self.s + r * r).sqrt() + 1.0 / self.c)
    }

    pub fn r(&self, x: f64) -> f64 {
        if self.a == 0.0 {
            return x * self.c;
        }
        // x is increasing and concave in r; Newton from the right converges
        let mut r = x * self.c;
        for _ in 0..200 {
            let g = self.x(r) - x;
            let step = g * self.rho(r);
            r -= step;
            if r < 0.0 {
                r = 0.0;
            }
            if step.abs() <= 1e-15 * (r + self.s) {
                break;
            }
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub grading: Grading,
    /// Cells in the coarse mesh; the fine mesh doubles this.
    pub cells: usize,
}

/// Cell-centred mesh in the mapped coordinate.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub grading: Grading,
    pub hx: f64,
    pub r_end: f64,
    /// Cell centres.
    pub r: Vec<f64>,
    /// Faces, `cells + 1` of them.
    pub r_face: Vec<f64>,
}

impl Mesh {
    pub fn new(grading: Grading, r_end: f64, cells: usize) -> Mesh {
        let x_end = grading.x(r_end);
        let hx = x_end / cells as f64;
        let r = (0..cells).map(|i| grading.r((i as f64 + 0.5) * hx)).collect();
        let mut r_face: Vec<f64> = (0..=cells).map(|i| grading.r(i as f64 * hx)).collect();
        r_face[cells] = r_end;
        Mesh { grading, hx, r_end, r, r_face }
    }

    /// Same grading and cell size, continued to the first face at or beyond
    /// `r_min`; cells shared with `self` coincide exactly.
    pub fn extend_to(&self, r_min: f64) -> Mesh {
        let cells = (self.grading.x(r_min) / self.hx).ceil() as usize;
        let r_end = self.grading.r(cells as f64 * self.hx);
        let mut m = Mesh::new(self.grading, r_end, cells);
        m.hx = self.hx;
        m
    }

    pub fn cells(&self) -> usize {
        self.r.len()
    }

    pub fn refined(&self) -> Mesh {
        Mesh::new(self.grading, self.r_end, 2 * self.cells())
    }
}

/// A closed surface, or an open one cut off with a Dirichlet condition.
#[derive(Debug, Clone)]
pub struct Surface {
    pub profile: Profile,
    pub truncate_at: Option<f64>,
}

impl Surface {
    pub fn closed(profile: Profile) -> Surface {
        Surface { profile, truncate_at: None }
    }

    pub fn truncated(profile: Profile, radius: f64) -> Surface {
        Surface { profile, truncate_at: Some(radius) }
    }

    pub fn r_end(&self) -> f64 {
        self.truncate_at.unwrap_or(self.profile.r_max())
    }

    pub fn dirichlet(&self) -> bool {
        self.r_end() < self.profile.r_max()
    }

    fn check(&self) -> Result<()> {
        if !self.r_end().is_finite() {
            return Err(Error::InvalidInput("open surfaces need a truncation radius".into()));
        }
        if let LeftEnd::ConicTip { gamma } = self.profile.left {
            if gamma > 1.0 {
                return Err(Error::Unsupported(format!(
                    "cone angle above 2π (gamma = {gamma}); only gamma <= 1 is realized"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetrized discrete operator `M^{-1/2} K M^{-1/2}` for one mode.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    pub m: u32,
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    /// Lumped mass `f ρ h_x` per cell.
    pub mass: Vec<f64>,
}

impl ModeOperator {
    pub fn assemble(surface: &Surface, mesh: &Mesh, m: u32) -> Result<ModeOperator> {
        surface.check()?;
        let n = mesh.cells();
        let g = &mesh.grading;
        let hx = mesh.hx;
        let prof = &surface.profile;
        let mass: Vec<f64> = mesh.r.iter().map(|&r| prof.f(r) * g.rho(r) * hx).collect();
        // face conductances p = f/ρ; zero where the surface closes up
        let mut p: Vec<f64> = mesh.r_face.iter().map(|&r| prof.f(r).max(0.0) / g.rho(r)).collect();
        p[0] = 0.0;
        let closes_right = !surface.dirichlet();
        if closes_right {
            p[n] = 0.0;
        }
        let m2 = (m as f64).powi(2);
        let mut k_diag = vec![0.0; n];
        for i in 0..n {
            let ri = mesh.r[i];
            k_diag[i] = (p[i] + p[i + 1]) / hx + m2 * g.rho(ri) * hx / prof.f(ri);
        }
        if !closes_right {
            k_diag[n - 1] += p[n] / hx; // ghost value −u across the face
        }
        let diag = (0..n).map(|i| k_diag[i] / mass[i]).collect();
        let off = (0..n - 1).map(|i| -p[i + 1] / hx / (mass[i] * mass[i + 1]).sqrt()).collect();
        Ok(ModeOperator { m, diag, off, mass })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let qq = if q == 0.0 { f64::MIN_POSITIVE } else { q };
            let e = self.off[i - 1];
            q = self.diag[i] - x - e * e / qq;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut rad = 0.0;
            if i > 0 {
                rad += self.off[i - 1].abs();
            }
            if i + 1 < n {
                rad += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - rad);
            hi = hi.max(self.diag[i] + rad);
        }
        (lo, hi)
    }

    /// Eigenvalues with indices `0..k` in increasing order.
    pub fn lowest(&self, k: usize) -> Vec<f64> {
        let k = k.min(self.len());
        let (lo, hi) = self.gershgorin();
        let pad = 1e-12 * (hi.abs() + lo.abs()) + 1e-300;
        let mut out = vec![0.0; k];
        self.isolate(lo - pad, hi + pad, 0, self.len(), 0, k, &mut out);
        out
    }

    /// All eigenvalues below `x`.
    pub fn below(&self, x: f64) -> Vec<f64> {
        self.lowest(self.count_below(x))
    }

    #[allow(clippy::too_many_arguments)]
    fn isolate(&self, lo: f64, hi: f64, n_lo: usize, n_hi: usize, want_lo: usize, want_hi: usize, out: &mut [f64]) {
        // eigenvalues with index in [n_lo, n_hi) lie in [lo, hi)
        let a = n_lo.max(want_lo);
        let b = n_hi.min(want_hi);
        if a >= b {
            return;
        }
        let tol = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) + 1e-300;
        if n_hi - n_lo == 1 || hi - lo <= tol {
            let mut lo = lo;
            let mut hi = hi;
            while hi - lo > 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + 1e-300 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.count_below(mid) > n_lo {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            for slot in &mut out[a..b] {
                *slot = 0.5 * (lo + hi);
            }
            return;
        }
        let mid = 0.5 * (lo + hi);
        let n_mid = self.count_below(mid);
        self.isolate(lo, mid, n_lo, n_mid, want_lo, want_hi, out);
        self.isolate(mid, hi, n_mid, n_hi, want_lo, want_hi, out);
    }

    /// Unit eigenvector (symmetrized coordinates) for the simple eigenvalue
    /// `lambda`, by inverse iteration.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        let shift = lambda + 1e-13 * lambda.abs().max(1.0);
        let mut v = vec![1.0; n];
        for (i, x) in v.iter_mut().enumerate() {
            *x += 1e-3 * ((i * 7919 % 101) as f64);
        }
        for _ in 0..3 {
            v = solve_shifted(&self.diag, &self.off, shift, &v);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    /// Dense symmetric matrix, for small diagnostic problems.
    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        let mut a = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = self.diag[i];
            if i + 1 < n {
                a[(i, i + 1)] = self.off[i];
                a[(i + 1, i)] = self.off[i];
            }
        }
        a
    }
}

/// Solve `(T − σ) y = b` for symmetric tridiagonal `T` by Gaussian
/// elimination with partial pivoting.
fn solve_shifted(d: &[f64], e: &[f64], sigma: f64, b: &[f64]) -> Vec<f64> {
    let n = d.len();
    if n == 1 {
        let p = d[0] - sigma;
        return vec![b[0] / if p == 0.0 { 1e-300 } else { p }];
    }
    // rows stored as (main, upper1, upper2) after elimination
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut y = b.to_vec();
    let mut cur = [d[0] - sigma, e[0], 0.0];
    for i in 0..n - 1 {
        let below = [e[i], d[i + 1] - sigma, if i + 1 < n - 1 { e[i + 1] } else { 0.0 }];
        if cur[0].abs() >= below[0].abs() {
            let piv = if cur[0] == 0.0 { 1e-300 } else { cur[0] };
            let l = below[0] / piv;
            u0[i] = piv;
            u1[i] = cur[1];
            u2[i] = cur[2];
            y[i + 1] -= l * y[i];
            cur = [below[1] - l * cur[1], below[2] - l * cur[2], 0.0];
        } else {
            let l = cur[0] / below[0];
            u0[i] = below[0];
            u1[i] = below[1];
            u2[i] = below[2];
            let yi = y[i];
            y[i] = y[i + 1];
            y[i + 1] = yi - l * y[i + 1];
            cur = [cur[1] - l * below[1], cur[2] - l * below[2], 0.0];
        }
    }
    u0[n - 1] = if cur[0] == 0.0 { 1e-300 } else { cur[0] };
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        if i + 1 < n {
            s -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= u2[i] * x[i + 2];
        }
        x[i] = s / u0[i];
    }
    x
}

/// Radial weight functions evaluated against eigenvectors at solve time.
pub type RadialWeight = std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Eigenpairs of one mode on one mesh.
#[derive(Debug, Clone)]
pub struct ModeSolve {
    pub m: u32,
    pub eigenvalues: Vec<f64>,
    /// `weights[j][k] = ⟨w_j φ_k, φ_k⟩` with `φ_k` normalized in the mass inner product.
    pub weights: Vec<Vec<f64>>,
}

/// Eigenvalues (`count` lowest, or all below `lambda_max`) and optional
/// weighted norms of the eigenvectors.
pub fn solve_mode(
    surface: &Surface,
    mesh: &Mesh,
    m: u32,
    which: Which,
    weights: &[RadialWeight],
) -> Result<ModeSolve> {
    let op = ModeOperator::assemble(surface, mesh, m)?;
    let eigenvalues = match which {
        Which::Below(lam) => op.below(lam),
        Which::Lowest(k) => op.lowest(k),
    };
    let mut w = vec![Vec::with_capacity(eigenvalues.len()); weights.len()];
    if !weights.is_empty() {
        let wcell: Vec<Vec<f64>> = weights.iter().map(|wf| mesh.r.iter().map(|&r| wf(r)).collect()).collect();
        for &lam in &eigenvalues {
            let v = op.eigenvector(lam);
            for (j, wc) in wcell.iter().enumerate() {
                w[j].push(v.iter().zip(wc).map(|(x, c)| c * x * x).sum());
            }
        }
    }
    Ok(ModeSolve { m, eigenvalues, weights: w })
}

#[derive(Debug, Clone, Copy)]
pub enum Which {
    Below(f64),
    Lowest(usize),
}

/// One eigenvalue of one mode after Richardson extrapolation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Eigen {
    /// Extrapolated value `(4λ_fine − λ_coarse)/3`.
    pub lambda: f64,
    /// Fine-mesh value.
    pub lambda_fine: f64,
    /// `|λ_fine − λ_coarse|/3`: the fine-mesh error estimate, and a
    /// conservative bound for the extrapolated value.
    pub error: f64,
    pub mode: u32,
    pub radial_index: usize,
    /// 1 for `m = 0`, 2 for `±m`.
    pub multiplicity: u32,
    /// Extrapolated weighted norms, one per requested weight.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub weights: Vec<f64>,
}

/// Certificate that no mode above `m_max` has eigenvalues below `lambda_max`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Completeness {
    pub lambda_max: f64,
    pub m_max: u32,
    /// Largest warp value on the mesh: every mode with `m > f_max √Λ`
    /// has discrete spectrum above `Λ`.
    pub f_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Sorted by `lambda`.
    pub eigenvalues: Vec<Eigen>,
    pub lambda_cutoff: f64,
    pub completeness: Completeness,
    pub area: f64,
    pub closed: bool,
    pub mesh: MeshSpec,
    pub surface_hash: String,
}

/// A distinct eigenvalue with its total multiplicity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Level {
    pub lambda: f64,
    pub multiplicity: u32,
    pub error: f64,
}

impl SpectrumResult {
    /// Eigenvalues with multiplicity, expanded, sorted.
    pub fn expanded(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for e in &self.eigenvalues {
            for _ in 0..e.multiplicity {
                v.push(e.lambda);
            }
        }
        v
    }

    /// Merge eigenvalues closer than `max(1e−9, combined error)`.
    pub fn levels(&self) -> Vec<Level> {
        let mut out: Vec<Level> = Vec::new();
        for e in &self.eigenvalues {
            if let Some(last) = out.last_mut() {
                let tol = (1e-9f64).max(last.error + e.error).max(1e-9 * e.lambda.abs());
                if (e.lambda - last.lambda).abs() <= tol {
                    last.multiplicity += e.multiplicity;
                    last.error = last.error.max(e.error);
                    continue;
                }
            }
            out.push(Level { lambda: e.lambda, multiplicity: e.multiplicity, error: e.error });
        }
        out
    }

    /// Number of eigenvalues (with multiplicity) below `lambda`.
    pub fn count_below(&self, lambda: f64) -> usize {
        self.eigenvalues.iter().filter(|e| e.lambda < lambda).map(|e| e.multiplicity as usize).sum()
    }
}

/// Largest warp value over the mesh centres.
fn mesh_f_max(surface: &Surface, mesh: &Mesh) -> f64 {
    mesh.r.iter().map(|&r| surface.profile.f(r)).fold(0.0, f64::max)
}

/// Mesh chosen so that the coarse grid resolves wavelengths down to
/// `2π/√Λ` with `points_per_wavelength` cells, and the graded region with
/// at least 48 cells per e-fold.
pub fn auto_mesh(surface: &Surface, lambda_max: f64, points_per_wavelength: f64) -> MeshSpec {
    let scale = feature_scale(&surface.profile);
    let grading = if scale < 0.2 { Grading::clustered(scale) } else { Grading::UNIFORM };
    let r_end = surface.r_end();
    let k = lambda_max.max(1.0).sqrt();
    let mut hx = 2.0 * std::f64::consts::PI / (k * points_per_wavelength) / grading.c;
    if grading.a > 0.0 {
        hx = hx.min(grading.a / 48.0);
    }
    let cells = ((grading.x(r_end) / hx).ceil() as usize).max(64);
    MeshSpec { grading, cells }
}

/// Smallest length scale at which the warp changes character.
pub fn feature_scale(p: &Profile) -> f64 {
    use crate::geometry::Warp;
    match &p.warp {
        Warp::ZBlend { a, b, .. } => (b - a).min(*b),
        Warp::Scaled { eps, inner } => eps * feature_scale(inner),
        Warp::Glued { eps, z, .. } => eps * feature_scale(z),
        _ => 1.0,
    }
}

/// All eigenvalues below `lambda_max`, every mode, with Richardson
/// extrapolation between `mesh.cells` and `2·mesh.cells` cells.
pub fn full_spectrum(
    surface: &Surface,
    lambda_max: f64,
    mesh: MeshSpec,
    weights: &[RadialWeight],
) -> Result<SpectrumResult> {
    surface.check()?;
    let coarse = Mesh::new(mesh.grading, surface.r_end(), mesh.cells);
    let fine = coarse.refined();
    let f_max = mesh_f_max(surface, &fine).max(mesh_f_max(surface, &coarse));
    let m_max = (f_max * lambda_max.sqrt()).floor() as u32;
    let per_mode: Vec<Result<Vec<Eigen>>> = (0..=m_max)
        .into_par_iter()
        .map(|m| mode_eigen(surface, &coarse, &fine, m, lambda_max, weights))
        .collect();
    let mut eigenvalues = Vec::new();
    for r in per_mode {
        eigenvalues.extend(r?);
    }
    eigenvalues.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap().then(a.mode.cmp(&b.mode)));
    let area = crate::geometry::area(&surface.profile, surface.truncate_at)?.value;
    Ok(SpectrumResult {
        eigenvalues,
        lambda_cutoff: lambda_max,
        completeness: Completeness { lambda_max, m_max, f_max },
        area,
        closed: !surface.dirichlet(),
        mesh,
        surface_hash: surface_hash(surface),
    })
}

pub fn surface_hash(surface: &Surface) -> String {
    use sha2::{Digest, Sha256};
    let d = format!("{}|trunc={:?}", surface.profile.descriptor(), surface.truncate_at);
    hex::encode(Sha256::digest(d.as_bytes()))
}

/// Richardson-extrapolated eigenpairs of one mode below `lambda_max`.
pub fn mode_eigen(
    surface: &Surface,
    coarse: &Mesh,
    fine: &Mesh,
    m: u32,
    lambda_max: f64,
    weights: &[RadialWeight],
) -> Result<Vec<Eigen>> {
    let f = solve_mode(surface, fine, m, Which::Below(lambda_max), weights)?;
    let n = f.eigenvalues.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n >= coarse.cells() / 2 {
        return Err(Error::MeshTooCoarse(format!(
            "mode {m}: {n} eigenvalues below {lambda_max} on a {}-cell coarse mesh",
            coarse.cells()
        )));
    }
    let c = solve_mode(surface, coarse, m, Which::Lowest(n), weights)?;
    let mult = if m == 0 { 1 } else { 2 };
    Ok((0..n)
        .map(|k| {
            let (lf, lc) = (f.eigenvalues[k], c.eigenvalues[k]);
            Eigen {
                lambda: (4.0 * lf - lc) / 3.0,
                lambda_fine: lf,
                error: (lf - lc).abs() / 3.0,
                mode: m,
                radial_index: k,
                multiplicity: mult,
                weights: (0..weights.len())
                    .map(|j| (4.0 * f.weights[j][k] - c.weights[j][k]) / 3.0)
                    .collect(),
            }
        })
        .collect())
}

/// Eigenvalues of a single mode below `lambda_max` with Richardson errors.
pub fn mode_eigenvalues(surface: &Surface, m: u32, lambda_max: f64, mesh: MeshSpec) -> Result<Vec<Eigen>> {
    let coarse = Mesh::new(mesh.grading, surface.r_end(), mesh.cells);
    mode_eigen(surface, &coarse, &coarse.refined(), m, lambda_max, &[])
}

/// One row of the convergence table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub index: usize,
    pub lambda0: f64,
    /// `|λ_{ε,i} − λ_{0,i}|` per ε, in the order supplied.
    pub gaps: Vec<f64>,
    /// Discretization error of each gap (sum of both estimates).
    pub errors: Vec<f64>,
    pub decreasing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    pub rows: Vec<ConvergenceRow>,
}

/// Per-index gaps between a family of spectra and the limit spectrum.
/// Indices count eigenvalues with multiplicity, starting at 0.
pub fn spectral_convergence_report(
    family: &[(f64, SpectrumResult)],
    omega0: &SpectrumResult,
    i_max: usize,
) -> Result<ConvergenceReport> {
    let expand = |s: &SpectrumResult| -> Vec<(f64, f64)> {
        let mut v = Vec::new();
        for e in &s.eigenvalues {
            for _ in 0..e.multiplicity {
                v.push((e.lambda, e.error));
            }
        }
        v
    };
    let base = expand(omega0);
    let fam: Vec<Vec<(f64, f64)>> = family.iter().map(|(_, s)| expand(s)).collect();
    if base.len() <= i_max || fam.iter().any(|f| f.len() <= i_max) {
        return Err(Error::InvalidInput(format!("index {i_max} exceeds the certified range")));
    }
    let rows = (0..=i_max)
        .map(|i| {
            let gaps: Vec<f64> = fam.iter().map(|f| (f[i].0 - base[i].0).abs()).collect();
            let errors = fam.iter().map(|f| f[i].1 + base[i].1).collect();
            let decreasing = gaps.windows(2).all(|w| w[1] <= w[0]);
            ConvergenceRow { index: i, lambda0: base[i].0, gaps, errors, decreasing }
        })
        .collect();
    Ok(ConvergenceReport { epsilons: family.iter().map(|(e, _)| *e).collect(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_omega0, build_z, cone};
    use proptest::prelude::*;

    fn sphere() -> Surface {
        Surface::closed(build_omega0(1.0, "sphere", &[]).unwrap())
    }

    #[test]
    fn grading_round_trip() {
        let g = Grading { a: 0.25, s: 1e-3, c: 1.0 };
        for r in [0.0, 1e-5, 1e-3, 0.2, 3.0, 50.0] {
            assert!((g.r(g.x(r)) - r).abs() <= 1e-13 * (r + 1e-3));
        }
    }

    #[test]
    fn operator_is_symmetric_and_kills_constants() {
        let s = Surface::closed(build_omega0(0.7, "polyblend", &[]).unwrap());
        let mesh = Mesh::new(Grading::UNIFORM, 4.0, 200);
        let op = ModeOperator::assemble(&s, &mesh, 0).unwrap();
        let a = op.dense();
        assert_eq!((&a - a.transpose()).amax(), 0.0);
        // in symmetrized coordinates the constant becomes √M
        let v = nalgebra::DVector::from_iterator(op.len(), op.mass.iter().map(|m| m.sqrt()));
        let scale = op.diag.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!((&a * &v).amax() <= 1e-12 * scale * v.amax());
    }

    #[test]
    fn sphere_low_modes() {
        let s = sphere();
        let spec = MeshSpec { grading: Grading::UNIFORM, cells: 400 };
        let m0: Vec<f64> = mode_eigenvalues(&s, 0, 50.0, spec).unwrap().iter().map(|e| e.lambda).collect();
        let want = [0.0, 2.0, 6.0, 12.0, 20.0, 30.0, 42.0];
        assert_eq!(m0.len(), want.len());
        for (a, b) in m0.iter().zip(want) {
            assert!((a - b).abs() < 1e-6 * b.max(1.0), "{a} vs {b}");
        }
        let m1: Vec<f64> = mode_eigenvalues(&s, 1, 50.0, spec).unwrap().iter().map(|e| e.lambda).collect();
        assert_eq!(m1.len(), 6);
        assert!((m1[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn sphere_multiplicities() {
        let s = sphere();
        let res = full_spectrum(&s, 50.0, MeshSpec { grading: Grading::UNIFORM, cells: 300 }, &[]).unwrap();
        let levels = res.levels();
        let mults: Vec<u32> = levels.iter().map(|l| l.multiplicity).collect();
        assert_eq!(mults, vec![1, 3, 5, 7, 9, 11, 13]);
    }

    #[test]
    fn eigenvector_solves_problem() {
        let s = Surface::closed(build_omega0(0.7, "polyblend", &[]).unwrap());
        let mesh = Mesh::new(Grading::UNIFORM, 4.0, 300);
        let op = ModeOperator::assemble(&s, &mesh, 2).unwrap();
        let lam = op.lowest(3)[2];
        let v = op.eigenvector(lam);
        let a = op.dense();
        let r = &a * nalgebra::DVector::from_vec(v.clone()) - nalgebra::DVector::from_vec(v).scale(lam);
        assert!(r.amax() < 1e-8 * lam);
    }

    #[test]
    fn partition_weights_sum_to_one() {
        let s = Surface::closed(build_omega0(0.7, "polyblend", &[]).unwrap());
        let mesh = Mesh::new(Grading::UNIFORM, 4.0, 200);
        let w1: RadialWeight = std::sync::Arc::new(|r: f64| if r < 1.0 { 1.0 } else { 0.0 });
        let w2: RadialWeight = std::sync::Arc::new(|r: f64| if r < 1.0 { 0.0 } else { 1.0 });
        let sol = solve_mode(&s, &mesh, 1, Which::Lowest(10), &[w1, w2]).unwrap();
        for k in 0..10 {
            assert!((sol.weights[0][k] + sol.weights[1][k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn second_order_convergence() {
        let s = sphere();
        let errs: Vec<f64> = [100, 200, 400]
            .iter()
            .map(|&n| {
                let mesh = Mesh::new(Grading::UNIFORM, std::f64::consts::PI, n);
                let op = ModeOperator::assemble(&s, &mesh, 1).unwrap();
                (op.lowest(3)[2] - 12.0).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.1, "order {order}");
        }
    }

    #[test]
    fn rejects_wide_cones() {
        let s = Surface::closed(build_omega0(1.5, "polyblend", &[]).unwrap());
        let mesh = Mesh::new(Grading::UNIFORM, 4.0, 50);
        assert!(matches!(ModeOperator::assemble(&s, &mesh, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn truncated_cone_is_bessel() {
        // Dirichlet disk of radius 1 on the γ-cone: λ = j²_{m/γ, k}
        let s = Surface::truncated(cone(0.5).unwrap(), 1.0);
        let spec = MeshSpec { grading: Grading::UNIFORM, cells: 400 };
        // m = 1 on the γ = 1/2 cone is Bessel order 2; j_{2,1} = 5.135622301840683
        let e = mode_eigenvalues(&s, 1, 30.0, spec).unwrap();
        assert!((e[0].lambda - 5.135622301840683f64.powi(2)).abs() < 1e-6 * 26.4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn mode_monotone(m in 0u32..6, k in 0usize..5) {
            let s = Surface::closed(build_omega0(0.7, "polyblend", &[]).unwrap());
            let mesh = Mesh::new(Grading::UNIFORM, 4.0, 160);
            let a = ModeOperator::assemble(&s, &mesh, m).unwrap().lowest(k + 1)[k];
            let b = ModeOperator::assemble(&s, &mesh, m + 1).unwrap().lowest(k + 1)[k];
            prop_assert!(b >= a);
        }

        #[test]
        fn domain_monotone(r in 1.0f64..6.0, dr in 0.1f64..3.0, m in 0u32..3) {
            let z = build_z(0.7, "polyblend", &[]).unwrap();
            let g = Grading::clustered(0.4);
            let small = Mesh::new(g, r, 300);
            let big = small.extend_to(r + dr);
            let a = ModeOperator::assemble(&Surface::truncated(z.clone(), small.r_end), &small, m).unwrap().lowest(3);
            let b = ModeOperator::assemble(&Surface::truncated(z, big.r_end), &big, m).unwrap().lowest(3);
            for k in 0..3 {
                prop_assert!(b[k] <= a[k] * (1.0 + 1e-12));
            }
        }
    }
}
