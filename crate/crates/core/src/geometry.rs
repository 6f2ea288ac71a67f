//! Warped-product surfaces `dr² + f(r)² dθ²` with `θ ∈ [0, 2π)`.
//!
//! A flat cone of angle `2πγ` is `f = γr`. Profiles are analytic
//! (closed-form `f`, `f′`, `f″`) so every downstream quantity can be
//! evaluated pointwise.

use crate::error::{Error, Result};
use crate::quad;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::sync::Arc;

/// Ω₀ is exactly conic on `r ≤ OMEGA0_CONIC_END`.
pub const OMEGA0_CONIC_END: f64 = 2.0;
/// Z is exactly conic on `r ≥ Z_CONIC_START`.
pub const Z_CONIC_START: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub gamma: f64,
    pub dim_n: usize,
}

impl CrossSection {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Geometry(format!("cone parameter must be positive, got {gamma}")));
        }
        Ok(CrossSection { gamma, dim_n: 2 })
    }

    /// Circumference of the cross-section circle.
    pub fn length(&self) -> f64 {
        2.0 * PI * self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LeftEnd {
    ConicTip { gamma: f64 },
    SmoothPole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RightEnd {
    SmoothPole { r_top: f64 },
    ConicInfinity { gamma: f64 },
}

/// Degree-7 smoothstep on `[0, 1]`, clamped outside; returns `(S, S′, S″)`.
pub fn smoothstep7(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let y = 1.0 - x;
    let x2 = x * x;
    let s = x2 * x2 * (35.0 - 84.0 * x + 70.0 * x2 - 20.0 * x2 * x);
    let d1 = 140.0 * x2 * x * y * y * y;
    let d2 = 420.0 * x2 * y * y * (1.0 - 2.0 * x);
    (s, d1, d2)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warp {
    /// `γr` on `(0, ∞)`.
    Cone { gamma: f64 },
    /// `sin r` on `(0, π)`.
    Sphere,
    /// `γr` up to 2, blended over `[2, 2+w]` into `r_top − r`.
    Omega0Blend { gamma: f64, w: f64, rho: f64 },
    /// `r (1 + (γ−1) S((r−a)/(b−a)))`.
    ZBlend { gamma: f64, a: f64, b: f64 },
    /// `ε f(r/ε)`.
    Scaled { eps: f64, inner: Arc<Profile> },
    /// `ε f_Z(r/ε)` for `r ≤ 1`, `f_Ω₀(r)` beyond.
    Glued { eps: f64, omega0: Arc<Profile>, z: Arc<Profile> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub warp: Warp,
    pub left: LeftEnd,
    pub right: RightEnd,
    /// Interval on which `f = γr` identically.
    pub exact_conic: Option<(f64, f64)>,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpValue {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

impl Profile {
    /// Right end of the r-interval (`∞` for conic ends).
    pub fn r_max(&self) -> f64 {
        match self.right {
            RightEnd::SmoothPole { r_top } => r_top,
            RightEnd::ConicInfinity { .. } => f64::INFINITY,
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.right, RightEnd::SmoothPole { .. })
    }

    pub fn eval(&self, r: f64) -> WarpValue {
        match &self.warp {
            Warp::Cone { gamma } => WarpValue { f: gamma * r, df: *gamma, d2f: 0.0 },
            Warp::Sphere => WarpValue { f: r.sin(), df: r.cos(), d2f: -r.sin() },
            Warp::Omega0Blend { gamma, w, rho } => {
                let r_top = OMEGA0_CONIC_END + w + rho;
                let (s, s1, s2) = smoothstep7((r - OMEGA0_CONIC_END) / w);
                let (s1, s2) = (s1 / w, s2 / (w * w));
                let (c, c1) = (gamma * r, *gamma);
                let (p, p1) = (r_top - r, -1.0);
                WarpValue {
                    f: (1.0 - s) * c + s * p,
                    df: (1.0 - s) * c1 + s * p1 + s1 * (p - c),
                    d2f: 2.0 * s1 * (p1 - c1) + s2 * (p - c),
                }
            }
            Warp::ZBlend { gamma, a, b } => {
                let h = b - a;
                let (s, s1, s2) = smoothstep7((r - a) / h);
                let (s1, s2) = (s1 / h, s2 / (h * h));
                let g = gamma - 1.0;
                WarpValue {
                    f: r * (1.0 + g * s),
                    df: 1.0 + g * (s + r * s1),
                    d2f: g * (2.0 * s1 + r * s2),
                }
            }
            Warp::Scaled { eps, inner } => {
                let v = inner.eval(r / eps);
                WarpValue { f: eps * v.f, df: v.df, d2f: v.d2f / eps }
            }
            Warp::Glued { eps, omega0, z } => {
                if r <= 1.0 {
                    let v = z.eval(r / eps);
                    WarpValue { f: eps * v.f, df: v.df, d2f: v.d2f / eps }
                } else {
                    omega0.eval(r)
                }
            }
        }
    }

    pub fn f(&self, r: f64) -> f64 {
        self.eval(r).f
    }

    /// Gaussian curvature `−f″/f`.
    pub fn gauss_curvature(&self, r: f64) -> f64 {
        let v = self.eval(r);
        -v.d2f / v.f
    }

    /// Points where the warp is only finitely smooth, inside `(0, r_max)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = match &self.warp {
            Warp::Cone { .. } | Warp::Sphere => vec![],
            Warp::Omega0Blend { w, .. } => vec![OMEGA0_CONIC_END, OMEGA0_CONIC_END + w],
            Warp::ZBlend { a, b, .. } => vec![*a, *b],
            Warp::Scaled { eps, inner } => inner.breakpoints().iter().map(|r| r * eps).collect(),
            Warp::Glued { eps, omega0, z } => {
                let mut v: Vec<f64> = z.breakpoints().iter().map(|r| r * eps).collect();
                v.push(1.0);
                v.extend(omega0.breakpoints());
                v
            }
        };
        b.retain(|&r| r > 0.0 && r < self.r_max());
        b.sort_by(|a, b| a.partial_cmp(b).unwrap());
        b.dedup();
        b
    }

    /// Largest warp value on `[0, r_max]` (or `[0, r_cut]` for open ends).
    pub fn f_max(&self, r_cut: f64) -> f64 {
        let hi = self.r_max().min(r_cut);
        let n = 4000;
        (0..=n).map(|i| self.f(hi * i as f64 / n as f64)).fold(0.0, f64::max)
    }

    /// Canonical description, stable across runs; feeds result hashes.
    pub fn descriptor(&self) -> String {
        match &self.warp {
            Warp::Cone { gamma } => format!("cone(gamma={gamma})"),
            Warp::Sphere => "sphere".to_string(),
            Warp::Omega0Blend { gamma, w, rho } => format!("omega0-polyblend(gamma={gamma},w={w},rho={rho})"),
            Warp::ZBlend { gamma, a, b } => format!("z-polyblend(gamma={gamma},a={a},b={b})"),
            Warp::Scaled { eps, inner } => format!("scaled(eps={eps},{})", inner.descriptor()),
            Warp::Glued { eps, omega0, z } => {
                format!("glued(eps={eps},{},{})", omega0.descriptor(), z.descriptor())
            }
        }
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.descriptor().as_bytes()))
    }

    /// `(r, f, f′, f″)` on a uniform grid of `n + 1` points over
    /// `[0, min(r_max, r_cut)]`.
    pub fn sample(&self, n: usize, r_cut: f64) -> Vec<[f64; 4]> {
        let hi = self.r_max().min(r_cut);
        (0..=n)
            .map(|i| {
                let r = hi * i as f64 / n as f64;
                let v = self.eval(r);
                [r, v.f, v.df, v.d2f]
            })
            .collect()
    }
}

/// The conic tip model `C_N`.
pub fn cone(gamma: f64) -> Result<Profile> {
    CrossSection::new(gamma)?;
    Ok(Profile {
        warp: Warp::Cone { gamma },
        left: LeftEnd::ConicTip { gamma },
        right: RightEnd::ConicInfinity { gamma },
        exact_conic: Some((0.0, f64::INFINITY)),
        gamma,
    })
}

/// Closed surface with one conic tip at `r = 0`.
///
/// `cap_family`: `"polyblend"` (params `[w, rho]`, default `[1, 1]`) or
/// `"sphere"` (γ = 1 only; the round unit sphere).
pub fn build_omega0(gamma: f64, cap_family: &str, params: &[f64]) -> Result<Profile> {
    CrossSection::new(gamma)?;
    let p = match cap_family {
        "sphere" => {
            if gamma != 1.0 || !params.is_empty() {
                return Err(Error::Geometry("sphere cap requires gamma = 1 and no params".into()));
            }
            Profile {
                warp: Warp::Sphere,
                left: LeftEnd::SmoothPole,
                right: RightEnd::SmoothPole { r_top: PI },
                exact_conic: None,
                gamma,
            }
        }
        "polyblend" => {
            let (w, rho) = match params {
                [] => (1.0, 1.0),
                [w, rho] => (*w, *rho),
                _ => return Err(Error::Geometry("polyblend cap takes [w, rho]".into())),
            };
            if !(w > 0.0 && rho > 0.0) {
                return Err(Error::Geometry(format!("cap widths must be positive: w={w}, rho={rho}")));
            }
            let r_top = OMEGA0_CONIC_END + w + rho;
            let left = if gamma == 1.0 { LeftEnd::SmoothPole } else { LeftEnd::ConicTip { gamma } };
            Profile {
                warp: Warp::Omega0Blend { gamma, w, rho },
                left,
                right: RightEnd::SmoothPole { r_top },
                exact_conic: Some((0.0, OMEGA0_CONIC_END)),
                gamma,
            }
        }
        other => return Err(Error::Geometry(format!("unknown cap family {other:?}"))),
    };
    validate_closed(&p)?;
    Ok(p)
}

/// Complete surface, smooth at `r = 0`, exactly conic for `r ≥ 1/2`.
///
/// `cap_family`: `"polyblend"` with params `[a, b]`, `0 ≤ a < b ≤ 1/2`
/// (default `[0.1, 0.5]`). With γ = 1 this is the flat plane.
pub fn build_z(gamma: f64, cap_family: &str, params: &[f64]) -> Result<Profile> {
    CrossSection::new(gamma)?;
    if cap_family != "polyblend" {
        return Err(Error::Geometry(format!("unknown cap family {cap_family:?}")));
    }
    let (a, b) = match params {
        [] => (0.1, 0.5),
        [a, b] => (*a, *b),
        _ => return Err(Error::Geometry("polyblend Z takes [a, b]".into())),
    };
    if !(0.0 <= a && a < b && b <= Z_CONIC_START) {
        return Err(Error::Geometry(format!("need 0 <= a < b <= 1/2, got a={a}, b={b}")));
    }
    let p = Profile {
        warp: Warp::ZBlend { gamma, a, b },
        left: LeftEnd::SmoothPole,
        right: RightEnd::ConicInfinity { gamma },
        exact_conic: Some((if gamma == 1.0 { 0.0 } else { b }, f64::INFINITY)),
        gamma,
    };
    let v = p.eval(0.0);
    if (v.df - 1.0).abs() > 1e-12 {
        return Err(Error::Geometry("Z does not close smoothly at r = 0".into()));
    }
    Ok(p)
}

/// `ε·Z`, again a complete surface conic at infinity.
pub fn scale(z: &Profile, eps: f64) -> Result<Profile> {
    if !(eps > 0.0) {
        return Err(Error::Geometry(format!("scale must be positive, got {eps}")));
    }
    if z.is_closed() {
        return Err(Error::Geometry("only open profiles are rescaled".into()));
    }
    Ok(Profile {
        warp: Warp::Scaled { eps, inner: Arc::new(z.clone()) },
        left: z.left,
        right: z.right,
        exact_conic: z.exact_conic.map(|(a, b)| (a * eps, b * eps)),
        gamma: z.gamma,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GluedSurface {
    pub epsilon: f64,
    pub omega0: Profile,
    pub z: Profile,
    pub profile: Profile,
}

/// Replace `r ≤ 1` of Ω₀ by `ε·{Z ∩ r ≤ 1/ε}`.
pub fn glue(omega0: &Profile, z: &Profile, epsilon: f64) -> Result<GluedSurface> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Geometry(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    if (omega0.gamma - z.gamma).abs() > 0.0 {
        return Err(Error::Geometry(format!(
            "cone parameters differ: omega0 {} vs Z {}",
            omega0.gamma, z.gamma
        )));
    }
    if !omega0.is_closed() || z.is_closed() {
        return Err(Error::Geometry("glue expects a closed Omega0 and an open Z".into()));
    }
    match (omega0.exact_conic, z.exact_conic) {
        (Some((0.0, hi)), Some((lo, _))) if hi >= 1.0 && lo * epsilon <= 1.0 => {}
        _ => return Err(Error::Geometry("profiles are not conic across r = 1".into())),
    }
    let profile = Profile {
        warp: Warp::Glued { eps: epsilon, omega0: Arc::new(omega0.clone()), z: Arc::new(z.clone()) },
        left: z.left,
        right: omega0.right,
        exact_conic: z.exact_conic.map(|(lo, _)| (lo * epsilon, omega0.exact_conic.unwrap().1)),
        gamma: z.gamma,
    };
    Ok(GluedSurface { epsilon, omega0: omega0.clone(), z: z.clone(), profile })
}

fn validate_closed(p: &Profile) -> Result<()> {
    let r_top = p.r_max();
    let v = p.eval(r_top);
    if v.f.abs() > 1e-12 || (v.df.abs() - 1.0).abs() > 1e-12 {
        return Err(Error::Geometry(format!(
            "cap does not close smoothly: f({r_top}) = {}, f'({r_top}) = {}",
            v.f, v.df
        )));
    }
    let n = 20_000;
    for i in 1..n {
        let r = r_top * i as f64 / n as f64;
        if p.f(r) <= 0.0 {
            return Err(Error::Geometry(format!("warp not positive at r = {r}")));
        }
    }
    Ok(())
}

fn quad_breaks(p: &Profile, r_hi: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    b.extend(p.breakpoints().into_iter().filter(|&r| r < r_hi));
    b.push(r_hi);
    b
}

/// `2π ∫ f dr` over the closed surface, or over `r ≤ r_cut` for open ones.
pub fn area(p: &Profile, r_cut: Option<f64>) -> Result<quad::Quad> {
    let hi = match (p.is_closed(), r_cut) {
        (true, None) => p.r_max(),
        (_, Some(r)) => r.min(p.r_max()),
        (false, None) => return Err(Error::Geometry("open surface needs a cutoff radius".into())),
    };
    let q = quad::integrate_breaks(&|r| p.f(r), &quad_breaks(p, hi), 1e-13 * hi.max(1.0).powi(2))?;
    Ok(quad::Quad { value: 2.0 * PI * q.value, error: 2.0 * PI * q.error })
}

/// `∫ K dA = −2π ∫ f″ dr` over `r ≤ r_cut` (the whole surface if closed).
pub fn total_curvature(p: &Profile, r_cut: Option<f64>) -> Result<f64> {
    let hi = r_cut.unwrap_or(p.r_max()).min(p.r_max());
    if !hi.is_finite() {
        return Err(Error::Geometry("open surface needs a cutoff radius".into()));
    }
    let q = quad::integrate_breaks(&|r| p.eval(r).d2f, &quad_breaks(p, hi), 1e-12)?;
    Ok(-2.0 * PI * q.value)
}

/// `∫K dA` + tip defect + turning at the conic end − `2πχ`; zero up to
/// quadrature error for a valid profile.
pub fn gauss_bonnet_defect(p: &Profile) -> Result<f64> {
    let tip = match p.left {
        LeftEnd::ConicTip { gamma } => 2.0 * PI * (1.0 - gamma),
        LeftEnd::SmoothPole => 0.0,
    };
    match p.right {
        RightEnd::SmoothPole { .. } => Ok(total_curvature(p, None)? + tip - 4.0 * PI),
        RightEnd::ConicInfinity { gamma } => {
            let far = p.exact_conic.map_or(10.0, |(lo, _)| lo.max(1.0) * 2.0);
            Ok(total_curvature(p, Some(far))? + 2.0 * PI * gamma + tip - 2.0 * PI)
        }
    }
}

/// Largest `|f″(x+h) − f″(x−h)|` over the warp's junction points.
pub fn junction_jump(p: &Profile, h: f64) -> f64 {
    p.breakpoints()
        .iter()
        .map(|&x| (p.eval(x + h).d2f - p.eval(x - h).d2f).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cutoff {
    Chi1,
    Chi2,
    Chi1Tilde,
    Chi2Tilde,
}

/// The four radial cutoffs used by the gluing.
///
/// `χ₁ = 1` on `r ≤ 15/16`, `0` on `r ≥ 17/16`; `χ₂ = 1 − χ₁`;
/// `χ̃₁ = 1` on `r ≤ 9/8`, `0` on `r ≥ 5/4`; `χ̃₂ = 0` on `r ≤ 3/4`,
/// `1` on `r ≥ 7/8`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CutoffFamily;

impl CutoffFamily {
    /// `(χ, χ′, χ″)` at `r`.
    pub fn eval(&self, which: Cutoff, r: f64) -> (f64, f64, f64) {
        let down = |lo: f64, hi: f64| {
            let h = hi - lo;
            let (s, s1, s2) = smoothstep7((r - lo) / h);
            (1.0 - s, -s1 / h, -s2 / (h * h))
        };
        match which {
            Cutoff::Chi1 => down(15.0 / 16.0, 17.0 / 16.0),
            Cutoff::Chi2 => {
                let (v, d1, d2) = down(15.0 / 16.0, 17.0 / 16.0);
                (1.0 - v, -d1, -d2)
            }
            Cutoff::Chi1Tilde => down(9.0 / 8.0, 5.0 / 4.0),
            Cutoff::Chi2Tilde => {
                let (v, d1, d2) = down(3.0 / 4.0, 7.0 / 8.0);
                (1.0 - v, -d1, -d2)
            }
        }
    }

    pub fn value(&self, which: Cutoff, r: f64) -> f64 {
        self.eval(which, r).0
    }

    /// Interval outside which `χ′ = 0`.
    pub fn transition(&self, which: Cutoff) -> (f64, f64) {
        match which {
            Cutoff::Chi1 | Cutoff::Chi2 => (15.0 / 16.0, 17.0 / 16.0),
            Cutoff::Chi1Tilde => (9.0 / 8.0, 5.0 / 4.0),
            Cutoff::Chi2Tilde => (3.0 / 4.0, 7.0 / 8.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sphere_area_and_curvature() {
        let s = build_omega0(1.0, "sphere", &[]).unwrap();
        assert_abs_diff_eq!(area(&s, None).unwrap().value, 4.0 * PI, epsilon = 1e-12);
        for r in [0.3, 1.0, 2.9] {
            assert_abs_diff_eq!(s.gauss_curvature(r), 1.0, epsilon = 1e-14);
        }
        assert_eq!(junction_jump(&s, 1e-4), 0.0);
    }

    #[test]
    fn cone_partial_area() {
        let c = cone(0.7).unwrap();
        assert_abs_diff_eq!(area(&c, Some(3.0)).unwrap().value, PI * 0.7 * 9.0, epsilon = 1e-12);
    }

    #[test]
    fn omega0_is_conic_then_closes() {
        let o = build_omega0(0.7, "polyblend", &[]).unwrap();
        for r in [0.01, 0.5, 1.9999] {
            assert_eq!(o.f(r), 0.7 * r);
        }
        assert_eq!(o.r_max(), 4.0);
        assert_abs_diff_eq!(gauss_bonnet_defect(&o).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn junction_jump_vanishes_under_refinement() {
        let o = build_omega0(0.7, "polyblend", &[]).unwrap();
        let j: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&h| junction_jump(&o, h)).collect();
        assert!(j[1] < 0.2 * j[0] && j[2] < 0.2 * j[1], "{j:?}");
    }

    #[test]
    fn z_plane_and_defect() {
        let plane = build_z(1.0, "polyblend", &[]).unwrap();
        for r in [0.05, 0.3, 7.0] {
            assert_eq!(plane.f(r), r);
        }
        let z = build_z(0.7, "polyblend", &[]).unwrap();
        assert_eq!(z.f(0.5), 0.35);
        assert_eq!(z.f(40.0), 28.0);
        assert_abs_diff_eq!(gauss_bonnet_defect(&z).unwrap(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(total_curvature(&z, Some(2.0)).unwrap(), 2.0 * PI * 0.3, epsilon = 1e-10);
    }

    #[test]
    fn gluing_overlap_is_exact() {
        let o = build_omega0(0.7, "polyblend", &[]).unwrap();
        let z = build_z(0.7, "polyblend", &[]).unwrap();
        let g = glue(&o, &z, 0.125).unwrap();
        let mut worst = 0.0f64;
        for i in 0..=200 {
            let r = 0.75 + 1.25 * i as f64 / 200.0;
            worst = worst.max((g.profile.f(r) - 0.7 * r).abs());
        }
        assert_eq!(worst, 0.0);
        assert_abs_diff_eq!(gauss_bonnet_defect(&g.profile).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn trivial_gluing_reproduces_omega0() {
        let o = build_omega0(1.0, "polyblend", &[]).unwrap();
        let z = build_z(1.0, "polyblend", &[]).unwrap();
        let g = glue(&o, &z, 0.25).unwrap();
        for i in 1..400 {
            let r = 4.0 * i as f64 / 400.0;
            assert_eq!(g.profile.eval(r), o.eval(r));
        }
    }

    #[test]
    fn glue_rejects_bad_input() {
        let o = build_omega0(0.7, "polyblend", &[]).unwrap();
        let z = build_z(0.6, "polyblend", &[]).unwrap();
        assert!(glue(&o, &z, 0.1).is_err());
        let z = build_z(0.7, "polyblend", &[]).unwrap();
        assert!(glue(&o, &z, 0.5).is_err());
        assert!(build_omega0(0.7, "sphere", &[]).is_err());
        assert!(build_z(0.7, "polyblend", &[0.3, 0.6]).is_err());
    }

    #[test]
    fn area_difference_is_quadratic_in_eps() {
        let o = build_omega0(0.7, "polyblend", &[]).unwrap();
        let z = build_z(0.7, "polyblend", &[]).unwrap();
        let a0 = area(&o, None).unwrap().value;
        let d: Vec<f64> = (3..7)
            .map(|k| {
                let g = glue(&o, &z, 0.5f64.powi(k)).unwrap();
                area(&g.profile, None).unwrap().value - a0
            })
            .collect();
        for w in d.windows(2) {
            assert_abs_diff_eq!(w[0] / w[1], 4.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn cutoffs_nest() {
        let c = CutoffFamily;
        for i in 0..=400 {
            let r = 2.0 * i as f64 / 400.0;
            let chi1 = c.value(Cutoff::Chi1, r);
            assert_abs_diff_eq!(chi1 + c.value(Cutoff::Chi2, r), 1.0, epsilon = 1e-15);
            if chi1 > 0.0 {
                assert_eq!(c.value(Cutoff::Chi1Tilde, r), 1.0);
            }
            if chi1 < 1.0 {
                assert_eq!(c.value(Cutoff::Chi2Tilde, r), 1.0);
            }
        }
        assert_eq!(c.value(Cutoff::Chi2Tilde, 0.75), 0.0);
    }

    proptest! {
        #[test]
        fn smoothstep_derivatives_consistent(x in 0.01f64..0.99) {
            let h = 1e-6;
            let (_, d1, d2) = smoothstep7(x);
            let fd1 = (smoothstep7(x + h).0 - smoothstep7(x - h).0) / (2.0 * h);
            let fd2 = (smoothstep7(x + h).1 - smoothstep7(x - h).1) / (2.0 * h);
            prop_assert!((d1 - fd1).abs() < 1e-7);
            prop_assert!((d2 - fd2).abs() < 1e-6);
        }

        #[test]
        fn chi1_nonincreasing(a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let c = CutoffFamily;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(c.value(Cutoff::Chi1, hi) <= c.value(Cutoff::Chi1, lo));
        }

        #[test]
        fn scaled_area_law(eps in 0.05f64..0.45) {
            let z = build_z(0.7, "polyblend", &[]).unwrap();
            let ez = scale(&z, eps).unwrap();
            let lhs = area(&ez, Some(1.0)).unwrap().value;
            let rhs = eps * eps * area(&z, Some(1.0 / eps)).unwrap().value;
            prop_assert!((lhs - rhs).abs() < 1e-10 * rhs);
        }

        #[test]
        fn warp_derivatives_consistent(r in 0.05f64..3.95) {
            let o = build_omega0(0.7, "polyblend", &[]).unwrap();
            let h = 1e-6;
            let fd = (o.f(r + h) - o.f(r - h)) / (2.0 * h);
            prop_assert!((o.eval(r).df - fd).abs() < 1e-7);
        }
    }
}
