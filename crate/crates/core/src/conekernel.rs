//! Exact diagonal heat kernels of the plane and of the flat cone.
//!
//! On the cone `dr² + γ²r²dθ²` (angle `2πγ`) the diagonal kernel is
//! `(1/(4πγt))·S(r²/2t)` with `S(x) = e^{−x} Σ_{m∈ℤ} I_{|m|/γ}(x)`.

use crate::error::{Error, Result};
use crate::quad;
use crate::special::bessel_i_scaled;
use std::f64::consts::PI;

/// Above this `x = r²/2t` the mode sum is replaced by the geometric image
/// sum; neglected diffraction terms are `O(e^{−2x})`.
pub const IMAGE_SWITCH: f64 = 50.0;

/// `1/(4πt)`.
pub fn plane_diag(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    Ok(1.0 / (4.0 * PI * t))
}

/// `S(x) = e^{−x} Σ_{m∈ℤ} I_{|m|/γ}(x)`; tends to `γ` as `x → ∞`.
pub fn mode_sum(x: f64, gamma: f64) -> f64 {
    if x >= IMAGE_SWITCH {
        return image_sum(x, gamma);
    }
    let head = bessel_i_scaled(0.0, x);
    let mut s = head;
    let mut m = 1u32;
    loop {
        let nu = m as f64 / gamma;
        let t = bessel_i_scaled(nu, x);
        s += 2.0 * t;
        // I_ν decreases in ν, so once a term is negligible all later ones are
        if t < 1e-17 * head && nu > x {
            break;
        }
        m += 1;
    }
    s
}

/// Large-`x` form of [`mode_sum`]: `γ Σ_{|kα| ≤ π} w_k e^{−x(1 − cos kα)}`
/// over rotations `kα`, `α = 2πγ`, with weight ½ on rotations by exactly `±π`.
pub fn image_sum(x: f64, gamma: f64) -> f64 {
    let alpha = 2.0 * PI * gamma;
    let mut s = 1.0;
    let mut k = 1.0;
    loop {
        let ang = k * alpha;
        if ang > PI * (1.0 + 1e-12) {
            break;
        }
        let w = if (ang - PI).abs() <= 1e-12 * PI { 0.5 } else { 1.0 };
        s += 2.0 * w * (-x * (1.0 - ang.cos())).exp();
        k += 1.0;
    }
    gamma * s
}

/// Diagonal heat kernel of the γ-cone at distance `r` from the tip.
pub fn cone_diag(t: f64, r: f64, gamma: f64) -> Result<f64> {
    if !(t > 0.0 && r > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidInput(format!("need t, r, gamma > 0; got {t}, {r}, {gamma}")));
    }
    Ok(mode_sum(r * r / (2.0 * t), gamma) / (4.0 * PI * gamma * t))
}

/// `c(γ) = ½ ∫₀^∞ (S(x) − γ) dx`, the t-independent excess of the cone's
/// heat trace over its area term.
pub fn cone_trace_excess(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    if gamma == 1.0 {
        return Ok(0.0);
    }
    let g = |x: f64| mode_sum(x, gamma) - gamma;
    let breaks: Vec<f64> = [0.0, 0.5, 2.0, 6.0, 15.0, 30.0, IMAGE_SWITCH].to_vec();
    let head = quad::integrate_breaks(&g, &breaks, 1e-13)?;
    // tail from the image sum in closed form
    let alpha = 2.0 * PI * gamma;
    let mut tail = 0.0;
    let mut k = 1.0;
    loop {
        let ang = k * alpha;
        if ang > PI * (1.0 + 1e-12) {
            break;
        }
        let w = if (ang - PI).abs() <= 1e-12 * PI { 0.5 } else { 1.0 };
        let c = 1.0 - ang.cos();
        tail += 2.0 * w * gamma * (-IMAGE_SWITCH * c).exp() / c;
        k += 1.0;
    }
    Ok(0.5 * (head.value + tail))
}

/// Local heat coefficient `u_k(1, y)` of the flat 2D cone.
pub fn u_coefficients(gamma: f64, k: usize) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    match k {
        0 => Ok(1.0 / (4.0 * PI)),
        // flat metric: every curvature invariant vanishes; odd orders vanish in the interior
        1 | 2 => Ok(0.0),
        _ => Err(Error::Unsupported(format!("u_{k} in dimension 2"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn plane_values() {
        assert_relative_eq!(plane_diag(1.0).unwrap(), 1.0 / (4.0 * PI));
        assert_relative_eq!(plane_diag(1.0 / (4.0 * PI)).unwrap(), 1.0);
        assert!(plane_diag(0.0).is_err());
    }

    #[test]
    fn gamma_one_is_plane() {
        for &(t, r) in &[(1.0, 1.0), (0.01, 2.0), (3.0, 0.1), (0.1, 5.0)] {
            assert_relative_eq!(cone_diag(t, r, 1.0).unwrap(), plane_diag(t).unwrap(), max_relative = 1e-13);
        }
    }

    #[test]
    fn half_angle_image_identity() {
        // γ = 1/2: the cone is ℝ²/{±1}, kernel (1/(4πt))(1 + e^{−r²/t})
        for &(t, r) in &[(1.0f64, 1.0f64), (0.3, 0.2), (2.0, 3.0)] {
            let exact = (1.0 + (-r * r / t).exp()) / (4.0 * PI * t);
            assert_relative_eq!(cone_diag(t, r, 0.5).unwrap(), exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn third_angle_image_identity() {
        for &(t, r) in &[(1.0f64, 1.0f64), (0.5, 1.7)] {
            let x = r * r / (2.0 * t);
            let exact = (1.0 + 2.0 * (-x * 1.5).exp()) / (4.0 * PI * t);
            assert_relative_eq!(cone_diag(t, r, 1.0 / 3.0).unwrap(), exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn image_switch_is_continuous() {
        for g in [0.3, 0.5, 0.7, 0.9] {
            let a = mode_sum(IMAGE_SWITCH * (1.0 - 1e-9), g);
            let b = image_sum(IMAGE_SWITCH, g);
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn excess_values() {
        assert_eq!(cone_trace_excess(1.0).unwrap(), 0.0);
        assert_relative_eq!(cone_trace_excess(0.5).unwrap(), 0.125, max_relative = 1e-11);
    }

    #[test]
    fn u_coefficients_flat() {
        assert_relative_eq!(u_coefficients(0.7, 0).unwrap(), 1.0 / (4.0 * PI));
        assert_eq!(u_coefficients(0.7, 2).unwrap(), 0.0);
        assert!(u_coefficients(0.7, 4).is_err());
    }

    proptest! {
        #[test]
        fn parabolic_scaling(t in 0.05f64..5.0, r in 0.05f64..3.0, c in 0.2f64..5.0, g in 0.2f64..1.0) {
            let a = cone_diag(c * t, c.sqrt() * r, g).unwrap();
            let b = cone_diag(t, r, g).unwrap() / c;
            prop_assert!((a - b).abs() <= 1e-12 * b);
        }

        #[test]
        fn positive(t in 0.01f64..10.0, r in 0.01f64..10.0, g in 0.1f64..1.0) {
            prop_assert!(cone_diag(t, r, g).unwrap() > 0.0);
        }
    }
}
