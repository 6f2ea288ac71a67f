//! Special functions needed by the kernels and the Mellin assembly.

use statrs::function::gamma::ln_gamma;

/// Euler–Mascheroni constant; also the `s²` coefficient of `1/Γ(s)`.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Coefficients of `1/Γ(s) = s + c₂ s² + c₃ s³ + c₄ s⁴ + …` at `s = 0`.
pub fn inv_gamma_series() -> [f64; 5] {
    let g = EULER_GAMMA;
    let z2 = std::f64::consts::PI.powi(2) / 6.0;
    let z3 = 1.202_056_903_159_594_3;
    let c3 = 0.5 * g * g - 0.5 * z2;
    let c4 = g.powi(3) / 6.0 - g * z2 / 2.0 + z3 / 3.0;
    [0.0, 1.0, g, c3, c4]
}

/// `log det Δ` of the unit round sphere, `1/2 − 4 ζ_R'(−1)`, with
/// `ζ_R'(−1) = 1/12 − log A` (Glaisher–Kinkelin constant `A`).
pub fn log_det_unit_sphere() -> f64 {
    let log_glaisher = 0.248_754_477_033_784_26;
    0.5 - 4.0 * (1.0 / 12.0 - log_glaisher)
}

/// Exponentially scaled modified Bessel function `e^{-x} I_ν(x)` for
/// `ν ≥ 0`, `x ≥ 0`.
///
/// The ascending series has only positive terms, so it is summed outward from
/// its largest term with every term formed in log space. This is stable for
/// any argument and costs `O(√x)` terms away from the peak.
pub fn bessel_i_scaled(nu: f64, x: f64) -> f64 {
    debug_assert!(nu >= 0.0 && x >= 0.0);
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let lx = (0.5 * x).ln();
    let log_term = |k: f64| (2.0 * k + nu) * lx - ln_gamma(k + 1.0) - ln_gamma(k + nu + 1.0) - x;
    // ratio T_{k+1}/T_k = (x/2)^2 / ((k+1)(k+1+ν)) crosses 1 near k*
    let peak = ((-nu + (nu * nu + x * x).sqrt()) * 0.5).floor().max(0.0);
    let mut sum = 0.0;
    // downward from the peak (inclusive), using the exact ratio
    let mut t = log_term(peak).exp();
    let mut k = peak;
    let peak_val = t;
    loop {
        sum += t;
        if k == 0.0 {
            break;
        }
        t *= k * (k + nu) / (0.25 * x * x);
        k -= 1.0;
        if t < 1e-18 * sum {
            break;
        }
    }
    // upward
    let mut t = peak_val;
    let mut k = peak;
    loop {
        t *= 0.25 * x * x / ((k + 1.0) * (k + 1.0 + nu));
        k += 1.0;
        sum += t;
        if t < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Exponential integral `E₁(x) = ∫₁^∞ e^{-xt}/t dt` for `x > 0`.
pub fn exp_int_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires x > 0");
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        (-x).exp() * scaled_e1_cf(x)
    }
}

/// `e^x E₁(x)` for `x ≥ 1` by the modified Lentz continued fraction.
fn scaled_e1_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bessel_integer_orders_sum_to_one() {
        // Σ_{m∈ℤ} I_{|m|}(x) = e^x
        for &(x, tol) in &[(0.1, 1e-14), (1.0, 1e-14), (7.5, 1e-14), (60.0, 1e-13), (900.0, 5e-13)] {
            let mut s = bessel_i_scaled(0.0, x);
            let mut m = 1.0;
            loop {
                let t = bessel_i_scaled(m, x);
                s += 2.0 * t;
                if t < 1e-18 {
                    break;
                }
                m += 1.0;
            }
            assert_relative_eq!(s, 1.0, max_relative = tol);
        }
    }

    #[test]
    fn bessel_half_order_closed_form() {
        // I_{1/2}(x) = sqrt(2/(πx)) sinh x
        for &x in &[0.01, 0.5, 3.0, 25.0] {
            let exact = (2.0 / (std::f64::consts::PI * x)).sqrt() * (1.0 - (-2.0 * x).exp()) * 0.5;
            assert_relative_eq!(bessel_i_scaled(0.5, x), exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn e1_reference_values() {
        assert_relative_eq!(exp_int_e1(1.0), 0.219_383_934_395_520_3, max_relative = 1e-14);
        assert_relative_eq!(exp_int_e1(0.1), 1.822_923_958_419_390_7, max_relative = 1e-13);
        assert_relative_eq!(exp_int_e1(5.0), 0.001_148_295_591_275_325_8, max_relative = 1e-13);
    }

    #[test]
    fn inverse_gamma_series_matches_finite_difference() {
        let c = inv_gamma_series();
        let s = 1e-3;
        let approx = c[1] * s + c[2] * s * s + c[3] * s.powi(3) + c[4] * s.powi(4);
        let exact = 1.0 / statrs::function::gamma::gamma(s);
        assert_relative_eq!(approx, exact, max_relative = 1e-12);
    }
}
