//! Truncated Laurent series in `s` about `s = 0`, used to assemble Mellin
//! transforms term by term.

use crate::special::inv_gamma_series;

/// Lowest stored power.
pub const LO: i32 = -3;
/// Highest stored power.
pub const HI: i32 = 3;
const LEN: usize = (HI - LO + 1) as usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Laurent {
    c: [f64; LEN],
}

impl Default for Laurent {
    fn default() -> Self {
        Self::zero()
    }
}

impl Laurent {
    pub fn zero() -> Self {
        Laurent { c: [0.0; LEN] }
    }

    /// `a · s^k`.
    pub fn monomial(a: f64, k: i32) -> Self {
        let mut l = Self::zero();
        l.set(k, a);
        l
    }

    pub fn coeff(&self, k: i32) -> f64 {
        if (LO..=HI).contains(&k) {
            self.c[(k - LO) as usize]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, k: i32, v: f64) {
        if (LO..=HI).contains(&k) {
            self.c[(k - LO) as usize] = v;
        }
    }

    /// `e^{L s}`.
    pub fn exp_linear(l: f64) -> Self {
        let mut out = Self::zero();
        let mut term = 1.0;
        for k in 0..=HI {
            out.set(k, term);
            term *= l / (k + 1) as f64;
        }
        out
    }

    /// `1/(α + s)` for `α ≠ 0`.
    pub fn inv_shift(alpha: f64) -> Self {
        assert!(alpha != 0.0);
        let mut out = Self::zero();
        let mut term = 1.0 / alpha;
        for k in 0..=HI {
            out.set(k, term);
            term *= -1.0 / alpha;
        }
        out
    }

    /// `1/Γ(s)`.
    pub fn inv_gamma() -> Self {
        let g = inv_gamma_series();
        let mut out = Self::zero();
        for (k, v) in g.iter().enumerate().take(HI as usize + 1) {
            out.set(k as i32, *v);
        }
        out
    }

    /// `∫_0^{T} t^{s-1+α} dt = T^{s+α}/(s+α)`.
    pub fn mellin_power(alpha: f64, t: f64) -> Self {
        let lt = t.ln();
        let e = Self::exp_linear(lt);
        if alpha == 0.0 {
            e * Self::monomial(1.0, -1)
        } else {
            (e * Self::inv_shift(alpha)).scale(t.powf(alpha))
        }
    }

    /// `∫_0^{T} t^{s-1} log t dt = T^s (log T / s − 1/s²)`.
    pub fn mellin_log(t: f64) -> Self {
        let lt = t.ln();
        Self::exp_linear(lt) * (Self::monomial(lt, -1) + Self::monomial(-1.0, -2))
    }

    /// `∫_T^∞ t^{s-1+α} dt = −T^{s+α}/(s+α)` for `α < 0`, read as the
    /// continuation from `Re s < −α`.
    pub fn mellin_power_upper(alpha: f64, t: f64) -> Self {
        Self::mellin_power(alpha, t).scale(-1.0)
    }

    /// `∫_T^∞ t^{s-1} log t dt` continued from `Re s < 0`.
    pub fn mellin_log_upper(t: f64) -> Self {
        Self::mellin_log(t).scale(-1.0)
    }

    pub fn scale(mut self, a: f64) -> Self {
        for v in &mut self.c {
            *v *= a;
        }
        self
    }
}

impl std::ops::Add for Laurent {
    type Output = Laurent;
    fn add(mut self, rhs: Laurent) -> Laurent {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a += b;
        }
        self
    }
}

impl std::ops::Sub for Laurent {
    type Output = Laurent;
    fn sub(self, rhs: Laurent) -> Laurent {
        self + rhs.scale(-1.0)
    }
}

impl std::ops::Mul for Laurent {
    type Output = Laurent;
    fn mul(self, rhs: Laurent) -> Laurent {
        let mut out = Laurent::zero();
        for i in LO..=HI {
            let a = self.coeff(i);
            if a == 0.0 {
                continue;
            }
            for j in LO..=HI {
                let k = i + j;
                if k > HI || k < LO {
                    continue;
                }
                out.set(k, out.coeff(k) + a * rhs.coeff(j));
            }
        }
        out
    }
}
