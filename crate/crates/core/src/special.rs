//! Scalar special functions shared by the geometry, moment and constant
//! evaluators: compensated summation, harmonic sums, Wallis integrals, the
//! incomplete sine-power integral and log-space Gaussian tails.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use statrs::function::gamma;

pub use statrs::consts::EULER_MASCHERONI;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

const DIRECT_HARMONIC_LIMIT: u64 = 1_000_000;

/// `H_n = sum_{k=1}^n 1/k`. Summed smallest-first up to `10^6`, digamma
/// beyond.
pub fn harmonic(n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if n <= DIRECT_HARMONIC_LIMIT {
        compensated_sum((1..=n).rev().map(|k| 1.0 / k as f64))
    } else {
        gamma::digamma(n as f64 + 1.0) + EULER_MASCHERONI
    }
}

/// `sum_{k=1}^n 1/k` over odd k only.
pub fn odd_harmonic(n: u64) -> f64 {
    compensated_sum((1..=n).rev().filter(|k| k % 2 == 1).map(|k| 1.0 / k as f64))
}

/// `sum_{k>m} 1/k^2`, as `pi^2/6` minus the partial sum.
pub fn inverse_square_tail(m: u64) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.add(PI * PI / 6.0);
    for k in (1..=m).rev() {
        let k = k as f64;
        acc.add(-1.0 / (k * k));
    }
    acc.value()
}

/// `sum_{k>=n} (-1)^(k+1)/k`, computed as `ln 2` minus the partial
/// alternating sum.
pub fn alternating_tail(n: u64) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.add(LN_2);
    for k in (1..n).rev() {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        acc.add(-sign / k as f64);
    }
    acc.value()
}

const WALLIS_PRODUCT_LIMIT: u32 = 2_000_000;

/// Wallis integral `W_k = int_0^{pi/2} sin^k`.
pub fn wallis(k: u32) -> f64 {
    if k <= WALLIS_PRODUCT_LIMIT {
        let mut w = if k % 2 == 0 { FRAC_PI_2 } else { 1.0 };
        let mut j = if k % 2 == 0 { 2 } else { 3 };
        while j <= k {
            w *= (j - 1) as f64 / j as f64;
            j += 2;
        }
        w
    } else {
        ln_wallis(k).exp()
    }
}

pub fn ln_wallis(k: u32) -> f64 {
    if k <= WALLIS_PRODUCT_LIMIT {
        wallis(k).ln()
    } else {
        // Gamma(x + 1/2) / Gamma(x + 1) ~ x^(-1/2) (1 - 1/(8x) + 1/(128x^2) + 5/(1024x^3))
        let x = k as f64 / 2.0;
        let inv = 1.0 / x;
        let series = 1.0 + inv * (-1.0 / 8.0 + inv * (1.0 / 128.0 + inv * 5.0 / 1024.0));
        0.5 * PI.ln() - LN_2 - 0.5 * x.ln() + series.ln()
    }
}

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 100_000;

/// Continued fraction for the incomplete beta function, modified Lentz.
/// `B_x(a, b) = x^a (1 - x)^b / a * beta_cf(a, b, x)`; converges quickly
/// for `x < (a + 1) / (a + b + 2)`.
pub fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// `ln(e^a - e^b)` for `a >= b`.
#[inline]
pub fn ln_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + (-(b - a).exp()).ln_1p()
}

/// Incomplete integrals of `sin^(n-1)` on `[0, pi/2]`, in log space so
/// that nothing underflows at large `n` or tiny radii.
#[derive(Debug, Clone, Copy)]
pub struct SinePowerIntegral {
    n: u32,
    ln_half: f64,
}

impl SinePowerIntegral {
    pub fn new(n: u32) -> Self {
        assert!(n >= 1);
        Self {
            n,
            ln_half: ln_wallis(n - 1),
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `ln W_{n-1} = ln int_0^{pi/2} sin^(n-1)`.
    pub fn ln_half(&self) -> f64 {
        self.ln_half
    }

    /// `(ln int_0^r sin^(n-1), ln int_r^{pi/2} sin^(n-1))` for `r` in
    /// `[0, pi/2]`. One side is computed directly from the continued
    /// fraction, the other as its complement.
    pub fn split(&self, r: f64) -> (f64, f64) {
        debug_assert!((0.0..=FRAC_PI_2 + 1e-15).contains(&r));
        let n = self.n as f64;
        let a = n / 2.0;
        let b = 0.5;
        if r <= 0.0 {
            return (f64::NEG_INFINITY, self.ln_half);
        }
        if r >= FRAC_PI_2 {
            return (self.ln_half, f64::NEG_INFINITY);
        }
        let (s, c) = r.sin_cos();
        let x = s * s;
        let ln_s = s.ln();
        let ln_c = c.ln();
        if x < (a + 1.0) / (a + b + 2.0) {
            let lower = n * ln_s + ln_c - n.ln() + beta_cf(a, b, x).ln();
            (lower, ln_sub_exp(self.ln_half, lower))
        } else {
            let upper = ln_c + n * ln_s + beta_cf(b, a, c * c).ln();
            (ln_sub_exp(self.ln_half, upper), upper)
        }
    }

    pub fn ln_lower(&self, r: f64) -> f64 {
        self.split(r).0
    }

    pub fn ln_upper(&self, r: f64) -> f64 {
        self.split(r).1
    }
}

const SQRT_FRAC_PI_2: f64 = 1.253_314_137_315_500_3;
const MILLS_SWITCH: f64 = 5.0;

/// Log of the Mills ratio `e^{h^2/2} int_h^inf e^{-t^2/2} dt`, for `h >= 0`.
pub fn ln_mills_ratio(h: f64) -> f64 {
    debug_assert!(h >= 0.0);
    if h < MILLS_SWITCH {
        0.5 * h * h + (SQRT_FRAC_PI_2 * libm::erfc(h / std::f64::consts::SQRT_2)).ln()
    } else {
        // Laplace continued fraction 1/(h + 1/(h + 2/(h + ...))).
        let mut f = h;
        let mut c = h;
        let mut d = 0.0;
        for k in 1..500 {
            let k = k as f64;
            d = h + k * d;
            if d.abs() < CF_TINY {
                d = CF_TINY;
            }
            c = h + k / c;
            if c.abs() < CF_TINY {
                c = CF_TINY;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < CF_EPS {
                break;
            }
        }
        -f.ln()
    }
}

/// `ln int_h^inf e^{-t^2/2} dt`.
pub fn ln_gauss_tail(h: f64) -> f64 {
    -0.5 * h * h + ln_mills_ratio(h)
}

/// `int_0^h e^{-t^2/2} dt`.
pub fn gauss_head(h: f64) -> f64 {
    SQRT_FRAC_PI_2 * libm::erf(h / std::f64::consts::SQRT_2)
}

/// `1 - e^{-y}(1 + y)` without cancellation at small `y`.
pub fn one_minus_exp_poly(y: f64) -> f64 {
    if y < 0.05 {
        // sum_{k>=2} (-1)^k (k-1) y^k / k!
        let mut term = y * y / 2.0;
        let mut acc = term;
        let mut k = 2.0;
        while k < 40.0 {
            term *= -y / (k + 1.0);
            k += 1.0;
            let add = (k - 1.0) * term;
            acc += add;
            if add.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        acc
    } else {
        -(-y).exp_m1() - y * (-y).exp()
    }
}
