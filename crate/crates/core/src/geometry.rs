//! Radial data of the four compact rank-one symmetric families with
//! diameter normalized to `pi`: volume density, mean curvature of spheres,
//! cumulative volume `I` and the drift of the dual radius.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::SinePowerIntegral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Sphere,
    RealProjective,
    ComplexProjective,
    QuaternionicProjective,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Sphere,
        Family::RealProjective,
        Family::ComplexProjective,
        Family::QuaternionicProjective,
    ];

    /// Real dimension of the scalar field: 1, 2 or 4. The sphere reports 1.
    pub fn field_dim(self) -> u32 {
        match self {
            Family::Sphere | Family::RealProjective => 1,
            Family::ComplexProjective => 2,
            Family::QuaternionicProjective => 4,
        }
    }

    pub fn min_n(self) -> u32 {
        match self {
            Family::Sphere | Family::RealProjective => 2,
            Family::ComplexProjective | Family::QuaternionicProjective => 1,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Family::Sphere => "sphere",
            Family::RealProjective => "rp",
            Family::ComplexProjective => "cp",
            Family::QuaternionicProjective => "hp",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sphere" | "s" => Ok(Family::Sphere),
            "rp" | "real_projective" => Ok(Family::RealProjective),
            "cp" | "complex_projective" => Ok(Family::ComplexProjective),
            "hp" | "quaternionic_projective" => Ok(Family::QuaternionicProjective),
            other => Err(Error::InvalidArgument(format!("unknown family `{other}`"))),
        }
    }
}

/// A family together with its index `n`. Construction validates `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct ManifoldSpec {
    family: Family,
    n: u32,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    family: Family,
    n: u32,
    #[serde(default, skip_deserializing)]
    real_dim: u64,
}

impl TryFrom<RawSpec> for ManifoldSpec {
    type Error = Error;
    fn try_from(raw: RawSpec) -> Result<Self> {
        ManifoldSpec::new(raw.family, raw.n)
    }
}

impl From<ManifoldSpec> for RawSpec {
    fn from(s: ManifoldSpec) -> Self {
        RawSpec {
            family: s.family,
            n: s.n,
            real_dim: s.real_dim(),
        }
    }
}

impl ManifoldSpec {
    pub fn new(family: Family, n: u32) -> Result<Self> {
        let min = family.min_n();
        if n < min {
            return Err(Error::UnsupportedIndex { family, n, min });
        }
        // keeps a*n and the exponents below well inside f64 integers
        if n > 1 << 28 {
            return Err(Error::UnsupportedIndex { family, n, min });
        }
        Ok(Self { family, n })
    }

    pub fn sphere(n: u32) -> Result<Self> {
        Self::new(Family::Sphere, n)
    }

    pub fn real_projective(n: u32) -> Result<Self> {
        Self::new(Family::RealProjective, n)
    }

    pub fn complex_projective(n: u32) -> Result<Self> {
        Self::new(Family::ComplexProjective, n)
    }

    pub fn quaternionic_projective(n: u32) -> Result<Self> {
        Self::new(Family::QuaternionicProjective, n)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn real_dim(&self) -> u64 {
        self.family.field_dim() as u64 * self.n as u64
    }

    pub fn diameter(&self) -> f64 {
        PI
    }

    /// Limit of `r * b(r)` as `r -> 0`, i.e. `d + 1`.
    pub fn drift_coeff_at_zero(&self) -> f64 {
        self.real_dim() as f64 + 1.0
    }

    /// Limit of `(pi - r) * b(r)` as `r -> pi`.
    pub fn drift_coeff_at_pi(&self) -> f64 {
        match self.family {
            Family::Sphere => self.n as f64 - 1.0,
            f => f.field_dim() as f64 - 1.0,
        }
    }
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(n={})", self.family, self.n)
    }
}

/// `(ln sin(r/2), ln cos(r/2))`, accurate near both ends of `[0, pi]`.
#[inline]
fn ln_half_angle(r: f64) -> (f64, f64) {
    let s = (0.5 * r).sin();
    let c = (0.5 * (PI - r)).sin();
    if r <= FRAC_PI_2 {
        (s.ln(), 0.5 * (-s * s).ln_1p())
    } else {
        (0.5 * (-c * c).ln_1p(), c.ln())
    }
}

/// `sin r` evaluated from the nearer endpoint.
#[inline]
fn sin_folded(r: f64) -> f64 {
    if r <= FRAC_PI_2 {
        r.sin()
    } else {
        (PI - r).sin()
    }
}

#[inline]
fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `1 - (1 - x)^(2n) (1 + 2n x)` for `x = cos^2(r/2)`; the normalized
/// tail of the quaternionic cumulative volume.
fn hp_tail_ratio(n: f64, x: f64) -> f64 {
    let m = 2.0 * n;
    if m * x < 0.1 {
        // ln((1-x)^m (1+m x)) = sum_k [(-1)^(k+1) m^k - m] x^k / k, k >= 2
        let mut acc = 0.0;
        // (-1)^(k+1) m^k
        let mut mk = m;
        let mut xk = x;
        for k in 2..60 {
            mk *= -m;
            xk *= x;
            let term = (mk - m) * xk / k as f64;
            acc += term;
            if term.abs() <= 1e-18 * acc.abs() {
                break;
            }
        }
        -acc.exp_m1()
    } else {
        -(m * (-x).ln_1p() + (m * x).ln_1p()).exp_m1()
    }
}

/// Evaluators of the radial data of one `ManifoldSpec`.
///
/// The `ln_*` methods take `r` in `[0, pi]` without checking and are the
/// building blocks of the quadrature integrands; the plain methods check
/// their domain.
#[derive(Debug, Clone, Copy)]
pub struct RadialGeometry {
    spec: ManifoldSpec,
    sine: Option<SinePowerIntegral>,
}

impl RadialGeometry {
    pub fn new(spec: ManifoldSpec) -> Self {
        let sine = match spec.family {
            Family::Sphere | Family::RealProjective => Some(SinePowerIntegral::new(spec.n)),
            _ => None,
        };
        Self { spec, sine }
    }

    pub fn spec(&self) -> ManifoldSpec {
        self.spec
    }

    fn nf(&self) -> f64 {
        self.spec.n as f64
    }

    fn check_open(r: f64) -> Result<()> {
        if r > 0.0 && r < PI {
            Ok(())
        } else {
            Err(Error::Domain { r, range: "(0, pi)" })
        }
    }

    fn check_closed(r: f64) -> Result<()> {
        if (0.0..=PI).contains(&r) {
            Ok(())
        } else {
            Err(Error::Domain { r, range: "[0, pi]" })
        }
    }

    pub fn ln_theta(&self, r: f64) -> f64 {
        let n = self.nf();
        match self.spec.family {
            Family::Sphere => (n - 1.0) * sin_folded(r).ln(),
            f => {
                let a = f.field_dim() as f64;
                let (ls, lc) = ln_half_angle(r);
                (a * n - 1.0) * (LN_2 + ls) + (a - 1.0) * lc
            }
        }
    }

    /// Volume density of the geodesic sphere of radius `r`.
    pub fn theta(&self, r: f64) -> Result<f64> {
        Self::check_open(r)?;
        Ok(self.ln_theta(r).exp())
    }

    /// Mean curvature of the geodesic sphere of radius `r`, `theta'/theta`.
    pub fn sigma(&self, r: f64) -> Result<f64> {
        Self::check_open(r)?;
        Ok(self.sigma_unchecked(r))
    }

    pub(crate) fn sigma_unchecked(&self, r: f64) -> f64 {
        let n = self.nf();
        match self.spec.family {
            Family::Sphere => (n - 1.0) * r.cos() / sin_folded(r),
            f => {
                let a = f.field_dim() as f64;
                let s = (0.5 * r).sin();
                let c = (0.5 * (PI - r)).sin();
                0.5 * ((a * n - 1.0) * c / s - (a - 1.0) * s / c)
            }
        }
    }

    /// `ln I'(r)`.
    pub fn ln_density(&self, r: f64) -> f64 {
        let n = self.nf();
        match self.spec.family {
            Family::Sphere => (n - 1.0) * sin_folded(r).ln(),
            Family::RealProjective => (n - 1.0) * ln_half_angle(r).0,
            Family::ComplexProjective => {
                let (ls, lc) = ln_half_angle(r);
                lc + (2.0 * n - 1.0) * ls
            }
            Family::QuaternionicProjective => {
                let (ls, lc) = ln_half_angle(r);
                3.0 * lc + (4.0 * n - 1.0) * ls
            }
        }
    }

    /// `I'(r)`, the derivative of the cumulative volume.
    pub fn density(&self, r: f64) -> Result<f64> {
        Self::check_closed(r)?;
        Ok(self.ln_density(r).exp())
    }

    /// `ln I(pi)`.
    pub fn ln_total(&self) -> f64 {
        let n = self.nf();
        match self.spec.family {
            Family::Sphere | Family::RealProjective => LN_2 + self.sine_ln_half(),
            Family::ComplexProjective => -n.ln(),
            Family::QuaternionicProjective => -(2.0 * n).ln() - (2.0 * n + 1.0).ln(),
        }
    }

    pub fn total(&self) -> f64 {
        self.ln_total().exp()
    }

    fn sine(&self) -> &SinePowerIntegral {
        self.sine.as_ref().expect("sine-power integral for sphere/rp")
    }

    fn sine_ln_half(&self) -> f64 {
        self.sine().ln_half()
    }

    /// `(ln I(r), ln(I(pi) - I(r)))`.
    pub fn ln_cumulative_and_tail(&self, r: f64) -> (f64, f64) {
        let n = self.nf();
        match self.spec.family {
            Family::Sphere => {
                let sp = self.sine();
                let w = sp.ln_half();
                if r <= FRAC_PI_2 {
                    let (lo, up) = sp.split(r);
                    (lo, ln_add_exp(w, up))
                } else {
                    let (lo, up) = sp.split(PI - r);
                    (ln_add_exp(w, up), lo)
                }
            }
            Family::RealProjective => {
                let (lo, up) = self.sine().split(0.5 * r);
                (LN_2 + lo, LN_2 + up)
            }
            Family::ComplexProjective => {
                let (ls, lc) = ln_half_angle(r);
                let ln_i = 2.0 * n * ls - n.ln();
                let x = (2.0 * lc).exp();
                let tail = -(n * (-x).ln_1p()).exp_m1();
                (ln_i, tail.ln() - n.ln())
            }
            Family::QuaternionicProjective => {
                let (ls, lc) = ln_half_angle(r);
                let x = (2.0 * lc).exp();
                let tot = self.ln_total();
                let ln_i = 4.0 * n * ls + (2.0 * n * x).ln_1p() + tot;
                (ln_i, hp_tail_ratio(n, x).ln() + tot)
            }
        }
    }

    pub fn ln_cumulative(&self, r: f64) -> f64 {
        match self.spec.family {
            Family::Sphere if r <= FRAC_PI_2 => self.sine().ln_lower(r),
            Family::RealProjective => LN_2 + self.sine().ln_lower(0.5 * r),
            _ => self.ln_cumulative_and_tail(r).0,
        }
    }

    pub fn ln_tail(&self, r: f64) -> f64 {
        self.ln_cumulative_and_tail(r).1
    }

    /// Cumulative volume `I(r)` normalized so that `I'` has the form above.
    pub fn cumulative(&self, r: f64) -> Result<f64> {
        Self::check_closed(r)?;
        Ok(self.ln_cumulative(r).exp())
    }

    /// `I(pi) - I(r)`.
    pub fn tail(&self, r: f64) -> Result<f64> {
        Self::check_closed(r)?;
        Ok(self.ln_tail(r).exp())
    }

    /// Drift of the dual radius, `2 I'/I - sigma`.
    pub fn drift(&self, r: f64) -> Result<f64> {
        Self::check_open(r)?;
        Ok(self.drift_unchecked(r))
    }

    pub(crate) fn drift_unchecked(&self, r: f64) -> f64 {
        2.0 * (self.ln_density(r) - self.ln_cumulative(r)).exp() - self.sigma_unchecked(r)
    }

    /// Sphere and real projective cumulative volume by the upward two-step
    /// recursion in the index, starting from `I_1 = r` and
    /// `I_2 = 1 - cos r`. Exact in exact arithmetic but loses relative
    /// accuracy for large `n` when the sphere radius is below `pi/2`; kept
    /// as an independent cross-check of the continued-fraction evaluator.
    /// Quaternionic and complex families return their closed forms.
    pub fn cumulative_by_recursion(&self, r: f64) -> Result<f64> {
        Self::check_closed(r)?;
        let n = self.spec.n;
        Ok(match self.spec.family {
            Family::Sphere => sphere_recursion(n, r),
            Family::RealProjective => 2.0 * sphere_recursion(n, 0.5 * r),
            Family::ComplexProjective => {
                let s = (0.5 * r).sin();
                s.powi(2 * n as i32) / n as f64
            }
            Family::QuaternionicProjective => {
                let nf = n as f64;
                let s = (0.5 * r).sin();
                let c = (0.5 * r).cos();
                s.powi(4 * n as i32) * (1.0 + 2.0 * nf * c * c) / (2.0 * nf * (2.0 * nf + 1.0))
            }
        })
    }
}

/// `int_0^r sin^(n-1)` by the two-step recursion in `n`.
fn sphere_recursion(n: u32, r: f64) -> f64 {
    let (s, c) = r.sin_cos();
    let half = (0.5 * r).sin();
    // I_1 or I_2
    let (mut k, mut value) = if n % 2 == 1 { (1u32, r) } else { (2u32, 2.0 * half * half) };
    // sin^k, the power entering the step from k to k + 2
    let mut pow = if k == 1 { s } else { s * s };
    while k < n {
        let next = k + 2;
        // I_next = (-sin^(next-2) cos + (next-2) I_k)/(next-1)
        let a = -pow * c;
        let b = (next - 2) as f64 * value;
        let sum = a + b;
        // error-free correction of the two-term sum
        let bb = sum - a;
        let err = (a - (sum - bb)) + (b - bb);
        value = (sum + err) / (next - 1) as f64;
        pow *= s * s;
        k = next;
    }
    value
}

/// Convenience wrappers matching the per-spec operations.
pub fn theta(spec: ManifoldSpec, r: f64) -> Result<f64> {
    RadialGeometry::new(spec).theta(r)
}

pub fn sigma(spec: ManifoldSpec, r: f64) -> Result<f64> {
    RadialGeometry::new(spec).sigma(r)
}

pub fn cumulative(spec: ManifoldSpec, r: f64) -> Result<f64> {
    RadialGeometry::new(spec).cumulative(r)
}

pub fn drift(spec: ManifoldSpec, r: f64) -> Result<f64> {
    RadialGeometry::new(spec).drift(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geo(f: Family, n: u32) -> RadialGeometry {
        RadialGeometry::new(ManifoldSpec::new(f, n).unwrap())
    }

    #[test]
    fn minimum_index_is_enforced() {
        assert!(ManifoldSpec::sphere(1).is_err());
        assert!(ManifoldSpec::real_projective(1).is_err());
        assert!(ManifoldSpec::complex_projective(0).is_err());
        assert!(ManifoldSpec::complex_projective(1).is_ok());
    }

    #[test]
    fn real_dimensions() {
        assert_eq!(ManifoldSpec::sphere(7).unwrap().real_dim(), 7);
        assert_eq!(ManifoldSpec::real_projective(7).unwrap().real_dim(), 7);
        assert_eq!(ManifoldSpec::complex_projective(7).unwrap().real_dim(), 14);
        assert_eq!(ManifoldSpec::quaternionic_projective(7).unwrap().real_dim(), 28);
    }

    #[test]
    fn domain_errors() {
        let g = geo(Family::Sphere, 3);
        assert!(g.theta(0.0).is_err());
        assert!(g.theta(PI).is_err());
        assert!(g.sigma(-1.0).is_err());
        assert!(g.cumulative(PI + 1e-9).is_err());
        assert!(g.cumulative(PI).is_ok());
        assert!(g.drift(f64::NAN).is_err());
    }

    #[test]
    fn theta_examples() {
        assert_relative_eq!(geo(Family::Sphere, 2).theta(FRAC_PI_2).unwrap(), 1.0);
        assert_relative_eq!(geo(Family::QuaternionicProjective, 1).theta(FRAC_PI_2).unwrap(), 1.0, max_relative = 1e-14);
        for &r in &[0.1, 1.0, 2.0, 3.0] {
            assert_relative_eq!(geo(Family::ComplexProjective, 1).theta(r).unwrap(), r.sin(), max_relative = 1e-13);
        }
    }

    #[test]
    fn sigma_examples() {
        assert!(geo(Family::Sphere, 3).sigma(FRAC_PI_2).unwrap().abs() < 1e-15);
        assert!(geo(Family::ComplexProjective, 1).sigma(FRAC_PI_2).unwrap().abs() < 1e-15);
        assert_relative_eq!(geo(Family::RealProjective, 3).sigma(FRAC_PI_2).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn totals() {
        for n in 1..30 {
            let nf = n as f64;
            assert_relative_eq!(geo(Family::ComplexProjective, n).total(), 1.0 / nf, max_relative = 1e-15);
            assert_relative_eq!(
                geo(Family::QuaternionicProjective, n).total(),
                1.0 / (2.0 * nf * (2.0 * nf + 1.0)),
                max_relative = 1e-14
            );
        }
        assert_relative_eq!(geo(Family::Sphere, 2).total(), 2.0, max_relative = 1e-15);
        assert_relative_eq!(geo(Family::Sphere, 3).total(), FRAC_PI_2, max_relative = 1e-15);
        assert_relative_eq!(geo(Family::Sphere, 5).total(), 2.0 * 3.0 * PI / 16.0, max_relative = 1e-14);
    }

    #[test]
    fn sphere_two_closed_form() {
        let g = geo(Family::Sphere, 2);
        for &r in &[1e-5, 0.3, 1.5, 2.5, 3.1] {
            assert_relative_eq!(g.cumulative(r).unwrap(), 1.0 - r.cos(), max_relative = 1e-9);
            assert_relative_eq!(g.tail(r).unwrap(), 1.0 + r.cos(), max_relative = 1e-9);
        }
    }

    #[test]
    fn recursion_agrees_at_moderate_n() {
        for f in Family::ALL {
            for n in f.min_n()..16 {
                let g = geo(f, n);
                let total = g.total();
                for i in 1..40 {
                    let r = PI * i as f64 / 40.0;
                    let a = g.cumulative(r).unwrap();
                    let b = g.cumulative_by_recursion(r).unwrap();
                    assert!((a - b).abs() <= 1e-13 * total, "{f} n={n} r={r}: {a} vs {b}");
                    if r >= 1.0 {
                        assert_relative_eq!(a, b, epsilon = 0.0, max_relative = 1e-11);
                    }
                }
            }
        }
    }

    #[test]
    fn tail_plus_cumulative_is_total() {
        for f in Family::ALL {
            for &n in &[f.min_n(), 5, 40, 300] {
                let g = geo(f, n);
                for i in 1..50 {
                    let r = PI * i as f64 / 50.0;
                    let (li, lt) = g.ln_cumulative_and_tail(r);
                    assert_relative_eq!(li.exp() + lt.exp(), g.total(), max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn hp_tail_series_matches_direct() {
        for &n in &[1.0f64, 3.0, 50.0] {
            for &x in &[1e-3 / n, 0.04 / n, 0.049 / n] {
                let direct = 1.0 - (1.0 - x).powf(2.0 * n) * (1.0 + 2.0 * n * x);
                assert_relative_eq!(hp_tail_ratio(n, x), direct, max_relative = 1e-7);
            }
            let x = 1e-9;
            assert_relative_eq!(hp_tail_ratio(n, x), n * (2.0 * n + 1.0) * x * x, max_relative = 1e-6);
        }
    }

    #[test]
    fn complex_line_drift_value() {
        assert_relative_eq!(geo(Family::ComplexProjective, 1).drift(FRAC_PI_2).unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn drift_endpoint_coefficients() {
        for f in Family::ALL {
            for &n in &[f.min_n(), 4, 25] {
                let g = geo(f, n);
                let spec = g.spec();
                let r = 1e-7;
                assert_relative_eq!(g.drift(r).unwrap() * r, spec.drift_coeff_at_zero(), max_relative = 1e-5);
                let h = 1e-7;
                let at_pi = g.drift(PI - h).unwrap() * h;
                assert!((at_pi - spec.drift_coeff_at_pi()).abs() < 1e-5, "{spec}: {at_pi}");
            }
        }
    }

    #[test]
    fn large_index_values_are_finite() {
        for f in Family::ALL {
            let g = geo(f, 100_000);
            for &r in &[1e-6, 0.01, 1.0, 3.0, PI - 1e-8] {
                let (li, lt) = g.ln_cumulative_and_tail(r);
                assert!(li.is_finite() && lt.is_finite(), "{f:?} r={r}");
                assert!(g.ln_density(r).is_finite());
                assert!(g.drift(r).unwrap().is_finite());
            }
        }
    }
}
