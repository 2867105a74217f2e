//! Mean, variance and higher moments of the covering time by three routes:
//! closed forms, quadrature of the scale/speed double integrals, and a
//! discretized Green operator.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Family, ManifoldSpec, RadialGeometry};
use crate::quadrature::{Integrator, QuadResult};
use crate::special::{alternating_tail, harmonic, inverse_square_tail, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    ClosedForm,
    Quadrature,
    GreenIteration,
}

/// Moments of the covering time. `error_estimate` is an absolute error
/// estimate for the highest-order quantity the report carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub spec: ManifoldSpec,
    pub mean: f64,
    pub variance: Option<f64>,
    pub second_moment: Option<f64>,
    pub method: MomentMethod,
    pub error_estimate: f64,
}

/// Mean of the covering time from the harmonic-sum formulas.
pub fn mean_closed_form(spec: ManifoldSpec) -> f64 {
    let n = spec.n() as u64;
    match spec.family() {
        Family::ComplexProjective => harmonic(n) / n as f64,
        Family::QuaternionicProjective => harmonic(2 * n + 1) / (2 * n + 1) as f64,
        Family::Sphere => harmonic(n - 1) / (n - 1) as f64,
        Family::RealProjective => {
            let m = (n - 1) / 2;
            let even_sum = 0.5 * harmonic(m);
            let rn = if n % 2 == 0 { alternating_tail(n) } else { 0.0 };
            let nm1 = (n - 1) as f64;
            4.0 * even_sum / nm1 - 4.0 * rn / nm1
        }
    }
}

/// Exact variance on the complex projective space as a finite double sum
/// minus a harmonic tail and a `1/k^2` tail.
pub fn variance_exact_cp(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::UnsupportedIndex {
            family: Family::ComplexProjective,
            n,
            min: 1,
        });
    }
    let nf = n as f64;
    let mut a = CompensatedSum::new();
    for k in 1..n {
        for l in 0..k {
            let p = (n + l - k + 1) as f64;
            let q = (n + l + 1) as f64;
            a.add(1.0 / (p * q));
        }
    }
    let a = 2.0 / (nf * nf) * a.value();
    let b = 2.0 / (nf * nf * nf)
        * ((n as u64 + 1)..=(2 * n as u64))
            .rev()
            .map(|k| 1.0 / k as f64)
            .collect::<CompensatedSum>()
            .value();
    let c = -2.0 / (nf * nf) * inverse_square_tail(n as u64);
    Ok(a - b - c)
}

pub fn closed_form_report(spec: ManifoldSpec) -> Result<MomentReport> {
    let mean = mean_closed_form(spec);
    let variance = match spec.family() {
        Family::ComplexProjective => Some(variance_exact_cp(spec.n())?),
        _ => None,
    };
    Ok(MomentReport {
        spec,
        mean,
        variance,
        second_moment: variance.map(|v| v + mean * mean),
        method: MomentMethod::ClosedForm,
        error_estimate: 0.0,
    })
}

/// Integrand of the mean: `(I/I') (I(pi) - I)/I(pi)`; vanishes at both ends.
pub fn mean_integrand(geo: &RadialGeometry, t: f64) -> f64 {
    if t <= 0.0 || t >= PI {
        return 0.0;
    }
    let (li, lt) = geo.ln_cumulative_and_tail(t);
    (li - geo.ln_density(t) + lt - geo.ln_total()).exp()
}

/// Integrand of the variance double integral on `0 <= u <= s <= pi`,
/// including the `2/I(pi)^2` prefactor.
pub fn variance_integrand(geo: &RadialGeometry, u: f64, s: f64) -> f64 {
    if u <= 0.0 || s >= PI {
        return 0.0;
    }
    let li_u = geo.ln_cumulative(u);
    let lt_s = geo.ln_tail(s);
    2.0 * (2.0 * li_u - geo.ln_density(u) + 2.0 * lt_s - geo.ln_density(s) - 2.0 * geo.ln_total()).exp()
}

fn quad_mean(geo: &RadialGeometry, rel_tol: f64) -> Result<QuadResult> {
    Integrator::new(rel_tol)
        .integrate(|t| mean_integrand(geo, t), 0.0, PI)
        .map_err(|e| e.named("mean"))
}

fn quad_variance(geo: &RadialGeometry, rel_tol: f64) -> Result<QuadResult> {
    let ln_tot = geo.ln_total();
    Integrator::new(rel_tol)
        .integrate_nested(
            |u, cfg| {
                if u <= 0.0 || u >= PI {
                    return Ok(QuadResult {
                        value: 0.0,
                        abs_error_estimate: 0.0,
                        evaluations: 0,
                    });
                }
                let outer = 2.0 * geo.ln_cumulative(u) - geo.ln_density(u) - 2.0 * ln_tot;
                cfg.integrate(
                    |s| {
                        if s >= PI {
                            return 0.0;
                        }
                        2.0 * (outer + 2.0 * geo.ln_tail(s) - geo.ln_density(s)).exp()
                    },
                    u,
                    PI,
                )
            },
            0.0,
            PI,
        )
        .map_err(|e| e.named("variance"))
}

pub fn mean_quadrature(spec: ManifoldSpec, rel_tol: f64) -> Result<MomentReport> {
    let geo = RadialGeometry::new(spec);
    let m = quad_mean(&geo, rel_tol)?;
    Ok(MomentReport {
        spec,
        mean: m.value,
        variance: None,
        second_moment: None,
        method: MomentMethod::Quadrature,
        error_estimate: m.abs_error_estimate,
    })
}

pub fn variance_quadrature(spec: ManifoldSpec, rel_tol: f64) -> Result<MomentReport> {
    let geo = RadialGeometry::new(spec);
    let m = quad_mean(&geo, rel_tol)?;
    let v = quad_variance(&geo, rel_tol)?;
    let second = v.value + m.value * m.value;
    Ok(MomentReport {
        spec,
        mean: m.value,
        variance: Some(v.value),
        second_moment: Some(second),
        method: MomentMethod::Quadrature,
        error_estimate: v.abs_error_estimate + 2.0 * m.value.abs() * m.abs_error_estimate,
    })
}

/// Function values on an increasing grid of `[0, pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenGrid {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl GreenGrid {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 2 {
            return Err(Error::InvalidArgument("grid and values must match and have at least two points".into()));
        }
        if radii[0] != 0.0 || *radii.last().unwrap() != PI {
            return Err(Error::InvalidArgument("grid must start at 0 and end at pi".into()));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
        }
        Ok(Self { radii, values })
    }

    /// Uniform grid of `m` points with `f` sampled at each radius.
    pub fn uniform<F: FnMut(f64) -> f64>(m: usize, mut f: F) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument("grid needs at least two points".into()));
        }
        let radii: Vec<f64> = (0..m)
            .map(|i| if i == m - 1 { PI } else { PI * i as f64 / (m - 1) as f64 })
            .collect();
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::new(radii, values)
    }

    pub fn constant(m: usize, c: f64) -> Result<Self> {
        Self::uniform(m, |_| c)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

/// Trapezoid discretization of the Green operator of the dual radius on a
/// fixed grid. The inner kernel `I^2/I'` and outer kernel `I'/I^2` are
/// reciprocal, so the nested cumulative sums are carried as the ratio of
/// the inner sum to the inner kernel, which stays bounded.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    radii: Vec<f64>,
    // K_{j-1}/K_j for j >= 1
    ratio: Vec<f64>,
    singular_end: bool,
}

impl GreenOperator {
    pub const MIN_POINTS: usize = 64;

    pub fn new(spec: ManifoldSpec, radii: &[f64]) -> Result<Self> {
        let m = radii.len();
        if m < Self::MIN_POINTS {
            return Err(Error::InvalidArgument(format!(
                "Green grid needs at least {} points, got {m}",
                Self::MIN_POINTS
            )));
        }
        let geo = RadialGeometry::new(spec);
        let singular_end = spec.family() != Family::RealProjective;
        let ln_k: Vec<f64> = radii
            .iter()
            .map(|&r| {
                if r <= 0.0 {
                    f64::NEG_INFINITY
                } else if r >= PI && singular_end {
                    f64::INFINITY
                } else {
                    2.0 * geo.ln_cumulative(r) - geo.ln_density(r)
                }
            })
            .collect();
        let mut ratio = vec![0.0; m];
        for j in 1..m {
            ratio[j] = if ln_k[j - 1] == f64::NEG_INFINITY || ln_k[j] == f64::INFINITY {
                0.0
            } else {
                (ln_k[j - 1] - ln_k[j]).exp()
            };
        }
        Ok(Self {
            radii: radii.to_vec(),
            ratio,
            singular_end,
        })
    }

    pub fn uniform(spec: ManifoldSpec, m: usize) -> Result<Self> {
        let grid = GreenGrid::constant(m, 0.0)?;
        Self::new(spec, grid.radii())
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let m = self.radii.len();
        assert_eq!(g.len(), m, "grid size mismatch");
        // h_j = (I'/I^2)(t_j) * int_0^{t_j} (I^2/I') g
        let mut h = vec![0.0; m];
        for j in 1..m {
            let w = 0.5 * (self.radii[j] - self.radii[j - 1]);
            h[j] = self.ratio[j] * (h[j - 1] + w * g[j - 1]) + w * g[j];
        }
        if self.singular_end {
            h[m - 1] = 0.0;
        }
        let mut out = vec![0.0; m];
        for j in (0..m - 1).rev() {
            let w = 0.5 * (self.radii[j + 1] - self.radii[j]);
            out[j] = out[j + 1] + w * (h[j] + h[j + 1]);
        }
        out
    }
}

pub fn green_apply(spec: ManifoldSpec, g: &GreenGrid) -> Result<GreenGrid> {
    let op = GreenOperator::new(spec, g.radii())?;
    GreenGrid::new(g.radii.clone(), op.apply(g.values()))
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn green_iterates(spec: ManifoldSpec, k_max: u32, m: usize) -> Result<Vec<f64>> {
    let op = GreenOperator::uniform(spec, m)?;
    let mut g = vec![1.0; m];
    let mut out = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        g = op.apply(&g);
        out.push(factorial(k) * g[0]);
    }
    Ok(out)
}

/// `E[tau^k] = k! G^k[1](0)` on a uniform grid of `m` points.
pub fn moment_k_green(spec: ManifoldSpec, k: u32, m: usize) -> Result<f64> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidArgument(format!("moment order {k} not in 1..=3")));
    }
    if m < 256 {
        return Err(Error::InvalidArgument(format!("grid size {m} below 256")));
    }
    Ok(*green_iterates(spec, k, m)?.last().unwrap())
}

/// Mean and variance from the Green operator at grid size `m`. The error
/// estimate is for the variance, from a second pass at `2m - 1` points
/// (which halves the step) assuming second-order convergence. The mean and
/// second moment converge slightly slower than the variance, in which
/// their leading errors partly cancel.
pub fn green_moments(spec: ManifoldSpec, m: usize) -> Result<MomentReport> {
    if m < 256 {
        return Err(Error::InvalidArgument(format!("grid size {m} below 256")));
    }
    let coarse = green_iterates(spec, 2, m)?;
    let fine = green_iterates(spec, 2, 2 * m - 1)?;
    let var = |v: &[f64]| v[1] - v[0] * v[0];
    let err = (var(&coarse) - var(&fine)).abs() * 4.0 / 3.0;
    Ok(MomentReport {
        spec,
        mean: coarse[0],
        variance: Some(var(&coarse)),
        second_moment: Some(coarse[1]),
        method: MomentMethod::GreenIteration,
        error_estimate: err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionCheck {
    /// `(n, residual)` for each checked index.
    pub residuals: Vec<(u32, f64)>,
    pub max_residual: f64,
}

/// Checks `(n-1) E_n = (n-3) E_{n-2} + 1/(n-1) + 1/(n-2)` on quadrature
/// means for `3 <= n <= n_max`.
pub fn sphere_mean_recursion_check(n_max: u32, rel_tol: f64) -> Result<RecursionCheck> {
    if n_max < 4 {
        return Err(Error::InvalidArgument(format!("n_max = {n_max} must be at least 4")));
    }
    let mut means = vec![f64::NAN; n_max as usize + 1];
    for n in 2..=n_max {
        means[n as usize] = mean_quadrature(ManifoldSpec::sphere(n)?, rel_tol)?.mean;
    }
    let mut residuals = Vec::new();
    for n in 3..=n_max {
        let nf = n as f64;
        let prev = if n == 3 { 0.0 } else { (nf - 3.0) * means[n as usize - 2] };
        let r = (nf - 1.0) * means[n as usize] - prev - 1.0 / (nf - 1.0) - 1.0 / (nf - 2.0);
        residuals.push((n, r.abs()));
    }
    let max_residual = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(RecursionCheck {
        residuals,
        max_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpDecomposition {
    pub e_n: f64,
    pub mean: f64,
}

/// Real projective mean as four sphere means minus `4 E_n`, with `E_n`
/// from its two-step recursion.
pub fn rp_mean_decomposition(n: u32) -> Result<RpDecomposition> {
    ManifoldSpec::real_projective(n)?;
    let mut e = if n % 2 == 0 { LN_2 } else { 0.5 };
    let mut k = if n % 2 == 0 { 2 } else { 3 };
    while k < n {
        k += 2;
        let kf = k as f64;
        e = (1.0 / (kf - 2.0) + (kf - 3.0) * e) / (kf - 1.0);
    }
    let sphere = mean_closed_form(ManifoldSpec::sphere(n)?);
    Ok(RpDecomposition {
        e_n: e,
        mean: 4.0 * sphere - 4.0 * e,
    })
}
