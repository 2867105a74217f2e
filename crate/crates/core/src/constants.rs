//! Asymptotic variance constants: `K`, `K~` for spheres, and the two
//! double-integral constants of the quaternionic and real projective
//! families, each with an independent Monte Carlo estimate.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2, PI};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{Integrator, QuadResult};
use crate::special::{gauss_head, ln_mills_ratio, one_minus_exp_poly, SinePowerIntegral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantName {
    Ktilde,
    K,
    NHp,
    NRp,
}

impl std::str::FromStr for ConstantName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ktilde" => Ok(ConstantName::Ktilde),
            "k" => Ok(ConstantName::K),
            "n_hp" | "nhp" => Ok(ConstantName::NHp),
            "n_rp" | "nrp" => Ok(ConstantName::NRp),
            other => Err(Error::InvalidArgument(format!("unknown constant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantMethod {
    Quadrature,
    MonteCarlo,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub name: ConstantName,
    pub value: f64,
    pub method: ConstantMethod,
    /// Absolute error estimate; one standard error for Monte Carlo.
    pub error_estimate: f64,
}

impl ConstantReport {
    fn from_quad(name: ConstantName, q: QuadResult) -> Self {
        Self {
            name,
            value: q.value,
            method: ConstantMethod::Quadrature,
            error_estimate: q.abs_error_estimate,
        }
    }
}

/// `e^{y-x} (x+1)^2/x^2 (1 - e^{-y}(1+y))^2/y^2` on `0 < y <= x`.
pub fn n_hp_integrand(x: f64, y: f64) -> f64 {
    let g = one_minus_exp_poly(y) / y;
    let q = (x + 1.0) / x;
    (y - x).exp() * q * q * g * g
}

/// Inner integral of the quaternionic constant at fixed `x`, written with
/// `z = x - y` so the exponential weight sits at the lower end.
fn n_hp_inner(x: f64, cfg: Integrator) -> Result<QuadResult> {
    let q = (x + 1.0) / x;
    cfg.integrate(
        |z| {
            let y = x - z;
            if y <= 0.0 {
                return 0.0;
            }
            let g = one_minus_exp_poly(y) / y;
            (-z).exp() * g * g
        },
        0.0,
        x,
    )
    .map(|mut r| {
        r.value *= q * q;
        r.abs_error_estimate *= q * q;
        r
    })
}

/// Outer integrand `2 int_0^x (...) dy` of the quaternionic constant.
pub fn n_hp_outer(x: f64, rel_tol: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * n_hp_inner(x, Integrator::new(rel_tol))?.value)
}

pub fn constant_n_hp(rel_tol: f64) -> Result<ConstantReport> {
    if !(rel_tol >= 1e-10) {
        return Err(Error::InvalidArgument(format!("rel_tol {rel_tol} below 1e-10")));
    }
    let q = Integrator::new(rel_tol)
        .integrate_nested(
            |t, cfg| {
                // x = t/(1-t)
                let u = 1.0 - t;
                let x = t / u;
                if x <= 0.0 || !x.is_finite() {
                    return Ok(QuadResult {
                        value: 0.0,
                        abs_error_estimate: 0.0,
                        evaluations: 0,
                    });
                }
                let mut r = n_hp_inner(x, cfg)?;
                let jac = 2.0 / (u * u);
                r.value *= jac;
                r.abs_error_estimate *= jac;
                Ok(r)
            },
            0.0,
            1.0,
        )
        .map_err(|e| e.named("N_HP"))?;
    Ok(ConstantReport::from_quad(ConstantName::NHp, q))
}

/// `ln` of the real projective integrand
/// `e^{h4^2/2} Phi0(h4)^2 e^{h3^2/2} T(h3)^2` for `h3 >= h4 >= 0`, with
/// `Phi0(h) = int_0^h e^{-x^2/2}` and `T(h) = int_h^inf e^{-x^2/2}`.
pub fn ln_n_rp_integrand(h4: f64, h3: f64) -> f64 {
    let head = gauss_head(h4);
    2.0 * head.ln() + 0.5 * (h4 - h3) * (h4 + h3) + 2.0 * ln_mills_ratio(h3)
}

pub fn constant_n_rp(rel_tol: f64) -> Result<ConstantReport> {
    if !(rel_tol >= 1e-8) {
        return Err(Error::InvalidArgument(format!("rel_tol {rel_tol} below 1e-8")));
    }
    let q = Integrator::new(rel_tol)
        .integrate_nested(
            |t, cfg| {
                let u = 1.0 - t;
                let h4 = t / u;
                if h4 <= 0.0 || !h4.is_finite() {
                    return Ok(QuadResult {
                        value: 0.0,
                        abs_error_estimate: 0.0,
                        evaluations: 0,
                    });
                }
                let mut r = cfg.try_integrate_from(|h3| Ok(ln_n_rp_integrand(h4, h3).exp()), h4)?;
                let jac = 16.0 / PI / (u * u);
                r.value *= jac;
                r.abs_error_estimate *= jac;
                Ok(r)
            },
            0.0,
            1.0,
        )
        .map_err(|e| e.named("N_RP"))?;
    Ok(ConstantReport::from_quad(ConstantName::NRp, q))
}

const MC_CHUNKS: u64 = 256;

/// Mean and standard error of `weight(rng)` over `samples` draws, split
/// into a fixed number of seeded substreams so the result does not depend
/// on the thread count.
fn monte_carlo<W>(samples: u64, seed: u64, weight: W) -> (f64, f64)
where
    W: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let per = samples.div_ceil(MC_CHUNKS);
    let partial: Vec<(f64, f64, u64)> = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = per.min(samples.saturating_sub(c * per));
            // shifted sums keep the variance accumulation well conditioned
            let mut s = 0.0;
            let mut ss = 0.0;
            for _ in 0..count {
                let w = weight(&mut rng);
                s += w;
                ss += w * w;
            }
            (s, ss, count)
        })
        .collect();
    let n: u64 = partial.iter().map(|p| p.2).sum();
    let s: f64 = partial.iter().map(|p| p.0).sum();
    let ss: f64 = partial.iter().map(|p| p.1).sum();
    let nf = n as f64;
    let mean = s / nf;
    let var = ((ss - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Monte Carlo estimate of the quaternionic constant: `y` from the
/// density `1/(1+y)^2`, `x - y` exponential.
pub fn constant_n_hp_monte_carlo(samples: u64, seed: u64) -> Result<ConstantReport> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let (mean, se) = monte_carlo(samples, seed, |rng| {
        let u: f64 = rng.random();
        let y = u / (1.0 - u);
        let z: f64 = Exp1.sample(rng);
        if y <= 0.0 {
            return 0.0;
        }
        let x = y + z;
        let g = one_minus_exp_poly(y) / y;
        let q = (x + 1.0) / x;
        2.0 * (1.0 + y) * (1.0 + y) * g * g * q * q
    });
    Ok(ConstantReport {
        name: ConstantName::NHp,
        value: mean,
        method: ConstantMethod::MonteCarlo,
        error_estimate: se,
    })
}

/// Monte Carlo estimate of the real projective constant from its
/// six-dimensional form over the ordered region
/// `0 <= x <= h5 <= h4 <= h3 <= h1, h2`, after substituting squared
/// increments: four exponential gaps, a half-normal `x` and a heavy-tailed
/// `h4` proposal.
pub fn constant_n_rp_monte_carlo(samples: u64, seed: u64) -> Result<ConstantReport> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let c = PI.sqrt() / 2.0;
    let (mean, se) = monte_carlo(samples, seed, |rng| {
        let h1: f64 = Exp1.sample(rng);
        let h2: f64 = Exp1.sample(rng);
        let h3: f64 = Exp1.sample(rng);
        let h5: f64 = Exp1.sample(rng);
        let g: f64 = StandardNormal.sample(rng);
        let x = g * std::f64::consts::FRAC_1_SQRT_2;
        let u: f64 = rng.random();
        let h4 = u / (1.0 - u);
        let x2 = x * x;
        let a5 = 2.0 * h5;
        let a4 = a5 + 2.0 * h4;
        let a3 = a4 + 2.0 * h3;
        let d = (x2 + 2.0 * h1 + a3).sqrt()
            * (x2 + 2.0 * h2 + a3).sqrt()
            * (x2 + a3).sqrt()
            * (x2 + a4).sqrt()
            * (x2 + a5).sqrt();
        c * (1.0 + h4) * (1.0 + h4) / d
    });
    let scale = 32.0 / PI;
    Ok(ConstantReport {
        name: ConstantName::NRp,
        value: scale * mean,
        method: ConstantMethod::MonteCarlo,
        error_estimate: scale * se,
    })
}

pub fn k_closed_form() -> f64 {
    (PI * PI / 6.0 - LN_2 * LN_2) / 8.0
}

pub fn ktilde_closed_form() -> f64 {
    LN_2 / 2.0
}

/// `-1/4 int_0^1 ln(1 - u)/(1 + u) du`.
pub fn k_quadrature(rel_tol: f64) -> Result<ConstantReport> {
    let q = Integrator::new(rel_tol)
        .integrate(|u| -0.25 * (-u).ln_1p() / (1.0 + u), 0.0, 1.0)
        .map_err(|e| e.named("K"))?;
    Ok(ConstantReport::from_quad(ConstantName::K, q))
}

/// `int_0^{pi/4} tan`.
pub fn ktilde_quadrature(rel_tol: f64) -> Result<ConstantReport> {
    let q = Integrator::new(rel_tol)
        .integrate(f64::tan, 0.0, FRAC_PI_4)
        .map_err(|e| e.named("Ktilde"))?;
    Ok(ConstantReport::from_quad(ConstantName::Ktilde, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereConstants {
    pub k: ConstantReport,
    pub ktilde: ConstantReport,
    pub k_check: ConstantReport,
    pub ktilde_check: ConstantReport,
}

/// Closed forms of `K` and `K~`, each confirmed by quadrature of its
/// one-dimensional reduced form.
pub fn constant_k_and_ktilde() -> Result<SphereConstants> {
    Ok(SphereConstants {
        k: ConstantReport {
            name: ConstantName::K,
            value: k_closed_form(),
            method: ConstantMethod::ClosedForm,
            error_estimate: 0.0,
        },
        ktilde: ConstantReport {
            name: ConstantName::Ktilde,
            value: ktilde_closed_form(),
            method: ConstantMethod::ClosedForm,
            error_estimate: 0.0,
        },
        k_check: k_quadrature(1e-12)?,
        ktilde_check: ktilde_quadrature(1e-12)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteK {
    pub n: u32,
    pub k_n: f64,
    pub ktilde_n: f64,
    pub error_estimate: f64,
}

impl FiniteK {
    /// `8 K_n + 4 K~_n^2`, the exact sphere variance.
    pub fn variance(&self) -> f64 {
        8.0 * self.k_n + 4.0 * self.ktilde_n * self.ktilde_n
    }
}

/// Finite-`n` half-sphere integrals whose combination gives the sphere
/// variance and whose scaled limits are `K` and `K~`.
pub fn finite_n_k(n: u32, rel_tol: f64) -> Result<FiniteK> {
    crate::geometry::ManifoldSpec::sphere(n)?;
    let sp = SinePowerIntegral::new(n);
    let ln_tot = LN_2 + sp.ln_half();
    let ln_dens = |r: f64| (n as f64 - 1.0) * r.sin().ln();
    let kt = Integrator::new(rel_tol)
        .integrate(
            |u| {
                if u <= 0.0 {
                    return 0.0;
                }
                (2.0 * sp.ln_lower(u) - ln_dens(u) - ln_tot).exp()
            },
            0.0,
            FRAC_PI_2,
        )
        .map_err(|e| e.named("Ktilde_n"))?;
    let k = Integrator::new(rel_tol)
        .integrate_nested(
            |u, cfg| {
                if u <= 0.0 || u >= FRAC_PI_2 {
                    return Ok(QuadResult {
                        value: 0.0,
                        abs_error_estimate: 0.0,
                        evaluations: 0,
                    });
                }
                let outer = 2.0 * sp.ln_lower(u) - ln_dens(u) - ln_tot;
                cfg.integrate(
                    |s| {
                        if s >= FRAC_PI_2 {
                            return 0.0;
                        }
                        (outer + sp.ln_upper(s) - ln_dens(s)).exp()
                    },
                    u,
                    FRAC_PI_2,
                )
            },
            0.0,
            FRAC_PI_2,
        )
        .map_err(|e| e.named("K_n"))?;
    Ok(FiniteK {
        n,
        k_n: k.value,
        ktilde_n: kt.value,
        error_estimate: 8.0 * k.abs_error_estimate + 8.0 * kt.value.abs() * kt.abs_error_estimate,
    })
}

static N_HP: OnceLock<Result<f64>> = OnceLock::new();
static N_RP: OnceLock<Result<f64>> = OnceLock::new();

/// Quadrature value of the quaternionic constant, computed once.
pub fn n_hp() -> Result<f64> {
    N_HP.get_or_init(|| constant_n_hp(1e-10).map(|r| r.value)).clone()
}

/// Quadrature value of the real projective constant, computed once.
pub fn n_rp() -> Result<f64> {
    N_RP.get_or_init(|| constant_n_rp(1e-8).map(|r| r.value)).clone()
}

pub fn constant_report(name: ConstantName, rel_tol: f64) -> Result<ConstantReport> {
    match name {
        ConstantName::K => Ok(constant_k_and_ktilde()?.k),
        ConstantName::Ktilde => Ok(constant_k_and_ktilde()?.ktilde),
        ConstantName::NHp => constant_n_hp(rel_tol),
        ConstantName::NRp => constant_n_rp(rel_tol),
    }
}
