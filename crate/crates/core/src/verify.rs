//! Cross-route invariant suite behind `hsst verify`.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constants::{
    constant_n_hp_monte_carlo, constant_n_rp_monte_carlo, finite_n_k, k_closed_form, k_quadrature, ktilde_closed_form,
    ktilde_quadrature, n_hp, n_rp,
};
use crate::cutoff::separation_profile;
use crate::dual_sim::{ks_distance, simulate_coupled_tau, simulate_tau, SimConfig};
use crate::error::Result;
use crate::geometry::{Family, ManifoldSpec, RadialGeometry};
use crate::moments::{
    mean_closed_form, mean_quadrature, moment_k_green, rp_mean_decomposition, sphere_mean_recursion_check,
    variance_exact_cp, variance_quadrature,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    /// Deterministic route agreement only; a few seconds.
    Quick,
    /// Adds Monte Carlo constants and simulation checks; several minutes.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> Result<(bool, String)>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn spec(f: Family, n: u32) -> Result<ManifoldSpec> {
    ManifoldSpec::new(f, n)
}

fn means_agree() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for f in Family::ALL {
        for n in f.min_n()..=50 {
            let s = spec(f, n)?;
            worst = worst.max(rel(mean_quadrature(s, 1e-12)?.mean, mean_closed_form(s)));
        }
    }
    Ok((worst <= 1e-8, format!("max rel diff {worst:.1e} over n <= 50")))
}

fn cp_variance_exact() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for n in [1, 2, 5, 10, 50, 100] {
        let q = variance_quadrature(spec(Family::ComplexProjective, n)?, 1e-12)?;
        worst = worst.max(rel(q.variance.unwrap_or(f64::NAN), variance_exact_cp(n)?));
    }
    let anchor = rel(variance_exact_cp(1)?, PI * PI / 3.0 - 3.0);
    Ok((worst <= 1e-8 && anchor <= 1e-12, format!("max rel diff {worst:.1e}")))
}

fn sphere_decomposition() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for n in [2, 5, 10, 50] {
        let v = variance_quadrature(spec(Family::Sphere, n)?, 1e-12)?.variance.unwrap_or(f64::NAN);
        worst = worst.max(rel(v, finite_n_k(n, 1e-12)?.variance()));
    }
    Ok((worst <= 1e-7, format!("max rel diff {worst:.1e}")))
}

fn sphere_constants() -> Result<(bool, String)> {
    let k = rel(k_quadrature(1e-13)?.value, k_closed_form());
    let kt = rel(ktilde_quadrature(1e-13)?.value, ktilde_closed_form());
    let id = rel(8.0 * k_closed_form() + 4.0 * ktilde_closed_form().powi(2), PI * PI / 6.0);
    Ok((
        k <= 1e-12 && kt <= 1e-12 && id <= 1e-15,
        format!("K {k:.1e}, K~ {kt:.1e}, identity {id:.1e}"),
    ))
}

fn sphere_recursion() -> Result<(bool, String)> {
    let r = sphere_mean_recursion_check(60, 1e-12)?;
    Ok((r.max_residual <= 1e-10, format!("max residual {:.1e}", r.max_residual)))
}

fn rp_decomposition() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for n in 2..=60 {
        let q = mean_quadrature(spec(Family::RealProjective, n)?, 1e-12)?.mean;
        worst = worst.max(rel(rp_mean_decomposition(n)?.mean, q));
    }
    Ok((worst <= 1e-8, format!("max rel diff {worst:.1e}")))
}

fn cumulative_recursion() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for f in [Family::Sphere, Family::RealProjective] {
        for n in 2..16 {
            let geo = RadialGeometry::new(spec(f, n)?);
            let total = geo.total();
            for i in 1..32 {
                let r = PI * i as f64 / 32.0;
                // the recursion cancels at small r, so compare against the total
                let d = (geo.cumulative_by_recursion(r)? - geo.cumulative(r)?).abs();
                worst = worst.max(d / total);
            }
        }
    }
    Ok((worst <= 1e-13, format!("max diff {worst:.1e} of the total volume")))
}

fn green_second_moment() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for f in Family::ALL {
        let s = spec(f, 5)?;
        let target = variance_quadrature(s, 1e-12)?.second_moment.unwrap_or(f64::NAN);
        worst = worst.max(rel(moment_k_green(s, 2, 4096)?, target));
    }
    Ok((worst <= 1e-3, format!("max rel diff {worst:.1e} at m = 4096")))
}

fn monte_carlo_constants() -> Result<(bool, String)> {
    let hp = constant_n_hp_monte_carlo(10_000_000, 1)?;
    let rp = constant_n_rp_monte_carlo(10_000_000, 2)?;
    let z_hp = (hp.value - n_hp()?) / hp.error_estimate;
    let z_rp = (rp.value - n_rp()?) / rp.error_estimate;
    Ok((
        z_hp.abs() <= 3.0 && z_rp.abs() <= 3.0,
        format!("z: N_hp {z_hp:+.2}, N_rp {z_rp:+.2}"),
    ))
}

fn simulated_moments() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (f, n) in [(Family::Sphere, 10), (Family::ComplexProjective, 5)] {
        let s = spec(f, n)?;
        let q = variance_quadrature(s, 1e-12)?;
        let sum = simulate_tau(&SimConfig::new(s, 1e-5, 1e-2, 7, 20_000)?)?.summary();
        let zm = (sum.mean - q.mean) / sum.mean_se;
        let zv = (sum.variance - q.variance.unwrap_or(f64::NAN)) / sum.variance_se;
        ok &= zm.abs() <= 3.0 && zv.abs() <= 3.0;
        parts.push(format!("{} n={n} z {zm:+.2}/{zv:+.2}", f.short_name()));
    }
    Ok((ok, parts.join(", ")))
}

fn coupling_law() -> Result<(bool, String)> {
    let s = spec(Family::Sphere, 5)?;
    let a = simulate_tau(&SimConfig::new(s, 1e-5, 1e-2, 8, 10_000)?)?;
    let b = simulate_coupled_tau(&SimConfig::new(s, 1e-5, 1e-2, 9, 10_000)?)?;
    let ks = ks_distance(&a.samples, &b.samples)?;
    Ok((ks.p_value >= 0.01, format!("KS p = {:.3}", ks.p_value)))
}

fn chebyshev_envelope() -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    for f in Family::ALL {
        let s = spec(f, 20)?;
        let grid: Vec<f64> = (-3..=6).map(f64::from).collect();
        let p = separation_profile(s, &grid, &SimConfig::new(s, 1e-5, 1e-2, 10, 10_000)?)?;
        worst = worst.max(p.worst_finite_violation());
    }
    Ok((worst <= 3.0, format!("largest excess {worst:+.2} SE")))
}

pub fn checks(level: VerifyLevel) -> Vec<(&'static str, Check)> {
    let mut v: Vec<(&'static str, Check)> = vec![
        ("mean: closed form vs quadrature", means_agree),
        ("variance: complex projective exact sums", cp_variance_exact),
        ("variance: sphere 8K_n + 4K~_n^2", sphere_decomposition),
        ("constants: K and K~ closed form vs quadrature", sphere_constants),
        ("mean: sphere two-step recursion", sphere_recursion),
        ("mean: real projective decomposition", rp_decomposition),
        ("geometry: cumulative recursion vs direct", cumulative_recursion),
        ("moments: Green operator vs quadrature", green_second_moment),
    ];
    if level == VerifyLevel::Full {
        v.push(("constants: N by quadrature vs Monte Carlo", monte_carlo_constants));
        v.push(("simulation: moments vs quadrature", simulated_moments));
        v.push(("simulation: coupled vs direct law", coupling_law));
        v.push(("cutoff: finite Chebyshev envelope", chebyshev_envelope));
    }
    v
}

pub fn run(level: VerifyLevel) -> Vec<CheckResult> {
    checks(level)
        .into_iter()
        .map(|(name, check)| {
            let start = Instant::now();
            let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
            CheckResult {
                name: name.to_string(),
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}
