//! Cutoff schedules, Chebyshev envelopes and separation profiles.
//!
//! The separation distance at time `t` equals `P(tau > t)`, so a profile is
//! the empirical survival function of simulated hitting times read off at
//! `t = a_n + c b_n`.

use std::f64::consts::{LN_2, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::constants::{n_hp, n_rp};
use crate::dual_sim::{simulate_tau, survival_from_samples, HittingSampleBatch, SimConfig};
use crate::error::{Error, Result};
use crate::geometry::{Family, ManifoldSpec};
use crate::moments::{mean_closed_form, variance_quadrature};
use crate::output::{csv_float, SCHEMA_VERSION};
use crate::special::EULER_MASCHERONI;

const MOMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSchedule {
    pub spec: ManifoldSpec,
    pub a_n: f64,
    pub b_n: f64,
    pub gamma_shift: f64,
}

impl CutoffSchedule {
    /// `a_n + c b_n`.
    pub fn time(&self, c: f64) -> f64 {
        self.a_n + c * self.b_n
    }

    /// Inverse of [`CutoffSchedule::time`].
    pub fn offset(&self, t: f64) -> f64 {
        (t - self.a_n) / self.b_n
    }
}

pub fn cutoff_schedule(spec: ManifoldSpec) -> CutoffSchedule {
    let n = spec.n() as f64;
    let (m, scale, shift) = match spec.family() {
        Family::ComplexProjective => (n, 1.0, EULER_MASCHERONI),
        Family::QuaternionicProjective => (2.0 * n + 1.0, 1.0, EULER_MASCHERONI),
        Family::Sphere => (n - 1.0, 1.0, EULER_MASCHERONI),
        Family::RealProjective => (n - 1.0, 2.0, EULER_MASCHERONI - LN_2),
    };
    CutoffSchedule {
        spec,
        a_n: scale * m.ln() / m,
        b_n: scale / m,
        gamma_shift: shift,
    }
}

/// Limit of `Var(tau) / b_n^2`: `pi^2/6` for spheres and complex projective
/// spaces, the computed `N` constants otherwise.
pub fn envelope_constant(family: Family) -> Result<f64> {
    match family {
        Family::Sphere | Family::ComplexProjective => Ok(PI * PI / 6.0),
        Family::QuaternionicProjective => n_hp(),
        Family::RealProjective => n_rp(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub upper: f64,
    pub lower: f64,
}

/// Limiting bounds on the separation at `t = a_n + c b_n`.
pub fn chebyshev_envelope(spec: ManifoldSpec, c: f64) -> Result<Envelope> {
    let k = envelope_constant(spec.family())?;
    let shift = cutoff_schedule(spec).gamma_shift;
    Ok(envelope_from(k, c - shift))
}

fn envelope_from(k: f64, gap: f64) -> Envelope {
    if gap.is_nan() {
        return Envelope { upper: 1.0, lower: 0.0 };
    }
    let q = k / (gap * gap);
    Envelope {
        upper: if gap > 0.0 { q.min(1.0) } else { 1.0 },
        lower: if gap < 0.0 { (1.0 - q).max(0.0) } else { 0.0 },
    }
}

/// Chebyshev bounds on `P(tau > t)` from the exact mean and variance.
pub fn finite_chebyshev(mean: f64, variance: f64, t: f64) -> Envelope {
    envelope_from(variance, t - mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub schedule: CutoffSchedule,
    pub mean: f64,
    pub variance: f64,
    pub c_grid: Vec<f64>,
    pub t: Vec<f64>,
    pub sep_hat: Vec<f64>,
    pub sep_se: Vec<f64>,
    /// Limiting envelopes.
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    /// Chebyshev bounds with the finite-`n` mean and variance.
    pub finite_upper: Vec<f64>,
    pub finite_lower: Vec<f64>,
    pub sim: SimConfig,
}

#[derive(Serialize, Deserialize)]
pub struct ProfileDocument {
    pub schema_version: u32,
    pub profile: CutoffProfile,
}

impl CutoffProfile {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let spec = self.schedule.spec;
        writeln!(w, "family,n,c,t,sep_hat,sep_se,upper,lower")?;
        for i in 0..self.c_grid.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                spec.family(),
                spec.n(),
                csv_float(self.c_grid[i]),
                csv_float(self.t[i]),
                csv_float(self.sep_hat[i]),
                csv_float(self.sep_se[i]),
                csv_float(self.upper[i]),
                csv_float(self.lower[i]),
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&ProfileDocument {
            schema_version: SCHEMA_VERSION,
            profile: self.clone(),
        })
    }

    /// Largest excess of the empirical separation over the finite Chebyshev
    /// bounds, in standard errors (with a floor on the error so that an
    /// estimate of exactly 0 or 1 is not infinitely precise).
    pub fn worst_finite_violation(&self) -> f64 {
        let paths = self.sim.paths as f64;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.c_grid.len() {
            let se = self.sep_se[i].max(1.0 / paths);
            let above = (self.sep_hat[i] - self.finite_upper[i]) / se;
            let below = (self.finite_lower[i] - self.sep_hat[i]) / se;
            worst = worst.max(above).max(below);
        }
        worst
    }
}

/// Empirical separation at `a_n + c b_n` over `c_grid`, with envelopes.
pub fn separation_profile(spec: ManifoldSpec, c_grid: &[f64], cfg: &SimConfig) -> Result<CutoffProfile> {
    if cfg.spec != spec {
        return Err(Error::InvalidArgument(format!(
            "simulation configured for {:?}, profile requested for {:?}",
            cfg.spec, spec
        )));
    }
    if c_grid.is_empty() || c_grid.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("c grid must be non-empty and finite".into()));
    }
    let batch = simulate_tau(cfg)?;
    profile_from_batch(&batch, c_grid)
}

/// As [`separation_profile`] for an existing batch of hitting times.
pub fn profile_from_batch(batch: &HittingSampleBatch, c_grid: &[f64]) -> Result<CutoffProfile> {
    if c_grid.is_empty() || c_grid.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("c grid must be non-empty and finite".into()));
    }
    let spec = batch.config.spec;
    let schedule = cutoff_schedule(spec);
    let moments = variance_quadrature(spec, MOMENT_TOL)?;
    let mean = moments.mean;
    let variance = moments.variance.unwrap_or(f64::NAN);
    let samples = &batch.samples;
    let sim = batch.config;
    let t: Vec<f64> = c_grid.iter().map(|&c| schedule.time(c)).collect();
    let survival = survival_from_samples(samples, &t)?;
    let mut profile = CutoffProfile {
        schedule,
        mean,
        variance,
        c_grid: c_grid.to_vec(),
        t: t.clone(),
        sep_hat: survival.iter().map(|s| s.p).collect(),
        sep_se: survival.iter().map(|s| s.se).collect(),
        upper: Vec::with_capacity(c_grid.len()),
        lower: Vec::with_capacity(c_grid.len()),
        finite_upper: Vec::with_capacity(c_grid.len()),
        finite_lower: Vec::with_capacity(c_grid.len()),
        sim,
    };
    for (&c, &ti) in c_grid.iter().zip(&t) {
        let e = chebyshev_envelope(schedule.spec, c)?;
        profile.upper.push(e.upper);
        profile.lower.push(e.lower);
        let f = finite_chebyshev(mean, variance, ti);
        profile.finite_upper.push(f.upper);
        profile.finite_lower.push(f.lower);
    }
    Ok(profile)
}

/// Centered and scaled moments at one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    pub n: u32,
    pub a_n: f64,
    pub b_n: f64,
    /// `(mean - a_n) / b_n`, tends to the centering constant.
    pub centered_mean: f64,
    /// `Var / b_n^2`, tends to the envelope constant.
    pub scaled_variance: f64,
    /// `b_n / a_n`.
    pub window_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub family: Family,
    pub gamma_shift: f64,
    pub envelope_constant: f64,
    pub rows: Vec<SharpnessRow>,
}

pub fn asymptotic_sharpness_report(family: Family, n_list: &[u32]) -> Result<SharpnessReport> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n list must be increasing".into()));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    let mut shift = f64::NAN;
    for &n in n_list {
        let spec = ManifoldSpec::new(family, n)?;
        let s = cutoff_schedule(spec);
        shift = s.gamma_shift;
        let mean = mean_closed_form(spec);
        let var = variance_quadrature(spec, MOMENT_TOL)?.variance.unwrap_or(f64::NAN);
        rows.push(SharpnessRow {
            n,
            a_n: s.a_n,
            b_n: s.b_n,
            centered_mean: (mean - s.a_n) / s.b_n,
            scaled_variance: var / (s.b_n * s.b_n),
            window_ratio: s.b_n / s.a_n,
        });
    }
    Ok(SharpnessReport {
        family,
        gamma_shift: shift,
        envelope_constant: envelope_constant(family)?,
        rows,
    })
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_c_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("c grid `{s}` is not start:stop:step"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else { return Err(bad()) };
    if !(start.is_finite() && stop.is_finite() && step > 0.0 && step.is_finite() && stop >= start) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(Error::InvalidArgument(format!("c grid `{s}` has {count} points")));
    }
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}
