//! Euler-Maruyama simulation of the dual radius `dR = sqrt(2) dB + b(R) dt`
//! up to its hitting time of `pi`, and of the coupled pair (radial part of
//! the Brownian motion, dual radius) driven by one noise.

use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ManifoldSpec, RadialGeometry};

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000_000;
pub const TABLE_NODES: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub spec: ManifoldSpec,
    pub dt: f64,
    pub start_offset: f64,
    pub seed: u64,
    pub paths: u64,
    pub step_budget: u64,
}

impl SimConfig {
    pub fn new(spec: ManifoldSpec, dt: f64, start_offset: f64, seed: u64, paths: u64) -> Result<Self> {
        let cfg = Self {
            spec,
            dt,
            start_offset,
            seed,
            paths,
            step_budget: DEFAULT_STEP_BUDGET,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_step_budget(mut self, budget: u64) -> Self {
        self.step_budget = budget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.start_offset > 0.0 && self.start_offset < PI / 10.0) {
            return Err(Error::InvalidArgument(format!(
                "start offset {} must lie in (0, pi/10)",
                self.start_offset
            )));
        }
        if self.paths == 0 {
            return Err(Error::InvalidArgument("at least one path is required".into()));
        }
        if self.step_budget == 0 {
            return Err(Error::InvalidArgument("step budget must be positive".into()));
        }
        Ok(())
    }
}

/// A function with simple poles at `0` and `pi`, stored as the smooth
/// product `r (pi - r) f(r)` on a uniform grid and interpolated with
/// four-point Lagrange stencils.
#[derive(Debug, Clone)]
pub struct PoleTable {
    values: Vec<f64>,
    inv_h: f64,
}

impl PoleTable {
    /// `at_zero` and `at_pi` are the limits of `r (pi - r) f(r)`.
    pub fn new<F: Fn(f64) -> f64>(f: F, at_zero: f64, at_pi: f64, nodes: usize) -> Self {
        assert!(nodes >= 8);
        let h = PI / (nodes - 1) as f64;
        let values = (0..nodes)
            .map(|i| {
                if i == 0 {
                    at_zero
                } else if i == nodes - 1 {
                    at_pi
                } else {
                    let r = i as f64 * h;
                    r * (PI - r) * f(r)
                }
            })
            .collect();
        Self { values, inv_h: 1.0 / h }
    }

    /// Dual-radius drift `b`.
    pub fn drift(spec: ManifoldSpec) -> Self {
        let geo = RadialGeometry::new(spec);
        Self::new(
            |r| geo.drift_unchecked(r),
            PI * spec.drift_coeff_at_zero(),
            PI * spec.drift_coeff_at_pi(),
            TABLE_NODES,
        )
    }

    /// Mean curvature `sigma`.
    pub fn sigma(spec: ManifoldSpec) -> Self {
        let geo = RadialGeometry::new(spec);
        Self::new(
            |r| geo.sigma_unchecked(r),
            PI * (spec.real_dim() as f64 - 1.0),
            -PI * spec.drift_coeff_at_pi(),
            TABLE_NODES,
        )
    }

    /// Smooth part `r (pi - r) f(r)`.
    #[inline]
    pub fn smooth(&self, r: f64) -> f64 {
        let n = self.values.len();
        let x = r * self.inv_h;
        let i = (x as usize).clamp(1, n - 3);
        let t = x - i as f64;
        let v = &self.values[i - 1..i + 3];
        // nodes at -1, 0, 1, 2
        let tm1 = t + 1.0;
        let t1 = t - 1.0;
        let t2 = t - 2.0;
        -v[0] * t * t1 * t2 / 6.0 + v[1] * tm1 * t1 * t2 / 2.0 - v[2] * tm1 * t * t2 / 2.0
            + v[3] * tm1 * t * t1 / 6.0
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        self.smooth(r) / (r * (PI - r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingSampleBatch {
    pub config: SimConfig,
    pub samples: Vec<f64>,
    pub steps: Vec<u64>,
    /// Per path, the largest `|drift| dt_eff / R` over all steps.
    pub max_drift_ratio: Vec<f64>,
    /// Largest `rho - R` seen on any step of a coupled run.
    pub max_containment_violation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

pub fn summarize(samples: &[f64]) -> SampleSummary {
    let n = samples.len();
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &x in samples {
        let d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    let variance = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
    let mu2 = m2 / nf;
    let mu4 = m4 / nf;
    SampleSummary {
        count: n,
        mean,
        mean_se: (variance / nf).sqrt(),
        variance,
        variance_se: ((mu4 - mu2 * mu2).max(0.0) / nf).sqrt(),
    }
}

impl HittingSampleBatch {
    pub fn summary(&self) -> SampleSummary {
        summarize(&self.samples)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let c = &self.config;
        writeln!(w, "family,n,dt,eps,seed,path,tau")?;
        for (i, tau) in self.samples.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                c.spec.family(),
                c.spec.n(),
                crate::output::csv_float(c.dt),
                crate::output::csv_float(c.start_offset),
                c.seed,
                i,
                crate::output::csv_float(*tau)
            )?;
        }
        Ok(())
    }
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

struct PathOutcome {
    tau: f64,
    steps: u64,
    max_ratio: f64,
    max_violation: f64,
}

/// One Euler walker; `step` consumes one standard normal and returns the
/// outcome once the path has finished.
trait Walker {
    fn step(&mut self, z: f64, path: u64) -> Option<Result<PathOutcome>>;
}

const LANES: usize = 8;
/// Drift cap of the coupled walker as a fraction of the radius. The pair is
/// scale invariant near 0 and the gap `R - rho` never shrinks, so coarse
/// relative steps there bias the whole path; the single walker keeps 1/2.
const COUPLED_CAP: f64 = 0.05;
const CHUNK: u64 = 256;

/// Advances up to `LANES` independent paths in round-robin so their
/// serial dependency chains overlap. Each path owns its RNG stream, so the
/// samples do not depend on the interleaving.
fn run_chunk<W: Walker, I: Fn(&mut ChaCha8Rng) -> W>(seed: u64, paths: std::ops::Range<u64>, init: &I) -> Result<Vec<PathOutcome>> {
    let start = paths.start;
    let mut out: Vec<Option<PathOutcome>> = (paths.start..paths.end).map(|_| None).collect();
    let mut next = paths.start;
    let mut lanes: Vec<Option<(u64, ChaCha8Rng, W)>> = Vec::with_capacity(LANES);
    for _ in 0..LANES {
        if next < paths.end {
            let mut rng = path_rng(seed, next);
            let w = init(&mut rng);
            lanes.push(Some((next, rng, w)));
            next += 1;
        } else {
            lanes.push(None);
        }
    }
    let mut active = lanes.iter().filter(|l| l.is_some()).count();
    while active > 0 {
        for lane in lanes.iter_mut() {
            let Some((path, rng, walker)) = lane else { continue };
            let z: f64 = StandardNormal.sample(rng);
            if let Some(done) = walker.step(z, *path) {
                out[(*path - start) as usize] = Some(done?);
                if next < paths.end {
                    let mut rng = path_rng(seed, next);
                    let w = init(&mut rng);
                    *lane = Some((next, rng, w));
                    next += 1;
                } else {
                    *lane = None;
                    active -= 1;
                }
            }
        }
    }
    Ok(out.into_iter().map(|o| o.expect("every path finishes")).collect())
}

fn run_all<W: Walker, I: Fn(&mut ChaCha8Rng) -> W + Sync>(cfg: &SimConfig, init: I) -> Result<Vec<PathOutcome>> {
    let chunks: Vec<u64> = (0..cfg.paths.div_ceil(CHUNK)).collect();
    let parts: Vec<Result<Vec<PathOutcome>>> = chunks
        .into_par_iter()
        .map(|c| run_chunk(cfg.seed, c * CHUNK..((c + 1) * CHUNK).min(cfg.paths), &init))
        .collect();
    let mut all = Vec::with_capacity(cfg.paths as usize);
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

struct DualWalker<'a> {
    table: &'a PoleTable,
    dt: f64,
    sq_dt: f64,
    budget: u64,
    r: f64,
    t: f64,
    steps: u64,
    max_ratio: f64,
}

impl Walker for DualWalker<'_> {
    #[inline]
    fn step(&mut self, z: f64, path: u64) -> Option<Result<PathOutcome>> {
        let r = self.r;
        let b = self.table.eval(r);
        let ab = b.abs();
        let (h, sq) = if ab * self.dt > 0.5 * r {
            let h = 0.5 * r / ab;
            (h, (2.0 * h).sqrt())
        } else {
            (self.dt, self.sq_dt)
        };
        self.max_ratio = self.max_ratio.max(ab * h / r);
        let mut next = r + b * h + sq * z;
        self.steps += 1;
        if next >= PI {
            return Some(Ok(PathOutcome {
                tau: self.t + h * (PI - r) / (next - r),
                steps: self.steps,
                max_ratio: self.max_ratio,
                max_violation: f64::NEG_INFINITY,
            }));
        }
        if next <= 0.0 {
            // entrance boundary: the exact process never reaches 0
            next = (-next).max(f64::MIN_POSITIVE);
        }
        if self.steps >= self.budget {
            return Some(Err(Error::StepBudget {
                path,
                budget: self.budget,
            }));
        }
        self.r = next;
        self.t += h;
        None
    }
}

struct CoupledWalker<'a> {
    sigma: &'a PoleTable,
    dt: f64,
    slack: f64,
    budget: u64,
    rho: f64,
    r: f64,
    t: f64,
    steps: u64,
    max_ratio: f64,
    max_violation: f64,
}

impl Walker for CoupledWalker<'_> {
    #[inline]
    fn step(&mut self, z: f64, path: u64) -> Option<Result<PathOutcome>> {
        let (rho, r) = (self.rho, self.r);
        let b_rho = self.sigma.eval(rho);
        let b_r = 2.0 * b_rho - self.sigma.eval(r);
        let mut h = self.dt;
        if b_rho.abs() * h > COUPLED_CAP * rho {
            h = COUPLED_CAP * rho / b_rho.abs();
        }
        if b_r.abs() * h > COUPLED_CAP * r {
            h = COUPLED_CAP * r / b_r.abs();
        }
        self.max_ratio = self.max_ratio.max(b_r.abs() * h / r);
        let dw = (2.0 * h).sqrt() * z;
        let mut next_rho = rho + b_rho * h + dw;
        let mut next_r = r + b_r * h + dw;
        self.steps += 1;
        if next_r >= PI {
            return Some(Ok(PathOutcome {
                tau: self.t + h * (PI - r) / (next_r - r),
                steps: self.steps,
                max_ratio: self.max_ratio,
                max_violation: self.max_violation,
            }));
        }
        if next_rho <= 0.0 {
            next_rho = (-next_rho).max(f64::MIN_POSITIVE);
        }
        if next_rho >= PI {
            next_rho = 2.0 * PI - next_rho;
        }
        if next_r <= 0.0 {
            next_r = (-next_r).max(f64::MIN_POSITIVE);
        }
        let violation = next_rho - next_r;
        self.max_violation = self.max_violation.max(violation);
        if violation > self.slack {
            return Some(Err(Error::Containment {
                path,
                violation,
                slack: self.slack,
            }));
        }
        if self.steps >= self.budget {
            return Some(Err(Error::StepBudget {
                path,
                budget: self.budget,
            }));
        }
        self.rho = next_rho;
        self.r = next_r;
        self.t += h;
        None
    }
}

fn collect(cfg: SimConfig, outcomes: Vec<PathOutcome>, coupled: bool) -> HittingSampleBatch {
    let mut samples = Vec::with_capacity(outcomes.len());
    let mut steps = Vec::with_capacity(outcomes.len());
    let mut ratios = Vec::with_capacity(outcomes.len());
    let mut worst = f64::NEG_INFINITY;
    for o in outcomes {
        samples.push(o.tau);
        steps.push(o.steps);
        ratios.push(o.max_ratio);
        worst = worst.max(o.max_violation);
    }
    HittingSampleBatch {
        config: cfg,
        samples,
        steps,
        max_drift_ratio: ratios,
        max_containment_violation: coupled.then_some(worst),
    }
}

/// Hitting times of `pi` by the dual radius started at `start_offset`.
pub fn simulate_tau(cfg: &SimConfig) -> Result<HittingSampleBatch> {
    cfg.validate()?;
    let table = PoleTable::drift(cfg.spec);
    simulate_tau_with(cfg, &table)
}

/// As [`simulate_tau`] with a prebuilt drift table.
pub fn simulate_tau_with(cfg: &SimConfig, table: &PoleTable) -> Result<HittingSampleBatch> {
    cfg.validate()?;
    let sq_dt = (2.0 * cfg.dt).sqrt();
    let outcomes = run_all(cfg, |_| DualWalker {
        table,
        dt: cfg.dt,
        sq_dt,
        budget: cfg.step_budget,
        r: cfg.start_offset,
        t: 0.0,
        steps: 0,
        max_ratio: 0.0,
    })?;
    Ok(collect(*cfg, outcomes, false))
}

/// Radius of a uniform point of the ball of radius `eps`: solves
/// `I(r) = u I(eps)` by bisection in log space.
fn uniform_ball_radius(geo: &RadialGeometry, ln_ball: f64, eps: f64, u: f64) -> f64 {
    let target = ln_ball + u.ln();
    let (mut lo, mut hi) = (0.0, eps);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if geo.ln_cumulative(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Hitting times of `pi` by the dual radius of the coupling, co-simulated
/// with the radial part `rho` of the Brownian motion under a shared noise.
///
/// The dual radius starts at `eps` and `rho` at the radius of a uniform
/// point of that ball, so that `rho` given the dual path has the uniform
/// law on the current ball from the start.
pub fn simulate_coupled_tau(cfg: &SimConfig) -> Result<HittingSampleBatch> {
    cfg.validate()?;
    let sigma = PoleTable::sigma(cfg.spec);
    let geo = RadialGeometry::new(cfg.spec);
    let eps = cfg.start_offset;
    let ln_ball = geo.ln_cumulative(eps);
    let outcomes = run_all(cfg, |rng| {
        let u: f64 = rand::Rng::random(rng);
        let rho = uniform_ball_radius(&geo, ln_ball, eps, 1.0 - u).min(eps);
        CoupledWalker {
            sigma: &sigma,
            dt: cfg.dt,
            slack: 3.0 * cfg.dt.sqrt(),
            budget: cfg.step_budget,
            rho,
            r: eps,
            t: 0.0,
            steps: 0,
            max_ratio: 0.0,
            max_violation: rho - eps,
        }
    })?;
    Ok(collect(*cfg, outcomes, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub t: f64,
    pub p: f64,
    pub se: f64,
}

/// `P(tau > t)` with binomial standard errors.
pub fn survival_from_samples(samples: &[f64], t_grid: &[f64]) -> Result<Vec<SurvivalPoint>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample batch".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(t_grid
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&x| x <= t);
            let p = (sorted.len() - below) as f64 / n;
            SurvivalPoint {
                t,
                p,
                se: (p * (1.0 - p) / n).sqrt(),
            }
        })
        .collect())
}

pub fn empirical_survival(batch: &HittingSampleBatch, t_grid: &[f64]) -> Result<Vec<SurvivalPoint>> {
    survival_from_samples(&batch.samples, t_grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov distribution tail `Q(lambda) = 2 sum (-1)^(k-1) e^{-2 k^2 lambda^2}`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // theta-function form, fast for small lambda
        let y = (-PI * PI / (8.0 * lambda * lambda)).exp();
        let s = y + y.powi(9) + y.powi(25) + y.powi(49);
        (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let x = (-2.0 * lambda * lambda).exp();
        let s = x - x.powi(4) + x.powi(9) - x.powi(16);
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov-Smirnov statistic with the asymptotic p-value.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("KS test needs non-empty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_tail(lambda),
    })
}
