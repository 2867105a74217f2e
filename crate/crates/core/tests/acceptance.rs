//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p hsst-core --test acceptance`. Two sub-checks are
//! known not to hold at the sizes the criteria fix; a criterion whose only
//! failing sub-check is one of them prints `FAIL (known)` and does not fail
//! the process. Any other failure exits non-zero.
//!
//! - criterion 3: `(n-1)^2 K_n` approaches `K` like `ln(n)/n`, about 4% low
//!   at `n = 200`, so the 1% requirement cannot hold there.
//! - criterion 9: `Var / b_n^2` grows toward its limit from below, so at a
//!   fixed offset `c` above the centering the tail at `n = 40` is heavier
//!   than at `n = 10`. Steepening in time relative to `a_n` is reported
//!   alongside.

use std::f64::consts::{LN_2, PI};
use std::time::{Duration, Instant};

use hsst::constants::{
    constant_n_hp_monte_carlo, constant_n_rp_monte_carlo, finite_n_k, k_closed_form, k_quadrature,
    ktilde_closed_form, ktilde_quadrature, n_hp, n_rp,
};
use hsst::cutoff::{cutoff_schedule, profile_from_batch, CutoffSchedule};
use hsst::dual_sim::{
    ks_distance, simulate_coupled_tau, simulate_tau, survival_from_samples, HittingSampleBatch, SampleSummary,
    SimConfig, SurvivalPoint,
};
use hsst::moments::{mean_closed_form, mean_quadrature, moment_k_green, variance_exact_cp, variance_quadrature};
use hsst::special::EULER_MASCHERONI;
use hsst::{Family, ManifoldSpec, Result};

struct Outcome {
    pass: bool,
    /// Failing only on a documented sub-check.
    known: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            known: false,
            detail: detail.into(),
        }
    }

    /// `rest` holds every other sub-check; `documented` the one known to fail.
    fn with_known(rest: bool, documented: bool, detail: impl Into<String>) -> Self {
        Self {
            pass: rest && documented,
            known: rest && !documented,
            detail: detail.into(),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn spec(f: Family, n: u32) -> ManifoldSpec {
    ManifoldSpec::new(f, n).expect("valid spec")
}

fn within_budget(elapsed: Duration, secs: u64) -> bool {
    elapsed < Duration::from_secs(secs)
}

fn criterion_1() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for f in Family::ALL {
        for n in f.min_n()..=50 {
            let s = spec(f, n);
            let q = mean_quadrature(s, 1e-12)?.mean;
            let e = rel(q, mean_closed_form(s));
            if e > worst {
                worst = e;
                worst_at = format!("{} n={n}", f.short_name());
            }
        }
    }
    let s2 = mean_quadrature(spec(Family::Sphere, 2), 1e-12)?.mean;
    let s3 = mean_quadrature(spec(Family::Sphere, 3), 1e-12)?.mean;
    let anchors = rel(s2, 1.0).max(rel(s3, 0.75));
    let elapsed = start.elapsed();
    Ok(Outcome::new(
        worst <= 1e-8 && anchors <= 1e-8 && within_budget(elapsed, 30),
        format!(
            "max rel diff {worst:.2e} ({worst_at}); E[tau_2]={s2:.15}, E[tau_3]={s3:.15}; {:.2}s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn criterion_2() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in [1, 2, 5, 10, 50, 100] {
        let q = variance_quadrature(spec(Family::ComplexProjective, n), 1e-12)?.variance.unwrap();
        worst = worst.max(rel(q, variance_exact_cp(n)?));
    }
    let v1 = variance_quadrature(spec(Family::ComplexProjective, 1), 1e-12)?.variance.unwrap();
    let s2 = variance_quadrature(spec(Family::Sphere, 2), 1e-12)?.variance.unwrap();
    let closed = PI * PI / 3.0 - 3.0;
    let anchor = rel(v1, closed).max(rel(s2, closed));
    let elapsed = start.elapsed();
    Ok(Outcome::new(
        worst <= 1e-8 && anchor <= 1e-8 && within_budget(elapsed, 60),
        format!(
            "max rel diff to exact sums {worst:.2e}; n=1 and sphere n=2 vs pi^2/3-3 {anchor:.2e}; {:.2}s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn criterion_3() -> Result<Outcome> {
    let mut decomposition = 0.0f64;
    for n in [2, 5, 10, 50] {
        let v = variance_quadrature(spec(Family::Sphere, n), 1e-12)?.variance.unwrap();
        decomposition = decomposition.max(rel(v, finite_n_k(n, 1e-12)?.variance()));
    }
    let k200 = finite_n_k(200, 1e-12)?;
    let m = 199.0;
    let kt_ratio = m * k200.ktilde_n / ktilde_closed_form();
    let k_ratio = m * m * k200.k_n / k_closed_form();
    let k_abs = (m * m * k200.k_n - k_closed_form()).abs();
    let identity = rel(8.0 * k_closed_form() + 4.0 * ktilde_closed_form().powi(2), PI * PI / 6.0);
    let quad_k = rel(k_quadrature(1e-13)?.value, k_closed_form());
    let quad_kt = rel(ktilde_quadrature(1e-13)?.value, ktilde_closed_form());
    let rest = decomposition <= 1e-7
        && (kt_ratio - 1.0).abs() <= 0.01
        && identity <= 1e-15
        && quad_k <= 1e-12
        && quad_kt <= 1e-12;
    Ok(Outcome::with_known(
        rest,
        (k_ratio - 1.0).abs() <= 0.01,
        format!(
            "Var vs 8K_n+4K~_n^2 {decomposition:.2e}; (n-1)K~_n/K~ = {kt_ratio:.5}; (n-1)^2K_n/K = {k_ratio:.5} \
             (abs gap {k_abs:.4}); 8K+4K~^2 vs pi^2/6 {identity:.1e}; quadrature K {quad_k:.1e}, K~ {quad_kt:.1e}"
        ),
    ))
}

fn criterion_4() -> Result<Outcome> {
    let start = Instant::now();
    let nhp = n_hp()?;
    let nrp = n_rp()?;
    let s = variance_quadrature(spec(Family::Sphere, 500), 1e-10)?.variance.unwrap() * 499.0f64.powi(2);
    let h = variance_quadrature(spec(Family::QuaternionicProjective, 150), 1e-10)?.variance.unwrap() * 301.0f64.powi(2);
    let r = variance_quadrature(spec(Family::RealProjective, 300), 1e-10)?.variance.unwrap() * 299.0f64.powi(2);
    let mc_hp = constant_n_hp_monte_carlo(10_000_000, 11)?;
    let mc_rp = constant_n_rp_monte_carlo(10_000_000, 12)?;
    let z_hp = (mc_hp.value - nhp) / mc_hp.error_estimate;
    let z_rp = (mc_rp.value - nrp) / mc_rp.error_estimate;
    let elapsed = start.elapsed();
    let pass = rel(s, PI * PI / 6.0) <= 0.02
        && rel(h, nhp) <= 0.05
        && rel(r, 4.0 * nrp) <= 0.05
        && z_hp.abs() <= 3.0
        && z_rp.abs() <= 3.0
        && within_budget(elapsed, 600);
    Ok(Outcome::new(
        pass,
        format!(
            "sphere {:.4} ({:.2}%), hp {:.4} vs N_hp {nhp:.6} ({:.2}%), rp {:.4} vs 4N_rp {:.6} ({:.2}%); \
             MC z: hp {z_hp:+.2}, rp {z_rp:+.2}; {:.1}s",
            s,
            100.0 * rel(s, PI * PI / 6.0),
            h,
            100.0 * rel(h, nhp),
            r,
            4.0 * nrp,
            100.0 * rel(r, 4.0 * nrp),
            elapsed.as_secs_f64()
        ),
    ))
}

fn criterion_5() -> Result<Outcome> {
    let n = 10_000u32;
    let cp = spec(Family::ComplexProjective, n);
    let nf = n as f64;
    let mut cp_err = 0.0f64;
    for mean in [mean_closed_form(cp), mean_quadrature(cp, 1e-12)?.mean] {
        cp_err = cp_err.max((nf * mean - nf.ln() - EULER_MASCHERONI - 0.5 / nf).abs());
    }
    let hp = spec(Family::QuaternionicProjective, n);
    let m = 2.0 * nf + 1.0;
    let mut hp_err = 0.0f64;
    for mean in [mean_closed_form(hp), mean_quadrature(hp, 1e-12)?.mean] {
        hp_err = hp_err.max((m * mean - m.ln() - EULER_MASCHERONI - 0.5 / m).abs());
    }
    let rp = spec(Family::RealProjective, n);
    let m = nf - 1.0;
    let mut rp_err = 0.0f64;
    for mean in [mean_closed_form(rp), mean_quadrature(rp, 1e-12)?.mean] {
        rp_err = rp_err.max((0.5 * m * mean - m.ln() - (EULER_MASCHERONI - LN_2)).abs());
    }
    Ok(Outcome::new(
        cp_err <= 1e-4 && hp_err <= 1e-2 && rp_err <= 1e-2,
        format!("cp {cp_err:.2e}, hp {hp_err:.2e}, rp {rp_err:.2e} at n=10^4"),
    ))
}

fn criterion_6() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for f in Family::ALL {
        let s = spec(f, 5);
        let q = variance_quadrature(s, 1e-12)?;
        let target = q.second_moment.unwrap();
        let e = rel(moment_k_green(s, 2, 4096)?, target);
        parts.push(format!("{} {e:.1e}", f.short_name()));
        worst = worst.max(e);
    }
    Ok(Outcome::new(worst <= 1e-3, format!("rel errors {}", parts.join(", "))))
}

fn z_scores(sim: &SampleSummary, mean: f64, var: f64) -> (f64, f64) {
    ((sim.mean - mean) / sim.mean_se, (sim.variance - var) / sim.variance_se)
}

fn criterion_7() -> Result<Outcome> {
    let start = Instant::now();
    let eps = 1e-2;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut sphere_mean = (0.0, 0.0);
    for (f, n, seed) in [(Family::Sphere, 10, 101), (Family::ComplexProjective, 5, 102)] {
        let s = spec(f, n);
        let exact = variance_quadrature(s, 1e-12)?;
        let batch = simulate_tau(&SimConfig::new(s, 1e-5, eps, seed, 100_000)?)?;
        let sum = batch.summary();
        let (zm, zv) = z_scores(&sum, exact.mean, exact.variance.unwrap());
        pass &= zm.abs() <= 3.0 && zv.abs() <= 3.0;
        parts.push(format!("{} n={n}: z_mean {zm:+.2}, z_var {zv:+.2}", f.short_name()));
        if f == Family::Sphere {
            sphere_mean = (sum.mean, sum.mean_se);
        }
    }
    let s = spec(Family::Sphere, 10);
    let half = simulate_tau(&SimConfig::new(s, 1e-5, eps / 2.0, 103, 100_000)?)?.summary();
    let shift = (half.mean - sphere_mean.0) / (half.mean_se.hypot(sphere_mean.1));
    pass &= shift.abs() < 2.0;
    let elapsed = start.elapsed();
    pass &= within_budget(elapsed, 600);
    Ok(Outcome::new(
        pass,
        format!(
            "{}; eps halving shift {shift:+.2} combined SE; {:.1}s",
            parts.join("; "),
            elapsed.as_secs_f64()
        ),
    ))
}

fn criterion_8() -> Result<Outcome> {
    let s = spec(Family::Sphere, 10);
    let dt = 1e-5;
    let direct = simulate_tau(&SimConfig::new(s, dt, 1e-2, 201, 10_000)?)?;
    // a containment breach beyond 3 sqrt(dt) aborts the run with an error
    let coupled = simulate_coupled_tau(&SimConfig::new(s, dt, 1e-2, 202, 10_000)?)?;
    let ks = ks_distance(&direct.samples, &coupled.samples)?;
    let violation = coupled.max_containment_violation.unwrap_or(f64::INFINITY);
    let slack = 3.0 * dt.sqrt();
    Ok(Outcome::new(
        ks.p_value >= 0.01 && violation <= slack,
        format!(
            "KS D={:.4}, p={:.3}; max rho-R {violation:.2e} (slack {slack:.2e})",
            ks.statistic, ks.p_value
        ),
    ))
}

fn batch(f: Family, n: u32, seed: u64) -> Result<HittingSampleBatch> {
    simulate_tau(&SimConfig::new(spec(f, n), 1e-5, 1e-2, seed, 20_000)?)
}

/// Largest `(later - earlier) / SE` over points where separation should
/// have dropped.
fn excess(earlier: &[SurvivalPoint], later: &[SurvivalPoint], paths: f64) -> f64 {
    earlier
        .iter()
        .zip(later)
        .map(|(a, b)| (b.p - a.p) / a.se.hypot(b.se).max(1.0 / paths))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_9() -> Result<Outcome> {
    let grid: Vec<f64> = (-3..=6).map(f64::from).collect();
    let paths = 20_000.0;
    let mut rest = true;
    let mut fixed_c = true;
    let mut parts = Vec::new();
    for (i, f) in Family::ALL.into_iter().enumerate() {
        let p20 = profile_from_batch(&batch(f, 20, 300 + i as u64)?, &grid)?;
        let worst = p20.worst_finite_violation();
        let monotone = p20.sep_hat.windows(2).all(|w| w[1] <= w[0]);
        let (b10, b40) = (batch(f, 10, 310 + i as u64)?, batch(f, 40, 320 + i as u64)?);
        let (s10, s40) = (cutoff_schedule(b10.config.spec), cutoff_schedule(b40.config.spec));
        let above: Vec<f64> = grid.iter().copied().filter(|&c| c > s10.gamma_shift).collect();
        let at = |s: &CutoffSchedule, b: &HittingSampleBatch, cs: &[f64]| {
            survival_from_samples(&b.samples, &cs.iter().map(|&c| s.time(c)).collect::<Vec<_>>())
        };
        let steepen = excess(&at(&s10, &b10, &above)?, &at(&s40, &b40, &above)?, paths);
        // same comparison in time relative to the cutoff time
        let ratios = [1.25, 1.5, 2.0];
        let rel_at = |s: &CutoffSchedule, b: &HittingSampleBatch| {
            survival_from_samples(&b.samples, &ratios.map(|x| x * s.a_n))
        };
        let relative = excess(&rel_at(&s10, &b10)?, &rel_at(&s40, &b40)?, paths);
        rest &= worst <= 3.0 && monotone && relative <= 3.0;
        fixed_c &= steepen <= 3.0;
        parts.push(format!(
            "{}: envelope excess {worst:+.2} SE; n=40 over n=10 at fixed c {steepen:+.2} SE, at fixed t/a_n {relative:+.2} SE",
            f.short_name()
        ));
    }
    Ok(Outcome::with_known(rest, fixed_c, parts.join("; ")))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Result<Outcome>); 9] = [
        (1, "mean route agreement", criterion_1),
        (2, "complex projective variance exactness", criterion_2),
        (3, "sphere variance decomposition", criterion_3),
        (4, "asymptotic variance constants", criterion_4),
        (5, "mean expansions", criterion_5),
        (6, "Green-operator moments", criterion_6),
        (7, "simulation fidelity", criterion_7),
        (8, "coupling law equality", criterion_8),
        (9, "cutoff envelopes", criterion_9),
    ];
    // optional criterion numbers on the command line select a subset
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        let known = !outcome.pass && outcome.known;
        println!(
            "criterion {id} {tag}{} {name}: {} [{:.1}s]",
            if known { " (known)" } else { "" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        if !outcome.pass && !known {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: no unexpected failures");
    } else {
        println!("acceptance: unexpected failures in criteria {unexpected:?}");
        std::process::exit(1);
    }
}
