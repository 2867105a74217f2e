//! Adaptive Gauss-Kronrod (7/15) integration with global bisection of the
//! worst panel, plus iterated and semi-infinite wrappers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

impl QuadResult {
    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            self.abs_error_estimate
        } else {
            self.abs_error_estimate / self.value.abs()
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

pub const DEFAULT_MAX_PANELS: usize = 2000;
pub const ABS_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| -> Result<f64> {
        let y = f(x)?;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite {
                what: "integrand".into(),
                x,
            })
        }
    };

    let fc = eval(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = kronrod.abs();
    let mut f1 = [0.0; 7];
    let mut f2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let lo = eval(center - dx)?;
        let hi = eval(center + dx)?;
        f1[j] = lo;
        f2[j] = hi;
        kronrod += WGK[j] * (lo + hi);
        abs += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((f1[j] - mean).abs() + (f2[j] - mean).abs());
    }

    let value = kronrod * half;
    let abs_value = abs * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_value > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_value);
    }
    Ok(Panel {
        a,
        b,
        value,
        error,
        abs_value,
    })
}

/// Accuracy request and panel budget for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

struct Adaptive {
    result: QuadResult,
    abs_integral: f64,
}

impl Integrator {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: ABS_FLOOR,
            max_panels: DEFAULT_MAX_PANELS,
        }
    }

    pub fn abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }

    fn validate(&self, a: f64, b: f64) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must be positive (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidArgument(format!(
                "integration interval [{a}, {b}] must be finite with a < b"
            )));
        }
        Ok(())
    }

    fn run<F>(&self, mut f: F, a: f64, b: f64) -> Result<Adaptive>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        self.validate(a, b)?;
        let mut panels = vec![gk15(&mut f, a, b)?];
        let mut evaluations = 15;
        loop {
            // summed in left-to-right order so the result does not depend
            // on the bisection history
            panels.sort_by(|p, q| p.a.total_cmp(&q.a));
            let value = panels.iter().map(|p| p.value).collect::<CompensatedSum>().value();
            let error: f64 = panels.iter().map(|p| p.error).sum();
            let tol = (self.rel_tol * value.abs()).max(self.abs_tol);
            if error <= tol {
                let abs_integral = panels.iter().map(|p| p.abs_value).sum();
                return Ok(Adaptive {
                    result: QuadResult {
                        value,
                        abs_error_estimate: error,
                        evaluations,
                    },
                    abs_integral,
                });
            }
            let (worst, _) = panels
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, be), (i, p)| {
                    if p.error > be {
                        (i, p.error)
                    } else {
                        (bi, be)
                    }
                });
            let p = panels[worst];
            let mid = 0.5 * (p.a + p.b);
            if panels.len() >= self.max_panels || !(mid > p.a && mid < p.b) {
                return Err(Error::NonConvergence {
                    what: "integral".into(),
                    value,
                    error,
                    panels: panels.len(),
                });
            }
            panels[worst] = gk15(&mut f, p.a, mid)?;
            panels.push(gk15(&mut f, mid, p.b)?);
            evaluations += 30;
        }
    }

    /// Integrate a fallible integrand over `[a, b]`.
    pub fn try_integrate<F>(&self, f: F, a: f64, b: f64) -> Result<QuadResult>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        self.run(f, a, b).map(|r| r.result)
    }

    pub fn integrate<F>(&self, mut f: F, a: f64, b: f64) -> Result<QuadResult>
    where
        F: FnMut(f64) -> f64,
    {
        self.try_integrate(|x| Ok(f(x)), a, b)
    }

    /// `int_a^inf f` through `x = a + t/(1 - t)`.
    pub fn try_integrate_from<F>(&self, mut f: F, a: f64) -> Result<QuadResult>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        self.try_integrate(
            |t| {
                let u = 1.0 - t;
                let x = a + t / u;
                let y = f(x)?;
                Ok(if y == 0.0 { 0.0 } else { y / (u * u) })
            },
            0.0,
            1.0,
        )
    }

    /// Outer integral of values produced by an inner integration. The
    /// closure receives the outer variable and the tolerance it should meet.
    /// Inner error estimates are folded into the reported estimate.
    pub fn integrate_nested<G>(&self, mut inner: G, a: f64, b: f64) -> Result<QuadResult>
    where
        G: FnMut(f64, Integrator) -> Result<QuadResult>,
    {
        let inner_cfg = Integrator {
            rel_tol: (self.rel_tol / 10.0).max(1e-14),
            abs_tol: ABS_FLOOR,
            max_panels: self.max_panels,
        };
        let mut worst_rel = 0.0f64;
        let mut inner_evals = 0usize;
        let out = self.run(
            |u| {
                let r = inner(u, inner_cfg)?;
                inner_evals += r.evaluations;
                if r.value != 0.0 {
                    worst_rel = worst_rel.max(r.abs_error_estimate / r.value.abs());
                }
                Ok(r.value)
            },
            a,
            b,
        )?;
        Ok(QuadResult {
            value: out.result.value,
            abs_error_estimate: out.result.abs_error_estimate + worst_rel * out.abs_integral,
            evaluations: out.result.evaluations + inner_evals,
        })
    }
}

/// `int_a^b f` to the requested relative tolerance.
pub fn integrate_1d<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    Integrator::new(rel_tol).integrate(f, a, b)
}

/// `int_a^b int_{lo(u)}^{hi(u)} f(u, s) ds du`. Inner intervals of zero
/// length contribute zero.
pub fn integrate_2d_iterated<F, B>(
    mut f: F,
    outer: (f64, f64),
    mut inner_bounds: B,
    rel_tol: f64,
) -> Result<QuadResult>
where
    F: FnMut(f64, f64) -> f64,
    B: FnMut(f64) -> (f64, f64),
{
    Integrator::new(rel_tol).integrate_nested(
        |u, cfg| {
            let (lo, hi) = inner_bounds(u);
            if lo == hi {
                return Ok(QuadResult {
                    value: 0.0,
                    abs_error_estimate: 0.0,
                    evaluations: 0,
                });
            }
            cfg.integrate(|s| f(u, s), lo, hi)
        },
        outer.0,
        outer.1,
    )
}

/// `int_0^inf f`.
pub fn integrate_semi_infinite<F>(mut f: F, rel_tol: f64) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    Integrator::new(rel_tol).try_integrate_from(|x| Ok(f(x)), 0.0)
}
