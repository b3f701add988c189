//! Double-exponential quadrature: tanh-sinh on finite intervals (with
//! adaptive bisection when a panel refuses to converge) and exp-sinh on
//! half-lines.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

#[allow(unused_imports)]
use num_traits::Float;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-8, max_subdivisions: 2000 }
    }
}

impl QuadratureSettings {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let s = Self { abs_tol, rel_tol, max_subdivisions };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be strictly positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::domain("max_subdivisions must be at least 1"));
        }
        Ok(())
    }
}

const MAX_LEVEL: u32 = 10;
// t-range of the finite-interval rule; at t = 4 the abscissae sit within
// ~1e-37 of the endpoints (relative to the half-width).
const TANH_SINH_TMAX: f64 = 4.0;
// t-range of the half-line rule. Left end reaches x - a ~ e^{-60}, right end
// reaches x - a ~ e^{116}, far enough for algebraic tails while
// keeping x^3 f(x) finite.
const EXP_SINH_TMIN: f64 = -4.3;
const EXP_SINH_TMAX: f64 = 5.0;

/// Integrate `f` over `[lower, upper]`; either endpoint may be infinite.
pub fn integrate<F>(f: F, lower: f64, upper: f64, settings: &QuadratureSettings) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    settings.check()?;
    if lower.is_nan() || upper.is_nan() {
        return Err(Error::domain("integration limits must not be NaN"));
    }
    if lower == upper {
        return Ok(0.0);
    }
    if lower > upper {
        return integrate(f, upper, lower, settings).map(|v| -v);
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => adaptive_tanh_sinh(&f, lower, upper, settings),
        (true, false) => exp_sinh(&|u: f64| f(lower + u), settings),
        (false, true) => exp_sinh(&|u: f64| f(upper - u), settings),
        (false, false) => {
            let right = exp_sinh(&|u: f64| f(u), settings)?;
            let left = exp_sinh(&|u: f64| f(-u), settings)?;
            Ok(left + right)
        }
    }
}

/// Integrate over consecutive panels `[p0, p1], [p1, p2], ...`. Use this to
/// put known kinks of the integrand on panel boundaries.
pub fn integrate_with_breakpoints<F>(
    f: F,
    points: &[f64],
    settings: &QuadratureSettings,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if points.len() < 2 {
        return Err(Error::domain("need at least two breakpoints"));
    }
    let mut total = 0.0;
    for w in points.windows(2) {
        total += integrate(&f, w[0], w[1], settings)?;
    }
    Ok(total)
}

struct Panel {
    estimate: f64,
    error: f64,
}

/// Tanh-sinh rule on `[a, b]`, refining the step until successive levels
/// agree or `MAX_LEVEL` is hit.
fn tanh_sinh_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Panel {
    let half = 0.5 * (b - a);
    let centre = 0.5 * (a + b);

    let eval_pair = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = half * FRAC_PI_2 * t.cosh() / (cu * cu);
        // distance from the nearer endpoint, computed without cancellation
        let delta = half * 2.0 / (1.0 + (2.0 * u).exp());
        if w == 0.0 {
            return 0.0;
        }
        // each side is dropped on its own once it rounds onto its endpoint
        let xl = a + delta;
        let xr = b - delta;
        let mut acc = 0.0;
        if xl > a {
            acc += f(xl);
        }
        if xr < b {
            acc += f(xr);
        }
        w * acc
    };

    let mut h = 1.0;
    let mut sum = half * FRAC_PI_2 * f(centre);
    let mut k = 1.0;
    while k * h <= TANH_SINH_TMAX {
        sum += eval_pair(k * h);
        k += 1.0;
    }
    let mut estimate = h * sum;
    let mut error = f64::INFINITY;

    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut t = h;
        while t <= TANH_SINH_TMAX {
            sum += eval_pair(t);
            t += 2.0 * h;
        }
        let next = h * sum;
        error = (next - estimate).abs();
        estimate = next;
        if error <= tol && level >= 3 {
            break;
        }
    }
    Panel { estimate, error }
}

fn adaptive_tanh_sinh<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let width = b - a;
    let mut stack: Vec<(f64, f64)> = alloc::vec![(a, b)];
    let mut total = 0.0;
    let mut splits = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        let share = (hi - lo) / width;
        let panel = tanh_sinh_panel(f, lo, hi, settings.abs_tol * share);
        if !panel.estimate.is_finite() {
            return Err(Error::NonConvergence("integrand produced a non-finite value".into()));
        }
        let tol = (settings.abs_tol * share).max(settings.rel_tol * panel.estimate.abs());
        if panel.error <= tol {
            total += panel.estimate;
            continue;
        }
        splits += 1;
        if splits > settings.max_subdivisions {
            return Err(Error::NonConvergence(alloc::format!(
                "tanh-sinh quadrature exhausted {} subdivisions",
                settings.max_subdivisions
            )));
        }
        let mid = 0.5 * (lo + hi);
        stack.push((mid, hi));
        stack.push((lo, mid));
    }
    Ok(total)
}

/// Exp-sinh rule for `∫_0^∞ g(u) du`.
fn exp_sinh<G: Fn(f64) -> f64>(g: &G, settings: &QuadratureSettings) -> Result<f64> {
    let term = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let x = u.exp();
        if x == 0.0 || !x.is_finite() {
            return 0.0;
        }
        let w = x * FRAC_PI_2 * t.cosh();
        let v = g(x);
        if v == 0.0 {
            0.0
        } else {
            w * v
        }
    };

    let mut h = 0.5;
    let mut sum = 0.0;
    let mut k = (EXP_SINH_TMIN / h).ceil();
    while k * h <= EXP_SINH_TMAX {
        sum += term(k * h);
        k += 1.0;
    }
    let mut estimate = h * sum;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut t = (EXP_SINH_TMIN / h).ceil() * h;
        // only the new (odd) abscissae
        if ((t / h).round() as i64) % 2 == 0 {
            t += h;
        }
        while t <= EXP_SINH_TMAX {
            sum += term(t);
            t += 2.0 * h;
        }
        let next = h * sum;
        let error = (next - estimate).abs();
        estimate = next;
        if !estimate.is_finite() {
            return Err(Error::NonConvergence("integrand produced a non-finite value".into()));
        }
        if level >= 3 && error <= settings.abs_tol.max(settings.rel_tol * estimate.abs()) {
            return Ok(estimate);
        }
    }
    Err(Error::NonConvergence("exp-sinh quadrature did not converge on a half-line".into()))
}
