//! The centred two-piece Student t family.
//!
//! A symmetric base density `f` (Student t with `nu` degrees of freedom, or
//! the standard normal) is stretched by `gamma` to the right of its mode and
//! by `1/gamma` to the left. The resulting uncentred density has mean
//! `m(gamma, nu)`; the centred density shifts it so that the mean is zero and
//! the mode sits at `-m`.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

#[allow(unused_imports)]
use num_traits::Float;
use crate::error::{Error, Result};
use crate::special::{
    self, ln_gamma, ln_gamma_diff, normal_cdf, student_t_cdf, SeededRng, LN_PI, LN_SQRT_2PI,
};

/// Tail behaviour of the base density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailSpec {
    /// Student t with `nu > 2` degrees of freedom.
    Finite(f64),
    /// Standard normal base (the `nu = inf` model).
    NormalLimit,
}

impl TailSpec {
    pub fn finite(nu: f64) -> Result<Self> {
        if nu > 2.0 && nu.is_finite() {
            Ok(TailSpec::Finite(nu))
        } else {
            Err(Error::domain(alloc::format!(
                "tail parameter must satisfy 2 < nu < inf (use the normal limit for nu = inf), got {nu}"
            )))
        }
    }

    pub fn nu(&self) -> Option<f64> {
        match *self {
            TailSpec::Finite(nu) => Some(nu),
            TailSpec::NormalLimit => None,
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            TailSpec::Finite(nu) => TailSpec::finite(nu).map(|_| ()),
            TailSpec::NormalLimit => Ok(()),
        }
    }
}

impl core::fmt::Display for TailSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TailSpec::Finite(nu) => write!(f, "{nu}"),
            TailSpec::NormalLimit => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtptSpec {
    gamma: f64,
    tail: TailSpec,
}

impl CtptSpec {
    pub fn new(gamma: f64, tail: TailSpec) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::domain(alloc::format!("skewness gamma must be > 0, got {gamma}")));
        }
        tail.check()?;
        Ok(Self { gamma, tail })
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        Self::new(1.0, TailSpec::finite(nu)?)
    }

    pub fn standard_normal() -> Self {
        Self { gamma: 1.0, tail: TailSpec::NormalLimit }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tail(&self) -> TailSpec {
        self.tail
    }

    pub fn nu(&self) -> Option<f64> {
        self.tail.nu()
    }

    /// Precomputed constants for repeated density evaluation.
    pub fn density(&self) -> Density {
        Density::new(self)
    }
}

/// `2 nu Γ((nu+1)/2) / (sqrt(pi nu) (nu-1) Γ(nu/2))`, the mean of `|T|`.
fn abs_mean(tail: TailSpec) -> f64 {
    match tail {
        TailSpec::Finite(nu) => {
            (LN_2 + nu.ln() - 0.5 * (LN_PI + nu.ln()) - (nu - 1.0).ln() + ln_gamma_diff(0.5 * nu, 0.5))
                .exp()
        }
        TailSpec::NormalLimit => (2.0 / PI).sqrt(),
    }
}

/// Mean of the uncentred distribution, `m(gamma, nu)`.
pub fn offset_m(spec: &CtptSpec) -> f64 {
    abs_mean(spec.tail) * (spec.gamma - 1.0 / spec.gamma)
}

/// Evaluation kernel with the spec's constants folded in.
#[derive(Debug, Clone, Copy)]
pub struct Density {
    gamma: f64,
    inv_gamma: f64,
    m: f64,
    // ln(2 / (gamma + 1/gamma)) + log normalizer of the base density
    log_const: f64,
    // None for the normal base
    nu: Option<f64>,
    half_nu_plus_one: f64,
}

impl Density {
    fn new(spec: &CtptSpec) -> Self {
        let base_norm = match spec.tail {
            TailSpec::Finite(nu) => special::student_t_log_norm(nu),
            TailSpec::NormalLimit => -LN_SQRT_2PI,
        };
        let nu = spec.tail.nu();
        Self {
            gamma: spec.gamma,
            inv_gamma: 1.0 / spec.gamma,
            m: offset_m(spec),
            log_const: LN_2 - (spec.gamma + 1.0 / spec.gamma).ln() + base_norm,
            nu,
            half_nu_plus_one: nu.map_or(0.0, |nu| 0.5 * (nu + 1.0)),
        }
    }

    pub fn offset(&self) -> f64 {
        self.m
    }

    #[inline]
    fn log_kernel(&self, z: f64) -> f64 {
        match self.nu {
            Some(nu) => -self.half_nu_plus_one * (z * z / nu).ln_1p(),
            None => -0.5 * z * z,
        }
    }

    /// Log density of the uncentred (mode-at-zero) distribution.
    #[inline]
    pub fn logpdf_uncentred(&self, x: f64) -> f64 {
        let z = if x >= 0.0 { x * self.inv_gamma } else { x * self.gamma };
        self.log_const + self.log_kernel(z)
    }

    /// Log density of the centred (mean-zero) distribution.
    #[inline]
    pub fn logpdf(&self, x: f64) -> f64 {
        self.logpdf_uncentred(x + self.m)
    }
}

pub fn logpdf_uncentred(x: f64, spec: &CtptSpec) -> f64 {
    spec.density().logpdf_uncentred(x)
}

pub fn logpdf(x: f64, spec: &CtptSpec) -> f64 {
    spec.density().logpdf(x)
}

pub fn pdf(x: f64, spec: &CtptSpec) -> f64 {
    logpdf(x, spec).exp()
}

/// `gamma^2 - 1 + 1/gamma^2`
fn spread(gamma: f64) -> f64 {
    gamma * gamma - 1.0 + 1.0 / (gamma * gamma)
}

pub fn variance(spec: &CtptSpec) -> f64 {
    let m = offset_m(spec);
    let second = match spec.tail {
        TailSpec::Finite(nu) => nu / (nu - 2.0) * spread(spec.gamma),
        TailSpec::NormalLimit => spread(spec.gamma),
    };
    second - m * m
}

/// `E|T|^k` for the base density, i.e. `nu^{k/2} Γ((k+1)/2) Γ((nu-k)/2) /
/// (sqrt(pi) Γ(nu/2))` or its normal limit `2^{k/2} Γ((k+1)/2) / sqrt(pi)`.
fn base_abs_moment(k: u32, tail: TailSpec) -> f64 {
    let kf = k as f64;
    let common = ln_gamma(0.5 * (kf + 1.0)) - 0.5 * LN_PI;
    match tail {
        TailSpec::Finite(nu) => {
            (0.5 * kf * nu.ln() + common - ln_gamma_diff(0.5 * (nu - kf), 0.5 * kf)).exp()
        }
        TailSpec::NormalLimit => (0.5 * kf * LN_2 + common).exp(),
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `E[X^r]` of the centred distribution. Exists for `nu > r`.
pub fn raw_moment(r: u32, spec: &CtptSpec) -> Result<f64> {
    if r == 0 {
        return Err(Error::domain("moment order must be a positive integer"));
    }
    if let TailSpec::Finite(nu) = spec.tail {
        if !(nu > r as f64) {
            return Err(Error::MomentUndefined { order: r, nu });
        }
    }
    if r == 1 {
        return Ok(0.0);
    }
    let g = spec.gamma;
    let m = offset_m(spec);
    let denom = g + 1.0 / g;
    let mut total = 0.0;
    for k in 0..=r {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let piece = (g.powi(k as i32 + 1) + sign * g.powi(-(k as i32) - 1)) / denom;
        total += binomial(r, k) * (-m).powi((r - k) as i32) * piece * base_abs_moment(k, spec.tail);
    }
    Ok(total)
}

/// Fisher's moment coefficient of skewness, `E[X^3] / E[X^2]^{3/2}`.
pub fn skewness_fisher(spec: &CtptSpec) -> Result<f64> {
    let g = spec.gamma;
    let m = offset_m(spec);
    let odd = (g.powi(4) - g.powi(-4)) / (g + 1.0 / g);
    let (third_abs, second) = match spec.tail {
        TailSpec::Finite(nu) => {
            if !(nu > 3.0) {
                return Err(Error::MomentUndefined { order: 3, nu });
            }
            let t3 = (1.5 * nu.ln() - 0.5 * LN_PI - ln_gamma_diff(0.5 * (nu - 3.0), 1.5)).exp();
            (t3, nu / (nu - 2.0) * spread(g))
        }
        TailSpec::NormalLimit => (2.0 * (2.0 / PI).sqrt(), spread(g)),
    };
    let numerator = third_abs * odd - 3.0 * m * second + 2.0 * m * m * m;
    let var = second - m * m;
    Ok(numerator / (var * var.sqrt()))
}

/// Arnold–Groeneveld skewness: one minus twice the mass left of the mode.
pub fn skewness_ag(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::domain("skewness gamma must be > 0"));
    }
    let g2 = gamma * gamma;
    Ok((g2 - 1.0) / (g2 + 1.0))
}

fn base_cdf(z: f64, tail: TailSpec) -> Result<f64> {
    match tail {
        TailSpec::Finite(nu) => student_t_cdf(z, nu),
        TailSpec::NormalLimit => Ok(normal_cdf(z)),
    }
}

/// Distribution function of the uncentred distribution.
pub fn cdf_uncentred(x: f64, spec: &CtptSpec) -> Result<f64> {
    let g = spec.gamma;
    let g2 = g * g;
    if x < 0.0 {
        Ok(2.0 / (1.0 + g2) * base_cdf(g * x, spec.tail)?)
    } else {
        Ok(1.0 - 2.0 * g2 / (1.0 + g2) * base_cdf(-x / g, spec.tail)?)
    }
}

pub fn cdf(x: f64, spec: &CtptSpec) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::domain("cdf of NaN"));
    }
    cdf_uncentred(x + offset_m(spec), spec)
}

/// Inverse of [`cdf`]: bracketing, then Newton steps that fall back to
/// bisection whenever they would leave the bracket.
pub fn quantile(p: f64, spec: &CtptSpec) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(alloc::format!("quantile requires 0 < p < 1, got {p}")));
    }
    let dens = spec.density();
    let mode = -dens.offset();
    let at_mode = 1.0 / (1.0 + spec.gamma * spec.gamma);
    let scale = variance(spec).sqrt().max(1.0);

    let (mut lo, mut hi) = if p < at_mode {
        let mut step = scale;
        let mut lo = mode - step;
        while cdf(lo, spec)? > p {
            step *= 2.0;
            lo = mode - step;
            if !lo.is_finite() {
                return Err(Error::NonConvergence("quantile bracket".into()));
            }
        }
        (lo, mode)
    } else {
        let mut step = scale;
        let mut hi = mode + step;
        while cdf(hi, spec)? < p {
            step *= 2.0;
            hi = mode + step;
            if !hi.is_finite() {
                return Err(Error::NonConvergence("quantile bracket".into()));
            }
        }
        (mode, hi)
    };

    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = cdf(x, spec)? - p;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = dens.logpdf(x).exp();
        let newton = x - f / density;
        let next = if density > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo <= 1e-15 * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NonConvergence("quantile iteration".into()))
}

/// Draw `n` centred variates: with probability `gamma^2/(1+gamma^2)` emit
/// `gamma |T|`, otherwise `-|T|/gamma`, then subtract the offset.
pub fn sample(n: usize, spec: &CtptSpec, rng: &mut SeededRng) -> Vec<f64> {
    let g = spec.gamma;
    let right = g * g / (1.0 + g * g);
    let m = offset_m(spec);
    let t_dist = spec.nu().map(|nu| rand_distr::StudentT::new(nu).expect("nu > 2 by construction"));
    (0..n)
        .map(|_| {
            let u = special::draw_uniform(rng);
            let t = match &t_dist {
                Some(d) => rand_distr::Distribution::sample(d, rng),
                None => special::draw_standard_normal(rng),
            }
            .abs();
            let raw = if u < right { g * t } else { -t / g };
            raw - m
        })
        .collect()
}

#[cfg(feature = "serde")]
mod serde_impls {
    use super::*;
    use alloc::string::String;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    impl Serialize for TailSpec {
        fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
            match *self {
                TailSpec::Finite(nu) => s.serialize_f64(nu),
                TailSpec::NormalLimit => s.serialize_str("inf"),
            }
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum TailRepr {
        Number(f64),
        Text(String),
    }

    impl<'de> Deserialize<'de> for TailSpec {
        fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
            use serde::de::Error as _;
            match TailRepr::deserialize(d)? {
                TailRepr::Number(nu) if nu.is_infinite() && nu > 0.0 => Ok(TailSpec::NormalLimit),
                TailRepr::Number(nu) => TailSpec::finite(nu).map_err(D::Error::custom),
                TailRepr::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                    "inf" | "infinity" | "normal" => Ok(TailSpec::NormalLimit),
                    other => other
                        .parse::<f64>()
                        .map_err(|_| D::Error::custom("nu must be a number > 2 or \"inf\""))
                        .and_then(|nu| TailSpec::finite(nu).map_err(D::Error::custom)),
                },
            }
        }
    }

    #[derive(Serialize, Deserialize)]
    struct SpecRepr {
        gamma: f64,
        nu: TailSpec,
    }

    impl Serialize for CtptSpec {
        fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
            SpecRepr { gamma: self.gamma, nu: self.tail }.serialize(s)
        }
    }

    impl<'de> Deserialize<'de> for CtptSpec {
        fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
            let r = SpecRepr::deserialize(d)?;
            CtptSpec::new(r.gamma, r.nu).map_err(serde::de::Error::custom)
        }
    }
}
