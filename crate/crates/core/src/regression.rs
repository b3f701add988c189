//! Linear regression with centred two-piece errors.
//!
//! `y_i = x_i' beta + sigma * eps_i`, `eps_i ~ CTPT(gamma, nu)`, under the
//! prior `p(beta, sigma) ∝ 1/sigma`, a truncated gamma on `gamma` and a
//! shifted exponential on `nu`.

use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::ctpt::{CtptSpec, Density, TailSpec};
use crate::error::{Error, Result};
use crate::special::{ln_gamma, reg_lower_inc_gamma};

/// Which of the skewness and tail parameters are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ErrorFamily {
    /// gamma = 1, normal base.
    Normal,
    /// gamma = 1, nu free (the "nu-only" model).
    StudentT,
    /// gamma free, normal base (the "gamma-only" model).
    SkewNormal,
    /// Both free (the "full" model).
    Ctpt,
}

impl ErrorFamily {
    pub const ALL: [ErrorFamily; 4] =
        [ErrorFamily::Ctpt, ErrorFamily::SkewNormal, ErrorFamily::StudentT, ErrorFamily::Normal];

    pub fn gamma_free(self) -> bool {
        matches!(self, ErrorFamily::SkewNormal | ErrorFamily::Ctpt)
    }

    pub fn nu_free(self) -> bool {
        matches!(self, ErrorFamily::StudentT | ErrorFamily::Ctpt)
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorFamily::Normal => "normal",
            ErrorFamily::StudentT => "student_t",
            ErrorFamily::SkewNormal => "skew_normal",
            ErrorFamily::Ctpt => "ctpt",
        }
    }

    /// Label used in model-comparison tables.
    pub fn label(self) -> &'static str {
        match self {
            ErrorFamily::Normal => "Normal",
            ErrorFamily::StudentT => "nu-Only",
            ErrorFamily::SkewNormal => "gamma-Only",
            ErrorFamily::Ctpt => "Full",
        }
    }
}

impl core::fmt::Display for ErrorFamily {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "normal" => Ok(ErrorFamily::Normal),
            "student_t" | "t" | "nu_only" => Ok(ErrorFamily::StudentT),
            "skew_normal" | "gamma_only" => Ok(ErrorFamily::SkewNormal),
            "ctpt" | "full" => Ok(ErrorFamily::Ctpt),
            other => Err(Error::invalid(alloc::format!(
                "unknown error family '{other}' (expected normal, student_t, skew_normal or ctpt)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PriorConfig {
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    pub gamma_lower: f64,
    pub gamma_upper: f64,
    pub nu_rate: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { gamma_shape: 2.0, gamma_rate: 2.0, gamma_lower: 0.05, gamma_upper: 20.0, nu_rate: 0.01 }
    }
}

impl PriorConfig {
    pub fn check(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.gamma_shape) && pos(self.gamma_rate) && pos(self.nu_rate)) {
            return Err(Error::invalid("prior hyperparameters a, b, d must be positive and finite"));
        }
        if !(self.gamma_lower > 0.0 && self.gamma_lower <= 1.0 && self.gamma_upper >= 1.0 && self.gamma_upper.is_finite())
            || self.gamma_lower >= self.gamma_upper
        {
            return Err(Error::invalid("gamma prior support must satisfy 0 < lower <= 1 <= upper < inf"));
        }
        Ok(())
    }

    /// Log of the truncated gamma density's normalizer,
    /// `P(a, b*upper) - P(a, b*lower)`.
    fn log_gamma_mass(&self) -> f64 {
        let a = self.gamma_shape;
        let hi = reg_lower_inc_gamma(a, self.gamma_rate * self.gamma_upper).unwrap_or(1.0);
        let lo = reg_lower_inc_gamma(a, self.gamma_rate * self.gamma_lower).unwrap_or(0.0);
        (hi - lo).ln()
    }

    /// Truncated gamma log density of the skewness parameter.
    pub fn log_prior_gamma(&self, gamma: f64) -> f64 {
        if !(gamma >= self.gamma_lower && gamma <= self.gamma_upper) {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (self.gamma_shape, self.gamma_rate);
        a * b.ln() - ln_gamma(a) + (a - 1.0) * gamma.ln() - b * gamma - self.log_gamma_mass()
    }

    /// Shifted exponential log density of the tail parameter on `(2, inf)`.
    pub fn log_prior_nu(&self, nu: f64) -> f64 {
        if !(nu > 2.0) || nu.is_nan() {
            return f64::NEG_INFINITY;
        }
        self.nu_rate.ln() - self.nu_rate * (nu - 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamVector {
    pub beta: Vec<f64>,
    pub sigma: f64,
    /// Present iff the family estimates gamma.
    pub gamma: Option<f64>,
    /// Present iff the family estimates nu.
    pub nu: Option<f64>,
}

impl ParamVector {
    /// The error distribution implied by `self` under `family`.
    pub fn error_spec(&self, family: ErrorFamily) -> Result<CtptSpec> {
        let gamma = match (family.gamma_free(), self.gamma) {
            (true, Some(g)) => g,
            (false, None) => 1.0,
            _ => return Err(Error::invalid(alloc::format!("gamma must be given iff the {family} family estimates it"))),
        };
        let tail = match (family.nu_free(), self.nu) {
            (true, Some(nu)) => TailSpec::finite(nu)?,
            (false, None) => TailSpec::NormalLimit,
            _ => return Err(Error::invalid(alloc::format!("nu must be given iff the {family} family estimates it"))),
        };
        CtptSpec::new(gamma, tail)
    }
}

/// Least-squares fit of `response` on `design`.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    /// `(X'X)^{-1}`
    pub xtx_inv: DMatrix<f64>,
}

impl OlsFit {
    pub fn sigma_hat(&self, n: usize, k: usize) -> f64 {
        (self.rss / (n - k) as f64).sqrt()
    }

    /// Classical standard errors `sigma_hat * sqrt(diag (X'X)^{-1})`.
    pub fn standard_errors(&self, n: usize, k: usize) -> Vec<f64> {
        let s = self.sigma_hat(n, k);
        (0..k).map(|j| s * self.xtx_inv[(j, j)].sqrt()).collect()
    }
}

/// Numerical rank by singular values with the usual `max(n,k) eps smax` cut.
pub fn matrix_rank(design: &DMatrix<f64>) -> usize {
    let sv = design.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let tol = design.nrows().max(design.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

pub fn ols(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = design.shape();
    if response.len() != n {
        return Err(Error::DimensionMismatch(alloc::format!("{} responses for {n} design rows", response.len())));
    }
    let xtx = design.transpose() * design;
    let chol = xtx.cholesky().ok_or(Error::RankDeficient { rank: matrix_rank(design), k })?;
    let beta = chol.solve(&(design.transpose() * response));
    let residuals = response - design * &beta;
    let rss = residuals.norm_squared();
    Ok(OlsFit { beta, residuals, rss, xtx_inv: chol.inverse() })
}

#[derive(Debug, Clone)]
pub struct RegressionProblem {
    design: DMatrix<f64>,
    response: DVector<f64>,
    family: ErrorFamily,
    priors: PriorConfig,
}

impl RegressionProblem {
    /// Build and validate.
    pub fn new(design: DMatrix<f64>, response: DVector<f64>, family: ErrorFamily, priors: PriorConfig) -> Result<Self> {
        let p = Self { design, response, family, priors };
        validate(&p)?;
        Ok(p)
    }

    /// Design from predictor columns, optionally prefixed by an intercept.
    pub fn from_columns(
        predictors: &[&[f64]],
        response: &[f64],
        intercept: bool,
        family: ErrorFamily,
        priors: PriorConfig,
    ) -> Result<Self> {
        Self::new(design_from_columns(predictors, response.len(), intercept)?, DVector::from_column_slice(response), family, priors)
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn family(&self) -> ErrorFamily {
        self.family
    }

    pub fn priors(&self) -> &PriorConfig {
        &self.priors
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn k(&self) -> usize {
        self.design.ncols()
    }

    /// The same data under a different error family.
    pub fn with_family(&self, family: ErrorFamily) -> Self {
        Self { family, ..self.clone() }
    }

    /// The problem with design column `j` removed.
    pub fn without_column(&self, j: usize) -> Result<Self> {
        if j >= self.k() {
            return Err(Error::DimensionMismatch(alloc::format!("column {j} out of range for k = {}", self.k())));
        }
        Self::new(self.design.clone().remove_column(j), self.response.clone(), self.family, self.priors)
    }

    /// Index of the first all-ones column.
    pub fn intercept_column(&self) -> Option<usize> {
        (0..self.k()).find(|&j| self.design.column(j).iter().all(|&v| v == 1.0))
    }

    /// Unconstrained dimension: `k + 1` plus one per free shape parameter.
    pub fn dim(&self) -> usize {
        self.k() + 1 + self.family.gamma_free() as usize + self.family.nu_free() as usize
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.k()).map(|j| alloc::format!("beta[{j}]")).collect();
        names.push("sigma".into());
        if self.family.gamma_free() {
            names.push("gamma".into());
        }
        if self.family.nu_free() {
            names.push("nu".into());
        }
        names
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<CtptSpec> {
        if theta.beta.len() != self.k() {
            return Err(Error::DimensionMismatch(alloc::format!("beta has {} entries, design has {} columns", theta.beta.len(), self.k())));
        }
        if !(theta.sigma > 0.0 && theta.sigma.is_finite()) || theta.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("sigma must be positive and beta finite"));
        }
        theta.error_spec(self.family)
    }

    fn sum_logpdf(&self, beta: &[f64], sigma: f64, eval: impl Fn(f64) -> f64) -> f64 {
        let inv = 1.0 / sigma;
        let mut total = 0.0;
        for i in 0..self.n() {
            let mut fit = 0.0;
            for (j, b) in beta.iter().enumerate() {
                fit += self.design[(i, j)] * b;
            }
            total += eval((self.response[i] - fit) * inv);
        }
        total - self.n() as f64 * sigma.ln()
    }

    fn loglik_with(&self, dens: &Density, beta: &[f64], sigma: f64) -> f64 {
        self.sum_logpdf(beta, sigma, |r| dens.logpdf(r))
    }

    /// Map an unconstrained vector to natural parameters and the log
    /// Jacobian of that map.
    pub fn untransform(&self, z: &[f64]) -> (ParamVector, f64) {
        let k = self.k();
        let mut log_jac = z[k];
        let mut idx = k + 1;
        let gamma = if self.family.gamma_free() {
            let (g, lj) = gamma_from_z(z[idx], &self.priors);
            log_jac += lj;
            idx += 1;
            Some(g)
        } else {
            None
        };
        let nu = if self.family.nu_free() {
            log_jac += z[idx];
            Some(2.0 + z[idx].exp())
        } else {
            None
        };
        (ParamVector { beta: z[..k].to_vec(), sigma: z[k].exp(), gamma, nu }, log_jac)
    }

    pub fn transform(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let mut z = theta.beta.clone();
        z.push(theta.sigma.ln());
        if let Some(g) = theta.gamma {
            let lo = self.priors.gamma_lower.ln();
            let u = (g.ln() - lo) / (self.priors.gamma_upper.ln() - lo);
            if !(u > 0.0 && u < 1.0) {
                return Err(Error::invalid(alloc::format!("gamma = {g} is outside the prior support")));
            }
            z.push((u / (1.0 - u)).ln());
        }
        if let Some(nu) = theta.nu {
            z.push((nu - 2.0).ln());
        }
        Ok(z)
    }
}

fn gamma_from_z(z: f64, priors: &PriorConfig) -> (f64, f64) {
    let lo = priors.gamma_lower.ln();
    let width = priors.gamma_upper.ln() - lo;
    // log u and log(1 - u) for u = logistic(z), both without cancellation
    let log_u = -(-z).exp().ln_1p();
    let log_1mu = -z.exp().ln_1p();
    let log_u = if log_u.is_finite() { log_u } else { z };
    let log_1mu = if log_1mu.is_finite() { log_1mu } else { -z };
    let u = log_u.exp();
    let gamma = (lo + u * width).exp();
    (gamma, gamma.ln() + width.ln() + log_u + log_1mu)
}

pub fn design_from_columns(predictors: &[&[f64]], n: usize, intercept: bool) -> Result<DMatrix<f64>> {
    for (j, col) in predictors.iter().enumerate() {
        if col.len() != n {
            return Err(Error::DimensionMismatch(alloc::format!("predictor {j} has {} rows, response has {n}", col.len())));
        }
    }
    let k = predictors.len() + intercept as usize;
    Ok(DMatrix::from_fn(n, k, |i, j| {
        if intercept {
            if j == 0 { 1.0 } else { predictors[j - 1][i] }
        } else {
            predictors[j][i]
        }
    }))
}

pub fn log_likelihood(problem: &RegressionProblem, theta: &ParamVector) -> Result<f64> {
    let spec = problem.check_theta(theta)?;
    Ok(problem.loglik_with(&spec.density(), &theta.beta, theta.sigma))
}

/// `-ln sigma` plus the proper shape priors of the free parameters. The flat
/// prior on beta has unit density.
pub fn log_prior(theta: &ParamVector, config: &PriorConfig, family: ErrorFamily) -> f64 {
    if !(theta.sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut lp = -theta.sigma.ln();
    if family.gamma_free() {
        lp += theta.gamma.map_or(f64::NEG_INFINITY, |g| config.log_prior_gamma(g));
    }
    if family.nu_free() {
        lp += theta.nu.map_or(f64::NEG_INFINITY, |nu| config.log_prior_nu(nu));
    }
    lp
}

/// Log posterior density of the unconstrained vector
/// `z = [beta, ln sigma, logit-scaled gamma?, ln(nu - 2)?]`.
pub fn log_posterior_unconstrained(problem: &RegressionProblem, z: &[f64]) -> f64 {
    if z.len() != problem.dim() || z.iter().any(|v| !v.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let (theta, log_jac) = problem.untransform(z);
    let lp = log_prior(&theta, &problem.priors, problem.family);
    if !lp.is_finite() || !theta.sigma.is_finite() || theta.sigma == 0.0 {
        return f64::NEG_INFINITY;
    }
    let gamma = theta.gamma.unwrap_or(1.0);
    let tail = match theta.nu {
        Some(nu) if nu.is_finite() && nu > 2.0 => TailSpec::Finite(nu),
        Some(_) => return f64::NEG_INFINITY,
        None => TailSpec::NormalLimit,
    };
    let spec = match CtptSpec::new(gamma, tail) {
        Ok(s) => s,
        Err(_) => return f64::NEG_INFINITY,
    };
    let v = problem.loglik_with(&spec.density(), &theta.beta, theta.sigma) + lp + log_jac;
    if v.is_nan() { f64::NEG_INFINITY } else { v }
}

pub fn validate(problem: &RegressionProblem) -> Result<()> {
    let (n, k) = problem.design.shape();
    if problem.response.len() != n {
        return Err(Error::DimensionMismatch(alloc::format!("{} responses for {n} design rows", problem.response.len())));
    }
    if k == 0 {
        return Err(Error::DimensionMismatch("design has no columns".into()));
    }
    if problem.design.iter().chain(problem.response.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("data contain non-finite values"));
    }
    problem.priors.check()?;
    if n <= k {
        return Err(Error::ImproperPosterior { n, k });
    }
    let rank = matrix_rank(&problem.design);
    if rank < k {
        return Err(Error::RankDeficient { rank, k });
    }
    let fit = ols(&problem.design, &problem.response)?;
    let scale = problem.response.norm().max(f64::MIN_POSITIVE);
    if fit.rss.sqrt() <= 1e-12 * scale {
        return Err(Error::DegenerateResponse);
    }
    Ok(())
}

/// Largest `r` with finite posterior `E[sigma^r]`: `n - k - 1`.
pub fn sigma_moment_bound(n: usize, k: usize) -> Result<usize> {
    if n <= k {
        return Err(Error::ImproperPosterior { n, k });
    }
    Ok(n - k - 1)
}

/// Absolute difference between the centred-error log likelihood at `theta`
/// and the uncentred-error log likelihood with the intercept moved to
/// `beta_0 - sigma m(gamma, nu)`.
pub fn loglik_equivalence_shift(problem: &RegressionProblem, theta: &ParamVector) -> Result<f64> {
    let j0 = problem.intercept_column().ok_or(Error::NoIntercept)?;
    let spec = problem.check_theta(theta)?;
    let dens = spec.density();
    let centred = problem.loglik_with(&dens, &theta.beta, theta.sigma);
    let mut shifted = theta.beta.clone();
    shifted[j0] -= theta.sigma * dens.offset();
    let uncentred = problem.sum_logpdf(&shifted, theta.sigma, |r| dens.logpdf_uncentred(r));
    Ok((centred - uncentred).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctpt;
    use crate::special::{student_t_logpdf, SeededRng, draw_standard_normal, draw_uniform};

    fn toy(n: usize, family: ErrorFamily, seed: u64) -> RegressionProblem {
        let mut rng = SeededRng::new(seed, 0);
        let x: Vec<f64> = (0..n).map(|_| draw_standard_normal(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|&v| 0.5 + 0.3 * v + draw_standard_normal(&mut rng)).collect();
        RegressionProblem::from_columns(&[&x], &y, true, family, PriorConfig::default()).unwrap()
    }

    fn random_theta(p: &RegressionProblem, rng: &mut SeededRng) -> ParamVector {
        let f = p.family();
        ParamVector {
            beta: (0..p.k()).map(|_| 2.0 * draw_standard_normal(rng)).collect(),
            sigma: 0.2 + 3.0 * draw_uniform(rng),
            gamma: f.gamma_free().then(|| 0.2 + 4.0 * draw_uniform(rng)),
            nu: f.nu_free().then(|| 2.1 + 30.0 * draw_uniform(rng)),
        }
    }

    #[test]
    fn family_flags_and_parsing() {
        assert!(ErrorFamily::Ctpt.gamma_free() && ErrorFamily::Ctpt.nu_free());
        assert!(!ErrorFamily::Normal.gamma_free() && !ErrorFamily::Normal.nu_free());
        assert_eq!("full".parse::<ErrorFamily>().unwrap(), ErrorFamily::Ctpt);
        assert_eq!("gamma-only".parse::<ErrorFamily>().unwrap(), ErrorFamily::SkewNormal);
        assert!("laplace".parse::<ErrorFamily>().is_err());
    }

    #[test]
    fn gaussian_reduction() {
        let p = toy(30, ErrorFamily::Normal, 1);
        let theta = ParamVector { beta: alloc::vec![0.4, 0.2], sigma: 1.3, gamma: None, nu: None };
        let rss: f64 = (0..p.n())
            .map(|i| {
                let r = p.response()[i] - 0.4 - 0.2 * p.design()[(i, 1)];
                r * r
            })
            .sum();
        let n = p.n() as f64;
        let expect = -0.5 * n * (2.0 * core::f64::consts::PI * 1.69).ln() - rss / (2.0 * 1.69);
        assert!((log_likelihood(&p, &theta).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn single_point_t() {
        let design = DMatrix::from_element(1, 1, 1.0);
        let p = RegressionProblem { design, response: DVector::from_element(1, 0.0), family: ErrorFamily::StudentT, priors: PriorConfig::default() };
        let theta = ParamVector { beta: alloc::vec![0.0], sigma: 1.0, gamma: None, nu: Some(5.0) };
        assert!((log_likelihood(&p, &theta).unwrap() - student_t_logpdf(0.0, 5.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn likelihood_is_resummed_pointwise() {
        let mut rng = SeededRng::new(5, 0);
        for &f in &ErrorFamily::ALL {
            let p = toy(25, f, 2);
            for _ in 0..20 {
                let th = random_theta(&p, &mut rng);
                let spec = th.error_spec(f).unwrap();
                let mut expect = 0.0;
                for i in 0..p.n() {
                    let fit = th.beta[0] + th.beta[1] * p.design()[(i, 1)];
                    expect += ctpt::logpdf((p.response()[i] - fit) / th.sigma, &spec) - th.sigma.ln();
                }
                assert!((log_likelihood(&p, &th).unwrap() - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn family_reductions_and_equivariance() {
        let pc = toy(20, ErrorFamily::Ctpt, 3);
        let pt = pc.with_family(ErrorFamily::StudentT);
        let pn = pc.with_family(ErrorFamily::Normal);
        let ps = pc.with_family(ErrorFamily::SkewNormal);
        let beta = alloc::vec![0.1, -0.3];
        let full = ParamVector { beta: beta.clone(), sigma: 0.8, gamma: Some(1.0), nu: Some(7.0) };
        let t = ParamVector { beta: beta.clone(), sigma: 0.8, gamma: None, nu: Some(7.0) };
        assert!((log_likelihood(&pc, &full).unwrap() - log_likelihood(&pt, &t).unwrap()).abs() < 1e-12);
        let sk = ParamVector { beta: beta.clone(), sigma: 0.8, gamma: Some(1.0), nu: None };
        let n = ParamVector { beta: beta.clone(), sigma: 0.8, gamma: None, nu: None };
        assert!((log_likelihood(&ps, &sk).unwrap() - log_likelihood(&pn, &n).unwrap()).abs() < 1e-12);

        // scale: y -> c y, sigma -> c sigma, beta -> c beta
        let c = 2.5;
        let scaled = RegressionProblem::new(pc.design().clone(), pc.response() * c, ErrorFamily::Ctpt, PriorConfig::default()).unwrap();
        let th = ParamVector { beta: alloc::vec![0.1, -0.3], sigma: 0.8, gamma: Some(1.7), nu: Some(4.0) };
        let th_c = ParamVector { beta: alloc::vec![0.1 * c, -0.3 * c], sigma: 0.8 * c, ..th.clone() };
        let diff = log_likelihood(&scaled, &th_c).unwrap() - log_likelihood(&pc, &th).unwrap();
        assert!((diff + pc.n() as f64 * c.ln()).abs() < 1e-10);

        // location: y -> y + c, beta_0 -> beta_0 + c
        let shifted = RegressionProblem::new(pc.design().clone(), pc.response().add_scalar(c), ErrorFamily::Ctpt, PriorConfig::default()).unwrap();
        let th_s = ParamVector { beta: alloc::vec![0.1 + c, -0.3], ..th.clone() };
        assert!((log_likelihood(&shifted, &th_s).unwrap() - log_likelihood(&pc, &th).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn prior_examples() {
        let cfg = PriorConfig::default();
        let n = ParamVector { beta: alloc::vec![0.0], sigma: 2.0, gamma: None, nu: None };
        assert_eq!(log_prior(&n, &cfg, ErrorFamily::Normal), -(2.0f64.ln()));
        let out = ParamVector { beta: alloc::vec![0.0], sigma: 1.0, gamma: Some(21.0), nu: Some(5.0) };
        assert_eq!(log_prior(&out, &cfg, ErrorFamily::Ctpt), f64::NEG_INFINITY);
        assert!((cfg.log_prior_nu(12.0) - (0.01f64.ln() - 0.1)).abs() < 1e-15);
        assert!(PriorConfig { gamma_lower: 1.5, ..cfg }.check().is_err());
        assert!(PriorConfig { nu_rate: 0.0, ..cfg }.check().is_err());
    }

    #[test]
    fn shape_priors_are_normalized() {
        let cfg = PriorConfig::default();
        let q = crate::special::QuadratureSettings::default();
        let g = crate::special::integrate(|g| cfg.log_prior_gamma(g).exp(), cfg.gamma_lower, cfg.gamma_upper, &q).unwrap();
        assert!((g - 1.0).abs() < 1e-6, "{g}");
        let nu = crate::special::integrate(|v| cfg.log_prior_nu(v).exp(), 2.0, f64::INFINITY, &q).unwrap();
        assert!((nu - 1.0).abs() < 1e-6, "{nu}");
    }

    #[test]
    fn transform_round_trip_and_jacobian() {
        let mut rng = SeededRng::new(8, 0);
        let p = toy(20, ErrorFamily::Ctpt, 4);
        for _ in 0..50 {
            let z: Vec<f64> = (0..p.dim()).map(|_| 3.0 * draw_standard_normal(&mut rng)).collect();
            let (theta, _) = p.untransform(&z);
            let back = p.transform(&theta).unwrap();
            for (a, b) in z.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
        // log|d gamma / dz| against a central difference
        for &z in &[-3.0, -0.5, 0.0, 1.2, 4.0] {
            let h = 1e-6;
            let d = (gamma_from_z(z + h, &p.priors).0 - gamma_from_z(z - h, &p.priors).0) / (2.0 * h);
            assert!((d.ln() - gamma_from_z(z, &p.priors).1).abs() < 1e-6);
        }
        // the sigma Jacobian cancels the 1/sigma prior: flat in ln sigma apart from the likelihood
        let pn = p.with_family(ErrorFamily::Normal);
        let z = [0.3, 0.1, 0.7];
        let (th, lj) = pn.untransform(&z);
        let expect = log_likelihood(&pn, &th).unwrap();
        assert!((lj + log_prior(&th, &pn.priors, pn.family)).abs() < 1e-15);
        assert!((log_posterior_unconstrained(&pn, &z) - expect).abs() < 1e-12);
        // extreme values stay finite or reject cleanly, never NaN
        for v in [-800.0, -40.0, 40.0, 800.0] {
            let lp = log_posterior_unconstrained(&p, &[0.0, 0.0, 0.0, v, v]);
            assert!(!lp.is_nan());
        }
    }

    #[test]
    fn validation_guards() {
        let _ = toy(50, ErrorFamily::Normal, 9);
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let r = RegressionProblem::new(d, DVector::from_vec(alloc::vec![1.0, 2.0]), ErrorFamily::Normal, PriorConfig::default());
        assert!(matches!(r, Err(Error::ImproperPosterior { n: 2, k: 2 })));

        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 2.0 * v).collect();
        let r = RegressionProblem::from_columns(&[&x], &y, true, ErrorFamily::Normal, PriorConfig::default());
        assert!(matches!(r, Err(Error::DegenerateResponse)));

        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let r = RegressionProblem::from_columns(&[&x, &x2], &[0.3, 0.1, 0.9, 0.2], true, ErrorFamily::Normal, PriorConfig::default());
        assert!(matches!(r, Err(Error::RankDeficient { rank: 2, k: 3 })));
    }

    #[test]
    fn moment_bound() {
        assert_eq!(sigma_moment_bound(50, 2).unwrap(), 47);
        assert_eq!(sigma_moment_bound(3, 2).unwrap(), 0);
        assert_eq!(sigma_moment_bound(10, 3).unwrap(), 6);
        assert!(sigma_moment_bound(2, 2).is_err());
    }

    #[test]
    fn intercept_shift_identity() {
        let mut rng = SeededRng::new(10, 0);
        let p = toy(40, ErrorFamily::Ctpt, 11);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            worst = worst.max(loglik_equivalence_shift(&p, &random_theta(&p, &mut rng)).unwrap());
        }
        assert!(worst < 1e-10, "{worst}");
        let th = ParamVector { beta: alloc::vec![0.0, 1.0], sigma: 1.0, gamma: Some(1.0), nu: Some(5.0) };
        assert_eq!(loglik_equivalence_shift(&p, &th).unwrap(), 0.0);
        let no_icpt = RegressionProblem::new(p.design().clone().remove_column(0), p.response().clone(), ErrorFamily::Normal, PriorConfig::default()).unwrap();
        let th = ParamVector { beta: alloc::vec![1.0], sigma: 1.0, gamma: None, nu: None };
        assert!(matches!(loglik_equivalence_shift(&no_icpt, &th), Err(Error::NoIntercept)));
    }

    #[test]
    fn ols_matches_normal_equations() {
        let p = toy(60, ErrorFamily::Normal, 12);
        let fit = ols(p.design(), p.response()).unwrap();
        let grad = p.design().transpose() * &fit.residuals;
        assert!(grad.norm() < 1e-10);
        assert_eq!(matrix_rank(p.design()), 2);
    }
}
