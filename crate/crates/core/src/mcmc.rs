//! Adaptive component-wise random-walk Metropolis and chain diagnostics.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::regression::{ols, log_posterior_unconstrained, ParamVector, RegressionProblem};
use crate::special::{draw_standard_normal, draw_uniform, SeededRng};

/// An unnormalized log density on `R^dim`.
pub trait LogDensity {
    fn dim(&self) -> usize;

    fn log_density(&self, z: &[f64]) -> f64;

    /// Natural-scale values reported for `z`; identity by default.
    fn to_natural(&self, z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(z);
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|j| alloc::format!("x[{j}]")).collect()
    }
}

impl<F: Fn(&[f64]) -> f64> LogDensity for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        (self.1)(z)
    }
}

/// The posterior of a regression problem over its unconstrained parameters.
#[derive(Debug, Clone, Copy)]
pub struct Posterior<'a> {
    pub problem: &'a RegressionProblem,
}

impl LogDensity for Posterior<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        log_posterior_unconstrained(self.problem, z)
    }

    fn to_natural(&self, z: &[f64], out: &mut [f64]) {
        let (theta, _) = self.problem.untransform(z);
        let k = theta.beta.len();
        out[..k].copy_from_slice(&theta.beta);
        out[k] = theta.sigma;
        let mut i = k + 1;
        for v in [theta.gamma, theta.nu].into_iter().flatten() {
            out[i] = v;
            i += 1;
        }
    }

    fn param_names(&self) -> Vec<String> {
        self.problem.param_names()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ChainConfig {
    pub total_iterations: usize,
    pub burn_in_fraction: f64,
    pub n_chains: usize,
    pub adapt_window: usize,
    pub target_accept: f64,
    pub seed: u64,
    /// Stream of the master generator; simulation replication `r` uses `r`.
    pub stream_id: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            total_iterations: 30_000,
            burn_in_fraction: 0.2,
            n_chains: 1,
            adapt_window: 50,
            target_accept: 0.44,
            seed: 0,
            stream_id: 0,
        }
    }
}

impl ChainConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.burn_in_fraction > 0.0 && self.burn_in_fraction < 1.0) {
            return Err(Error::invalid("burn_in_fraction must lie in (0, 1)"));
        }
        if self.total_iterations < 1000 {
            return Err(Error::invalid("total_iterations must be at least 1000"));
        }
        if self.n_chains == 0 || self.adapt_window == 0 {
            return Err(Error::invalid("n_chains and adapt_window must be positive"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::invalid("target_accept must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn burn_in(&self) -> usize {
        (self.total_iterations as f64 * self.burn_in_fraction).round() as usize
    }

    pub fn kept_per_chain(&self) -> usize {
        self.total_iterations - self.burn_in()
    }
}

/// Kept draws of all chains, stacked chain by chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub names: Vec<String>,
    pub dim: usize,
    pub n_chains: usize,
    pub per_chain: usize,
    /// Row-major `(n_chains * per_chain) x dim`, natural scale.
    pub natural: Vec<f64>,
    /// Same layout, sampler coordinates.
    pub unconstrained: Vec<f64>,
    /// Post-burn-in acceptance rate per chain and coordinate.
    pub acceptance: Vec<Vec<f64>>,
    pub seed: u64,
    pub stream_id: u64,
    pub warnings: Vec<String>,
}

impl Draws {
    pub fn rows(&self) -> usize {
        self.n_chains * self.per_chain
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.natural[i * self.dim..(i + 1) * self.dim]
    }

    pub fn unconstrained_row(&self, i: usize) -> &[f64] {
        &self.unconstrained[i * self.dim..(i + 1) * self.dim]
    }

    /// Natural-scale draws of one parameter across all chains.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows()).map(|i| self.natural[i * self.dim + j]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.names.iter().position(|n| n == name).map(|j| self.column(j))
    }

    /// One parameter split into its chains.
    pub fn chains_of(&self, j: usize) -> Vec<Vec<f64>> {
        (0..self.n_chains)
            .map(|c| (0..self.per_chain).map(|t| self.natural[(c * self.per_chain + t) * self.dim + j]).collect())
            .collect()
    }

    pub fn mean_acceptance(&self) -> f64 {
        let all: Vec<f64> = self.acceptance.iter().flatten().cloned().collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub names: Vec<String>,
    /// `None` where R-hat is undefined (zero within-chain variance).
    pub rhat: Vec<Option<f64>>,
    pub ess: Vec<f64>,
    pub mean_acceptance: f64,
}

impl Diagnostics {
    /// Parameters whose R-hat exceeds 1.01 or is undefined.
    pub fn flagged(&self) -> Vec<&str> {
        self.names
            .iter()
            .zip(&self.rhat)
            .filter(|(_, r)| r.map_or(true, |r| r > 1.01))
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

/// Least-squares start: `beta` from OLS, `sigma = sqrt(RSS/(n-k))`,
/// `gamma = 1` and `nu = 10` when free.
pub fn initialize(problem: &RegressionProblem) -> Result<ParamVector> {
    crate::regression::validate(problem)?;
    let fit = ols(problem.design(), problem.response())?;
    let f = problem.family();
    Ok(ParamVector {
        beta: fit.beta.iter().cloned().collect(),
        sigma: fit.sigma_hat(problem.n(), problem.k()),
        gamma: f.gamma_free().then_some(1.0),
        nu: f.nu_free().then_some(10.0),
    })
}

/// Initial proposal scales for the unconstrained coordinates of `problem`.
pub fn initial_scales(problem: &RegressionProblem) -> Result<Vec<f64>> {
    let fit = ols(problem.design(), problem.response())?;
    let mut s: Vec<f64> = fit.standard_errors(problem.n(), problem.k()).iter().map(|v| 2.4 * v).collect();
    // sd of ln sigma is about 1/sqrt(2(n-k))
    s.push(2.4 / (2.0 * (problem.n() - problem.k()) as f64).sqrt());
    if problem.family().gamma_free() {
        s.push(0.5);
    }
    if problem.family().nu_free() {
        s.push(1.0);
    }
    Ok(s)
}

/// Run `config.n_chains` chains from `init` (later chains start from a
/// jittered copy) and keep the post-burn-in draws.
pub fn run_chain<T: LogDensity>(target: &T, init: &[f64], scales: &[f64], config: &ChainConfig) -> Result<Draws> {
    config.check()?;
    let dim = target.dim();
    if init.len() != dim || scales.len() != dim {
        return Err(Error::DimensionMismatch(alloc::format!("target has dimension {dim}, init {} and scales {}", init.len(), scales.len())));
    }
    if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::invalid("proposal scales must be positive and finite"));
    }
    if !target.log_density(init).is_finite() {
        return Err(Error::NonFiniteLogPost);
    }
    let master = SeededRng::new(config.seed, config.stream_id);
    let per_chain = config.kept_per_chain();
    let rows = per_chain * config.n_chains;
    let mut natural = vec![0.0; rows * dim];
    let mut unconstrained = vec![0.0; rows * dim];
    let mut acceptance = Vec::with_capacity(config.n_chains);
    let mut warnings = Vec::new();

    for c in 0..config.n_chains {
        let mut rng = master.substream(c as u64);
        let mut start = init.to_vec();
        if c > 0 {
            // overdispersed start; fall back to init if the jitter lands off-support
            let jittered: Vec<f64> = init.iter().zip(scales).map(|(x, s)| x + s * draw_standard_normal(&mut rng)).collect();
            if target.log_density(&jittered).is_finite() {
                start = jittered;
            }
        }
        let offset = c * per_chain * dim;
        let acc = single_chain(
            target,
            start,
            scales,
            config,
            &mut rng,
            &mut natural[offset..offset + per_chain * dim],
            &mut unconstrained[offset..offset + per_chain * dim],
        );
        if acc.iter().any(|&a| a < 0.01) {
            warnings.push(alloc::format!("chain {c}: acceptance below 0.01 after burn-in (stuck chain)"));
        }
        acceptance.push(acc);
    }

    Ok(Draws {
        names: target.param_names(),
        dim,
        n_chains: config.n_chains,
        per_chain,
        natural,
        unconstrained,
        acceptance,
        seed: config.seed,
        stream_id: config.stream_id,
        warnings,
    })
}

fn single_chain<T: LogDensity>(
    target: &T,
    mut z: Vec<f64>,
    scales: &[f64],
    config: &ChainConfig,
    rng: &mut SeededRng,
    natural: &mut [f64],
    unconstrained: &mut [f64],
) -> Vec<f64> {
    let dim = z.len();
    let burn = config.burn_in();
    let mut log_scale: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let mut lp = target.log_density(&z);
    let mut batch_acc = vec![0usize; dim];
    let mut batch = 0usize;
    let mut kept_acc = vec![0usize; dim];

    for it in 0..config.total_iterations {
        for j in 0..dim {
            let old = z[j];
            z[j] = old + log_scale[j].exp() * draw_standard_normal(rng);
            let cand = target.log_density(&z);
            let accept = cand.is_finite() && draw_uniform(rng).ln() < cand - lp;
            if accept {
                lp = cand;
                if it < burn {
                    batch_acc[j] += 1;
                } else {
                    kept_acc[j] += 1;
                }
            } else {
                z[j] = old;
            }
        }
        if it < burn && (it + 1) % config.adapt_window == 0 {
            batch += 1;
            let step = 1.0 / (batch as f64).sqrt();
            for j in 0..dim {
                let rate = batch_acc[j] as f64 / config.adapt_window as f64;
                log_scale[j] += step * (rate - config.target_accept);
                batch_acc[j] = 0;
            }
        }
        if it >= burn {
            let row = (it - burn) * dim;
            unconstrained[row..row + dim].copy_from_slice(&z);
            target.to_natural(&z, &mut natural[row..row + dim]);
        }
    }
    let kept = (config.total_iterations - burn) as f64;
    kept_acc.iter().map(|&a| a as f64 / kept).collect()
}

/// Posterior draws for a regression problem from the least-squares start.
pub fn sample_posterior(problem: &RegressionProblem, config: &ChainConfig) -> Result<Draws> {
    let theta = initialize(problem)?;
    let z = problem.transform(&theta)?;
    let scales = initial_scales(problem)?;
    run_chain(&Posterior { problem }, &z, &scales, config)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

fn split_halves(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            // drop the middle draw of odd-length chains
            [&c[..h], &c[c.len() - h..]]
        })
        .collect()
}

/// Split R-hat; `None` when the within-chain variance is zero.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<Option<f64>> {
    let parts = split_halves(chains);
    let n = parts.first().map_or(0, |p| p.len());
    if n < 2 || parts.len() < 2 {
        return Err(Error::InsufficientDraws("split R-hat needs at least 4 draws".into()));
    }
    let means: Vec<f64> = parts.iter().map(|p| mean(p)).collect();
    let w = mean(&parts.iter().map(|p| sample_var(p)).collect::<Vec<_>>());
    if !(w > 0.0) {
        return Ok(None);
    }
    let b = n as f64 * sample_var(&means);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    Ok(Some((var_plus / w).sqrt()))
}

/// Effective sample size from split chains with Geyer's initial monotone
/// positive-sequence truncation of the combined autocorrelation.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> Result<f64> {
    let parts = split_halves(chains);
    let n = parts.first().map_or(0, |p| p.len());
    if n < 4 || parts.len() < 2 {
        return Err(Error::InsufficientDraws("ESS needs at least 8 draws".into()));
    }
    let m = parts.len();
    let total = (m * n) as f64;
    let means: Vec<f64> = parts.iter().map(|p| mean(p)).collect();
    let vars: Vec<f64> = parts.iter().map(|p| sample_var(p)).collect();
    let w = mean(&vars);
    if !(w > 0.0) {
        return Ok(1.0);
    }
    let b_over_n = if m > 1 { sample_var(&means) } else { 0.0 };
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;

    let autocov = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for (p, mu) in parts.iter().zip(&means) {
            let mut s = 0.0;
            for t in 0..n - lag {
                s += (p[t] - mu) * (p[t + lag] - mu);
            }
            acc += s / n as f64;
        }
        acc / m as f64
    };
    let rho = |lag: usize| -> f64 {
        // chain variances above use n-1; autocov uses n
        1.0 - (w * (n as f64 - 1.0) / n as f64 - autocov(lag)) / var_plus
    };

    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let rho_even = if t == 0 { 1.0 } else { rho(t) };
        let pair = rho_even + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum_pairs += pair;
        prev_pair = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / total.log10().max(1.0));
    Ok((total / tau).min(total * total.log10()))
}

pub fn diagnose(draws: &Draws) -> Result<Diagnostics> {
    let mut rhat = Vec::with_capacity(draws.dim);
    let mut ess = Vec::with_capacity(draws.dim);
    for j in 0..draws.dim {
        let chains = draws.chains_of(j);
        rhat.push(split_rhat(&chains)?);
        ess.push(effective_sample_size(&chains)?);
    }
    Ok(Diagnostics { names: draws.names.clone(), rhat, ess, mean_acceptance: draws.mean_acceptance() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{ErrorFamily, PriorConfig};

    fn gaussian_2d() -> (usize, impl Fn(&[f64]) -> f64) {
        (2, |z: &[f64]| -0.5 * (z[0] * z[0] + z[1] * z[1]))
    }

    #[test]
    fn standard_normal_target() {
        let t = gaussian_2d();
        let cfg = ChainConfig { seed: 4, ..Default::default() };
        let d = run_chain(&t, &[3.0, -3.0], &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(d.rows(), 24_000);
        for j in 0..2 {
            let x = d.column(j);
            assert!(mean(&x).abs() < 0.05, "mean {}", mean(&x));
            assert!((sample_var(&x) - 1.0).abs() < 0.1);
        }
        let x = d.column(0);
        let y = d.column(1);
        let (mx, my) = (mean(&x), mean(&y));
        let cov = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() - 1) as f64;
        assert!(cov.abs() < 0.1);
        for a in d.acceptance[0].iter() {
            assert!((a - 0.44).abs() < 0.1, "acceptance {a}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let t = gaussian_2d();
        let cfg = ChainConfig { total_iterations: 2000, n_chains: 2, seed: 9, ..Default::default() };
        let a = run_chain(&t, &[0.0, 0.0], &[1.0, 1.0], &cfg).unwrap();
        let b = run_chain(&t, &[0.0, 0.0], &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&t, &[0.0, 0.0], &[1.0, 1.0], &ChainConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.natural, c.natural);
    }

    #[test]
    fn bad_inputs() {
        let t = (1usize, |z: &[f64]| if z[0] > 0.0 { 0.0 } else { f64::NEG_INFINITY });
        assert!(matches!(run_chain(&t, &[-1.0], &[1.0], &ChainConfig::default()), Err(Error::NonFiniteLogPost)));
        assert!(ChainConfig { burn_in_fraction: 1.0, ..Default::default() }.check().is_err());
        assert!(ChainConfig { total_iterations: 10, ..Default::default() }.check().is_err());
    }

    #[test]
    fn regression_posterior_centred_at_ols() {
        let mut rng = SeededRng::new(21, 0);
        let x: Vec<f64> = (0..50).map(|_| draw_standard_normal(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 0.5 * v + draw_standard_normal(&mut rng)).collect();
        let p = RegressionProblem::from_columns(&[&x], &y, true, ErrorFamily::Normal, PriorConfig::default()).unwrap();
        let init = initialize(&p).unwrap();
        let mx = mean(&y);
        let fit = ols(p.design(), p.response()).unwrap();
        assert!((init.sigma - (fit.rss / 48.0).sqrt()).abs() < 1e-14);
        let d = sample_posterior(&p, &ChainConfig { seed: 1, ..Default::default() }).unwrap();
        let diag = diagnose(&d).unwrap();
        for j in 0..2 {
            let b = d.column(j);
            let se = (sample_var(&b) / diag.ess[j]).sqrt();
            assert!((mean(&b) - fit.beta[j]).abs() < 3.0 * se, "beta[{j}]");
        }
        // intercept-only start is the sample mean
        let p0 = RegressionProblem::from_columns(&[], &y, true, ErrorFamily::Ctpt, PriorConfig::default()).unwrap();
        let i0 = initialize(&p0).unwrap();
        assert!((i0.beta[0] - mx).abs() < 1e-12);
        assert_eq!(i0.gamma, Some(1.0));
        assert_eq!(i0.nu, Some(10.0));
    }

    #[test]
    fn diagnostics_on_known_sequences() {
        let mut rng = SeededRng::new(3, 0);
        let iid: Vec<Vec<f64>> = (0..4).map(|_| (0..5000).map(|_| draw_standard_normal(&mut rng)).collect()).collect();
        let r = split_rhat(&iid).unwrap().unwrap();
        assert!((1.0 - 1e-3..=1.01).contains(&r), "{r}");

        let constant = vec![vec![2.0; 1000]];
        assert_eq!(split_rhat(&constant).unwrap(), None);
        assert_eq!(effective_sample_size(&constant).unwrap(), 1.0);

        let n = 40_000;
        let mut ar = Vec::with_capacity(n);
        let mut x = 0.0;
        for _ in 0..n {
            x = 0.5 * x + (0.75f64).sqrt() * draw_standard_normal(&mut rng);
            ar.push(x);
        }
        let ratio = effective_sample_size(&[ar]).unwrap() / n as f64;
        assert!((ratio - 1.0 / 3.0).abs() < 0.2 / 3.0, "{ratio}");

        assert!(split_rhat(&[vec![1.0, 2.0, 3.0]]).is_err());
    }
}
