//! Marginal likelihoods by iterative bridge sampling, and path Bayes factors.
//!
//! The proposal is a multivariate normal moment-matched to half of the
//! unconstrained draws; the other half enters the bridge identity. All
//! models share the same improper `1/sigma` constant (one) and unit flat
//! density on `beta`, so nested-model ratios are well defined.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::mcmc::{diagnose, effective_sample_size, sample_posterior, ChainConfig, Diagnostics, Draws, LogDensity, Posterior};
use crate::regression::{ols, RegressionProblem};
use crate::special::{draw_standard_normal, ln_gamma, SeededRng, LN_SQRT_2PI};

/// Which half of each chain fits the proposal; the rest is used for the
/// bridge evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum HalfSplit {
    #[default]
    FirstHalf,
    SecondHalf,
    OddEven,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BridgeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub split: HalfSplit,
}

impl Default for BridgeOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 1000, split: HalfSplit::FirstHalf }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvidenceResult {
    pub log_marginal_likelihood: f64,
    /// Approximate standard error on the log scale (relative MSE of the
    /// estimator on the natural scale).
    pub approx_standard_error: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

struct Mvn {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl Mvn {
    fn fit(rows: &[&[f64]]) -> Result<Self> {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = DVector::zeros(d);
        for r in rows {
            for j in 0..d {
                mean[j] += r[j] / n;
            }
        }
        let mut cov = DMatrix::zeros(d, d);
        for r in rows {
            for a in 0..d {
                for b in 0..=a {
                    cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]) / (n - 1.0);
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                cov[(b, a)] = cov[(a, b)];
            }
        }
        if cov.iter().any(|v: &f64| !v.is_finite()) {
            return Err(Error::DegenerateCovariance);
        }
        let max_var = (0..d).map(|i| cov[(i, i)]).fold(0.0, f64::max);
        let chol = cov.cholesky().ok_or(Error::DegenerateCovariance)?.l();
        // numerically singular even when the factorization goes through
        if (0..d).any(|i| chol[(i, i)] * chol[(i, i)] <= 1e-12 * max_var) {
            return Err(Error::DegenerateCovariance);
        }
        let log_det_half: f64 = (0..d).map(|i| chol[(i, i)].ln()).sum();
        if !log_det_half.is_finite() {
            return Err(Error::DegenerateCovariance);
        }
        Ok(Self { mean, chol, log_norm: -(d as f64) * LN_SQRT_2PI - log_det_half })
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_iterator(x.len(), x.iter().zip(self.mean.iter()).map(|(a, m)| a - m));
        let w = self.chol.solve_lower_triangular(&diff).expect("cholesky factor is nonsingular");
        self.log_norm - 0.5 * w.norm_squared()
    }

    fn draw(&self, rng: &mut SeededRng) -> Vec<f64> {
        let z = DVector::from_iterator(self.mean.len(), (0..self.mean.len()).map(|_| draw_standard_normal(rng)));
        (&self.mean + &self.chol * z).iter().cloned().collect()
    }
}

/// Log marginal likelihood of `target` from its posterior `draws`.
pub fn log_marginal<T: LogDensity>(draws: &Draws, target: &T, options: &BridgeOptions, rng: &mut SeededRng) -> Result<EvidenceResult> {
    let d = draws.dim;
    if target.dim() != d {
        return Err(Error::DimensionMismatch(alloc::format!("draws have dimension {d}, target {}", target.dim())));
    }
    let mut fit_rows: Vec<&[f64]> = Vec::new();
    let mut eval_chains: Vec<Vec<&[f64]>> = Vec::new();
    for c in 0..draws.n_chains {
        let mut eval = Vec::new();
        for t in 0..draws.per_chain {
            let row = draws.unconstrained_row(c * draws.per_chain + t);
            let for_fit = match options.split {
                HalfSplit::FirstHalf => t < draws.per_chain / 2,
                HalfSplit::SecondHalf => t >= draws.per_chain - draws.per_chain / 2,
                HalfSplit::OddEven => t % 2 == 0,
            };
            if for_fit { fit_rows.push(row) } else { eval.push(row) }
        }
        eval_chains.push(eval);
    }
    let n1 = eval_chains.iter().map(|c| c.len()).sum::<usize>();
    if fit_rows.len() <= d + 1 || n1 < 8 {
        return Err(Error::InsufficientDraws(alloc::format!("bridge sampling needs more than {} draws per half", d + 1)));
    }
    let q = Mvn::fit(&fit_rows)?;

    // log posterior minus log proposal, at posterior and proposal draws
    let l1: Vec<f64> = eval_chains.iter().flatten().map(|r| target.log_density(r) - q.log_pdf(r)).collect();
    let n2 = n1;
    let l2: Vec<f64> = (0..n2)
        .map(|_| {
            let x = q.draw(rng);
            target.log_density(&x) - q.log_pdf(&x)
        })
        .collect();
    if l1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergence("log posterior is not finite at a posterior draw".into()));
    }

    let n1_eff = {
        let per_coord: Vec<f64> = (0..d)
            .map(|j| {
                let chains: Vec<Vec<f64>> = eval_chains.iter().map(|c| c.iter().map(|r| r[j]).collect()).collect();
                effective_sample_size(&chains).unwrap_or(n1 as f64)
            })
            .collect();
        median(per_coord).min(n1 as f64)
    };
    let s1 = n1_eff / (n1_eff + n2 as f64);
    let s2 = 1.0 - s1;
    let (ls1, ls2) = (s1.ln(), s2.ln());

    let lstar = median(l1.clone());
    let a: Vec<f64> = l1.iter().map(|v| v - lstar).collect();
    let b: Vec<f64> = l2.iter().map(|v| v - lstar).collect();
    let (ln_n1, ln_n2) = ((n1 as f64).ln(), (n2 as f64).ln());

    let mut lr = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=options.max_iter {
        iterations = it;
        let num = log_sum_exp(b.iter().map(|&bj| bj - log_add_exp(ls1 + bj, ls2 + lr))) - ln_n2;
        let den = log_sum_exp(a.iter().map(|&ai| -log_add_exp(ls1 + ai, ls2 + lr))) - ln_n1;
        let next = num - den;
        if !next.is_finite() {
            return Err(Error::NonConvergence("bridge iteration produced a non-finite value".into()));
        }
        let rel = (1.0 - (lr - next).exp()).abs();
        lr = next;
        if rel < options.tol {
            converged = true;
            break;
        }
    }

    // relative mean-squared error, posterior half corrected for autocorrelation
    let f1: Vec<f64> = a.iter().map(|&ai| 1.0 / (s1 * (ai - lr).exp() + s2)).collect();
    let f2: Vec<f64> = b.iter().map(|&bj| { let w = (bj - lr).exp(); w / (s1 * w + s2) }).collect();
    let rel_var = |f: &[f64]| {
        let m = f.iter().sum::<f64>() / f.len() as f64;
        let v = f.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (f.len() - 1) as f64;
        v / (m * m)
    };
    let f1_chains: Vec<Vec<f64>> = {
        let mut out = Vec::new();
        let mut i = 0;
        for c in &eval_chains {
            out.push(f1[i..i + c.len()].to_vec());
            i += c.len();
        }
        out
    };
    let tau = effective_sample_size(&f1_chains).map_or(1.0, |e| n1 as f64 / e);
    let re2 = rel_var(&f2) / n2 as f64 + tau * rel_var(&f1) / n1 as f64;

    Ok(EvidenceResult {
        log_marginal_likelihood: lr + lstar,
        approx_standard_error: re2.sqrt(),
        iterations_used: iterations,
        converged,
    })
}

/// Log evidence of the Gaussian linear model under `p(beta, sigma) = 1/sigma`:
/// `-(n-k)/2 ln(2 pi) - ln|X'X|/2 + ln(Γ((n-k)/2)/2) - (n-k)/2 ln(RSS/2)`.
pub fn normal_flat_log_evidence(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<f64> {
    let (n, k) = design.shape();
    if n <= k {
        return Err(Error::ImproperPosterior { n, k });
    }
    let fit = ols(design, response)?;
    let xtx = design.transpose() * design;
    let chol = xtx.cholesky().ok_or(Error::RankDeficient { rank: crate::regression::matrix_rank(design), k })?;
    let log_det: f64 = 2.0 * (0..k).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>();
    let p = (n - k) as f64;
    Ok(-p * LN_SQRT_2PI - 0.5 * log_det + ln_gamma(0.5 * p) - core::f64::consts::LN_2 - 0.5 * p * (0.5 * fit.rss).ln())
}

/// One fitted regression model.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub draws: Draws,
    pub diagnostics: Diagnostics,
    pub evidence: EvidenceResult,
}

const EVIDENCE_TAG: u64 = 0xB81D_6E00;

/// Sample the posterior and estimate its evidence.
pub fn fit_model(problem: &RegressionProblem, chain: &ChainConfig, bridge: &BridgeOptions) -> Result<ModelFit> {
    let draws = sample_posterior(problem, chain)?;
    let diagnostics = diagnose(&draws)?;
    let mut rng = SeededRng::new(chain.seed, chain.stream_id).substream(EVIDENCE_TAG);
    let evidence = log_marginal(&draws, &Posterior { problem }, bridge, &mut rng)?;
    Ok(ModelFit { draws, diagnostics, evidence })
}

#[derive(Debug, Clone)]
pub struct PathBayesFactor {
    pub log_bf: f64,
    pub with_predictor: ModelFit,
    pub without_predictor: ModelFit,
}

impl PathBayesFactor {
    pub fn bf(&self) -> f64 {
        self.log_bf.exp()
    }
}

/// Evidence for design column `predictor_index` in `problem`: the model
/// with that column against the same model without it.
pub fn bayes_factor_path(
    problem: &RegressionProblem,
    predictor_index: usize,
    chain: &ChainConfig,
    bridge: &BridgeOptions,
) -> Result<PathBayesFactor> {
    let reduced = problem.without_column(predictor_index)?;
    let with_predictor = fit_model(problem, chain, bridge)?;
    let without_predictor = fit_model(&reduced, &ChainConfig { seed: chain.seed ^ 0x5EED_0001, ..chain.clone() }, bridge)?;
    Ok(PathBayesFactor {
        log_bf: with_predictor.evidence.log_marginal_likelihood - without_predictor.evidence.log_marginal_likelihood,
        with_predictor,
        without_predictor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::run_chain;
    use crate::regression::{ErrorFamily, PriorConfig};

    fn short() -> ChainConfig {
        ChainConfig { total_iterations: 10_000, ..Default::default() }
    }

    #[test]
    fn constructed_normalization() {
        let t = (1usize, |z: &[f64]| -0.5 * z[0] * z[0] - LN_SQRT_2PI + 7f64.ln());
        let d = run_chain(&t, &[0.0], &[2.4], &ChainConfig { seed: 2, ..Default::default() }).unwrap();
        let mut rng = SeededRng::new(2, 1);
        let r = log_marginal(&d, &t, &BridgeOptions::default(), &mut rng).unwrap();
        assert!(r.converged);
        assert!((r.log_marginal_likelihood - 7f64.ln()).abs() < 0.02, "{r:?}");

        // doubling the density shifts the estimate by ln 2 exactly
        let t2 = (1usize, |z: &[f64]| -0.5 * z[0] * z[0] - LN_SQRT_2PI + 14f64.ln());
        let mut rng = SeededRng::new(2, 1);
        let r2 = log_marginal(&d, &t2, &BridgeOptions::default(), &mut rng).unwrap();
        assert!((r2.log_marginal_likelihood - r.log_marginal_likelihood - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn conjugate_normal_inverse_gamma() {
        // y = X beta + e, beta | s2 ~ N(0, s2 V0), s2 ~ IG(a0, b0); sampled in (beta, ln s2)
        let mut rng = SeededRng::new(31, 0);
        let n = 40;
        let x: Vec<f64> = (0..n).map(|_| draw_standard_normal(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 + 0.8 * v + 0.7 * draw_standard_normal(&mut rng)).collect();
        let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
        let yv = DVector::from_vec(y.clone());
        let (a0, b0, v0) = (2.0, 1.5, 4.0);
        let target = (3usize, |z: &[f64]| {
            let ls2 = z[2];
            let s2 = ls2.exp();
            let mut rss = 0.0;
            for i in 0..n {
                let r = y[i] - z[0] - z[1] * x[i];
                rss += r * r;
            }
            let ll = -(n as f64) * LN_SQRT_2PI - 0.5 * n as f64 * ls2 - 0.5 * rss / s2;
            let lpb = -2.0 * LN_SQRT_2PI - ls2 - v0.ln() - 0.5 * (z[0] * z[0] + z[1] * z[1]) / (v0 * s2);
            let lps2 = a0 * b0.ln() - ln_gamma(a0) - (a0 + 1.0) * ls2 - b0 / s2;
            ll + lpb + lps2 + ls2
        });
        // closed form
        let v0_inv = DMatrix::identity(2, 2) / v0;
        let vn_inv = &v0_inv + design.transpose() * &design;
        let vn = vn_inv.clone().try_inverse().unwrap();
        let mn = &vn * (design.transpose() * &yv);
        let an = a0 + n as f64 / 2.0;
        let bn = b0 + 0.5 * (yv.norm_squared() - (mn.transpose() * &vn_inv * &mn)[(0, 0)]);
        let exact = -(n as f64) * LN_SQRT_2PI + 0.5 * (vn.determinant().ln() - (v0 * v0).ln()) + a0 * b0.ln()
            - an * bn.ln()
            + ln_gamma(an)
            - ln_gamma(a0);
        let d = run_chain(&target, &[0.3, 0.8, -0.7], &[0.3, 0.3, 0.5], &ChainConfig { seed: 5, ..Default::default() }).unwrap();
        let r = log_marginal(&d, &target, &BridgeOptions::default(), &mut SeededRng::new(5, 9)).unwrap();
        assert!((r.log_marginal_likelihood - exact).abs() < 0.05, "{} vs {exact}", r.log_marginal_likelihood);
        assert!(r.approx_standard_error < 0.05);
    }

    #[test]
    fn flat_prior_normal_matches_closed_form() {
        let mut rng = SeededRng::new(40, 0);
        let n = 50;
        let x1: Vec<f64> = (0..n).map(|_| draw_standard_normal(&mut rng)).collect();
        let x2: Vec<f64> = (0..n).map(|_| draw_standard_normal(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * x1[i] - 0.2 * x2[i] + draw_standard_normal(&mut rng)).collect();
        let p = RegressionProblem::from_columns(&[&x1, &x2], &y, true, ErrorFamily::Normal, PriorConfig::default()).unwrap();
        let exact = normal_flat_log_evidence(p.design(), p.response()).unwrap();
        let fit = fit_model(&p, &ChainConfig { seed: 3, ..Default::default() }, &BridgeOptions::default()).unwrap();
        assert!((fit.evidence.log_marginal_likelihood - exact).abs() < 0.05);

        // split choice changes the estimate by no more than a few SE
        for split in [HalfSplit::SecondHalf, HalfSplit::OddEven] {
            let r = log_marginal(&fit.draws, &Posterior { problem: &p }, &BridgeOptions { split, ..Default::default() }, &mut SeededRng::new(3, 4))
                .unwrap();
            let se = r.approx_standard_error.max(fit.evidence.approx_standard_error);
            assert!((r.log_marginal_likelihood - fit.evidence.log_marginal_likelihood).abs() < 3.0 * se + 0.01);
        }
    }

    #[test]
    fn path_bf_direction_and_determinism() {
        let mut rng = SeededRng::new(41, 0);
        let n = 100;
        let x: Vec<f64> = (0..n).map(|_| draw_standard_normal(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 0.2 * draw_standard_normal(&mut rng)).collect();
        let p = RegressionProblem::from_columns(&[&x], &y, true, ErrorFamily::Normal, PriorConfig::default()).unwrap();
        let bf = bayes_factor_path(&p, 1, &short(), &BridgeOptions::default()).unwrap();
        assert!(bf.log_bf > 100f64.ln());
        let exact = normal_flat_log_evidence(p.design(), p.response()).unwrap()
            - normal_flat_log_evidence(&p.design().clone().remove_column(1), p.response()).unwrap();
        assert!((bf.log_bf - exact).abs() < 0.1, "{} vs {exact}", bf.log_bf);
        let again = bayes_factor_path(&p, 1, &short(), &BridgeOptions::default()).unwrap();
        assert_eq!(bf.log_bf, again.log_bf);
    }

    #[test]
    fn degenerate_draws_are_rejected() {
        let t = (2usize, |z: &[f64]| -0.5 * (z[0] * z[0] + z[1] * z[1]));
        let mut d = run_chain(&t, &[0.0, 0.0], &[1.0, 1.0], &ChainConfig { total_iterations: 1000, ..Default::default() }).unwrap();
        for i in 0..d.rows() {
            d.unconstrained[i * 2 + 1] = d.unconstrained[i * 2];
        }
        let r = log_marginal(&d, &t, &BridgeOptions::default(), &mut SeededRng::new(0, 0));
        assert!(matches!(r, Err(Error::DegenerateCovariance)));
    }
}
