//! Single-mediator analysis: `M = a0 + alpha X + e_M` and
//! `Y = b0 + beta M + tau X + e_Y`, fitted independently, with the
//! indirect effect `alpha beta` formed draw by draw.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_core::RngCore;

use crate::error::{Equation, Error, Result};
use crate::evidence::{fit_model, BridgeOptions, EvidenceResult};
use crate::mcmc::{diagnose, sample_posterior, ChainConfig, Diagnostics, Draws};
use crate::regression::{ErrorFamily, PriorConfig, RegressionProblem};
use crate::special::SeededRng;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MediationData {
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub y: Vec<f64>,
}

impl MediationData {
    pub fn new(x: Vec<f64>, m: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let d = Self { x, m, y };
        d.check()?;
        Ok(d)
    }

    pub fn check(&self) -> Result<()> {
        let n = self.x.len();
        if self.m.len() != n || self.y.len() != n {
            return Err(Error::DimensionMismatch(alloc::format!(
                "x, m, y have lengths {}, {}, {}",
                n,
                self.m.len(),
                self.y.len()
            )));
        }
        if n < 4 {
            return Err(Error::ImproperPosterior { n, k: 3 });
        }
        if self.x.iter().chain(&self.m).chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("mediation data contain non-finite values"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Prior probabilities of the three null configurations: `q00` both paths
/// absent, `q01` only `beta` present, `q10` only `alpha` present.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct NullPartition {
    pub q00: f64,
    pub q01: f64,
    pub q10: f64,
}

impl Default for NullPartition {
    fn default() -> Self {
        Self { q00: 1.0 / 3.0, q01: 1.0 / 3.0, q10: 1.0 / 3.0 }
    }
}

impl NullPartition {
    pub fn new(q00: f64, q01: f64, q10: f64) -> Result<Self> {
        let q = Self { q00, q01, q10 };
        q.check()?;
        Ok(q)
    }

    pub fn check(&self) -> Result<()> {
        let parts = [self.q00, self.q01, self.q10];
        if parts.iter().any(|q| !(*q >= 0.0)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("null partition must be nonnegative and sum to 1"));
        }
        Ok(())
    }

    /// Partition implied by independent path prior odds
    /// `P(path present) / P(path absent)`.
    pub fn from_prior_odds(odds_alpha: f64, odds_beta: f64) -> Result<Self> {
        if !(odds_alpha > 0.0 && odds_beta > 0.0) {
            return Err(Error::domain("prior odds must be positive"));
        }
        let z = 1.0 + odds_alpha + odds_beta;
        Ok(Self { q00: 1.0 / z, q01: odds_beta / z, q10: odds_alpha / z })
    }
}

/// Mediation Bayes factor from the two path Bayes factors.
pub fn bf_mediation(bf_alpha: f64, bf_beta: f64, q: &NullPartition) -> Result<f64> {
    if !(bf_alpha > 0.0 && bf_beta > 0.0) {
        return Err(Error::domain("path Bayes factors must be positive"));
    }
    q.check()?;
    Ok(bf_alpha * bf_beta / (q.q00 + q.q01 * bf_beta + q.q10 * bf_alpha))
}

/// [`bf_mediation`] on the log scale, safe for very large path BFs.
pub fn log_bf_mediation(log_bf_alpha: f64, log_bf_beta: f64, q: &NullPartition) -> Result<f64> {
    q.check()?;
    if log_bf_alpha.is_nan() || log_bf_beta.is_nan() {
        return Err(Error::domain("path Bayes factors must not be NaN"));
    }
    let terms = [q.q00.ln(), q.q01.ln() + log_bf_beta, q.q10.ln() + log_bf_alpha];
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
    Ok(log_bf_alpha + log_bf_beta - lse)
}

/// Mediation Bayes factor in its prior-odds form.
pub fn bf_mediation_from_odds(bf_alpha: f64, bf_beta: f64, prior_odds_alpha: f64, prior_odds_beta: f64) -> Result<f64> {
    if !(bf_alpha > 0.0 && bf_beta > 0.0 && prior_odds_alpha > 0.0 && prior_odds_beta > 0.0) {
        return Err(Error::domain("Bayes factors and prior odds must be positive"));
    }
    Ok((1.0 + prior_odds_beta + prior_odds_alpha) * bf_alpha * bf_beta
        / (1.0 + prior_odds_beta * bf_beta + prior_odds_alpha * bf_alpha))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SummaryRow {
    pub mean: f64,
    pub mode: f64,
    pub p2_5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p97_5: f64,
    pub ci_length: f64,
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

const KDE_GRID: usize = 512;

/// Mode of a Gaussian kernel density estimate with Silverman's bandwidth,
/// located on a 512-point grid (draws are linearly binned onto the grid).
pub fn kde_mode(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    if hi == lo {
        return lo;
    }
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let sd = (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    let (a, b) = (lo - 3.0 * h, hi + 3.0 * h);
    let step = (b - a) / (KDE_GRID - 1) as f64;

    let mut weights = vec![0.0; KDE_GRID];
    for &x in sorted {
        let pos = (x - a) / step;
        let i = (pos.floor() as usize).min(KDE_GRID - 2);
        let frac = pos - i as f64;
        weights[i] += 1.0 - frac;
        weights[i + 1] += frac;
    }
    let reach = ((4.0 * h / step).ceil() as usize).min(KDE_GRID - 1);
    let kernel: Vec<f64> = (0..=reach).map(|d| { let u = d as f64 * step / h; (-0.5 * u * u).exp() }).collect();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for g in 0..KDE_GRID {
        let from = g.saturating_sub(reach);
        let to = (g + reach).min(KDE_GRID - 1);
        let dens: f64 = (from..=to).map(|i| weights[i] * kernel[g.abs_diff(i)]).sum();
        if dens > best.0 {
            best = (dens, g);
        }
    }
    a + best.1 as f64 * step
}

pub fn summarize(draws: &[f64]) -> Result<SummaryRow> {
    if draws.len() < 100 {
        return Err(Error::InsufficientDraws(alloc::format!("summaries need at least 100 draws, got {}", draws.len())));
    }
    if draws.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("draws contain non-finite values"));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q = |p| quantile_sorted(&sorted, p);
    let (p2_5, p97_5) = (q(0.025), q(0.975));
    Ok(SummaryRow {
        mean: draws.iter().sum::<f64>() / draws.len() as f64,
        mode: kde_mode(&sorted),
        p2_5,
        p25: q(0.25),
        p50: q(0.5),
        p75: q(0.75),
        p97_5,
        ci_length: p97_5 - p2_5,
    })
}

/// Shortest interval containing a `level` fraction of the draws.
pub fn hpd_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("HPD level must lie in (0, 1)"));
    }
    if draws.len() < 2 {
        return Err(Error::InsufficientDraws("HPD needs at least 2 draws".into()));
    }
    let mut s = draws.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let w = ((level * s.len() as f64).ceil() as usize).clamp(1, s.len() - 1);
    let i = (0..s.len() - w)
        .min_by(|&i, &j| (s[i + w] - s[i]).total_cmp(&(s[j + w] - s[j])))
        .unwrap_or(0);
    Ok((s[i], s[i + w]))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MediationConfig {
    pub chain: ChainConfig,
    pub bridge: BridgeOptions,
    pub priors: PriorConfig,
    pub null_partition: NullPartition,
    /// Fit the two null regressions and compute Bayes factors.
    pub bayes_factors: bool,
}

impl Default for MediationConfig {
    fn default() -> Self {
        Self {
            chain: ChainConfig::default(),
            bridge: BridgeOptions::default(),
            priors: PriorConfig::default(),
            null_partition: NullPartition::default(),
            bayes_factors: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NamedSummary {
    pub name: String,
    pub summary: SummaryRow,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MediationBayesFactors {
    pub log_bf_alpha: f64,
    pub log_bf_beta: f64,
    pub log_bf_med: f64,
    pub bf_alpha: f64,
    pub bf_beta: f64,
    pub bf_med: f64,
    pub evidence: Vec<(Equation, EvidenceResult)>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MediationResult {
    pub family: ErrorFamily,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub alpha_draws: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub beta_draws: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub ab_draws: Vec<f64>,
    pub summaries: Vec<NamedSummary>,
    pub bayes_factors: Option<MediationBayesFactors>,
    pub diagnostics: Vec<(Equation, Diagnostics)>,
    pub warnings: Vec<String>,
}

impl MediationResult {
    pub fn summary(&self, name: &str) -> Option<&SummaryRow> {
        self.summaries.iter().find(|s| s.name == name).map(|s| &s.summary)
    }
}

/// Mediator, outcome and the two path-null problems.
pub fn build_problems(data: &MediationData, family: ErrorFamily, priors: &PriorConfig) -> Result<[(Equation, RegressionProblem); 4]> {
    data.check()?;
    let label = |eq: Equation| move |e: Error| e.in_equation(eq);
    let med = RegressionProblem::from_columns(&[&data.x], &data.m, true, family, *priors).map_err(label(Equation::Mediator))?;
    let out = RegressionProblem::from_columns(&[&data.m, &data.x], &data.y, true, family, *priors).map_err(label(Equation::Outcome))?;
    let med0 = med.without_column(1).map_err(label(Equation::MediatorNull))?;
    let out0 = out.without_column(1).map_err(label(Equation::OutcomeNull))?;
    Ok([(Equation::Mediator, med), (Equation::Outcome, out), (Equation::MediatorNull, med0), (Equation::OutcomeNull, out0)])
}

fn equation_chain(base: &ChainConfig, eq: Equation) -> ChainConfig {
    let tag = match eq {
        Equation::Mediator => 1,
        Equation::Outcome => 2,
        Equation::MediatorNull => 3,
        Equation::OutcomeNull => 4,
    };
    let seed = SeededRng::new(base.seed, base.stream_id).substream(0x3ED1_A700 + tag).next_u64();
    ChainConfig { seed, ..base.clone() }
}

struct EquationFit {
    draws: Draws,
    diagnostics: Diagnostics,
    evidence: Option<EvidenceResult>,
}

fn fit_equation(problem: &RegressionProblem, eq: Equation, config: &MediationConfig) -> Result<EquationFit> {
    let chain = equation_chain(&config.chain, eq);
    let run = || -> Result<EquationFit> {
        if config.bayes_factors {
            let f = fit_model(problem, &chain, &config.bridge)?;
            Ok(EquationFit { draws: f.draws, diagnostics: f.diagnostics, evidence: Some(f.evidence) })
        } else {
            let draws = sample_posterior(problem, &chain)?;
            let diagnostics = diagnose(&draws)?;
            Ok(EquationFit { draws, diagnostics, evidence: None })
        }
    };
    run().map_err(|e| e.in_equation(eq))
}

pub fn fit_mediation(data: &MediationData, family: ErrorFamily, config: &MediationConfig) -> Result<MediationResult> {
    config.chain.check()?;
    config.null_partition.check()?;
    let problems = build_problems(data, family, &config.priors)?;
    let n_fits = if config.bayes_factors { 4 } else { 2 };
    let mut fits = Vec::with_capacity(n_fits);
    for (eq, p) in problems.iter().take(n_fits) {
        fits.push(fit_equation(p, *eq, config)?);
    }
    assemble(family, &problems, fits, config)
}

fn assemble(
    family: ErrorFamily,
    problems: &[(Equation, RegressionProblem); 4],
    fits: Vec<EquationFit>,
    config: &MediationConfig,
) -> Result<MediationResult> {
    let (med, out) = (&fits[0], &fits[1]);
    let alpha = med.draws.column(1);
    let beta = out.draws.column(1);
    let tau = out.draws.column(2);
    let ab: Vec<f64> = alpha.iter().zip(&beta).map(|(a, b)| a * b).collect();

    let mut summaries = Vec::new();
    let mut push = |name: &str, v: &[f64]| -> Result<()> {
        summaries.push(NamedSummary { name: name.into(), summary: summarize(v)? });
        Ok(())
    };
    push("alpha", &alpha)?;
    push("beta", &beta)?;
    push("alpha_beta", &ab)?;
    push("tau", &tau)?;
    for (suffix, fit) in [("m", med), ("y", out)] {
        for name in ["sigma", "gamma", "nu"] {
            if let Some(col) = fit.draws.column_by_name(name) {
                push(&alloc::format!("{name}_{suffix}"), &col)?;
            }
        }
    }

    let bayes_factors = if config.bayes_factors {
        let ev: Vec<EvidenceResult> = fits.iter().map(|f| f.evidence.expect("evidence requested")).collect();
        let log_bf_alpha = ev[0].log_marginal_likelihood - ev[2].log_marginal_likelihood;
        let log_bf_beta = ev[1].log_marginal_likelihood - ev[3].log_marginal_likelihood;
        let log_bf_med = log_bf_mediation(log_bf_alpha, log_bf_beta, &config.null_partition)?;
        Some(MediationBayesFactors {
            log_bf_alpha,
            log_bf_beta,
            log_bf_med,
            bf_alpha: log_bf_alpha.exp(),
            bf_beta: log_bf_beta.exp(),
            bf_med: log_bf_med.exp(),
            evidence: problems.iter().map(|(eq, _)| *eq).zip(ev).collect(),
        })
    } else {
        None
    };

    let mut warnings = Vec::new();
    let mut diagnostics = Vec::new();
    for ((eq, _), fit) in problems.iter().zip(&fits) {
        for w in &fit.draws.warnings {
            warnings.push(alloc::format!("{eq}: {w}"));
        }
        for name in fit.diagnostics.flagged() {
            warnings.push(alloc::format!("{eq}: R-hat for {name} above 1.01 or undefined"));
        }
        diagnostics.push((*eq, fit.diagnostics.clone()));
    }

    Ok(MediationResult { family, alpha_draws: alpha, beta_draws: beta, ab_draws: ab, summaries, bayes_factors, diagnostics, warnings })
}
