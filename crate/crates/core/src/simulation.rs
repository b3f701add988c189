//! Data generators and replication runners for recovery and power studies.
//!
//! Replication `r` draws everything from streams keyed by `(seed, r)`, so
//! results do not depend on execution order. The parallel drivers live in
//! the CLI crate and call the per-replication functions here.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::ctpt::{self, CtptSpec, TailSpec};
use crate::error::{Error, Result};
use crate::mediation::{fit_mediation, quantile_sorted, MediationConfig, MediationData, SummaryRow};
use crate::regression::{ols, ErrorFamily};
use crate::special::{draw_standard_normal, draw_uniform, SeededRng};
use nalgebra::{DMatrix, DVector};

const DATA_TAG: u64 = 0xDA7A;
const BOOT_TAG: u64 = 0xB007;
/// Null replications use streams offset by this amount.
pub const NULL_STREAM_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case", deny_unknown_fields))]
pub enum ErrorSpec {
    Ctpt { gamma: f64, nu: TailSpec },
    TukeyGh { g: f64, h: f64 },
    Normal,
}

impl ErrorSpec {
    pub fn check(&self) -> Result<()> {
        match *self {
            ErrorSpec::Ctpt { gamma, nu } => CtptSpec::new(gamma, nu).map(|_| ()),
            ErrorSpec::TukeyGh { g, h } => check_tukey(g, h),
            ErrorSpec::Normal => Ok(()),
        }
    }

    /// `n` i.i.d. mean-zero draws.
    pub fn sample(&self, n: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
        match *self {
            ErrorSpec::Ctpt { gamma, nu } => Ok(ctpt::sample(n, &CtptSpec::new(gamma, nu)?, rng)),
            ErrorSpec::TukeyGh { g, h } => sample_tukey_gh(n, g, h, rng),
            ErrorSpec::Normal => Ok((0..n).map(|_| draw_standard_normal(rng)).collect()),
        }
    }
}

fn check_tukey(g: f64, h: f64) -> Result<()> {
    if !(0.0..1.0).contains(&h) || !g.is_finite() {
        return Err(Error::domain(alloc::format!("Tukey g-and-h requires finite g and 0 <= h < 1, got g = {g}, h = {h}")));
    }
    Ok(())
}

/// Mean of the Tukey g-and-h variable,
/// `(exp(g^2 / (2(1-h))) - 1) / (g sqrt(1-h))`, zero in the `g = 0` limit.
pub fn tukey_gh_mean(g: f64, h: f64) -> Result<f64> {
    check_tukey(g, h)?;
    if g == 0.0 {
        return Ok(0.0);
    }
    Ok((g * g / (2.0 * (1.0 - h))).exp_m1() / (g * (1.0 - h).sqrt()))
}

/// Centred Tukey g-and-h draws: `((e^{gZ} - 1)/g) e^{hZ^2/2}` minus its mean.
pub fn sample_tukey_gh(n: usize, g: f64, h: f64, rng: &mut SeededRng) -> Result<Vec<f64>> {
    let mean = tukey_gh_mean(g, h)?;
    Ok((0..n)
        .map(|_| {
            let z = draw_standard_normal(rng);
            let skew = if g == 0.0 { z } else { (g * z).exp_m1() / g };
            skew * (0.5 * h * z * z).exp() - mean
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NullVariant {
    BothZero,
    AlphaZero,
    BetaZero,
}

impl NullVariant {
    /// The variant used by null replication `r`.
    pub fn cycle(r: usize) -> Self {
        [NullVariant::BothZero, NullVariant::AlphaZero, NullVariant::BetaZero][r % 3]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScenarioConfig {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub intercept_m: f64,
    pub intercept_y: f64,
    pub sigma_m: f64,
    pub sigma_y: f64,
    pub err_m: ErrorSpec,
    pub err_y: ErrorSpec,
    pub null_variant: Option<NullVariant>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 50,
            alpha: 0.4,
            beta: 0.4,
            tau: 0.2,
            intercept_m: 0.0,
            intercept_y: 0.0,
            sigma_m: 1.0,
            sigma_y: 1.0,
            err_m: ErrorSpec::Normal,
            err_y: ErrorSpec::Normal,
            null_variant: None,
        }
    }
}

impl ScenarioConfig {
    pub fn check(&self) -> Result<()> {
        if self.n < 5 {
            return Err(Error::invalid("scenario needs n >= 5"));
        }
        if !(self.sigma_m > 0.0 && self.sigma_y > 0.0) {
            return Err(Error::invalid("scenario sigmas must be positive"));
        }
        if [self.alpha, self.beta, self.tau, self.intercept_m, self.intercept_y].iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("scenario coefficients must be finite"));
        }
        self.err_m.check()?;
        self.err_y.check()
    }

    /// Path coefficients after applying the null variant.
    pub fn effective_paths(&self) -> (f64, f64) {
        match self.null_variant {
            None => (self.alpha, self.beta),
            Some(NullVariant::BothZero) => (0.0, 0.0),
            Some(NullVariant::AlphaZero) => (0.0, self.beta),
            Some(NullVariant::BetaZero) => (self.alpha, 0.0),
        }
    }

    pub fn true_indirect_effect(&self) -> f64 {
        let (a, b) = self.effective_paths();
        a * b
    }

    pub fn with_null(&self, v: NullVariant) -> Self {
        Self { null_variant: Some(v), ..self.clone() }
    }
}

/// Simulate one data set; `X ~ N(0, 1)`.
pub fn gen_data(scenario: &ScenarioConfig, seed: u64, stream_id: u64) -> Result<MediationData> {
    scenario.check()?;
    let mut rng = SeededRng::new(seed, stream_id).substream(DATA_TAG);
    let n = scenario.n;
    let (alpha, beta) = scenario.effective_paths();
    let x: Vec<f64> = (0..n).map(|_| draw_standard_normal(&mut rng)).collect();
    let em = scenario.err_m.sample(n, &mut rng)?;
    let ey = scenario.err_y.sample(n, &mut rng)?;
    let m: Vec<f64> = (0..n).map(|i| scenario.intercept_m + alpha * x[i] + scenario.sigma_m * em[i]).collect();
    let y: Vec<f64> =
        (0..n).map(|i| scenario.intercept_y + beta * m[i] + scenario.tau * x[i] + scenario.sigma_y * ey[i]).collect();
    MediationData::new(x, m, y)
}

/// The `ceil(target R)`-th largest null Bayes factor; with rejection on
/// `BF > cutoff` the empirical false-positive rate is within `1/R` of
/// `target`.
pub fn match_cutoff(null_bfs: &[f64], target_fpr: f64) -> Result<f64> {
    if !(target_fpr > 0.0 && target_fpr < 1.0) {
        return Err(Error::domain("target FPR must lie in (0, 1)"));
    }
    let r = null_bfs.len();
    let needed = (1.0 / target_fpr).ceil() as usize;
    if r < needed {
        return Err(Error::InsufficientNullRuns { needed, got: r, target: target_fpr });
    }
    if null_bfs.iter().any(|b| b.is_nan()) {
        return Err(Error::domain("null Bayes factors must not be NaN"));
    }
    let mut desc = null_bfs.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    // guard against target * R landing a hair above an integer
    let k = ((target_fpr * r as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(desc[k - 1])
}

/// Fraction of `bfs` strictly above `cutoff`.
pub fn rejection_rate(bfs: &[f64], cutoff: f64) -> f64 {
    if bfs.is_empty() {
        return 0.0;
    }
    bfs.iter().filter(|&&b| b > cutoff).count() as f64 / bfs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BootstrapResult {
    pub estimate: f64,
    pub ci: (f64, f64),
    pub reject: bool,
    /// Resamples dropped because a refit was singular.
    pub dropped: usize,
}

fn ols_paths(x: &[f64], m: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    let dm = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let a = ols(&dm, &DVector::from_column_slice(m)).ok()?.beta[1];
    let dy = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => m[i],
        _ => x[i],
    });
    let b = ols(&dy, &DVector::from_column_slice(y)).ok()?.beta[1];
    (a.is_finite() && b.is_finite()).then_some((a, b))
}

/// Case-resampling bootstrap of the OLS indirect effect with a percentile
/// interval.
pub fn ols_bootstrap_test(data: &MediationData, b: usize, level: f64, rng: &mut SeededRng) -> Result<BootstrapResult> {
    data.check()?;
    if b < 199 {
        return Err(Error::invalid("bootstrap needs B >= 199 resamples"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("bootstrap level must lie in (0, 1)"));
    }
    let (a, bb) = ols_paths(&data.x, &data.m, &data.y).ok_or(Error::RankDeficient { rank: 0, k: 3 })?;
    let n = data.len();
    let mut stats = Vec::with_capacity(b);
    let (mut xs, mut ms, mut ys) = (alloc::vec![0.0; n], alloc::vec![0.0; n], alloc::vec![0.0; n]);
    let mut dropped = 0;
    for _ in 0..b {
        for i in 0..n {
            let j = ((draw_uniform(rng) * n as f64) as usize).min(n - 1);
            xs[i] = data.x[j];
            ms[i] = data.m[j];
            ys[i] = data.y[j];
        }
        match ols_paths(&xs, &ms, &ys) {
            Some((sa, sb)) => stats.push(sa * sb),
            None => dropped += 1,
        }
    }
    if stats.len() < 2 {
        return Err(Error::InsufficientDraws("every bootstrap resample was singular".into()));
    }
    stats.sort_by(|p, q| p.total_cmp(q));
    let tail = 0.5 * (1.0 - level);
    let ci = (quantile_sorted(&stats, tail), quantile_sorted(&stats, 1.0 - tail));
    Ok(BootstrapResult { estimate: a * bb, ci, reject: !(ci.0 <= 0.0 && 0.0 <= ci.1), dropped })
}

/// Bootstrap for replication `r` on its own stream.
pub fn bootstrap_replication(data: &MediationData, b: usize, level: f64, seed: u64, stream_id: u64) -> Result<BootstrapResult> {
    let mut rng = SeededRng::new(seed, stream_id).substream(BOOT_TAG);
    ols_bootstrap_test(data, b, level, &mut rng)
}

fn replication_config(config: &MediationConfig, seed: u64, stream_id: u64) -> MediationConfig {
    let mut c = config.clone();
    c.chain.seed = seed;
    c.chain.stream_id = stream_id;
    c
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecoveryRecord {
    pub replication: usize,
    pub alpha_beta: SummaryRow,
    pub covered: bool,
    /// Other parameters, in mediation summary order.
    pub others: Vec<(String, SummaryRow)>,
}

pub fn recovery_replication(
    scenario: &ScenarioConfig,
    family: ErrorFamily,
    config: &MediationConfig,
    seed: u64,
    r: usize,
) -> Result<RecoveryRecord> {
    if scenario.null_variant.is_some() {
        return Err(Error::invalid("recovery runs need a non-null scenario"));
    }
    let data = gen_data(scenario, seed, r as u64)?;
    let cfg = MediationConfig { bayes_factors: false, ..replication_config(config, seed, r as u64) };
    let res = fit_mediation(&data, family, &cfg)?;
    let ab = *res.summary("alpha_beta").expect("alpha_beta is always summarized");
    let truth = scenario.true_indirect_effect();
    Ok(RecoveryRecord {
        replication: r,
        alpha_beta: ab,
        covered: ab.p2_5 <= truth && truth <= ab.p97_5,
        others: res.summaries.into_iter().filter(|s| s.name != "alpha_beta").map(|s| (s.name, s.summary)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerRecord {
    pub replication: usize,
    pub null_variant: Option<NullVariant>,
    pub log_bf_alpha: f64,
    pub log_bf_beta: f64,
    pub log_bf_med: f64,
}

/// Alternative replication `r` (`null = false`) or null replication `r`
/// with the variant cycled over `r mod 3`.
pub fn power_replication(
    scenario: &ScenarioConfig,
    family: ErrorFamily,
    config: &MediationConfig,
    seed: u64,
    r: usize,
    null: bool,
) -> Result<PowerRecord> {
    let (sc, stream) = if null {
        (scenario.with_null(NullVariant::cycle(r)), r as u64 + NULL_STREAM_OFFSET)
    } else {
        (scenario.clone(), r as u64)
    };
    let data = gen_data(&sc, seed, stream)?;
    let cfg = MediationConfig { bayes_factors: true, ..replication_config(config, seed, stream) };
    let res = fit_mediation(&data, family, &cfg)?;
    let bf = res.bayes_factors.expect("Bayes factors requested");
    Ok(PowerRecord {
        replication: r,
        null_variant: sc.null_variant,
        log_bf_alpha: bf.log_bf_alpha,
        log_bf_beta: bf.log_bf_beta,
        log_bf_med: bf.log_bf_med,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecoveryAggregate {
    pub replications: usize,
    pub failures: usize,
    pub true_alpha_beta: f64,
    /// Mean over replications of each summary column.
    pub mean: SummaryRow,
    /// Standard deviation over replications of each summary column.
    pub sd: SummaryRow,
    pub coverage: f64,
}

fn row_fields(r: &SummaryRow) -> [f64; 8] {
    [r.mean, r.mode, r.p2_5, r.p25, r.p50, r.p75, r.p97_5, r.ci_length]
}

fn row_from(f: [f64; 8]) -> SummaryRow {
    SummaryRow { mean: f[0], mode: f[1], p2_5: f[2], p25: f[3], p50: f[4], p75: f[5], p97_5: f[6], ci_length: f[7] }
}

pub fn aggregate_recovery(records: &[RecoveryRecord], failures: usize, truth: f64) -> Result<RecoveryAggregate> {
    let r = records.len();
    if r == 0 {
        return Err(Error::InsufficientDraws("no successful replications".into()));
    }
    let mut mean = [0.0; 8];
    for rec in records {
        for (m, v) in mean.iter_mut().zip(row_fields(&rec.alpha_beta)) {
            *m += v / r as f64;
        }
    }
    let mut sd = [0.0; 8];
    if r > 1 {
        for rec in records {
            for ((s, v), m) in sd.iter_mut().zip(row_fields(&rec.alpha_beta)).zip(mean) {
                *s += (v - m) * (v - m) / (r - 1) as f64;
            }
        }
        sd.iter_mut().for_each(|s| *s = s.sqrt());
    }
    Ok(RecoveryAggregate {
        replications: r,
        failures,
        true_alpha_beta: truth,
        mean: row_from(mean),
        sd: row_from(sd),
        coverage: records.iter().filter(|x| x.covered).count() as f64 / r as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerAggregate {
    pub replications_alt: usize,
    pub replications_null: usize,
    pub failures: usize,
    pub cutoff: f64,
    pub tpr: f64,
    pub fpr: f64,
}

pub fn aggregate_power(alt: &[PowerRecord], null: &[PowerRecord], failures: usize, cutoff: f64) -> PowerAggregate {
    let bfs = |recs: &[PowerRecord]| recs.iter().map(|r| r.log_bf_med.exp()).collect::<Vec<_>>();
    PowerAggregate {
        replications_alt: alt.len(),
        replications_null: null.len(),
        failures,
        cutoff,
        tpr: rejection_rate(&bfs(alt), cutoff),
        fpr: rejection_rate(&bfs(null), cutoff),
    }
}

/// Sequential recovery study; see the CLI crate for the parallel driver.
pub fn run_recovery(
    scenario: &ScenarioConfig,
    replications: usize,
    family: ErrorFamily,
    config: &MediationConfig,
    seed: u64,
) -> Result<(RecoveryAggregate, Vec<RecoveryRecord>)> {
    let mut records = Vec::new();
    let mut failures = 0;
    for r in 0..replications {
        match recovery_replication(scenario, family, config, seed, r) {
            Ok(rec) => records.push(rec),
            Err(e @ Error::InvalidParameter(_)) => return Err(e),
            Err(_) => failures += 1,
        }
    }
    Ok((aggregate_recovery(&records, failures, scenario.true_indirect_effect())?, records))
}

/// Sequential power study at a fixed cutoff.
pub fn run_power(
    scenario: &ScenarioConfig,
    replications: usize,
    family: ErrorFamily,
    config: &MediationConfig,
    seed: u64,
    cutoff: f64,
) -> Result<(PowerAggregate, Vec<PowerRecord>, Vec<PowerRecord>)> {
    let mut alt = Vec::new();
    let mut null = Vec::new();
    let mut failures = 0;
    for r in 0..replications {
        for (is_null, out) in [(false, &mut alt), (true, &mut null)] {
            match power_replication(scenario, family, config, seed, r, is_null) {
                Ok(rec) => out.push(rec),
                Err(e @ Error::InvalidParameter(_)) => return Err(e),
                Err(_) => failures += 1,
            }
        }
    }
    Ok((aggregate_power(&alt, &null, failures, cutoff), alt, null))
}
