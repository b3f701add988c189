//! Parallel drivers for the simulation studies. Replication `r` always uses
//! the same random streams, so results do not depend on the thread count.

use ctpt_core::mediation::MediationConfig;
use ctpt_core::regression::ErrorFamily;
use ctpt_core::simulation::{
    aggregate_power, aggregate_recovery, bootstrap_replication, gen_data, match_cutoff, power_replication,
    recovery_replication, NullVariant, PowerAggregate, PowerRecord, RecoveryAggregate, RecoveryRecord, ScenarioConfig,
    NULL_STREAM_OFFSET,
};
use ctpt_core::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Run `f` on a pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        b = b.num_threads(t);
    }
    let pool = b.build().map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Keep successes in replication order; invalid configuration aborts,
/// anything else counts as a failed replication.
fn partition<T>(results: Vec<ctpt_core::Result<T>>) -> CliResult<(Vec<T>, usize)> {
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = 0;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e @ Error::InvalidParameter(_)) => return Err(e.into()),
            Err(_) => failures += 1,
        }
    }
    Ok((ok, failures))
}

pub fn recovery(
    scenario: &ScenarioConfig,
    replications: usize,
    family: ErrorFamily,
    config: &MediationConfig,
    seed: u64,
) -> CliResult<(RecoveryAggregate, Vec<RecoveryRecord>)> {
    scenario.check()?;
    if scenario.null_variant.is_some() {
        return Err(CliError::Input("recovery mode needs a non-null scenario (coverage of a zero effect is meaningless)".into()));
    }
    let results: Vec<_> =
        (0..replications).into_par_iter().map(|r| recovery_replication(scenario, family, config, seed, r)).collect();
    let (records, failures) = partition(results)?;
    Ok((aggregate_recovery(&records, failures, scenario.true_indirect_effect())?, records))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    Fixed(f64),
    /// Choose the cutoff giving this false-positive rate on the null runs.
    MatchFpr(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerOutcome {
    pub aggregate: PowerAggregate,
    pub alt: Vec<PowerRecord>,
    pub null: Vec<PowerRecord>,
}

pub fn power(
    scenario: &ScenarioConfig,
    replications: usize,
    family: ErrorFamily,
    config: &MediationConfig,
    seed: u64,
    cutoff: Cutoff,
) -> CliResult<PowerOutcome> {
    scenario.check()?;
    let jobs: Vec<(usize, bool)> = (0..replications).flat_map(|r| [(r, false), (r, true)]).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(r, null)| power_replication(scenario, family, config, seed, r, null).map(|rec| (null, rec)))
        .collect();
    let (records, failures) = partition(results)?;
    let (null, alt): (Vec<_>, Vec<_>) = records.into_iter().partition(|(n, _)| *n);
    let alt: Vec<PowerRecord> = alt.into_iter().map(|(_, r)| r).collect();
    let null: Vec<PowerRecord> = null.into_iter().map(|(_, r)| r).collect();
    let c = match cutoff {
        Cutoff::Fixed(c) => c,
        Cutoff::MatchFpr(target) => {
            let bfs: Vec<f64> = null.iter().map(|r| r.log_bf_med.exp()).collect();
            match_cutoff(&bfs, target)?
        }
    };
    Ok(PowerOutcome { aggregate: aggregate_power(&alt, &null, failures, c), alt, null })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSettings {
    pub resamples: usize,
    pub level: f64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self { resamples: 1000, level: 0.95 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapPower {
    pub replications_alt: usize,
    pub replications_null: usize,
    pub failures: usize,
    pub tpr: f64,
    pub fpr: f64,
}

/// OLS percentile-bootstrap test on the same data sets the Bayesian power
/// study uses.
pub fn bootstrap_power(
    scenario: &ScenarioConfig,
    replications: usize,
    settings: &BootstrapSettings,
    seed: u64,
) -> CliResult<BootstrapPower> {
    scenario.check()?;
    let jobs: Vec<(usize, bool)> = (0..replications).flat_map(|r| [(r, false), (r, true)]).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(r, null)| {
            let (sc, stream) = if null {
                (scenario.with_null(NullVariant::cycle(r)), r as u64 + NULL_STREAM_OFFSET)
            } else {
                (scenario.clone(), r as u64)
            };
            let data = gen_data(&sc, seed, stream)?;
            bootstrap_replication(&data, settings.resamples, settings.level, seed, stream).map(|b| (null, b.reject))
        })
        .collect();
    let (records, failures) = partition(results)?;
    let rate = |want_null: bool| {
        let v: Vec<bool> = records.iter().filter(|(n, _)| *n == want_null).map(|(_, r)| *r).collect();
        (v.len(), v.iter().filter(|r| **r).count() as f64 / v.len().max(1) as f64)
    };
    let (na, tpr) = rate(false);
    let (nn, fpr) = rate(true);
    Ok(BootstrapPower { replications_alt: na, replications_null: nn, failures, tpr, fpr })
}
