use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::SCHEMA_VERSION;
use crate::error::{CliError, CliResult};

pub const SAMPLER: &str = "adaptive component-wise random-walk Metropolis (Robbins-Monro scale tuning to 0.44 acceptance during burn-in)";

pub const DEVIATIONS: &[&str] = &[
    "posterior sampling uses adaptive random-walk Metropolis instead of NUTS",
    "marginal likelihoods by iterative bridge sampling with a moment-matched normal proposal fitted on half of each chain",
    "improper priors use unit constants: flat coefficients with density 1 and p(sigma) = 1/sigma, shared by nested models",
    "gamma is sampled as the logit of its position on the log scale of its truncation interval; nu as log(nu - 2)",
];

pub const SIMULATION_DEVIATIONS: &[&str] = &[
    "predictor X is drawn from N(0, 1)",
    "null replications cycle over (alpha, beta) = (0, 0), (0, beta), (alpha, 0)",
    "OLS bootstrap baseline: case resampling with a percentile interval for alpha * beta",
];

#[derive(Debug, Serialize)]
pub struct Report<'a, C: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub version: &'a str,
    pub sampler: &'a str,
    pub deviations: Vec<&'a str>,
    pub seed: u64,
    pub config: &'a C,
    pub result: &'a R,
}

impl<'a, C: Serialize, R: Serialize> Report<'a, C, R> {
    pub fn new(command: &'a str, seed: u64, config: &'a C, result: &'a R) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            version: env!("CARGO_PKG_VERSION"),
            sampler: SAMPLER,
            deviations: DEVIATIONS.to_vec(),
            seed,
            config,
            result,
        }
    }

    pub fn with_simulation_notes(mut self) -> Self {
        self.deviations.extend_from_slice(SIMULATION_DEVIATIONS);
        self
    }

    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Input(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// Write to `path`, or stdout when absent.
pub fn emit(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}
