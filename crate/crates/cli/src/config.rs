//! Run configuration: an optional JSON file, then command-line overrides.

use std::path::Path;

use ctpt_core::evidence::BridgeOptions;
use ctpt_core::mcmc::ChainConfig;
use ctpt_core::mediation::NullPartition;
use ctpt_core::regression::{ErrorFamily, PriorConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "CTPT_SEED";
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub family: ErrorFamily,
    pub intercept: bool,
    pub seed: Option<u64>,
    pub iterations: usize,
    pub chains: usize,
    pub burn_in_fraction: f64,
    pub adapt_window: usize,
    pub target_accept: f64,
    pub bridge: BridgeOptions,
    pub priors: PriorConfig,
    pub null_partition: NullPartition,
    /// Credible mass of the optional HPD interval for the indirect effect.
    pub hpd_level: Option<f64>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            family: ErrorFamily::Ctpt,
            intercept: true,
            seed: None,
            iterations: 10_000,
            chains: 4,
            burn_in_fraction: 0.2,
            adapt_window: 50,
            target_accept: 0.44,
            bridge: BridgeOptions::default(),
            priors: PriorConfig::default(),
            null_partition: NullPartition::default(),
            hpd_level: None,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let cfg: Self = match path {
            Some(p) => read_json(p)?,
            None => Self::default(),
        };
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Input(format!(
                "unsupported config schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Flag, then config file, then `CTPT_SEED`, then the built-in default.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> CliResult<u64> {
        let seed = match flag.or(self.seed) {
            Some(s) => s,
            None => env_seed()?.unwrap_or(DEFAULT_SEED),
        };
        self.seed = Some(seed);
        Ok(seed)
    }

    pub fn chain_config(&self, stream_id: u64) -> CliResult<ChainConfig> {
        let c = ChainConfig {
            total_iterations: self.iterations,
            burn_in_fraction: self.burn_in_fraction,
            n_chains: self.chains,
            adapt_window: self.adapt_window,
            target_accept: self.target_accept,
            seed: self.seed.ok_or_else(|| CliError::Input("seed not resolved".into()))?,
            stream_id,
        };
        c.check()?;
        Ok(c)
    }
}

pub fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Input(format!("{SEED_ENV}='{s}' is not a non-negative integer"))),
        Err(_) => Ok(None),
    }
}

/// Deserialize JSON, reporting schema problems with a JSON pointer.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_json(&text, &path.display().to_string())
}

pub fn parse_json<T: DeserializeOwned>(text: &str, label: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        CliError::Schema { file: label.to_owned(), pointer, message: e.into_inner().to_string() }
    })
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointer_locates_bad_field() {
        let err = parse_json::<RunConfig>(r#"{"priors": {"gamma_rate": "x"}}"#, "cfg.json").unwrap_err();
        match err {
            CliError::Schema { pointer, .. } => assert_eq!(pointer, "/priors/gamma_rate"),
            e => panic!("{e}"),
        }
        let err = parse_json::<RunConfig>(r#"{"chainz": 3}"#, "cfg.json").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c: RunConfig = parse_json(r#"{"family": "normal", "chains": 2}"#, "m").unwrap();
        assert_eq!(c.family, ErrorFamily::Normal);
        assert_eq!(c.chains, 2);
        assert_eq!(c.iterations, 10_000);
    }
}
