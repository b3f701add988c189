use std::path::{Path, PathBuf};

use ctpt_core::ctpt::{self, CtptSpec, TailSpec};
use ctpt_core::evidence::{fit_model, BridgeOptions, EvidenceResult};
use ctpt_core::mcmc::{ChainConfig, Diagnostics};
use ctpt_core::mediation::{
    fit_mediation, hpd_interval, summarize, MediationConfig, MediationData, MediationResult, NullPartition, SummaryRow,
};
use ctpt_core::regression::{ols, sigma_moment_bound, ErrorFamily, PriorConfig, RegressionProblem};
use ctpt_core::simulation::ScenarioConfig;
use ctpt_core::special::SeededRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::{CompareArgs, DistOp, FitArgs, MediateArgs, Mode, ModelArgs, PartitionArgs, SimulateArgs, SpecArgs};
use crate::config::{env_seed, read_json, RunConfig, DEFAULT_SEED, SCHEMA_VERSION};
use crate::data::Table;
use crate::error::{CliError, CliResult};
use crate::report::{emit, Report};
use crate::runner::{self, BootstrapPower, BootstrapSettings, Cutoff, PowerOutcome};

fn resolve(args: &ModelArgs) -> CliResult<(RunConfig, u64)> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(f) = args.family {
        cfg.family = f;
    }
    if let Some(i) = args.iterations {
        cfg.iterations = i;
    }
    if let Some(c) = args.chains {
        cfg.chains = c;
    }
    if let Some(b) = args.burn_in_fraction {
        cfg.burn_in_fraction = b;
    }
    if args.no_intercept {
        cfg.intercept = false;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    let seed = cfg.resolve_seed(args.seed)?;
    cfg.priors.check()?;
    Ok((cfg, seed))
}

fn apply_partition(cfg: &mut RunConfig, p: &PartitionArgs) -> CliResult<()> {
    if let (Some(a), Some(b), Some(c)) = (p.q00, p.q01, p.q10) {
        cfg.null_partition = NullPartition::new(a, b, c)?;
    }
    cfg.null_partition.check()?;
    Ok(())
}

fn coefficient_labels(intercept: bool, predictors: &[String]) -> Vec<String> {
    let mut v = Vec::new();
    if intercept {
        v.push("(intercept)".to_owned());
    }
    v.extend(predictors.iter().cloned());
    v
}

#[derive(Debug, Serialize)]
pub struct ParameterSummary {
    pub name: String,
    pub label: String,
    pub summary: SummaryRow,
    pub sd: f64,
    /// Monte Carlo standard error of the posterior mean.
    pub mc_se: f64,
}

#[derive(Debug, Serialize)]
pub struct OlsReference {
    pub beta: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub sigma_hat: f64,
}

#[derive(Debug, Serialize)]
pub struct FitResult {
    pub family: ErrorFamily,
    pub n: usize,
    pub k: usize,
    pub parameters: Vec<ParameterSummary>,
    pub diagnostics: Diagnostics,
    pub sigma_moment_bound: usize,
    pub log_marginal_likelihood: EvidenceResult,
    pub ols: OlsReference,
    pub warnings: Vec<String>,
}

fn sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn fit_problem(
    problem: &RegressionProblem,
    labels: &[String],
    chain: &ChainConfig,
    bridge: &BridgeOptions,
) -> CliResult<FitResult> {
    let fit = fit_model(problem, chain, bridge)?;
    let (n, k) = (problem.n(), problem.k());
    let mut parameters = Vec::new();
    for (j, name) in fit.draws.names.iter().enumerate() {
        let col = fit.draws.column(j);
        let s = sd(&col);
        let label = if j < k { labels.get(j).cloned().unwrap_or_else(|| name.clone()) } else { name.clone() };
        parameters.push(ParameterSummary {
            name: name.clone(),
            label,
            summary: summarize(&col)?,
            sd: s,
            mc_se: s / fit.diagnostics.ess[j].sqrt(),
        });
    }
    let o = ols(problem.design(), problem.response())?;
    let mut warnings = fit.draws.warnings.clone();
    let flagged = fit.diagnostics.flagged();
    if !flagged.is_empty() {
        warnings.push(format!("R-hat above 1.01 or undefined for: {}", flagged.join(", ")));
    }
    if !fit.evidence.converged {
        warnings.push("bridge sampling hit its iteration limit".into());
    }
    Ok(FitResult {
        family: problem.family(),
        n,
        k,
        parameters,
        diagnostics: fit.diagnostics,
        sigma_moment_bound: sigma_moment_bound(n, k)?,
        log_marginal_likelihood: fit.evidence,
        ols: OlsReference {
            beta: o.beta.iter().cloned().collect(),
            standard_errors: o.standard_errors(n, k),
            sigma_hat: o.sigma_hat(n, k),
        },
        warnings,
    })
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let (cfg, seed) = resolve(&args.model)?;
    let table = Table::read(&args.data)?;
    let y = table.column(&args.response)?;
    let xs = args.predictors.iter().map(|c| table.column(c)).collect::<CliResult<Vec<_>>>()?;
    let problem = RegressionProblem::from_columns(&xs, y, cfg.intercept, cfg.family, cfg.priors)?;
    let chain = cfg.chain_config(0)?;
    let labels = coefficient_labels(cfg.intercept, &args.predictors);
    let result = runner::with_threads(cfg.threads, || fit_problem(&problem, &labels, &chain, &cfg.bridge))??;
    emit(&Report::new("fit", seed, &cfg, &result).to_json()?, args.model.output.as_deref())
}

#[derive(Debug, Serialize)]
pub struct MediateResult {
    pub n: usize,
    #[serde(flatten)]
    pub mediation: MediationResult,
    pub alpha_beta_hpd: Option<HpdInterval>,
}

#[derive(Debug, Serialize)]
pub struct HpdInterval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn mediate(args: &MediateArgs) -> CliResult<()> {
    let (mut cfg, seed) = resolve(&args.model)?;
    apply_partition(&mut cfg, &args.partition)?;
    if !cfg.intercept {
        return Err(CliError::Input("mediation models always include intercepts; drop --no-intercept".into()));
    }
    if args.hpd.is_some() {
        cfg.hpd_level = args.hpd;
    }
    let table = Table::read(&args.data)?;
    let data = MediationData::new(
        table.column(&args.x)?.to_vec(),
        table.column(&args.m)?.to_vec(),
        table.column(&args.y)?.to_vec(),
    )?;
    let mc = MediationConfig {
        chain: cfg.chain_config(0)?,
        bridge: cfg.bridge,
        priors: cfg.priors,
        null_partition: cfg.null_partition,
        bayes_factors: true,
    };
    let res = runner::with_threads(cfg.threads, || fit_mediation(&data, cfg.family, &mc))??;
    let alpha_beta_hpd = match cfg.hpd_level {
        Some(level) => {
            let (lower, upper) = hpd_interval(&res.ab_draws, level)?;
            Some(HpdInterval { level, lower, upper })
        }
        None => None,
    };
    let result = MediateResult { n: data.len(), mediation: res, alpha_beta_hpd };
    emit(&Report::new("mediate", seed, &cfg, &result).to_json()?, args.model.output.as_deref())
}

#[derive(Debug, Serialize)]
pub struct ComparisonTable {
    pub equation: String,
    /// Row and column order of `log_bf`.
    pub families: Vec<&'static str>,
    pub log_evidence: Vec<EvidenceResult>,
    /// `log_bf[i][j]`: evidence for family i over family j.
    pub log_bf: Vec<Vec<f64>>,
}

pub fn compare_problem(
    equation: &str,
    base: &RegressionProblem,
    cfg: &RunConfig,
    stream_base: u64,
) -> CliResult<ComparisonTable> {
    let fams = ErrorFamily::ALL;
    let ev = fams
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let chain = cfg.chain_config(stream_base + i as u64)?;
            Ok(fit_model(&base.with_family(f), &chain, &cfg.bridge)?.evidence)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let log_bf = ev
        .iter()
        .map(|a| ev.iter().map(|b| a.log_marginal_likelihood - b.log_marginal_likelihood).collect())
        .collect();
    Ok(ComparisonTable {
        equation: equation.to_owned(),
        families: fams.iter().map(|f| f.label()).collect(),
        log_evidence: ev,
        log_bf,
    })
}

pub fn compare(args: &CompareArgs) -> CliResult<()> {
    let (cfg, seed) = resolve(&args.model)?;
    let table = Table::read(&args.data)?;
    let mut problems: Vec<(String, RegressionProblem)> = Vec::new();
    let build = |resp: &str, preds: &[&str]| -> CliResult<RegressionProblem> {
        let xs = preds.iter().map(|c| table.column(c)).collect::<CliResult<Vec<_>>>()?;
        Ok(RegressionProblem::from_columns(&xs, table.column(resp)?, cfg.intercept, cfg.family, cfg.priors)?)
    };
    match (&args.x, &args.m, &args.y) {
        (Some(x), Some(m), Some(y)) => {
            problems.push((format!("{m} ~ {x}"), build(m, &[x])?));
            problems.push((format!("{y} ~ {m} + {x}"), build(y, &[m, x])?));
        }
        _ => {
            let resp = args.response.as_deref().ok_or_else(|| CliError::Input("--response is required".into()))?;
            let preds: Vec<&str> = args.predictors.iter().map(String::as_str).collect();
            let label = if preds.is_empty() { format!("{resp} ~ 1") } else { format!("{resp} ~ {}", preds.join(" + ")) };
            problems.push((label, build(resp, &preds)?));
        }
    }
    let tables = runner::with_threads(cfg.threads, || {
        problems
            .iter()
            .enumerate()
            .map(|(e, (label, p))| compare_problem(label, p, &cfg, 4 * e as u64))
            .collect::<CliResult<Vec<_>>>()
    })??;
    emit(&Report::new("compare", seed, &cfg, &tables).to_json()?, args.model.output.as_deref())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationFile {
    pub schema_version: u32,
    pub name: String,
    pub mode: Mode,
    pub replications: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub families: Vec<ErrorFamily>,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub bridge: BridgeOptions,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub null_partition: NullPartition,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default)]
    pub match_fpr: Option<f64>,
    #[serde(default)]
    pub bootstrap: Option<BootstrapSettings>,
}

fn default_cutoff() -> f64 {
    10.0
}

impl SimulationFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let f: Self = read_json(path)?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema {
                file: path.display().to_string(),
                pointer: "/schema_version".into(),
                message: format!("unsupported version {} (expected {SCHEMA_VERSION})", f.schema_version),
            });
        }
        if f.families.is_empty() {
            return Err(CliError::Schema {
                file: path.display().to_string(),
                pointer: "/families".into(),
                message: "at least one family is required".into(),
            });
        }
        f.scenario.check()?;
        f.chain.check()?;
        f.priors.check()?;
        f.null_partition.check()?;
        Ok(f)
    }

    pub fn mediation_config(&self) -> MediationConfig {
        MediationConfig {
            chain: self.chain.clone(),
            bridge: self.bridge,
            priors: self.priors,
            null_partition: self.null_partition,
            bayes_factors: self.mode == Mode::Power,
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum FamilyOutcome {
    Recovery {
        family: ErrorFamily,
        aggregate: ctpt_core::simulation::RecoveryAggregate,
        records: Vec<ctpt_core::simulation::RecoveryRecord>,
    },
    Power {
        family: ErrorFamily,
        #[serde(flatten)]
        outcome: PowerOutcome,
    },
}

#[derive(Debug, Serialize)]
pub struct SimulationResult {
    pub name: String,
    pub mode: Mode,
    pub replications: usize,
    pub true_alpha_beta: f64,
    pub families: Vec<FamilyOutcome>,
    pub bootstrap: Option<BootstrapPower>,
}

/// Execute a loaded scenario; the caller picks the thread pool.
pub fn run_simulation(file: &SimulationFile, seed: u64) -> CliResult<SimulationResult> {
    let mc = file.mediation_config();
    let mut families = Vec::new();
    for &family in &file.families {
        families.push(match file.mode {
            Mode::Recovery => {
                let (aggregate, records) = runner::recovery(&file.scenario, file.replications, family, &mc, seed)?;
                FamilyOutcome::Recovery { family, aggregate, records }
            }
            Mode::Power => {
                let cutoff = file.match_fpr.map_or(Cutoff::Fixed(file.cutoff), Cutoff::MatchFpr);
                let outcome = runner::power(&file.scenario, file.replications, family, &mc, seed, cutoff)?;
                FamilyOutcome::Power { family, outcome }
            }
        });
    }
    let bootstrap = match (file.mode, &file.bootstrap) {
        (Mode::Power, Some(b)) => Some(runner::bootstrap_power(&file.scenario, file.replications, b, seed)?),
        _ => None,
    };
    Ok(SimulationResult {
        name: file.name.clone(),
        mode: file.mode,
        replications: file.replications,
        true_alpha_beta: file.scenario.true_indirect_effect(),
        families,
        bootstrap,
    })
}

pub fn simulation_csv(res: &SimulationResult) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Input(e.to_string());
    match res.mode {
        Mode::Recovery => {
            w.write_record([
                "family", "replications", "failures", "true_alpha_beta", "mean", "sd_mean", "mode", "p2_5", "p25", "p50",
                "p75", "p97_5", "ci_length", "coverage",
            ])
            .map_err(csv_err)?;
            for f in &res.families {
                if let FamilyOutcome::Recovery { family, aggregate: a, .. } = f {
                    let m = &a.mean;
                    let mut row = vec![family.name().to_owned(), a.replications.to_string(), a.failures.to_string()];
                    row.extend(
                        [a.true_alpha_beta, m.mean, a.sd.mean, m.mode, m.p2_5, m.p25, m.p50, m.p75, m.p97_5, m.ci_length, a.coverage]
                            .iter()
                            .map(|v| v.to_string()),
                    );
                    w.write_record(&row).map_err(csv_err)?;
                }
            }
        }
        Mode::Power => {
            w.write_record(["family", "replications_alt", "replications_null", "failures", "cutoff", "tpr", "fpr"])
                .map_err(csv_err)?;
            for f in &res.families {
                if let FamilyOutcome::Power { family, outcome } = f {
                    let a = &outcome.aggregate;
                    w.write_record([
                        family.name().to_owned(),
                        a.replications_alt.to_string(),
                        a.replications_null.to_string(),
                        a.failures.to_string(),
                        a.cutoff.to_string(),
                        a.tpr.to_string(),
                        a.fpr.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
            if let Some(b) = &res.bootstrap {
                w.write_record([
                    "ols_bootstrap".to_owned(),
                    b.replications_alt.to_string(),
                    b.replications_null.to_string(),
                    b.failures.to_string(),
                    String::new(),
                    b.tpr.to_string(),
                    b.fpr.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Input(e.to_string()))
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut file = SimulationFile::load(&args.scenario)?;
    if let Some(m) = args.mode {
        file.mode = m;
    }
    if let Some(r) = args.replications {
        file.replications = r;
    }
    if args.match_fpr.is_some() {
        file.match_fpr = args.match_fpr;
    }
    if file.mode == Mode::Recovery && file.scenario.null_variant.is_some() {
        return Err(CliError::Input(format!(
            "{}: recovery mode needs a non-null scenario (coverage of a zero effect is meaningless)",
            args.scenario.display()
        )));
    }
    let seed = match args.seed.or(file.seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(DEFAULT_SEED),
    };
    file.seed = Some(seed);
    let res = runner::with_threads(args.threads, || run_simulation(&file, seed))??;
    let stem = format!("{}_{}", file.name, match file.mode {
        Mode::Recovery => "recovery",
        Mode::Power => "power",
    });
    let json = Report::new("simulate", seed, &file, &res).with_simulation_notes().to_json()?;
    let csv = simulation_csv(&res)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    let jp: PathBuf = args.out_dir.join(format!("{stem}.json"));
    let cp: PathBuf = args.out_dir.join(format!("{stem}.csv"));
    emit(&json, Some(&jp))?;
    emit(&csv, Some(&cp))?;
    emit(&csv, None)
}

pub fn parse_tail(s: &str) -> CliResult<TailSpec> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "normal" => Ok(TailSpec::NormalLimit),
        t => {
            let nu: f64 = t.parse().map_err(|_| CliError::Input(format!("--nu '{s}' is neither a number nor 'inf'")))?;
            Ok(TailSpec::finite(nu)?)
        }
    }
}

fn spec_of(a: &SpecArgs) -> CliResult<CtptSpec> {
    Ok(CtptSpec::new(a.gamma, parse_tail(&a.nu)?)?)
}

fn fmt_num(v: f64, digits: Option<usize>) -> String {
    match digits {
        Some(d) => format!("{v:.d$}"),
        None => v.to_string(),
    }
}

fn lines(values: impl IntoIterator<Item = f64>, digits: Option<usize>) -> String {
    let mut s = String::new();
    for v in values {
        s.push_str(&fmt_num(v, digits));
        s.push('\n');
    }
    s
}

/// Text produced by a `dist` subcommand, and where it goes.
pub fn dist_output(op: &DistOp) -> CliResult<(String, Option<PathBuf>)> {
    match op {
        DistOp::Pdf { spec, uncentred, x } => {
            let s = spec_of(spec)?;
            let v = x.iter().map(|&x| if *uncentred { ctpt::logpdf_uncentred(x, &s).exp() } else { ctpt::pdf(x, &s) });
            Ok((lines(v, spec.digits), None))
        }
        DistOp::Cdf { spec, uncentred, x } => {
            let s = spec_of(spec)?;
            let v = x
                .iter()
                .map(|&x| if *uncentred { ctpt::cdf_uncentred(x, &s) } else { ctpt::cdf(x, &s) })
                .collect::<ctpt_core::Result<Vec<_>>>()?;
            Ok((lines(v, spec.digits), None))
        }
        DistOp::Quantile { spec, p } => {
            let s = spec_of(spec)?;
            let v = p.iter().map(|&p| ctpt::quantile(p, &s)).collect::<ctpt_core::Result<Vec<_>>>()?;
            Ok((lines(v, spec.digits), None))
        }
        DistOp::Sample { spec, n, seed, output } => {
            let s = spec_of(spec)?;
            let seed = match seed {
                Some(v) => *v,
                None => env_seed()?.unwrap_or(DEFAULT_SEED),
            };
            let mut rng = SeededRng::new(seed, 0);
            Ok((lines(ctpt::sample(*n, &s, &mut rng), spec.digits), output.clone()))
        }
        DistOp::Skewcurve { nu, from, to, points, log_grid, output } => {
            let tail = parse_tail(nu)?;
            if !(*from > 0.0 && to > from && *points >= 2) {
                return Err(CliError::Input("skewcurve needs 0 < --from < --to and --points >= 2".into()));
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| CliError::Input(e.to_string());
            w.write_record(["gamma", "skewness_fisher", "skewness_ag"]).map_err(csv_err)?;
            for i in 0..*points {
                let t = i as f64 / (*points - 1) as f64;
                let g = if *log_grid { (from.ln() + t * (to.ln() - from.ln())).exp() } else { from + t * (to - from) };
                let s = CtptSpec::new(g, tail)?;
                // undefined for nu <= 3
                let fisher = ctpt::skewness_fisher(&s).map_or_else(|_| "NA".to_owned(), |v| v.to_string());
                w.write_record([g.to_string(), fisher, ctpt::skewness_ag(g)?.to_string()]).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
            Ok((String::from_utf8(bytes).map_err(|e| CliError::Input(e.to_string()))?, output.clone()))
        }
    }
}

pub fn dist(op: &DistOp) -> CliResult<()> {
    let (text, path) = dist_output(op)?;
    emit(&text, path.as_deref())
}
