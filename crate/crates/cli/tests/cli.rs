use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctpt_core::ctpt::{variance, CtptSpec, TailSpec};
use ctpt_core::mediation::{log_bf_mediation, NullPartition};
use ctpt_core::simulation::{gen_data, ErrorSpec, ScenarioConfig};
use ctpt_core::special::{draw_standard_normal, SeededRng};
use serde_json::Value;

fn ctpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctpt")).args(args).env_remove("CTPT_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_csv(dir: &Path, name: &str, header: &[&str], cols: &[Vec<f64>]) -> PathBuf {
    let mut s = header.join(",");
    s.push('\n');
    for i in 0..cols[0].len() {
        let row: Vec<String> = cols.iter().map(|c| c[i].to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    let p = dir.join(name);
    std::fs::write(&p, s).unwrap();
    p
}

fn regression_csv(dir: &Path) -> PathBuf {
    let mut rng = SeededRng::new(11, 0);
    let n = 80;
    let x1: Vec<f64> = (0..n).map(|_| draw_standard_normal(&mut rng)).collect();
    let x2: Vec<f64> = (0..n).map(|_| draw_standard_normal(&mut rng)).collect();
    let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * x1[i] - 0.8 * x2[i] + draw_standard_normal(&mut rng)).collect();
    write_csv(dir, "reg.csv", &["y", "x1", "x2"], &[y, x1, x2])
}

fn mediation_csv(dir: &Path) -> PathBuf {
    let sc = ScenarioConfig {
        n: 60,
        err_m: ErrorSpec::Ctpt { gamma: 0.5, nu: TailSpec::Finite(5.0) },
        ..Default::default()
    };
    let d = gen_data(&sc, 5, 0).unwrap();
    write_csv(dir, "med.csv", &["x", "m", "y"], &[d.x, d.m, d.y])
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

const SHORT: [&str; 4] = ["--iterations", "4000", "--chains", "2"];

#[test]
fn fit_recovers_least_squares_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let csv = regression_csv(dir.path());
    let mut args = vec!["fit", "--data", csv.to_str().unwrap(), "--response", "y", "--predictors", "x1,x2"];
    args.extend(["--family", "normal", "--seed", "3"]);
    args.extend(SHORT);
    let out = stdout(&ctpt(&args));
    assert_eq!(out, stdout(&ctpt(&args)), "same seed must give byte-identical reports");

    let r = json(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["seed"], 3);
    assert!(r["sampler"].as_str().unwrap().contains("Metropolis"));
    assert!(!r["deviations"].as_array().unwrap().is_empty());
    assert_eq!(r["config"]["chains"], 2);
    let res = &r["result"];
    assert_eq!(res["sigma_moment_bound"], 80 - 3 - 1);
    assert!(res["log_marginal_likelihood"]["log_marginal_likelihood"].as_f64().unwrap().is_finite());
    let params = res["parameters"].as_array().unwrap();
    assert_eq!(params[1]["label"], "x1");
    for j in 0..3 {
        let mean = params[j]["summary"]["mean"].as_f64().unwrap();
        let se = params[j]["mc_se"].as_f64().unwrap();
        let ols = res["ols"]["beta"][j].as_f64().unwrap();
        assert!((mean - ols).abs() < 3.0 * se, "beta[{j}]: {mean} vs {ols} (mc se {se})");
    }
}

#[test]
fn fit_input_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write_csv(dir.path(), "tiny.csv", &["y", "a", "b"], &[vec![1.0, 2.0, 4.0], vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 2.0]]);
    let o = ctpt(&["fit", "--data", tiny.to_str().unwrap(), "--response", "y", "--predictors", "a,b"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("improper"), "{}", stderr(&o));

    let csv = regression_csv(dir.path());
    let o = ctpt(&["fit", "--data", csv.to_str().unwrap(), "--response", "y", "--predictors", "x1,x3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("'x3'"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,x\n1,2\n3,abc\n").unwrap();
    let o = ctpt(&["fit", "--data", bad.to_str().unwrap(), "--response", "y", "--predictors", "x"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("row 3") && stderr(&o).contains("'x'"), "{}", stderr(&o));

    let o = ctpt(&["fit", "--data", "/nonexistent/data.csv", "--response", "y"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn seed_env_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = regression_csv(dir.path());
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "family": "student_t", "iterations": 2000, "chains": 2}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ctpt"))
        .args(["fit", "--data", csv.to_str().unwrap(), "--response", "y", "--config", cfg.to_str().unwrap()])
        .env("CTPT_SEED", "99")
        .output()
        .unwrap();
    let r = json(&stdout(&o));
    assert_eq!(r["seed"], 99);
    assert_eq!(r["result"]["family"], "student_t");
    assert_eq!(r["config"]["iterations"], 2000);

    std::fs::write(&cfg, r#"{"schema_version": 1, "priors": {"gamma_shape": "two"}}"#).unwrap();
    let o = ctpt(&["fit", "--data", csv.to_str().unwrap(), "--response", "y", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/priors/gamma_shape"), "{}", stderr(&o));
}

#[test]
fn mediate_partition_rescales_bf_med_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let csv = mediation_csv(dir.path());
    let base = ["mediate", "--data", csv.to_str().unwrap(), "--x", "x", "--m", "m", "--y", "y", "--seed", "4", "--hpd", "0.9"];
    let run = |extra: &[&str]| {
        let mut a: Vec<&str> = base.to_vec();
        a.extend(SHORT);
        a.extend(extra);
        json(&stdout(&ctpt(&a)))
    };
    let thirds = run(&[]);
    let skewed = run(&["--q00", "0.5", "--q01", "0.25", "--q10", "0.25"]);
    let bf = |r: &Value, k: &str| r["result"]["bayes_factors"][k].as_f64().unwrap();
    assert_eq!(bf(&thirds, "log_bf_alpha"), bf(&skewed, "log_bf_alpha"));
    assert_eq!(bf(&thirds, "log_bf_beta"), bf(&skewed, "log_bf_beta"));
    let (la, lb) = (bf(&thirds, "log_bf_alpha"), bf(&thirds, "log_bf_beta"));
    let q = NullPartition::new(0.5, 0.25, 0.25).unwrap();
    let expect = log_bf_mediation(la, lb, &q).unwrap();
    assert!((bf(&skewed, "log_bf_med") - expect).abs() < 1e-12);
    let expect3 = log_bf_mediation(la, lb, &NullPartition::default()).unwrap();
    assert!((bf(&thirds, "log_bf_med") - expect3).abs() < 1e-12);

    let names: Vec<&str> =
        thirds["result"]["summaries"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    for n in ["alpha", "beta", "alpha_beta", "tau", "gamma_m", "nu_m", "gamma_y", "nu_y"] {
        assert!(names.contains(&n), "{n} missing from {names:?}");
    }
    let hpd = &thirds["result"]["alpha_beta_hpd"];
    assert!(hpd["lower"].as_f64().unwrap() < hpd["upper"].as_f64().unwrap());

    let o = ctpt(&["mediate", "--data", csv.to_str().unwrap(), "--x", "x", "--m", "med", "--y", "y"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("'med'"));
}

#[test]
fn compare_matrix_is_antisymmetric() {
    let dir = tempfile::tempdir().unwrap();
    let csv = mediation_csv(dir.path());
    let mut a = vec!["compare", "--data", csv.to_str().unwrap(), "--x", "x", "--m", "m", "--y", "y", "--seed", "8"];
    a.extend(SHORT);
    let r = json(&stdout(&ctpt(&a)));
    let tables = r["result"].as_array().unwrap();
    assert_eq!(tables.len(), 2);
    for t in tables {
        assert_eq!(t["families"][0], "Full");
        assert_eq!(t["families"][3], "Normal");
        let m = t["log_bf"].as_array().unwrap();
        for i in 0..4 {
            assert_eq!(m[i][i].as_f64().unwrap(), 0.0);
            for j in 0..4 {
                let (a, b) = (m[i][j].as_f64().unwrap(), m[j][i].as_f64().unwrap());
                assert!((a + b).abs() < 1e-9);
            }
        }
    }
}

fn scenario_file(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("scenario.json");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn simulate_writes_reports_and_guards_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = scenario_file(
        dir.path(),
        r#"{"schema_version": 1, "name": "tiny", "mode": "power", "replications": 3, "seed": 2,
            "families": ["normal"], "scenario": {"n": 40},
            "chain": {"total_iterations": 3000}, "bootstrap": {"resamples": 200}}"#,
    );
    let out = dir.path().join("out");
    let o = ctpt(&["simulate", p.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--threads", "2"]);
    let printed = stdout(&o);
    let csv = std::fs::read_to_string(out.join("tiny_power.csv")).unwrap();
    assert_eq!(printed, csv);
    assert!(csv.starts_with("family,replications_alt"));
    assert!(csv.contains("\nols_bootstrap,3,3,"));
    let r = json(&std::fs::read_to_string(out.join("tiny_power.json")).unwrap());
    assert_eq!(r["result"]["families"][0]["alt"].as_array().unwrap().len(), 3);
    assert!(r["deviations"].as_array().unwrap().iter().any(|d| d.as_str().unwrap().contains("N(0, 1)")));

    // thread count does not change results
    let out1 = dir.path().join("out1");
    stdout(&ctpt(&["simulate", p.to_str().unwrap(), "--out-dir", out1.to_str().unwrap(), "--threads", "1"]));
    assert_eq!(
        std::fs::read_to_string(out.join("tiny_power.json")).unwrap(),
        std::fs::read_to_string(out1.join("tiny_power.json")).unwrap()
    );

    let null = scenario_file(
        dir.path(),
        r#"{"schema_version": 1, "name": "n", "mode": "recovery", "replications": 2,
            "families": ["normal"], "scenario": {"null_variant": "both_zero"}}"#,
    );
    let o = ctpt(&["simulate", null.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("non-null"));

    let bad = scenario_file(
        dir.path(),
        r#"{"schema_version": 1, "name": "b", "mode": "power", "replications": 2,
            "families": ["normal"], "scenario": {"err_m": {"type": "ctpt", "gamma": 1, "nu": "lots"}}}"#,
    );
    let o = ctpt(&["simulate", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/scenario/err_m"), "{}", stderr(&o));
}

#[test]
fn bundled_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for f in ["table1_gamma1_nuinf.json", "power_033_3_a7b7.json"] {
        let s = ctpt_cli::commands::SimulationFile::load(&dir.join(f)).unwrap();
        assert_eq!(s.replications, 200);
        assert_eq!(s.chain.total_iterations, 30_000);
    }
}

#[test]
fn dist_outputs() {
    assert_eq!(stdout(&ctpt(&["dist", "pdf", "0", "--gamma", "1", "--nu", "inf", "--digits", "10"])), "0.3989422804\n");
    let curve = stdout(&ctpt(&["dist", "skewcurve", "--from", "1", "--to", "3", "--points", "3", "--nu", "3"]));
    let row: Vec<&str> = curve.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[0], "2");
    assert_eq!(row[1], "NA");
    assert!((row[2].parse::<f64>().unwrap() - 0.6).abs() < 1e-15);

    let q = stdout(&ctpt(&["dist", "quantile", "--gamma", "2", "--nu", "5", "0.3"]));
    let x: f64 = q.trim().parse().unwrap();
    let c = stdout(&ctpt(&["dist", "cdf", "--gamma", "2", "--nu", "5", "--", &x.to_string()]));
    assert!((c.trim().parse::<f64>().unwrap() - 0.3).abs() < 1e-12);

    let o = ctpt(&["dist", "cdf", "--gamma", "-1", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn dist_sample_matches_variance() {
    let text = stdout(&ctpt(&["dist", "sample", "--n", "1000000", "--gamma", "2", "--nu", "5", "--seed", "7"]));
    let x: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(x.len(), 1_000_000);
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1.0);
    let spec = CtptSpec::new(2.0, TailSpec::Finite(5.0)).unwrap();
    let truth = variance(&spec);
    // nu = 5 has a finite fourth moment but a heavy one; use the sample's own
    let m4 = x.iter().map(|a| (a - m).powi(4)).sum::<f64>() / n;
    let se = ((m4 - v * v) / n).sqrt();
    assert!((v - truth).abs() < 4.0 * se, "{v} vs {truth} (se {se})");
}

#[test]
fn compare_direction_on_skewed_normal_errors() {
    use ctpt_core::ctpt::sample;
    use ctpt_core::evidence::{fit_model, BridgeOptions};
    use ctpt_core::mcmc::ChainConfig;
    use ctpt_core::regression::{ErrorFamily, PriorConfig, RegressionProblem};

    let spec = CtptSpec::new(0.5, TailSpec::NormalLimit).unwrap();
    let mut wins = 0;
    for seed in 0..50u64 {
        let mut rng = SeededRng::new(371, seed);
        let x: Vec<f64> = (0..371).map(|_| draw_standard_normal(&mut rng)).collect();
        let e = sample(371, &spec, &mut rng);
        let y: Vec<f64> = x.iter().zip(&e).map(|(x, e)| 1.0 + 0.5 * x + e).collect();
        let p = RegressionProblem::from_columns(&[&x], &y, true, ErrorFamily::Normal, PriorConfig::default()).unwrap();
        let chain = ChainConfig { total_iterations: 10_000, seed, ..Default::default() };
        let ev = |f| fit_model(&p.with_family(f), &chain, &BridgeOptions::default()).unwrap().evidence.log_marginal_likelihood;
        if ev(ErrorFamily::SkewNormal) - ev(ErrorFamily::Normal) > 0.0 {
            wins += 1;
        }
    }
    assert!(wins >= 40, "gamma-only beat Normal in {wins}/50 data sets");
}
