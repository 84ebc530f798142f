use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use subgeo_cli::config::RunConfig;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn subgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subgeo")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes `body` as a config in `dir` and returns its path.
fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

/// Runs `cmd` on `config` with output in `out`; returns the process output and the parsed JSON report.
fn run(cmd: &str, config: &str, out: &Path, extra: &[&str]) -> (Output, Value) {
    let out_s = out.display().to_string();
    let mut args = vec![cmd, "--config", config, "--out", out_s.as_str()];
    args.extend_from_slice(extra);
    let o = subgeo(&args);
    let json = std::fs::read_to_string(out.join(format!("{cmd}.json")))
        .map(|t| serde_json::from_str(&t).unwrap())
        .unwrap_or(Value::Null);
    (o, json)
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no {name}"))
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn bundled_configs_round_trip() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = RunConfig::load(&path).unwrap();
        let once = cfg.to_toml().unwrap();
        let again = RunConfig::parse(&once).unwrap();
        assert_eq!(again, cfg, "{}", path.display());
        assert_eq!(again.to_toml().unwrap(), once);
        let mut resolved = cfg.clone();
        resolved.resolve();
        let text = resolved.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap().to_toml().unwrap(), text);
        n += 1;
    }
    assert!(n >= 6);
}

#[test]
fn unknown_keys_and_versions_are_rejected() {
    let base = "schema_version = 1\n[model]\nfamily = \"ou\"\ntheta = 1.0\n[analysis]\nchecks = []\n";
    assert!(RunConfig::parse(base).is_ok());
    let err = RunConfig::parse(&format!("{base}[numeric]\nsed = 3\n")).unwrap_err();
    assert!(format!("{err:#}").contains("sed"));
    assert!(RunConfig::parse(&base.replace("theta", "thetta")).is_err());
    assert!(RunConfig::parse(&base.replace("schema_version = 1", "schema_version = 2")).is_err());
    assert!(RunConfig::parse(&base.replace("checks = []", "checks = [\"tv\"]")).is_err());
    assert!(RunConfig::parse(&base.replace("family = \"ou\"", "family = \"quartic\"")).is_err());

    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &format!("{base}extra = true\n"));
    let o = subgeo(&["check-tv", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("extra"));
}

#[test]
fn plugin_models_are_refused() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "plugin.toml",
        "schema_version = 1\n[model]\nfamily = \"plugin\"\nlibrary = \"libdrift.so\"\nsymbol = \"drift\"\n\
         [analysis]\nchecks = [\"tv_condition\"]\n",
    );
    let (o, _) = run("check-tv", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("plugin models are not supported"));
}

#[test]
fn cosine_drift_total_variation_pipeline() {
    let dir = TempDir::new().unwrap();
    let cfg = configs_dir().join("cosine_tv.toml").display().to_string();
    let (o, report) = run("check-tv", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(report["passed"], true);
    assert_eq!(report["seed"], 1);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);

    let tv = check(&report, "tv_condition");
    let lambda = tv["values"]["lambda"].as_f64().unwrap();
    assert!(lambda.is_finite() && lambda > 0.0);
    assert_eq!(tv["values"]["grid_points"], 15961);
    assert_eq!(tv["values"]["r_max"], 400.0);
    // φ(t) = t^{1/2} gives the rate t^{α/(1−α)} = t
    let q = tv["values"]["rate_exponent"].as_f64().unwrap();
    assert!((q - 1.0).abs() < 0.01, "{q}");

    let classical = check(&report, "classical_subgeo");
    assert_eq!(classical["values"]["feasible"], false);
    assert_eq!(classical["status"], "pass");
    assert_eq!(check(&report, "lyapunov_verify")["status"], "pass");

    let curve = read_csv(&dir.path().join("tv_rate_curve.csv"));
    assert_eq!(curve.len(), 200);
    assert!(curve.windows(2).all(|w| w[1][1] > w[0][1]));

    // the resolved defaults are echoed
    assert_eq!(report["config"]["analysis"]["tv"]["verify_points"], 200);
    assert_eq!(report["config"]["analysis"]["tv"]["r1"], 1.5);
    assert_eq!(report["config"]["numeric"]["dt"], 0.001);
}

#[test]
fn text_report_carries_the_json_numbers() {
    let dir = TempDir::new().unwrap();
    let cfg = configs_dir().join("cosine_tv.toml").display().to_string();
    let (o, report) = run("check-tv", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("check-tv.txt")).unwrap();
    let mut compared = 0;
    for c in report["checks"].as_array().unwrap() {
        for (k, v) in c["values"].as_object().unwrap() {
            if v.is_number() {
                assert!(text.contains(&format!("  {k} = {v}\n")), "{k} = {v} missing from text");
                compared += 1;
            }
        }
    }
    assert!(compared >= 15);
    assert!(text.contains(report["config_hash"].as_str().unwrap()));
}

#[test]
fn brownian_motion_has_no_rate() {
    let dir = TempDir::new().unwrap();
    let cfg = configs_dir().join("brownian.toml").display().to_string();
    let (o, report) = run("check-tv", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let tv = check(&report, "tv_condition");
    assert_eq!(tv["values"]["finite"], false);
    assert_eq!(tv["values"]["lambda"], "inf");
    assert!(tv["values"].get("rate_exponent").is_none());
    assert!(!dir.path().join("tv_rate_curve.csv").exists());

    let body = std::fs::read_to_string(&cfg).unwrap().replace("expect_finite = false", "expect_finite = true");
    let strict = write_config(dir.path(), "strict.toml", &body);
    let (o, report) = run("check-tv", &strict, &dir.path().join("strict"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(check(&report, "tv_condition")["status"], "fail");
    assert!(stdout(&o).contains("FAIL tv_condition"));
}

#[test]
fn identity_rate_takes_the_geometric_branch() {
    let dir = TempDir::new().unwrap();
    let cfg = configs_dir().join("power_geometric.toml").display().to_string();
    let (o, report) = run("check-tv", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let tv = check(&report, "tv_condition");
    assert_eq!(tv["values"]["branch"], "geometric");
    // φ(Φ⁻¹(t)) = e^t for φ(t) = t
    let slope = tv["values"]["rate_log_slope"].as_f64().unwrap();
    assert!((slope - 1.0).abs() < 1e-6, "{slope}");
    assert_eq!(check(&report, "lyapunov_verify")["status"], "pass");
}

#[test]
fn linear_drift_fits_the_drift_constant() {
    let dir = TempDir::new().unwrap();
    let cfg = configs_dir().join("ou_wass.toml").display().to_string();
    let (o, report) = run("check-wass", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let pairs = check(&report, "wasserstein_contraction")["values"]["pairs"].as_array().unwrap().clone();
    let rate = pairs[0]["fit"]["params"]["rate"].as_f64().unwrap();
    assert!((rate - 1.0).abs() <= 0.02, "{rate}");

    // the second pair starts on the diagonal
    assert_eq!(pairs[1]["distance"], 0.0);
    for row in read_csv(&dir.path().join("coupling_pair_1.csv")) {
        assert_eq!(&row[1..], &[0.0, 0.0, 0.0]);
    }
}

#[test]
fn power_drift_coupling_respects_the_bound() {
    let dir = TempDir::new().unwrap();
    let body = std::fs::read_to_string(configs_dir().join("ex1_wass.toml")).unwrap().replace("n_paths = 1000", "n_paths = 200");
    let cfg = write_config(dir.path(), "ex1.toml", &body);
    let (o, report) = run("check-wass", &cfg, &dir.path().join("noisy"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let c = check(&report, "wasserstein_contraction");
    assert_eq!(c["values"]["contraction_source"], "certified");
    assert!(c["values"]["max_excess"].as_f64().unwrap() <= 1e-2);

    // without noise the gap solves g′ = −g², so it decays like 1/t
    let det = body
        .replace("sigma = 1.0", "sigma = 0.0")
        .replace("t_end = 20.0", "t_end = 50.0")
        .replace("n_paths = 200", "n_paths = 1")
        .replace("record_every = 10", "record_every = 1000");
    let cfg = write_config(dir.path(), "ex1_det.toml", &det);
    let (o, report) = run("check-wass", &cfg, &dir.path().join("det"), &[]);
    assert_eq!(o.status.code(), Some(0));
    let fit = &check(&report, "wasserstein_contraction")["values"]["pairs"][0]["fit"];
    let q = fit["params"]["exponent"].as_f64().unwrap();
    assert!((q + 1.0).abs() < 0.15, "{q}");
}

#[test]
fn runs_are_deterministic_and_seed_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = configs_dir().join("ou_wass.toml").display().to_string();
    let (_, a) = run("check-wass", &cfg, &dir.path().join("a"), &[]);
    let (_, b) = run("check-wass", &cfg, &dir.path().join("a"), &[]);
    assert_eq!(a, b);
    let (_, c) = run("check-wass", &cfg, &dir.path().join("a"), &["--seed", "77"]);
    assert_eq!(c["seed"], 77);
    assert_ne!(c["config_hash"], a["config_hash"]);
}

#[test]
fn subordination_matches_the_laplace_transform() {
    let dir = TempDir::new().unwrap();
    let cfg = configs_dir().join("gamma_subordinate.toml").display().to_string();
    let (o, report) = run("subordinate", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let c = check(&report, "subordinate");
    for row in c["values"]["values"].as_array().unwrap() {
        let t = row["t"].as_f64().unwrap();
        assert!((row["exact"].as_f64().unwrap() - 2f64.powf(-t)).abs() < 1e-15);
    }
    let text = std::fs::read_to_string(dir.path().join("subordinate.csv")).unwrap();
    assert!(text.starts_with("t,value,se\n"));
    assert_eq!(text.lines().count(), 4);

    // shrinking the tolerance far below the Monte Carlo error fails the check
    let (o, _) = run("subordinate", &cfg, &dir.path().join("tight"), &["--tolerance-scale", "1e-6"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_exports_the_ensemble() {
    let dir = TempDir::new().unwrap();
    let cfg = configs_dir().join("jump_simulate.toml").display().to_string();
    let (o, report) = run("simulate", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let c = check(&report, "simulation");
    assert_eq!(c["values"]["n_paths"], 2000);
    assert_eq!(c["values"]["flagged"], 0);
    assert!(c["values"]["moment_delta"].as_f64().unwrap() > 0.0);
    let mean_jumps = c["values"]["mean_jumps"].as_f64().unwrap();
    assert!((mean_jumps - 5.0).abs() < 0.3, "{mean_jumps}");
    assert!(std::fs::metadata(dir.path().join("ensemble.bin")).unwrap().len() > 0);
    assert!(dir.path().join("ensemble_summary.csv").exists());
}

#[test]
fn report_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let base = "schema_version = 1\n[model]\nfamily = \"ou\"\ntheta = 1.0\n";

    let empty = write_config(dir.path(), "empty.toml", &format!("{base}[analysis]\nchecks = []\n"));
    let (o, report) = run("report", &empty, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report["checks"].as_array().unwrap().len(), 0);
    assert_eq!(report["passed"], true);

    let wanted = write_config(
        dir.path(),
        "wanted.toml",
        &format!("{base}[analysis]\nchecks = [\"subordinate\", \"wasserstein_contraction\"]\n"),
    );
    let o = subgeo(&["report", "--config", &wanted, "--out", &out.display().to_string()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("subordinate") && err.contains("wasserstein_contraction"), "{err}");

    // a subordination run whose tolerance is far too tight, then the consolidated report
    let failing = write_config(
        dir.path(),
        "failing.toml",
        &format!("{base}[analysis]\nchecks = [\"subordinate\"]\n[analysis.subordinate]\nsamples = 2000\n"),
    );
    let (o, _) = run("subordinate", &failing, &out, &["--tolerance-scale", "1e-9"]);
    assert_eq!(o.status.code(), Some(1));
    let (o, report) = run("report", &failing, &out, &["--tolerance-scale", "1e-9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL subordinate"));
    assert_eq!(report["checks"][0]["name"], "subordinate");
    let source: Value = serde_json::from_str(&std::fs::read_to_string(out.join("subordinate.json")).unwrap()).unwrap();
    assert_eq!(report["checks"][0], source["checks"][0]);
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("subordinate,fail,subordinate,"));
}
