use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use leadlag_cli::{config, produce, Command as Sub, Format};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("leadlag-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn leadlag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leadlag")).args(args).output().unwrap()
}

fn run_bundled(sub: &str, file: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = configs().join(file);
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    leadlag(&args)
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn error_of(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line on stderr");
    serde_json::from_str::<serde_json::Value>(line).unwrap()["error"].clone()
}

/// Writes `text` as a config and runs `sub` on it.
fn run_text(sub: &str, name: &str, text: &str) -> Output {
    let dir = scratch(name);
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.join("out");
    leadlag(&[sub, "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()])
}

fn bundled_text(file: &str) -> String {
    std::fs::read_to_string(configs().join(file)).unwrap()
}

#[test]
fn zero_strategy_has_all_zero_statistics() {
    let out = scratch("zero");
    let res = run_bundled("experiment", "experiment_zero.toml", &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let status: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(status["status"], "ok");

    let report = read_json(&out.join("experiment_report.json"));
    let stats = &report["results"][0]["stats"];
    assert_eq!(stats["mean"], 0.0);
    assert_eq!(stats["stderr"], 0.0);
    assert_eq!(stats["min"], 0.0);
    assert_eq!(stats["max"], 0.0);
    assert_eq!(stats["loss"]["estimate"], 0.0);
    assert_eq!(stats["gain"]["estimate"], 0.0);
    assert!(stats["t_stat"].is_null());

    let csv = std::fs::read_to_string(out.join("stats.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("strategy,h,epsilon,n_paths,mean,"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..6], &["0", "0.05", "0.01", "200", "0", "0"]);
}

#[test]
fn non_integral_grid_is_a_config_error() {
    let text = bundled_text("experiment_zero.toml").replace("step = 0.01", "step = 0.03");
    let res = run_text("experiment", "grid", &text);
    assert_eq!(res.status.code(), Some(2));
    let err = error_of(&res);
    assert_eq!(err["kind"], "config");
    assert_eq!(err["context"], "grid");
}

#[test]
fn unknown_key_is_a_config_error() {
    let text = bundled_text("experiment_zero.toml").replace("[friction]", "[friction]\nslippage = 0.1");
    let res = run_text("experiment", "unknown", &text);
    assert_eq!(res.status.code(), Some(2));
    let msg = error_of(&res)["message"].as_str().unwrap().to_string();
    assert!(msg.contains("slippage"), "{msg}");

    let text = bundled_text("experiment_zero.toml").replace("seed = 11", "seed = 11\nsede = 12");
    assert_eq!(run_text("experiment", "unknown_top", &text).status.code(), Some(2));
}

#[test]
fn unknown_key_inside_tagged_table_is_rejected() {
    let text = bundled_text("experiment_zero.toml").replace("[model.drift]\nkind = \"zero\"", "[model.drift]\nkind = \"zero\"\nmu = [1.0, 1.0]");
    assert_eq!(run_text("experiment", "tagged", &text).status.code(), Some(2));
}

#[test]
fn missing_cost_rate_is_a_config_error() {
    let text = bundled_text("experiment_zero.toml").replace("epsilon = 0.01\n", "");
    let res = run_text("experiment", "no_eps", &text);
    assert_eq!(res.status.code(), Some(2));
    assert!(error_of(&res)["message"].as_str().unwrap().contains("epsilon"));
}

#[test]
fn missing_section_names_the_key() {
    let text = bundled_text("experiment_zero.toml").replace("[strategy]\nrule = \"never_trade\"\n", "");
    let res = run_text("experiment", "no_strategy", &text);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(error_of(&res)["context"], "strategy");
}

#[test]
fn zero_workers_is_a_config_error() {
    let out = scratch("workers0");
    let res = run_bundled("gsvz", "gsvz_pure_lag.toml", &out, &["--workers", "0"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = scratch("blocked");
    let blocker = dir.join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let res = run_bundled("gsvz", "gsvz_pure_lag.toml", &blocker, &[]);
    assert_eq!(res.status.code(), Some(3));
    assert_eq!(error_of(&res)["kind"], "runtime");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let res = leadlag(&["gsvz", "--config", "/nonexistent/run.toml"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn gsvz_pure_lag_matches_log_coherence() {
    let out = scratch("gsvz");
    assert!(run_bundled("gsvz", "gsvz_pure_lag.toml", &out, &[]).status.success());
    let report = read_json(&out.join("gsvz_report.json"));
    assert_eq!(report["report"]["value"]["status"], "finite");
    let v = report["report"]["value"]["value"].as_f64().unwrap();
    assert!((v - 0.5f64.ln()).abs() < 1e-6, "{v}");
    let partials = std::fs::read_to_string(out.join("gsvz_partials.csv")).unwrap();
    assert!(partials.starts_with("lambda,partial\n"));
}

#[test]
fn cps_martingale_fixture_has_zero_band() {
    let out = scratch("cps_mart");
    assert!(run_bundled("cps", "cps_martingale.toml", &out, &[]).status.success());
    let report = read_json(&out.join("cps_report.json"));
    assert_eq!(report["min_eps"]["status"], "found");
    assert_eq!(report["min_eps"]["epsilon_star"], 0.0);
    assert_eq!(report["probes"][0]["feasible"], true);
    assert_eq!(report["level_sizes"], serde_json::json!([1, 2]));
}

#[test]
fn cps_chain_probes_bracket_the_threshold() {
    let out = scratch("cps_chain");
    assert!(run_bundled("cps", "cps_chain.toml", &out, &[]).status.success());
    let report = read_json(&out.join("cps_report.json"));
    let eps = report["min_eps"]["epsilon_star"].as_f64().unwrap();
    assert!((eps - 0.2).abs() < 1e-6, "{eps}");
    assert_eq!(report["probes"][0]["feasible"], false);
    assert!(report["probes"][0]["farkas_gap"].as_f64().unwrap() > 0.0);
    assert_eq!(report["probes"][1]["feasible"], true);
}

#[test]
fn cps_accepts_a_tree_file_next_to_the_config() {
    let dir = scratch("cps_file");
    let tree = serde_json::json!({
        "times": [0.0, 1.0],
        "nodes": [
            {"level": 0, "parent": null, "price": [1.0, 1.0], "weight": 1.0},
            {"level": 1, "parent": 0, "price": [1.44, 1.0], "weight": 1.0}
        ]
    });
    std::fs::write(dir.join("tree.json"), tree.to_string()).unwrap();
    std::fs::write(dir.join("run.toml"), "[cps]\neps_hi = 1.0\ntree_file = \"tree.json\"\n").unwrap();
    let out = dir.join("out");
    let res = leadlag(&["cps", "--config", dir.join("run.toml").to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&out.join("cps_report.json"));
    assert_eq!(report["source"], "file");
    assert!((report["min_eps"]["epsilon_star"].as_f64().unwrap() - 0.2).abs() < 1e-6);
}

#[test]
fn cps_rejects_two_tree_sources() {
    let text = bundled_text("cps_chain.toml").replace("[cps]\n", "[cps]\ntree_file = \"x.json\"\n");
    assert_eq!(run_text("cps", "two_sources", &text).status.code(), Some(2));
}

#[test]
fn simulate_writes_the_path_table() {
    let out = scratch("sim");
    assert!(run_bundled("simulate", "simulate_hry.toml", &out, &[]).status.success());
    let csv = std::fs::read_to_string(out.join("paths.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("path_id,t,X1,X2,S1,S2"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4 * 101);
    for r in &rows {
        assert!((r[4] - r[2].exp()).abs() < 1e-12 * r[4].max(1.0));
        assert!((r[5] - r[3].exp()).abs() < 1e-12 * r[5].max(1.0));
    }
    assert!(out.join("batch_metadata.json").exists());
}

#[test]
fn json_format_writes_columnar_tables() {
    let out = scratch("sim_json");
    assert!(run_bundled("simulate", "simulate_hry.toml", &out, &["--format", "json"]).status.success());
    let table = read_json(&out.join("paths.json"));
    assert_eq!(table["columns"], serde_json::json!(["path_id", "t", "X1", "X2", "S1", "S2"]));
    let data = table["data"].as_array().unwrap();
    assert_eq!(data.len(), 6);
    assert!(data.iter().all(|c| c.as_array().unwrap().len() == 404));
}

#[test]
fn verify_reports_every_verifier() {
    let out = scratch("verify");
    assert!(run_bundled("verify", "verify.toml", &out, &[]).status.success());
    let report = read_json(&out.join("verify_report.json"));
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 3);
    for c in &checks[..2] {
        let p = c["result"]["estimate"].as_f64().unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert!(c["result"]["ci_low"].as_f64().unwrap() <= p);
    }
    assert!(out.join("cud_2.csv").exists());
}

#[test]
fn run_metadata_holds_the_clock() {
    let out = scratch("meta");
    assert!(run_bundled("gsvz", "gsvz_pure_lag.toml", &out, &["--workers", "2"]).status.success());
    let meta = read_json(&out.join("run_metadata.json"));
    assert_eq!(meta["workers"], 2);
    assert!(meta["started_unix_ms"].as_u64().unwrap() > 0);
    let report = std::fs::read_to_string(out.join("gsvz_report.json")).unwrap();
    assert!(!report.contains("unix"));
}

fn produce_with(workers: usize, sub: Sub, file: &str, format: Format) -> Vec<(String, Vec<u8>)> {
    let loaded = config::load(&configs().join(file)).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
    pool.install(|| produce(sub, &loaded, format))
        .unwrap()
        .into_iter()
        .map(|f| (f.name, f.bytes))
        .collect()
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let cases = [
        (Sub::Simulate, "simulate_hry.toml"),
        (Sub::Experiment, "experiment_sweep.toml"),
        (Sub::Verify, "verify.toml"),
        (Sub::Cps, "cps_simulated.toml"),
        (Sub::Gsvz, "gsvz_pure_lag.toml"),
    ];
    for (sub, file) in cases {
        for format in [Format::Csv, Format::Json] {
            let one = produce_with(1, sub, file, format);
            let many = produce_with(4, sub, file, format);
            assert!(!one.is_empty());
            assert_eq!(one, many, "{file} {format:?}");
        }
    }
}

#[test]
fn repeated_binary_runs_are_byte_identical() {
    let a = scratch("det_a");
    let b = scratch("det_b");
    assert!(run_bundled("experiment", "experiment_sweep.toml", &a, &["--workers", "1"]).status.success());
    assert!(run_bundled("experiment", "experiment_sweep.toml", &b, &["--workers", "3"]).status.success());
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n != "run_metadata.json")
        .collect();
    names.sort();
    assert!(names.len() > 2);
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}
