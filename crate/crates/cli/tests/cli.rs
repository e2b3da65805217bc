use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jointdep::rng;
use jointdep::Dataset;
use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use serde_json::Value;
use tempfile::TempDir;

fn jointdep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jointdep"))
        .args(args)
        .env_remove("JOINTDEP_SEED")
        .output()
        .unwrap()
}

fn json_ok(args: &[&str]) -> Value {
    let out = jointdep(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, ds: &Dataset) -> String {
    let path = dir.join(name);
    ds.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn normal_data(dir: &Path, n: usize, d: usize, seed: u64) -> String {
    let mut r = rng::stream(seed, &[]);
    let cols: Vec<Vec<f64>> = (0..d).map(|_| (0..n).map(|_| r.sample(StandardNormal)).collect()).collect();
    let names: Vec<String> = (0..d).map(|i| format!("v{i}")).collect();
    write(dir, "normal.csv", &Dataset::from_columns(&names, &cols).unwrap())
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn compute_reports_contract_fields() {
    let dir = TempDir::new().unwrap();
    let csv = normal_data(dir.path(), 30, 3, 1);
    let v = json_ok(&["compute", &csv, "--metric", "jdcov", "--c", "1", "--estimator", "u"]);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["metric"], "jdcov");
    assert_eq!(v["estimator"], "u");
    assert_eq!(v["c"].as_f64(), Some(1.0));
    assert!(v["value"].is_number());
    for metric in ["dcov", "jdcov-s", "jdcov-r", "cumulant", "tmt"] {
        let v = json_ok(&["compute", &csv, "--metric", metric]);
        assert!(v["value"].is_number(), "{metric}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let csv = normal_data(dir.path(), 10, 2, 2);
    for args in [
        vec!["compute", csv.as_str(), "--metric", "jdcov", "--c", "-1"],
        vec!["compute", csv.as_str(), "--metric", "nonsense"],
        vec!["test", csv.as_str(), "--alpha", "1.5"],
        vec!["dag-select", csv.as_str()],
    ] {
        assert_eq!(jointdep(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(jointdep(&["compute", "/nonexistent/file.csv"]).status.code(), Some(1));
    let one = normal_data(dir.path(), 10, 1, 3);
    let out = jointdep(&["test", &one]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("d ≥ 2"));
    let small = normal_data(dir.path(), 3, 2, 3);
    assert_eq!(jointdep(&["compute", &small, "--estimator", "u"]).status.code(), Some(1));
}

#[test]
fn cumulant_logs_partition_count() {
    let dir = TempDir::new().unwrap();
    let csv = normal_data(dir.path(), 12, 5, 4);
    let out = jointdep(&["--verbose", "compute", &csv, "--metric", "cumulant"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("52 partitions"));
}

#[test]
fn test_is_reproducible_and_prints_seed() {
    let dir = TempDir::new().unwrap();
    let csv = normal_data(dir.path(), 25, 3, 5);
    let args = ["test", csv.as_str(), "--B", "500", "--seed", "7", "--alpha", "0.05"];
    let (a, b) = (jointdep(&args), jointdep(&args));
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stderr).contains("seed: 7"));

    let env = Command::new(env!("CARGO_BIN_EXE_jointdep"))
        .args(["test", csv.as_str(), "--B", "20"])
        .env("JOINTDEP_SEED", "31")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&env.stdout).unwrap();
    assert_eq!(v["seed"], 31);
    assert!(String::from_utf8_lossy(&env.stderr).contains("seed: 31"));
    let default = json_ok(&["test", csv.as_str(), "--B", "20"]);
    assert_eq!(default["seed"], 0);
}

#[test]
fn auto_c_is_below_one_for_skewed_data() {
    let dir = TempDir::new().unwrap();
    let mut r = rng::stream(6, &[]);
    let e = Exp::new(1.0).unwrap();
    let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..100).map(|_| r.sample(e)).collect()).collect();
    let csv = write(dir.path(), "exp.csv", &Dataset::from_columns(&["a", "b", "c"], &cols).unwrap());
    let v = json_ok(&["test", &csv, "--c", "auto", "--alpha", "0.05", "--B", "50"]);
    assert_eq!(v["c_auto"], true);
    assert!(v["c"].as_f64().unwrap() < 1.0, "{v}");
}

#[test]
fn constant_columns_give_p_value_one() {
    let dir = TempDir::new().unwrap();
    let ds = Dataset::from_columns(&["a", "b"], &[vec![3.0; 12], vec![-1.0; 12]]).unwrap();
    let csv = write(dir.path(), "const.csv", &ds);
    let v = json_ok(&["test", &csv, "--B", "100", "--p-value-rule", "add-one"]);
    assert_eq!(v["p_value"].as_f64(), Some(1.0));
    assert_eq!(v["reject"], false);
}

#[test]
fn dag_select_modes() {
    let dir = TempDir::new().unwrap();
    let csv = normal_data(dir.path(), 40, 3, 7);
    let v = json_ok(&["dag-select", &csv, "--enumerate", "--B", "10"]);
    let models = v["models"].as_array().unwrap();
    assert_eq!(models.len(), 25);
    assert_eq!(v["no_refit"], false);
    let p: Vec<f64> = models.iter().map(|m| m["p_value"].as_f64().unwrap()).collect();
    assert!(p.windows(2).all(|w| w[0] >= w[1]));

    let cand = dir.path().join("cands.txt");
    std::fs::write(&cand, "# one model\nv1<-v0;v2<-v0\n").unwrap();
    let v = json_ok(&["dag-select", &csv, "--candidates", cand.to_str().unwrap(), "--B", "10", "--no-refit"]);
    assert_eq!(v["models"].as_array().unwrap().len(), 1);
    assert_eq!(v["models"][0]["model"], "v0<-;v1<-v0;v2<-v0");
    assert_eq!(v["no_refit"], true);

    std::fs::write(&cand, "v1<-v9\n").unwrap();
    assert_eq!(
        jointdep(&["dag-select", &csv, "--candidates", cand.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

#[test]
fn simulate_writes_reports() {
    let dir = TempDir::new().unwrap();
    let config = configs().join("copula_size.toml");
    let small = dir.path().join("small.toml");
    let text = std::fs::read_to_string(&config).unwrap().replace("reps = 500", "reps = 20");
    std::fs::write(&small, text).unwrap();
    let csv = dir.path().join("report.csv");
    let v = json_ok(&["simulate", small.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    let body = std::fs::read_to_string(&csv).unwrap();
    assert!(body.starts_with("generator,example,variant,n,test,level,rejections,reps,proportion"));
    assert_eq!(body.lines().count(), 3);
    let other = json_ok(&["simulate", small.to_str().unwrap(), "--seed", "99"]);
    assert_eq!(other["seed"], 99);
    assert_ne!(v["seed"], other["seed"]);
    let keys = |x: &Value| x["rows"][0].as_object().unwrap().keys().cloned().collect::<Vec<_>>();
    assert_eq!(keys(&v), keys(&other));
}

#[test]
fn bundled_configs_parse() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        jointdep::ExperimentConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
    let full = std::fs::read_to_string(configs().join("full_scale_c1.toml")).unwrap();
    assert!(full.contains("LONG-RUNNING"));
}

#[test]
fn normality_command() {
    let dir = TempDir::new().unwrap();
    let csv = normal_data(dir.path(), 50, 2, 8);
    let v = json_ok(&["normality", &csv, "--normality-b", "50", "--mc-draws", "200"]);
    let p = v["p_value"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
    assert!(v["c"].is_number());
}
