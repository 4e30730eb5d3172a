use std::path::Path;
use std::process::{Command, Output};

fn metatree(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metatree"))
        .args(args)
        .current_dir(dir)
        .env_remove("METATREE_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn write_toy(dir: &Path) {
    let mut s = String::from("size,weight,shade,y\n");
    for i in 0..20 {
        let size = (i % 7) as f64 * 0.5;
        let weight = 10.0 + ((i * 3) % 5) as f64;
        let shade = ["dark", "light"][i % 2];
        let y = size * 2.0 + if shade == "dark" { 1.0 } else { -1.0 } + ((i * 13) % 7) as f64 * 0.1;
        s.push_str(&format!("{size},{weight},{shade},{y}\n"));
    }
    std::fs::write(dir.join("toy.csv"), s).unwrap();
}

fn train(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "train", "--data", "toy.csv", "--target", "y", "--nominal", "shade", "--out", out, "--report", "report.json",
        "--n-trees", "8",
    ];
    args.extend_from_slice(extra);
    metatree(&args, dir)
}

#[test]
fn train_writes_model_and_report() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path());
    let out = train(dir.path(), "model.json", &["--method", "mt_uni_uni"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("model.json").is_file());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report["train_mse"].as_f64().unwrap().is_finite());
    assert_eq!(report["rows"], 20);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 16);
}

#[test]
fn invalid_method_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path());
    let out = train(dir.path(), "model.json", &["--method", "xgboost"]);
    assert_eq!(out.status.code(), Some(2));
    let out = train(dir.path(), "model.json", &["--g", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = metatree(&["train", "--data", "absent.csv", "--target", "y", "--out", "m.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    write_toy(dir.path());
    let out = metatree(&["train", "--data", "toy.csv", "--target", "nope", "--out", "m.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let out = metatree(&["experiment", "--which", "3", "--data-dir", "empty", "--out-dir", "r"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("diabetes") && err.contains("liver"), "{err}");
}

#[test]
fn retraining_with_the_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path());
    for method in ["mt_gbdt", "mt_pos_pos", "gbdt_baseline"] {
        assert!(train(dir.path(), "a.json", &["--method", method, "--seed", "4"]).status.success());
        assert!(train(dir.path(), "b.json", &["--method", method, "--seed", "4"]).status.success());
        let a = std::fs::read(dir.path().join("a.json")).unwrap();
        let b = std::fs::read(dir.path().join("b.json")).unwrap();
        assert_eq!(a, b, "{method}");
    }
}

#[test]
fn predicting_training_rows_reproduces_report_mse() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path());
    assert!(train(dir.path(), "model.json", &["--method", "mt_gbdt"]).status.success());
    let out = metatree(&["predict", "--model", "model.json", "--input", "toy.csv", "--output", "pred.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let preds: Vec<f64> = std::fs::read_to_string(dir.path().join("pred.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.parse().unwrap())
        .collect();
    let ys: Vec<f64> = std::fs::read_to_string(dir.path().join("toy.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(preds.len(), 20);
    let mse = preds.iter().zip(&ys).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / 20.0;
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let reported = report["train_mse"].as_f64().unwrap();
    assert!((mse - reported).abs() <= 1e-12 * reported.max(1.0), "{mse} vs {reported}");
}

#[test]
fn empty_input_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path());
    assert!(train(dir.path(), "model.json", &[]).status.success());
    std::fs::write(dir.path().join("empty.csv"), "size,weight,shade\n").unwrap();
    let out = metatree(&["predict", "--model", "model.json", "--input", "empty.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "prediction\n");
}

#[test]
fn predict_rejects_missing_columns() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path());
    assert!(train(dir.path(), "model.json", &[]).status.success());
    std::fs::write(dir.path().join("bad.csv"), "size,shade\n1,dark\n").unwrap();
    let out = metatree(&["predict", "--model", "model.json", "--input", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path());
    std::fs::write(dir.path().join("run.toml"), "method = \"gbdt_baseline\"\nn_trees = 3\nseed = 11\n").unwrap();
    let out = train(dir.path(), "model.json", &["--config", "run.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(model["params"]["method"], "gbdt_baseline");
    // --n-trees 8 on the command line wins over the file
    assert_eq!(model["params"]["n_trees"], 8);
    assert_eq!(model["seed"], 11);
    std::fs::write(dir.path().join("bad.toml"), "trees = 3\n").unwrap();
    assert_eq!(train(dir.path(), "model.json", &["--config", "bad.toml"]).status.code(), Some(2));
}
