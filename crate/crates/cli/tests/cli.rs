use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hubless::datamodel::{load_dataset, split, Preprocessor};
use hubless::experiment::{fit_method, Method};
use hubless::{DataFormat, SolverMode};

fn hubless(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hubless")).args(args).output().expect("binary runs")
}

fn iris() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/iris.csv")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn fit_then_predict_matches_in_process_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model");
    let pred = dir.path().join("pred");
    let iris = iris();
    for method in ["move-labeled", "move-query", "euclidean"] {
        ok(&hubless(&[
            "fit", "--dataset", iris.to_str().unwrap(), "--method", method, "--lambda", "0.1",
            "--train-fraction", "0.7", "--seed", "3", "--zscore", "--out", model.to_str().unwrap(),
        ]));
        ok(&hubless(&["predict", "--model-dir", model.to_str().unwrap(), "--k", "3", "--out", pred.to_str().unwrap()]));

        // same steps in process
        let ds = load_dataset(&iris, DataFormat::DenseCsv).unwrap();
        let sp = split(&ds, 0.7, 3).unwrap();
        let (tx, ty) = ds.rows(&sp.train_indices).unwrap();
        let (qx, qy) = ds.rows(&sp.test_indices).unwrap();
        let pre = Preprocessor::fit(&tx, true, true, None).unwrap();
        let m: Method = method.parse().unwrap();
        let f = fit_method(m, &pre.apply(&tx).unwrap(), &ty, 0.1, 3, 1, SolverMode::PaperClosedForm).unwrap();
        let expected = f.knn.predict(&pre.apply(&qx).unwrap()).unwrap();

        let csv = std::fs::read_to_string(pred.join("predictions.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(lines.len(), expected.len());
        let mut hits = 0;
        for (i, line) in lines.iter().enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[0], i.to_string());
            assert_eq!(fields[1], ds.class_names()[expected[i]], "{method} query {i}");
            assert_eq!(fields[2], ds.class_names()[qy[i]]);
            hits += usize::from(expected[i] == qy[i]);
        }
        let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(pred.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["accuracy"].as_f64().unwrap(), hits as f64 / qy.len() as f64);
        assert_eq!(summary["k"], 3);
        if method != "euclidean" {
            // the saved transform is the in-process one, bit for bit
            let saved = hubless::TransformModel::from_json(&std::fs::read_to_string(model.join("model.json")).unwrap()).unwrap();
            assert_eq!(&saved, f.transform.as_ref().unwrap());
        }
    }
}

#[test]
fn predict_on_explicit_query_file() {
    let dir = tempfile::tempdir().unwrap();
    let iris = iris();
    let model = dir.path().join("m");
    ok(&hubless(&["fit", "--dataset", iris.to_str().unwrap(), "--out", model.to_str().unwrap()]));
    // queries are the labeled objects themselves
    let out = dir.path().join("p");
    ok(&hubless(&["predict", "--model-dir", model.to_str().unwrap(), "--dataset", iris.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_queries"], 150);
    assert!(summary["accuracy"].as_f64().unwrap() > 0.9);
    assert_eq!(summary["dissimilarity"], "move-labeled");
    // no split recorded, so a query file is required
    let fail = hubless(&["predict", "--model-dir", model.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!fail.status.success());
}

#[test]
fn centrality_reports_the_predicted_bias() {
    let out = hubless(&["centrality", "--d", "300", "--gamma", "1", "--s", "1", "--n", "100000", "--seed", "1"]);
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let hat = v["delta_hat"].as_f64().unwrap();
    let se = v["std_error"].as_f64().unwrap();
    assert!((v["delta_theory"].as_f64().unwrap() - 24.49489742783178).abs() < 1e-9);
    assert!((hat - 24.49489742783178).abs() < 4.0 * se, "delta_hat {hat}");
}

#[test]
fn centrality_sweep_is_csv() {
    let out = hubless(&["centrality", "--d", "10,20", "--gamma", "0,1", "--n", "2000"]);
    ok(&out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim().lines().count(), 5);
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(
        &cfg,
        format!(r#"{{"dataset": {{"kind": "file", "path": {:?}, "format": "dense-csv"}}, "n_splits": 1}}"#, iris()),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    ok(&hubless(&["bench", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--seed", "2"]));
    for f in ["report.json", "report.txt", "runs.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["version"], 1);
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
    assert_eq!(report["config"]["seed"], 2);
    for row in report["rows"].as_array().unwrap() {
        let acc = row["accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert!(row["train_seconds"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn hubness_and_cv_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let iris = iris();
    let h = dir.path().join("h");
    ok(&hubless(&["hubness", "--dataset", iris.to_str().unwrap(), "--seed", "1", "--out", h.to_str().unwrap()]));
    let csv = std::fs::read_to_string(h.join("hubness.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("method,k,skewness,max_count,mean_count"));

    let cv_out = dir.path().join("cv.json");
    ok(&hubless(&[
        "cv", "--dataset", iris.to_str().unwrap(), "--lambdas", "0.1,1", "--ks", "1,3", "--folds", "3",
        "--out", cv_out.to_str().unwrap(),
    ]));
    let cv: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(cv_out).unwrap()).unwrap();
    assert_eq!(cv["table"].as_array().unwrap().len(), 4);
    assert!(cv["best_accuracy"].as_f64().unwrap() > 0.9);
}

#[test]
fn bad_invocations_fail_with_a_message() {
    let unknown = hubless(&["fit", "--bogus"]);
    assert!(!unknown.status.success());
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));
    let missing = hubless(&["fit", "--dataset", "/nonexistent.csv", "--out", "/tmp/x"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent.csv"));
    let bad_method = hubless(&["fit", "--dataset", "a", "--method", "lmnn", "--out", "b"]);
    assert!(!bad_method.status.success());
    assert!(!hubless(&["bench"]).status.success());
}
