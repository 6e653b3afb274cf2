//! End-to-end tests of the matmix binary and the file formats.

use matmix_cli::commands::dataset_round_trip;
use matmix_cli::io::{read_dataset, read_labels};
use matmix_core::sim::{preset, simulate_dataset};
use std::fs;
use std::path::Path;
use std::process::Command;

fn matmix() -> Command {
    Command::new(env!("CARGO_BIN_EXE_matmix"))
}

fn run(args: &[&str]) -> std::process::Output {
    matmix().args(args).output().expect("binary runs")
}

#[test]
fn simulate_writes_deterministic_files() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let st = run(&["simulate", "sim1_mvvg", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    }
    let d1 = fs::read(out1.join("data.csv")).unwrap();
    let d2 = fs::read(out2.join("data.csv")).unwrap();
    assert_eq!(d1, d2, "same seed must give byte-identical data");
    assert_eq!(
        fs::read(out1.join("labels.csv")).unwrap(),
        fs::read(out2.join("labels.csv")).unwrap()
    );

    let data = read_dataset(&out1.join("data.csv")).unwrap();
    assert_eq!(data.len(), 400);
    assert_eq!((data.n(), data.p()), (3, 4));
    let labels = read_labels(&out1.join("labels.csv"), Some(400)).unwrap();
    assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 200);
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["kind"], "mvvg");
    assert_eq!(truth["components"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_sim2_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s2");
    let st = run(&["simulate", "sim2_mvnig", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(st.status.success());
    let data = read_dataset(&out.join("data.csv")).unwrap();
    assert_eq!(data.len(), 600);
    assert_eq!((data.n(), data.p()), (4, 3));
}

#[test]
fn unknown_preset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let st = run(&["simulate", "sim9_mvvg", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn missing_data_file_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let st = run(&[
        "fit",
        "--data",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(st.status.code(), Some(4));
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let sim = simulate_dataset(&preset("sim2_mvgh", 13).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let back = dataset_round_trip(&sim.data, &dir.path().join("rt.csv")).unwrap();
    assert_eq!(back.len(), sim.data.len());
    for i in 0..back.len() {
        assert_eq!(back.get(i), sim.data.get(i), "observation {i} not bit-exact");
    }
}

#[test]
fn malformed_dataset_is_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    fs::write(&p, "obs,row,col,value\n0,0,0,1.0\n0,0,0,2.0\n").unwrap();
    assert!(read_dataset(&p).is_err()); // duplicate cell
    fs::write(&p, "obs,row,col,value\n0,0,0,1.0\n0,1,0,2.0\n1,0,0,1.0\n").unwrap();
    assert!(read_dataset(&p).is_err()); // incomplete grid
    fs::write(&p, "x,y\n").unwrap();
    assert!(read_dataset(&p).is_err()); // wrong header
}

#[test]
fn config_with_unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    assert!(run(&["simulate", "sim1_mvst", "--out", out.to_str().unwrap()]).status.success());
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"kind": "mvst", "bogus_key": 1}"#).unwrap();
    let st = run(&[
        "fit",
        "--data",
        out.join("data.csv").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("fit").to_str().unwrap(),
    ]);
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn single_component_fit_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    assert!(run(&["simulate", "sim1_mvvg", "--seed", "5", "--out", out.to_str().unwrap()])
        .status
        .success());
    let fit_dir = dir.path().join("fit");
    let st = run(&[
        "fit",
        "--data",
        out.join("data.csv").to_str().unwrap(),
        "--out",
        fit_dir.to_str().unwrap(),
        "--kind",
        "mvvg",
        "--g-min",
        "1",
        "--g-max",
        "1",
        "--starts",
        "1",
        "--max-iter",
        "60",
    ]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fit_dir.join("fit_mvvg_g1.json")).unwrap())
            .unwrap();
    assert_eq!(report["g"], 1);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fit_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["kinds"][0]["chosen_bic"], 1);
    assert!(fit_dir.join("params_mvvg_g1.json").exists());
    assert!(fit_dir.join("map_labels_mvvg_g1.csv").exists());
}

#[test]
fn fit_selects_two_groups_on_sim1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    assert!(run(&["simulate", "sim1_mvnig", "--seed", "41", "--out", out.to_str().unwrap()])
        .status
        .success());
    let fit_dir = dir.path().join("fit");
    let st = run(&[
        "fit",
        "--data",
        out.join("data.csv").to_str().unwrap(),
        "--out",
        fit_dir.to_str().unwrap(),
        "--kind",
        "mvnig",
        "--g-min",
        "1",
        "--g-max",
        "3",
        "--starts",
        "2",
        "--seed",
        "1",
    ]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fit_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["kinds"][0]["chosen_bic"], 2, "{summary}");

    // MAP labels from the chosen model agree with the truth.
    let eval = dir.path().join("eval.json");
    let st = run(&[
        "evaluate",
        "--pred",
        fit_dir.join("map_labels_mvnig_g2.csv").to_str().unwrap(),
        "--truth",
        out.join("labels.csv").to_str().unwrap(),
        "--out",
        eval.to_str().unwrap(),
    ]);
    assert!(st.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&eval).unwrap()).unwrap();
    assert!(report["ari"].as_f64().unwrap() > 0.98, "{report}");
    assert!(report["mcr"].as_f64().unwrap() < 0.01);
}

#[test]
fn evaluate_perfect_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("l.csv");
    fs::write(&labels, "obs,label\n0,0\n1,0\n2,1\n3,1\n").unwrap();
    let st = run(&[
        "evaluate",
        "--pred",
        labels.to_str().unwrap(),
        "--truth",
        labels.to_str().unwrap(),
    ]);
    assert!(st.status.success());
    let report: serde_json::Value = serde_json::from_str(
        std::str::from_utf8(&st.stdout).unwrap(),
    )
    .unwrap();
    assert_eq!(report["ari"], 1.0);
    assert_eq!(report["mcr"], 0.0);
    // Cross-tabulation bookkeeping: row sums are the true class counts.
    let confusion = report["confusion"].as_array().unwrap();
    let row0: u64 = confusion[0].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(row0, 2);
}

#[test]
fn evaluate_mask_restricts_to_unlabelled() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("p.csv");
    let truth = dir.path().join("t.csv");
    let mask = dir.path().join("m.csv");
    // Four points; the mask hides two of them (-1) for evaluation; the
    // prediction is wrong exactly on one masked-out (labelled) point.
    fs::write(&pred, "obs,label\n0,0\n1,1\n2,0\n3,1\n").unwrap();
    fs::write(&truth, "obs,label\n0,0\n1,0\n2,0\n3,1\n").unwrap();
    fs::write(&mask, "obs,label\n0,0\n1,0\n2,-1\n3,-1\n").unwrap();
    let st = run(&[
        "evaluate",
        "--pred",
        pred.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--mask",
        mask.to_str().unwrap(),
    ]);
    assert!(st.status.success());
    let report: serde_json::Value =
        serde_json::from_str(std::str::from_utf8(&st.stdout).unwrap()).unwrap();
    assert_eq!(report["n_evaluated"], 2);
    assert_eq!(report["mcr"], 0.0);
}

#[test]
fn marginals_long_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    assert!(run(&["simulate", "sim1_mvst", "--seed", "2", "--out", out.to_str().unwrap()])
        .status
        .success());
    let csv = dir.path().join("marg.csv");
    let st = run(&[
        "marginals",
        "--data",
        out.join("data.csv").to_str().unwrap(),
        "--labels",
        out.join("labels.csv").to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(st.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("obs,group,col,row,value"));
    let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), 400 * 3 * 4);
    // Four column groups are present, and the group column matches labels.
    let labels = read_labels(&out.join("labels.csv"), Some(400)).unwrap();
    let mut cols_seen = std::collections::BTreeSet::new();
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        let obs: usize = fields[0].parse().unwrap();
        let group: i32 = fields[1].parse().unwrap();
        cols_seen.insert(fields[2].to_string());
        assert_eq!(group, labels[obs]);
    }
    assert_eq!(cols_seen.len(), 4);
}

#[test]
fn fit_is_deterministic_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    assert!(run(&["simulate", "sim1_mvst", "--seed", "6", "--out", out.to_str().unwrap()])
        .status
        .success());
    let mut reports = Vec::new();
    for name in ["f1", "f2"] {
        let fit_dir = dir.path().join(name);
        let st = run(&[
            "fit",
            "--data",
            out.join("data.csv").to_str().unwrap(),
            "--out",
            fit_dir.to_str().unwrap(),
            "--kind",
            "mvst",
            "--g-min",
            "2",
            "--g-max",
            "2",
            "--starts",
            "2",
            "--max-iter",
            "40",
            "--seed",
            "3",
        ]);
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        reports.push(fs::read(fit_dir.join("fit_mvst_g2.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1], "same seed must give identical reports");
}

#[test]
fn semi_supervised_fit_and_masked_evaluation() {
    // 80% labelled fit, then MCR on the held-out 20% through the mask flag.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    assert!(run(&["simulate", "sim1_mvvg", "--seed", "12", "--out", out.to_str().unwrap()])
        .status
        .success());
    let truth = read_labels(&out.join("labels.csv"), Some(400)).unwrap();
    let masked: Vec<i32> = truth
        .iter()
        .enumerate()
        .map(|(i, &l)| if i % 5 == 4 { -1 } else { l })
        .collect();
    let train = dir.path().join("train_labels.csv");
    matmix_cli::io::write_labels(&train, &masked).unwrap();
    let fit_dir = dir.path().join("fit");
    let st = run(&[
        "fit",
        "--data",
        out.join("data.csv").to_str().unwrap(),
        "--labels",
        train.to_str().unwrap(),
        "--out",
        fit_dir.to_str().unwrap(),
        "--kind",
        "mvvg",
        "--g-min",
        "2",
        "--g-max",
        "2",
        "--starts",
        "2",
    ]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let st = run(&[
        "evaluate",
        "--pred",
        fit_dir.join("map_labels_mvvg_g2.csv").to_str().unwrap(),
        "--truth",
        out.join("labels.csv").to_str().unwrap(),
        "--mask",
        train.to_str().unwrap(),
    ]);
    assert!(st.status.success());
    let report: serde_json::Value =
        serde_json::from_str(std::str::from_utf8(&st.stdout).unwrap()).unwrap();
    assert_eq!(report["n_evaluated"], 80);
    assert!(report["mcr"].as_f64().unwrap() <= 0.05, "{report}");
}

#[test]
fn threads_env_is_respected() {
    // Smoke: the variable must not break anything.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let st = matmix()
        .env("MATMIX_THREADS", "1")
        .args(["simulate", "sim1_mvgh", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(st.status.success());
    assert!(Path::new(&out.join("truth.json")).exists());
}
