//! End-to-end tests driving the `fairtrade` binary: every subcommand, the
//! documented exit codes, and reproducibility from emitted config files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairtrade_core::cevae::CevaeCheckpoint;
use fairtrade_core::{stats, AuditReport, Dataset};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairtrade"))
        .args(args)
        .output()
        .expect("failed to spawn fairtrade")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process was killed without an exit code")
}

#[track_caller]
fn assert_success(out: &Output) {
    assert_eq!(code(out), 0, "stdout:\n{}\nstderr:\n{}", stdout(out), stderr(out));
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("temp paths are valid UTF-8")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("cannot read {}: {e}", p.display()))
}

/// Generate a small dataset and train a brief VAE on it.
fn small_pipeline(dir: &Path, dgp: &str) -> (PathBuf, PathBuf) {
    let data = dir.join("data");
    assert_success(&run(&[
        "gen-data", "--dgp", dgp, "--n", "400", "--seed", "11", "--out", path_str(&data),
    ]));
    let cevae = dir.join("cevae");
    assert_success(&run(&[
        "train-cevae", "--data", path_str(&data), "--out", path_str(&cevae),
        "--epochs", "3", "--batch-size", "128", "--d-z", "3", "--hidden", "24", "--seed", "11",
    ]));
    (data, cevae.join("checkpoint.json"))
}

#[test]
fn help_lists_every_subcommand() {
    let out = run(&["--help"]);
    assert_success(&out);
    let text = stdout(&out);
    for cmd in [
        "gen-data", "train-cevae", "train-aux", "sweep", "eval", "pse", "identifiability",
        "audit",
    ] {
        assert!(text.contains(cmd), "--help does not mention {cmd}:\n{text}");
    }
}

#[test]
fn gen_data_is_deterministic_and_rejects_unknown_dgps() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("one/data");
    let second = dir.path().join("two/data");
    let args = |out: &Path| {
        vec![
            "gen-data".to_string(),
            "--dgp".into(), "appendix".into(),
            "--n".into(), "300".into(),
            "--seed".into(), "1".into(),
            "--out".into(), path_str(out).into(),
        ]
    };
    let a1: Vec<String> = args(&first);
    let a2: Vec<String> = args(&second);
    assert_success(&run(&a1.iter().map(String::as_str).collect::<Vec<_>>()));
    assert_success(&run(&a2.iter().map(String::as_str).collect::<Vec<_>>()));

    for ext in ["csv", "schema.json"] {
        let lhs = read(&first.with_extension(ext));
        let rhs = read(&second.with_extension(ext));
        assert_eq!(lhs, rhs, "same command must write identical {ext} files");
    }
    // The resolved config reproduces the run on its own.
    let third = dir.path().join("three/data");
    let out = run(&[
        "gen-data", "--config", path_str(&first.with_extension("config.toml")),
        "--out", path_str(&third),
    ]);
    assert_success(&out);
    assert_eq!(read(&first.with_extension("csv")), read(&third.with_extension("csv")));

    let bad = run(&["gen-data", "--dgp", "nope", "--out", path_str(&dir.path().join("x"))]);
    assert_eq!(code(&bad), 2, "unknown DGP must exit 2");
    assert!(stderr(&bad).contains("nope"), "{}", stderr(&bad));
}

#[test]
fn gen_data_fig2_outcome_is_bimodal_only_with_the_effect() {
    let dir = tempfile::tempdir().unwrap();
    let p_value = |dgp: &str, stem: &str| {
        let out = dir.path().join(stem);
        assert_success(&run(&[
            "gen-data", "--dgp", dgp, "--n", "3000", "--seed", "7", "--out", path_str(&out),
        ]));
        let ds = Dataset::read_csv(&out).unwrap();
        stats::dip_p_value(ds.column("Y").unwrap(), 200, 101)
    };
    assert!(p_value("fig2-default", "d") < 0.01, "fig2-default Y should be bimodal");
    assert!(p_value("fig2-null", "n") > 0.10, "fig2-null Y should be unimodal");
}

#[test]
fn train_cevae_emits_artifacts_and_reproduces_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let (_, ckpt) = small_pipeline(dir.path(), "fig1c-synthetic");
    let cevae_dir = ckpt.parent().unwrap();

    let epochs = read(&cevae_dir.join("epochs.csv"));
    let mut lines = epochs.lines();
    assert_eq!(lines.next(), Some("epoch,reg,rec_x,rec_r,rec_y,total"));
    assert_eq!(lines.count(), 3, "one row per epoch");
    assert!(read(&cevae_dir.join("latent_gap.csv")).starts_with("epoch,latent_gap"));
    CevaeCheckpoint::load(&ckpt).unwrap().restore().unwrap();

    let rerun = dir.path().join("rerun");
    assert_success(&run(&[
        "train-cevae", "--config", path_str(&cevae_dir.join("config.toml")),
        "--out", path_str(&rerun),
    ]));
    assert_eq!(
        read(&ckpt),
        read(&rerun.join("checkpoint.json")),
        "retraining from the resolved config must be bit-identical"
    );
}

#[test]
fn train_cevae_numerical_abort_exits_3_with_last_good_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_success(&run(&[
        "gen-data", "--dgp", "fig1c-synthetic", "--n", "300", "--seed", "3",
        "--out", path_str(&data),
    ]));
    let out = run(&[
        "train-cevae", "--data", path_str(&data), "--out", path_str(&dir.path().join("boom")),
        "--epochs", "3", "--learning-rate", "1e160", "--seed", "3",
    ]);
    assert_eq!(code(&out), 3, "numerical abort must exit 3; stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("diverged"), "{}", stderr(&out));
    assert!(
        dir.path().join("boom/checkpoint.json").exists(),
        "the last stable epoch is still usable"
    );
}

#[test]
fn train_aux_then_eval_reports_exact_latent_fairness() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = small_pipeline(dir.path(), "fig1c-synthetic");
    let aux_dir = dir.path().join("aux");
    assert_success(&run(&[
        "train-aux", "--checkpoint", path_str(&ckpt), "--data", path_str(&data),
        "--selection", "Z,B", "--aux-epochs", "4", "--seed", "11",
        "--out", path_str(&aux_dir),
    ]));
    assert!(read(&aux_dir.join("loss.csv")).starts_with("epoch,loss"));
    let report: serde_json::Value =
        serde_json::from_str(&read(&aux_dir.join("report.json"))).unwrap();
    assert_eq!(report["selection"], "Z,B");

    let eval_dir = dir.path().join("eval");
    let out = run(&[
        "eval", "--checkpoint", path_str(&ckpt), "--aux-model", path_str(&aux_dir.join("aux.json")),
        "--data", path_str(&data), "--metrics", "accuracy,sp,oracle-cf",
        "--dgp", "fig1c-synthetic", "--n", "250", "--seed", "11",
        "--out", path_str(&eval_dir),
    ]);
    assert_success(&out);
    let metrics: Vec<serde_json::Value> =
        serde_json::from_str(&read(&eval_dir.join("metrics.json"))).unwrap();
    assert_eq!(metrics.len(), 3);
    let cf = metrics.iter().find(|m| m["metric"] == "oracle_cf").unwrap();
    // Latent-only features are frozen under the oracle flip, so the score is
    // exactly 1 — not merely close.
    assert_eq!(cf["value"].as_f64().unwrap(), 1.0);

    let bad = run(&[
        "eval", "--checkpoint", path_str(&ckpt), "--aux-model", path_str(&aux_dir.join("aux.json")),
        "--data", path_str(&data), "--metrics", "specificity",
        "--out", path_str(&dir.path().join("e2")),
    ]);
    assert_eq!(code(&bad), 2);
    assert!(stderr(&bad).contains("valid metrics"), "{}", stderr(&bad));
}

#[test]
fn rstar_selections_require_a_base_value() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = small_pipeline(dir.path(), "fig1c-synthetic");
    let out = run(&[
        "train-aux", "--checkpoint", path_str(&ckpt), "--data", path_str(&data),
        "--selection", "Z,B,R*", "--out", path_str(&dir.path().join("aux")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--base-a"), "{}", stderr(&out));
}

#[test]
fn sweep_rejects_selections_the_model_cannot_serve() {
    let dir = tempfile::tempdir().unwrap();
    // The appendix DGP has covariates only: no base or resolving columns.
    let (data, ckpt) = small_pipeline(dir.path(), "appendix");
    let out = run(&[
        "sweep", "--checkpoint", path_str(&ckpt), "--data", path_str(&data),
        "--selections", "Z;Z,B", "--reps", "1",
        "--out", path_str(&dir.path().join("sweep")),
    ]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("valid columns"), "{err}");
    assert!(err.contains("X1"), "should list the model's actual columns: {err}");
}

#[test]
fn sweep_tabulates_the_ladder_and_reproduces_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = small_pipeline(dir.path(), "fig1c-synthetic");
    let sweep_dir = dir.path().join("sweep");
    assert_success(&run(&[
        "sweep", "--checkpoint", path_str(&ckpt), "--data", path_str(&data),
        "--selections", "Z;Z,B,R,X,A", "--reps", "2", "--aux-epochs", "3", "--seed", "11",
        "--out", path_str(&sweep_dir),
    ]));
    let table = read(&sweep_dir.join("sweep.csv"));
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("selection,accuracy_mean,accuracy_std,sp_mean,sp_std"));
    assert_eq!(lines.count(), 2, "one row per selection:\n{table}");
    let curve = read(&sweep_dir.join("curve.csv"));
    assert_eq!(curve.lines().count(), 1 + 2 * 2, "one point per selection per rep:\n{curve}");

    let rerun = dir.path().join("rerun");
    assert_success(&run(&[
        "sweep", "--config", path_str(&sweep_dir.join("config.toml")), "--out", path_str(&rerun),
    ]));
    assert_eq!(table, read(&rerun.join("sweep.csv")), "sweep must reproduce from its config");
}

#[test]
fn single_selection_sweeps_yield_single_row_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = small_pipeline(dir.path(), "fig1c-synthetic");
    let sweep_dir = dir.path().join("sweep");
    assert_success(&run(&[
        "sweep", "--checkpoint", path_str(&ckpt), "--data", path_str(&data),
        "--selections", "Z", "--reps", "2", "--aux-epochs", "2", "--seed", "4",
        "--out", path_str(&sweep_dir), "--jobs", "2",
    ]));
    assert_eq!(read(&sweep_dir.join("sweep.csv")).lines().count(), 2);
}

#[test]
fn pse_on_a_linear_chain_recovers_coefficient_products() {
    let dir = tempfile::tempdir().unwrap();
    let report = |paths: &str| -> serde_json::Value {
        let out_file = dir.path().join(format!("pse{}.json", paths.len()));
        let out = run(&[
            "pse", "--dgp", "chain:0.8,0.5,0.3", "--paths", paths,
            "--n", "40000", "--seed", "2", "--out", path_str(&out_file),
        ]);
        assert_success(&out);
        serde_json::from_str(&read(&out_file)).unwrap()
    };
    // Linear mechanisms: the nested contrast is the same for every record,
    // so the Monte-Carlo mean hits the coefficient product almost exactly.
    let through_x = report("A>X>Y");
    assert!((through_x["value"].as_f64().unwrap() - 0.8 * 0.5).abs() < 1e-9);
    let direct = report("A>Y");
    assert!((direct["value"].as_f64().unwrap() - 0.3).abs() < 1e-9);
    let nothing = report("");
    assert_eq!(nothing["value"].as_f64().unwrap(), 0.0, "empty path set moves nothing");
}

#[test]
fn identifiability_pins_the_recanting_witness() {
    let single = run(&["identifiability", "--graph", "fig1c", "--paths", "A>X>Y"]);
    assert_success(&single);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&single)).unwrap();
    assert_eq!(doc["identifiable"], false);
    assert_eq!(doc["witness"], "X");

    let empty = run(&["identifiability", "--graph", "fig1c", "--paths", ""]);
    assert_success(&empty);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&empty)).unwrap();
    assert_eq!(doc["identifiable"], true);
    assert_eq!(doc["witness"], serde_json::Value::Null);

    assert_eq!(code(&run(&["identifiability", "--graph", "fig9", "--paths", ""])), 2);
}

#[test]
fn audit_builtin_adapters_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = small_pipeline(dir.path(), "fig1c-synthetic");
    let report = dir.path().join("report.json");
    let again = dir.path().join("again.json");
    for out in [&report, &again] {
        assert_success(&run(&[
            "audit", "--checkpoint", path_str(&ckpt), "--data", path_str(&data),
            "--adapter", "builtin:lr", "--reps", "2", "--aux-epochs", "5", "--seed", "11",
            "--out", path_str(out),
        ]));
    }
    assert_eq!(read(&report), read(&again), "same seed must give identical reports");
    let parsed = AuditReport::from_json(&read(&report)).unwrap();
    assert_eq!(parsed.version, 1);
    assert_eq!(parsed.model, "lr");
    assert_eq!(parsed.reps, 2);
    assert!(report.with_extension("config.toml").exists());

    let bad = run(&[
        "audit", "--checkpoint", path_str(&ckpt), "--data", path_str(&data),
        "--adapter", "builtin:nope", "--out", path_str(&dir.path().join("x.json")),
    ]);
    assert_eq!(code(&bad), 2);
    assert!(stderr(&bad).contains("random_forest"), "{}", stderr(&bad));
}

#[test]
fn audit_drives_external_adapters_over_the_csv_protocol() {
    use std::os::unix::fs::PermissionsExt;

    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = small_pipeline(dir.path(), "fig1c-synthetic");
    let script = dir.path().join("model.sh");
    std::fs::write(&script, "#!/bin/sh\nread header\nwhile read row; do echo 0.5; done\n")
        .unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();

    let report = dir.path().join("external.json");
    let adapter = format!("cmd:{}", script.display());
    assert_success(&run(&[
        "audit", "--checkpoint", path_str(&ckpt), "--data", path_str(&data),
        "--adapter", &adapter, "--reps", "2", "--seed", "11", "--out", path_str(&report),
    ]));
    let parsed = AuditReport::from_json(&read(&report)).unwrap();
    assert!(parsed.model.starts_with("external:"));
    // A constant model cannot react to the counterfactual edit at all.
    assert_eq!(parsed.cf_mean_abs.mean, 1.0);
    assert_eq!(parsed.cf_flip_rate.mean, 1.0);
    assert_eq!(parsed.statistical_parity.mean, 1.0);
}

#[test]
fn json_configs_are_accepted_everywhere_toml_is() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"dgp": "fig1c-synthetic", "n": 150, "seed": 9}"#).unwrap();
    let out_stem = dir.path().join("data");
    assert_success(&run(&["gen-data", "--config", path_str(&cfg), "--out", path_str(&out_stem)]));
    let ds = Dataset::read_csv(&out_stem).unwrap();
    assert_eq!(ds.len(), 150);
}
