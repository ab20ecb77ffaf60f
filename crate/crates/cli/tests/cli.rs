use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gwsurr::config::RunConfig;
use gwsurr::io::decode;
use gwsurr::nnet::TrainHistory;
use gwsurr::waveform::WaveformSet;

fn gwsurr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwsurr"))
        .args(args)
        .output()
        .expect("spawn gwsurr")
}

fn ok(args: &[&str]) -> String {
    let out = gwsurr(args);
    assert!(
        out.status.success(),
        "gwsurr {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn small_config(dir: &Path) -> PathBuf {
    let mut c = RunConfig {
        n_train: 120,
        n_val: 20,
        n_test: 20,
        ..RunConfig::default()
    };
    c.grid.t_end = 4990.0;
    c.grid.t_coalescence = 5000.0;
    c.grid.n_samples = 1024;
    c.specs = vec!["6".into(), "S-6".into()];
    c.regressor.epochs = 7;
    c.latent.schedule.epochs = 3;
    c.latent.hidden = vec![16];
    c.bench.batch_sizes = vec![10];
    c.bench.repetitions = 1;
    c.out_dir = dir.join("run").to_string_lossy().into_owned();
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&c).unwrap()).unwrap();
    path
}

const PIPELINE: [&str; 8] = [
    "gen-data",
    "build-basis",
    "build-eim",
    "train-ae",
    "pca",
    "train-reg",
    "spline",
    "eval",
];

#[test]
fn full_pipeline_and_figure_exports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    for cmd in PIPELINE {
        ok(&["--config", cfg, cmd]);
    }
    let run = tmp.path().join("run");
    for kind in ["coeffs", "latent", "loss", "mismatch"] {
        ok(&["--config", cfg, "export-fig", kind]);
        assert!(run
            .join(format!("export-fig-{kind}.provenance.json"))
            .is_file());
    }
    ok(&["--config", cfg, "bench"]);

    let loss = fs::read_to_string(run.join("fig_loss.csv")).unwrap();
    let mut lines = loss.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epoch,lr,train_6,val_6,train_S-6,val_S-6"
    );
    assert_eq!(lines.count(), 7);
    let history: TrainHistory =
        serde_json::from_str(&fs::read_to_string(run.join("history_6.json")).unwrap()).unwrap();
    assert_eq!(history.train_loss.len(), 7);

    let coeffs = fs::read_to_string(run.join("fig_coeffs.csv")).unwrap();
    let header = coeffs.lines().next().unwrap();
    assert!(header.starts_with("q,re_a1,"));
    let m = header.split(',').filter(|c| c.starts_with("re_")).count();
    assert!(header.ends_with(&format!("im_a{m}")));
    assert_eq!(coeffs.lines().count(), 121);

    let latent = fs::read_to_string(run.join("fig_latent.csv")).unwrap();
    assert_eq!(
        latent.lines().next().unwrap(),
        "q,y1,y2,angle_unwrapped,radius"
    );

    let mm = fs::read_to_string(run.join("fig_mismatch.csv")).unwrap();
    assert_eq!(
        mm.lines().next().unwrap(),
        "network,spiral,max,median,p95,max_batch"
    );
    assert_eq!(mm.lines().count(), 3);

    // eval references the exact weight files it read
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("eval.json")).unwrap()).unwrap();
    for model in eval["models"].as_array().unwrap() {
        let file = model["weights"]["file"].as_str().unwrap();
        let bytes = fs::read(run.join(file)).unwrap();
        use sha2::Digest;
        let hash = format!("{:x}", sha2::Sha256::digest(&bytes));
        assert_eq!(model["weights"]["sha256"], hash.as_str());
    }
    assert!(eval["eim_floor"]["max"].as_f64().unwrap() <= 1e-8);
    let prov: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("eval.provenance.json")).unwrap())
            .unwrap();
    assert_eq!(prov["command"], "eval");
    assert!(prov["inputs"].as_array().unwrap().len() >= 4);
    assert!(!run.join(".gwsurr.lock").exists());
}

#[test]
fn gen_data_is_equispaced_and_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = RunConfig {
        n_train: 5,
        n_val: 4,
        n_test: 4,
        ..RunConfig::default()
    };
    c.grid.n_samples = 256;
    let path = tmp.path().join("c.json");
    fs::write(&path, serde_json::to_string(&c).unwrap()).unwrap();
    let read = |dir: &str, file: &str| -> WaveformSet {
        decode(&fs::read(tmp.path().join(dir).join(file)).unwrap()).unwrap()
    };
    for dir in ["a", "b"] {
        let out = tmp.path().join(dir);
        ok(&[
            "--config",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "gen-data",
        ]);
    }
    assert_eq!(
        read("a", "train_waveforms.gws").q_values,
        vec![1.0, 1.25, 1.5, 1.75, 2.0]
    );
    assert_eq!(
        read("a", "val_waveforms.gws").q_values,
        read("b", "val_waveforms.gws").q_values
    );
    assert_eq!(
        fs::read(tmp.path().join("a/test_waveforms.gws")).unwrap(),
        fs::read(tmp.path().join("b/test_waveforms.gws")).unwrap()
    );
    let other = tmp.path().join("c");
    ok(&[
        "--config",
        path.to_str().unwrap(),
        "--out",
        other.to_str().unwrap(),
        "--seed",
        "5",
        "gen-data",
    ]);
    assert_ne!(
        read("a", "val_waveforms.gws").q_values,
        read("c", "val_waveforms.gws").q_values
    );
}

#[test]
fn missing_artifact_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    for cmd in ["gen-data", "build-basis", "build-eim"] {
        ok(&["--config", cfg, cmd]);
    }
    let out = gwsurr(&["--config", cfg, "eval"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("regressor_6.gws"), "{err}");
    assert!(err.contains("train-reg"), "{err}");
}

#[test]
fn corrupt_and_locked_outputs_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    ok(&["--config", cfg, "gen-data"]);
    let run = tmp.path().join("run");
    let train = run.join("train_waveforms.gws");
    let bytes = fs::read(&train).unwrap();
    fs::write(&train, &bytes[..bytes.len() - 8]).unwrap();
    let out = gwsurr(&["--config", cfg, "build-basis"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt artifact"));

    fs::write(&train, &bytes).unwrap();
    fs::write(run.join(".gwsurr.lock"), "1").unwrap();
    let out = gwsurr(&["--config", cfg, "build-basis"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("locked"));
    fs::remove_file(run.join(".gwsurr.lock")).unwrap();
    ok(&["--config", cfg, "build-basis"]);
}

#[test]
fn config_handling() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("paper.json");
    ok(&["init-config", p.to_str().unwrap(), "--preset", "paper-q1-8"]);
    let c: RunConfig = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(c, RunConfig::preset("paper-q1-8").unwrap());
    assert!(!gwsurr(&["init-config", "x.json", "--preset", "nope"])
        .status
        .success());

    let bad = RunConfig {
        q_min: 0.5,
        out_dir: tmp.path().join("bad").to_string_lossy().into_owned(),
        ..RunConfig::default()
    };
    let p = tmp.path().join("bad.json");
    fs::write(&p, serde_json::to_string(&bad).unwrap()).unwrap();
    let out = gwsurr(&["--config", p.to_str().unwrap(), "gen-data"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("q_min"));
    assert!(
        !gwsurr(&["--spec", "S-x", "--out", bad.out_dir.as_str(), "gen-data"])
            .status
            .success()
    );
    assert!(!gwsurr(&["export-fig", "nonsense"]).status.success());
}
