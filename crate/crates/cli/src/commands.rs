use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use gwsurr::config::{RunConfig, Split};
use gwsurr::eim::{build_dataset, build_eim, CoefficientDataset, EimModel};
use gwsurr::latent::{
    encode, latent_spiral_diagnostics, pca_fit, train_autoencoder, AutoencoderModel,
};
use gwsurr::nnet::TrainHistory;
use gwsurr::rom::{greedy_build, ReducedBasis};
use gwsurr::surrogate::{
    benchmark, evaluate_set, fit_spline_baseline, max_batch_for_budget, train_regressor,
    ExactCoefficients, Fiducial, MismatchReport, RegressorModel, SplineModel, ThroughputRow,
};
use gwsurr::waveform::{build_aligned_set, build_training_set, WaveformSet};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::store::{read_config, write_new_file, FileRef, Store};
use crate::{Command, FigKind, Global};

pub const CONFIG: &str = "config.json";
pub const TRAIN_WF: &str = "train_waveforms.gws";
pub const VAL_WF: &str = "val_waveforms.gws";
pub const TEST_WF: &str = "test_waveforms.gws";
pub const BASIS: &str = "basis.gws";
pub const EIM: &str = "eim.gws";
pub const TRAIN_DS: &str = "train_coeffs.gws";
pub const VAL_DS: &str = "val_coeffs.gws";
pub const AE: &str = "autoencoder.gws";
pub const PCA: &str = "pca.gws";
pub const SPLINE: &str = "spline.gws";
pub const EVAL: &str = "eval.json";

fn regressor_file(spec: &str) -> String {
    format!("regressor_{spec}.gws")
}

fn history_file(spec: &str) -> String {
    format!("history_{spec}.json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub p95: f64,
    pub extrapolated: usize,
}

impl From<&MismatchReport> for Stats {
    fn from(r: &MismatchReport) -> Self {
        Self {
            n: r.per_sample.len(),
            min: r.min,
            max: r.max,
            median: r.median,
            p95: r.p95,
            extrapolated: r.extrapolated.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub name: String,
    pub spiral: bool,
    pub weights: FileRef,
    pub mismatch: Stats,
}

/// Everything in here is a pure function of the inputs; timings go elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: String,
    pub seed: u64,
    pub test_set: FileRef,
    pub eim: FileRef,
    pub eim_floor: Stats,
    pub models: Vec<ModelEval>,
}

#[derive(Debug, Serialize)]
struct BenchEntry {
    name: String,
    param_count: usize,
    memory_budget_bytes: u64,
    max_batch: u64,
    rows: Vec<ThroughputRow>,
}

fn resolve_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => read_config(p)?,
        None => {
            let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let p = dir.join(CONFIG);
            if p.is_file() {
                read_config(&p)?
            } else {
                RunConfig::default()
            }
        }
    };
    if let Some(o) = &g.out {
        cfg.out_dir = o.to_string_lossy().into_owned();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.tol {
        cfg.tol = t;
    }
    if !g.spec.is_empty() {
        cfg.specs = g.spec.clone();
    }
    Ok(cfg)
}

pub fn run(g: &Global, command: &Command) -> Result<()> {
    if let Command::InitConfig { path, preset } = command {
        let cfg = RunConfig::preset(preset)?;
        write_new_file(path, &serde_json::to_value(&cfg)?)?;
        println!("wrote {preset} preset to {}", path.display());
        return Ok(());
    }
    let mut cfg = resolve_config(g)?;
    let schedule = match command {
        Command::TrainAe => &mut cfg.latent.schedule,
        _ => &mut cfg.regressor,
    };
    if let Some(e) = g.epochs {
        schedule.epochs = e;
    }
    if let Some(b) = g.batch_size {
        schedule.batch_size = b;
    }
    cfg.validate().context("invalid configuration")?;
    let mut store = Store::open(&PathBuf::from(&cfg.out_dir))?;
    let name = match command {
        Command::GenData => gen_data(&mut store, &cfg)?,
        Command::BuildBasis => build_basis(&mut store, &cfg)?,
        Command::BuildEim => build_eim_cmd(&mut store)?,
        Command::TrainAe => train_ae(&mut store, &cfg)?,
        Command::Pca => pca(&mut store, &cfg)?,
        Command::TrainReg => train_reg(&mut store, &cfg)?,
        Command::Eval => eval(&mut store, &cfg)?,
        Command::Spline => spline(&mut store)?,
        Command::Bench => bench(&mut store, &cfg)?,
        Command::ExportFig { kind } => export_fig(&mut store, &cfg, *kind)?,
        Command::InitConfig { .. } => unreachable!(),
    };
    store.finish(name, &cfg)
}

fn gen_data(store: &mut Store, cfg: &RunConfig) -> Result<&'static str> {
    let grid = cfg.grid.grid()?;
    let model = cfg.grid.model();
    let t = Instant::now();
    let train = build_training_set(&model, &cfg.q_values(Split::Train), &grid)?;
    let val = build_aligned_set(&model, &cfg.q_values(Split::Val), &train.alignment)?;
    let test = build_aligned_set(&model, &cfg.q_values(Split::Test), &train.alignment)?;
    eprintln!(
        "generated {}/{}/{} waveforms of {} samples in {:.1}s",
        train.len(),
        val.len(),
        test.len(),
        train.n_samples(),
        t.elapsed().as_secs_f64()
    );
    store.write_json(CONFIG, cfg)?;
    store.write(TRAIN_WF, &train)?;
    store.write(VAL_WF, &val)?;
    store.write(TEST_WF, &test)?;
    Ok("gen-data")
}

fn build_basis(store: &mut Store, cfg: &RunConfig) -> Result<&'static str> {
    let (train, _) = store.read::<WaveformSet>(TRAIN_WF, "gen-data")?;
    let t = Instant::now();
    let basis = greedy_build(&train, cfg.tol)?;
    let seconds = t.elapsed().as_secs_f64();
    println!(
        "reduced basis: {} vectors, final greedy error {:.3e} ({seconds:.1}s)",
        basis.size(),
        basis.greedy_errors.last().copied().unwrap_or(f64::NAN)
    );
    store.write(BASIS, &basis)?;
    store.write_json(
        "basis.json",
        &json!({
            "size": basis.size(),
            "tol": basis.tol,
            "greedy_q": basis.greedy_q,
            "greedy_errors": basis.greedy_errors,
            "orthonormality_defect": basis.orthonormality_defect(),
            "seconds": seconds,
        }),
    )?;
    Ok("build-basis")
}

fn build_eim_cmd(store: &mut Store) -> Result<&'static str> {
    let (basis, _) = store.read::<ReducedBasis>(BASIS, "build-basis")?;
    let (train, _) = store.read::<WaveformSet>(TRAIN_WF, "gen-data")?;
    let (val, _) = store.read::<WaveformSet>(VAL_WF, "gen-data")?;
    let eim = build_eim(&basis)?;
    let train_ds = build_dataset(&train, &eim)?;
    let val_ds = build_dataset(&val, &eim)?.with_standardizer(train_ds.standardizer.clone())?;
    println!(
        "EIM: {} nodes, condition number {:.3}",
        eim.size(),
        eim.condition
    );
    store.write(EIM, &eim)?;
    store.write(TRAIN_DS, &train_ds)?;
    store.write(VAL_DS, &val_ds)?;
    let times: Vec<f64> = eim.node_indices.iter().map(|&i| eim.grid.time(i)).collect();
    store.write_json(
        "eim.json",
        &json!({"node_indices": eim.node_indices, "node_times": times, "condition": eim.condition}),
    )?;
    Ok("build-eim")
}

fn train_ae(store: &mut Store, cfg: &RunConfig) -> Result<&'static str> {
    let (ds, _) = store.read::<CoefficientDataset>(TRAIN_DS, "build-eim")?;
    let t = Instant::now();
    let fit = train_autoencoder(&ds, &cfg.autoencoder())?;
    let seconds = t.elapsed().as_secs_f64();
    let latent = encode(&fit.model, &ds)?;
    let diag = latent_spiral_diagnostics(&latent, &ds.q)?;
    println!(
        "autoencoder: MSE {:.3e}, angle/q Spearman {:.4}, R^2 {:.4} ({seconds:.1}s)",
        fit.mse, diag.angle_q_spearman, diag.linear_fit_r2
    );
    store.write(AE, &fit.model)?;
    store.write_json("ae_history.json", &fit.history)?;
    store.write_json(
        "latent.json",
        &json!({
            "mse": fit.mse,
            "angle_q_spearman": diag.angle_q_spearman,
            "linear_fit_r2": diag.linear_fit_r2,
            "slope": diag.slope,
            "intercept": diag.intercept,
            "center": diag.center,
            "seconds": seconds,
        }),
    )?;
    Ok("train-ae")
}

fn pca(store: &mut Store, cfg: &RunConfig) -> Result<&'static str> {
    let (ds, _) = store.read::<CoefficientDataset>(TRAIN_DS, "build-eim")?;
    let fit = pca_fit(&ds.values, cfg.latent.pca_components, cfg.latent.scaling)?;
    for w in &fit.warnings {
        eprintln!("warning: {w}");
    }
    println!("PCA({}): MSE {:.3e}", fit.model.k(), fit.mse);
    store.write(PCA, &fit.model)?;
    store.write_json(
        "pca.json",
        &json!({"k": fit.model.k(), "mse": fit.mse, "singular_values": fit.model.singular_values,
                "warnings": fit.warnings}),
    )?;
    Ok("pca")
}

fn train_reg(store: &mut Store, cfg: &RunConfig) -> Result<&'static str> {
    let (train, _) = store.read::<CoefficientDataset>(TRAIN_DS, "build-eim")?;
    let (val, _) = store.read::<CoefficientDataset>(VAL_DS, "build-eim")?;
    let tc = cfg.regressor_train();
    for (text, spec) in cfg.specs.iter().zip(cfg.network_specs()?) {
        let t = Instant::now();
        let fit = train_regressor(&train, Some(&val), &spec, &tc)
            .with_context(|| format!("training {text}"))?;
        println!(
            "{text}: {} parameters, train loss {:.3e}, val loss {:.3e} ({:.1}s)",
            fit.model.network.param_count(),
            fit.history
                .train_loss
                .last()
                .copied()
                .unwrap_or(fit.history.initial_loss),
            fit.history.val_loss.last().copied().unwrap_or(f64::NAN),
            t.elapsed().as_secs_f64()
        );
        store.write(&regressor_file(text), &fit.model)?;
        store.write_json(&history_file(text), &fit.history)?;
    }
    Ok("train-reg")
}

fn spline(store: &mut Store) -> Result<&'static str> {
    let (ds, _) = store.read::<CoefficientDataset>(TRAIN_DS, "build-eim")?;
    let t = Instant::now();
    let model = fit_spline_baseline(&ds)?;
    let seconds = t.elapsed().as_secs_f64();
    println!("spline: {} knots ({seconds:.3}s)", model.knots.len());
    store.write(SPLINE, &model)?;
    store.write_json(
        "spline.json",
        &json!({"knots": model.knots.len(), "fit_seconds": seconds}),
    )?;
    Ok("spline")
}

fn eval(store: &mut Store, cfg: &RunConfig) -> Result<&'static str> {
    let (eim, eim_ref) = store.read::<EimModel>(EIM, "build-eim")?;
    let (test, test_ref) = store.read::<WaveformSet>(TEST_WF, "gen-data")?;
    let mut timing = serde_json::Map::new();
    let mut models = Vec::new();
    let csv = |store: &mut Store, name: &str, r: &MismatchReport| {
        store.write_csv(&format!("mismatch_{name}.csv"), |b| Ok(r.write_csv(b)?))
    };
    for text in &cfg.specs {
        let (model, weights) = store.read::<RegressorModel>(&regressor_file(text), "train-reg")?;
        let t = Instant::now();
        let r = evaluate_set(&model, &test, &eim)?;
        timing.insert(text.clone(), json!(t.elapsed().as_secs_f64()));
        csv(store, text, &r)?;
        models.push(ModelEval {
            name: text.clone(),
            spiral: model.spec.use_spiral,
            weights,
            mismatch: Stats::from(&r),
        });
    }
    if store.exists(SPLINE) {
        let (model, weights) = store.read::<SplineModel>(SPLINE, "spline")?;
        let t = Instant::now();
        let r = evaluate_set(&model, &test, &eim)?;
        timing.insert("spline".into(), json!(t.elapsed().as_secs_f64()));
        csv(store, "spline", &r)?;
        models.push(ModelEval {
            name: "spline".into(),
            spiral: false,
            weights,
            mismatch: Stats::from(&r),
        });
    }
    let fiducial_model = cfg.grid.model();
    let floor = ExactCoefficients {
        fiducial: Fiducial {
            model: &fiducial_model,
            alignment: &test.alignment,
        },
        eim: &eim,
        range: (cfg.q_min, cfg.q_max),
    };
    let floor = evaluate_set(&floor, &test, &eim)?;
    println!(
        "{:<16} {:>10} {:>10} {:>10}",
        "model", "max", "median", "p95"
    );
    for m in &models {
        let s = &m.mismatch;
        println!(
            "{:<16} {:>10.3e} {:>10.3e} {:>10.3e}",
            m.name, s.max, s.median, s.p95
        );
    }
    println!(
        "{:<16} {:>10.3e} {:>10.3e} {:>10.3e}",
        "eim-floor", floor.max, floor.median, floor.p95
    );
    let report = EvalReport {
        version: gwsurr::VERSION.into(),
        seed: cfg.seed,
        test_set: test_ref,
        eim: eim_ref,
        eim_floor: Stats::from(&floor),
        models,
    };
    store.write_json(EVAL, &report)?;
    store.write_json("eval_timing.json", &json!({"seconds": timing}))?;
    Ok("eval")
}

fn bench(store: &mut Store, cfg: &RunConfig) -> Result<&'static str> {
    let mut entries = Vec::new();
    for text in &cfg.specs {
        let (model, _) = store.read::<RegressorModel>(&regressor_file(text), "train-reg")?;
        let rows = benchmark(&model, &cfg.bench.batch_sizes, cfg.bench.repetitions)?;
        let max_batch = max_batch_for_budget(&model, cfg.bench.memory_budget_bytes);
        for r in &rows {
            println!(
                "{text:<16} batch {:>7}: {:.3e} s, {:.3e} q/s",
                r.batch_size, r.median_seconds, r.q_per_second
            );
        }
        entries.push(BenchEntry {
            name: text.clone(),
            param_count: model.network.param_count(),
            memory_budget_bytes: cfg.bench.memory_budget_bytes,
            max_batch,
            rows,
        });
    }
    store.write_json("bench.json", &entries)?;
    Ok("bench")
}

fn export_fig(store: &mut Store, cfg: &RunConfig, kind: FigKind) -> Result<&'static str> {
    match kind {
        FigKind::Coeffs => {
            let (ds, _) = store.read::<CoefficientDataset>(TRAIN_DS, "build-eim")?;
            let m = ds.n_coefficients();
            store.write_csv("fig_coeffs.csv", |b| {
                let head: Vec<String> = std::iter::once("q".to_string())
                    .chain((1..=m).map(|j| format!("re_a{j}")))
                    .chain((1..=m).map(|j| format!("im_a{j}")))
                    .collect();
                writeln!(b, "{}", head.join(","))?;
                for (i, q) in ds.q.iter().enumerate() {
                    let row: Vec<String> = ds.values.row(i).iter().map(|v| v.to_string()).collect();
                    writeln!(b, "{q},{}", row.join(","))?;
                }
                Ok(())
            })?;
        }
        FigKind::Latent => {
            let (ds, _) = store.read::<CoefficientDataset>(TRAIN_DS, "build-eim")?;
            let (model, _) = store.read::<AutoencoderModel>(AE, "train-ae")?;
            let diag = latent_spiral_diagnostics(&encode(&model, &ds)?, &ds.q)?;
            store.write_csv("fig_latent.csv", |b| Ok(diag.write_csv(b)?))?;
        }
        FigKind::Loss => {
            let mut histories = Vec::new();
            for text in &cfg.specs {
                let h: TrainHistory = store.read_json(&history_file(text), "train-reg")?;
                histories.push((text, h));
            }
            let epochs = histories
                .iter()
                .map(|(_, h)| h.train_loss.len())
                .max()
                .unwrap_or(0);
            store.write_csv("fig_loss.csv", |b| {
                write!(b, "epoch,lr")?;
                for (t, _) in &histories {
                    write!(b, ",train_{t},val_{t}")?;
                }
                writeln!(b)?;
                for e in 0..epochs {
                    let lr = histories.iter().find_map(|(_, h)| h.lr.get(e)).copied();
                    write!(b, "{e},{}", lr.map(|v| v.to_string()).unwrap_or_default())?;
                    for (_, h) in &histories {
                        let cell = |v: Option<&f64>| v.map(|x| x.to_string()).unwrap_or_default();
                        write!(
                            b,
                            ",{},{}",
                            cell(h.train_loss.get(e)),
                            cell(h.val_loss.get(e))
                        )?;
                    }
                    writeln!(b)?;
                }
                Ok(())
            })?;
        }
        FigKind::Mismatch => {
            let report: EvalReport = store.read_json(EVAL, "eval")?;
            let mut rows = Vec::new();
            for m in report.models.iter().filter(|m| m.name != "spline") {
                let file = regressor_file(&m.name);
                let (model, weights) = store.read::<RegressorModel>(&file, "train-reg")?;
                if weights != m.weights {
                    bail!("{file} changed since the last eval; rerun `gwsurr eval`");
                }
                rows.push((
                    m,
                    max_batch_for_budget(&model, cfg.bench.memory_budget_bytes),
                ));
            }
            store.write_csv("fig_mismatch.csv", |b| {
                writeln!(b, "network,spiral,max,median,p95,max_batch")?;
                for (m, batch) in &rows {
                    let s = &m.mismatch;
                    writeln!(
                        b,
                        "{},{},{},{},{},{batch}",
                        m.name, m.spiral, s.max, s.median, s.p95
                    )?;
                }
                Ok(())
            })?;
        }
    }
    Ok(match kind {
        FigKind::Coeffs => "export-fig-coeffs",
        FigKind::Latent => "export-fig-latent",
        FigKind::Loss => "export-fig-loss",
        FigKind::Mismatch => "export-fig-mismatch",
    })
}
