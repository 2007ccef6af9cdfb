use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use iedl::data::{load_idx, make_blobs, make_ood_ring, split, unit_triangle, Dataset, SplitSpec};
use iedl::eval::{
    aggregate, aggregate_csv, confidence_from_scores, energy_distance, normalize_jointly, ood_from_scores, TaskReport,
};
use iedl::net::{predict_dataset, train, EpochLog, EvidentialMlp, Scores};
use iedl::oracle::{run_all, OracleConfig};
use iedl::seed::derive;

use crate::config::{DatasetKind, RunConfig, Task};
use crate::error::{io_err, CliError, CliResult};

fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn prepare_out(cfg: &RunConfig, command: &str) -> CliResult<()> {
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    write(&cfg.out.join(format!("{command}.manifest")), &cfg.manifest(command))
}

fn required<'a>(key: &str, p: &'a Option<PathBuf>) -> CliResult<&'a Path> {
    let p = p
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("dataset = idx requires {key}")))?;
    if !p.exists() {
        return Err(CliError::MissingPath(p.to_path_buf()));
    }
    Ok(p)
}

/// Fails fast on any referenced input file that does not exist.
pub fn check_inputs(cfg: &RunConfig) -> CliResult<()> {
    if cfg.dataset == DatasetKind::Idx {
        required("train_images", &cfg.train_images)?;
        required("train_labels", &cfg.train_labels)?;
        required("test_images", &cfg.test_images)?;
        required("test_labels", &cfg.test_labels)?;
        required("ood_images", &cfg.ood_images)?;
    }
    Ok(())
}

fn train_val(cfg: &RunConfig, seed: u64) -> CliResult<(Dataset, Dataset)> {
    let pool = match cfg.dataset {
        DatasetKind::Synthetic => make_blobs(cfg.n_per_class, &unit_triangle(), cfg.blob_sigma, derive(seed, "data/train", 0))?,
        DatasetKind::Idx => {
            let full = load_idx(
                required("train_images", &cfg.train_images)?,
                Some(required("train_labels", &cfg.train_labels)?),
                cfg.classes,
                "train",
            )?;
            if cfg.subset > 0 {
                full.subsample(cfg.subset, derive(seed, "data/subset", 0))?
            } else {
                full
            }
        }
    };
    let parts = split(
        &pool,
        &SplitSpec {
            train: 1.0 - cfg.val_fraction,
            validation: cfg.val_fraction,
            seed: derive(seed, "data/split", 0),
        },
    )?;
    Ok((parts.train, parts.validation))
}

/// ID test set and OOD set for one seed.
fn test_sets(cfg: &RunConfig, seed: u64) -> CliResult<(Dataset, Dataset)> {
    let (test, ood) = match cfg.dataset {
        DatasetKind::Synthetic => {
            let test = make_blobs(cfg.test_per_class, &unit_triangle(), cfg.blob_sigma, derive(seed, "data/test", 0))?;
            let n = if cfg.ood_n > 0 { cfg.ood_n } else { test.len() };
            let ring = make_ood_ring(n, cfg.ring_radius, cfg.ring_sigma, derive(seed, "data/ood", 0))?;
            (test, ring)
        }
        DatasetKind::Idx => (
            load_idx(
                required("test_images", &cfg.test_images)?,
                Some(required("test_labels", &cfg.test_labels)?),
                cfg.classes,
                "test",
            )?,
            load_idx(required("ood_images", &cfg.ood_images)?, None, cfg.classes, "ood")?,
        ),
    };
    if !cfg.ood_equal_size || test.len() == ood.len() {
        return Ok((test, ood));
    }
    let n = test.len().min(ood.len());
    let s = derive(seed, "data/equalize", 0);
    Ok((test.subsample(n, s)?, ood.subsample(n, s)?))
}

fn checkpoint_path(cfg: &RunConfig, seed: u64) -> PathBuf {
    cfg.checkpoint_dir.as_ref().unwrap_or(&cfg.out).join(format!("model_seed{seed}.ckpt"))
}

fn sizes(cfg: &RunConfig, input: usize, classes: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(&cfg.hidden);
    s.push(classes);
    s
}

const EPOCH_HEADER: &str =
    "epoch,lambda_t,train_mse,train_log_det,train_kl,train_total,train_acc,val_mse,val_log_det,val_kl,val_total,val_acc";

fn epoch_csv(log: &[EpochLog]) -> String {
    let mut out = String::from(EPOCH_HEADER);
    out.push('\n');
    for e in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            e.epoch,
            e.lambda_t,
            e.train.mse,
            e.train.log_det,
            e.train.kl,
            e.train.total,
            e.train_accuracy,
            e.val.mse,
            e.val.log_det,
            e.val.kl,
            e.val.total,
            e.val_accuracy
        );
    }
    out
}

pub fn cmd_train(cfg: &RunConfig) -> CliResult<()> {
    cfg.validate()?;
    check_inputs(cfg)?;
    prepare_out(cfg, "train")?;
    for &seed in &cfg.seeds {
        let started = Instant::now();
        let (train_set, val_set) = train_val(cfg, seed)?;
        let mut model = EvidentialMlp::new(&sizes(cfg, train_set.dim(), train_set.classes()), derive(seed, "init", 0))?;
        let log = train(&mut model, &train_set, &val_set, &cfg.train_config(seed))?;
        model.save_file(&checkpoint_path(cfg, seed))?;
        write(&cfg.out.join(format!("epochs_seed{seed}.csv")), &epoch_csv(&log.epochs))?;
        let best = &log.epochs[log.best_epoch];
        println!(
            "seed {seed}: mode {} epochs {} best {} val_total {:.6} val_acc {:.4} ({:.1}s)",
            cfg.mode,
            log.epochs.len(),
            log.best_epoch,
            best.val.total,
            best.val_accuracy,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}

fn load_model(cfg: &RunConfig, seed: u64, data: &Dataset) -> CliResult<EvidentialMlp> {
    let path = checkpoint_path(cfg, seed);
    if !path.exists() {
        return Err(CliError::MissingPath(path));
    }
    let model = EvidentialMlp::load_file(&path)?;
    if model.input_dim() != data.dim() {
        return Err(iedl::Error::Dimension {
            context: "checkpoint input width vs dataset feature width",
            expected: model.input_dim(),
            found: data.dim(),
        }
        .into());
    }
    if data.labels().is_some() && model.classes() != data.classes() {
        return Err(iedl::Error::Dimension {
            context: "checkpoint classes vs dataset classes",
            expected: model.classes(),
            found: data.classes(),
        }
        .into());
    }
    Ok(model)
}

pub fn cmd_eval(cfg: &RunConfig) -> CliResult<()> {
    cfg.validate()?;
    check_inputs(cfg)?;
    for &seed in &cfg.seeds {
        let path = checkpoint_path(cfg, seed);
        if !path.exists() {
            return Err(CliError::MissingPath(path));
        }
    }
    prepare_out(cfg, "eval")?;
    let mut reports: Vec<TaskReport> = Vec::new();
    for &seed in &cfg.seeds {
        let (test, ood) = test_sets(cfg, seed)?;
        let model = load_model(cfg, seed, &test)?;
        log::info!("seed {seed}: {} ID and {} OOD test points", test.len(), ood.len());
        let id_scores = predict_dataset(&model, &test)?;
        for &task in &cfg.tasks {
            let report = match task {
                Task::Confidence => confidence_from_scores(&id_scores, test.require_labels()?)?,
                Task::Ood => ood_from_scores("ood", &id_scores, &predict_dataset(&model, &ood)?)?,
                Task::Noisy => {
                    let noisy = iedl::data::add_noise(&test, cfg.noise_sigma, derive(seed, "noise", 0))?;
                    ood_from_scores("noisy", &id_scores, &predict_dataset(&model, &noisy)?)?
                }
            }
            .with_seed(seed);
            write(&cfg.out.join(format!("{}_seed{seed}.csv", task.name())), &report.to_csv())?;
            reports.push(report);
        }
    }
    let agg = aggregate(&reports);
    let text = aggregate_csv(&agg);
    write(&cfg.out.join("aggregate.csv"), &text)?;
    for r in &agg {
        if r.n == 0 {
            println!("{:<10} {:<13} {:<16} unavailable", r.task, r.score, r.metric);
        } else {
            println!("{:<10} {:<13} {:<16} {:.4} ± {:.4} (n={})", r.task, r.score, r.metric, r.mean, r.std, r.n);
        }
    }
    Ok(())
}

const DENSITY_COLUMNS: [&str; 4] = ["max_p", "alpha0", "diff_ent", "mi"];

fn density_values(s: &Scores) -> [f64; 4] {
    [s.max_p, s.alpha0, s.diff_ent, s.mi]
}

/// Per-sample scores of both sets, jointly normalized columns, and an
/// energy-distance footer.
pub fn density_csv(id: &[Scores], ood: &[Scores]) -> CliResult<String> {
    let mut norm_id = Vec::new();
    let mut norm_ood = Vec::new();
    let mut footer = Vec::new();
    for c in 0..DENSITY_COLUMNS.len() {
        let a: Vec<f64> = id.iter().map(|s| density_values(s)[c]).collect();
        let b: Vec<f64> = ood.iter().map(|s| density_values(s)[c]).collect();
        let (na, nb) = normalize_jointly(&a, &b);
        footer.push(energy_distance(&na, &nb)?);
        norm_id.push(na);
        norm_ood.push(nb);
    }
    let mut out = String::from("set");
    for c in DENSITY_COLUMNS {
        out.push(',');
        out.push_str(c);
    }
    for c in DENSITY_COLUMNS {
        let _ = write!(out, ",{c}_norm");
    }
    out.push('\n');
    for (tag, scores, norm) in [("id", id, &norm_id), ("ood", ood, &norm_ood)] {
        for (i, s) in scores.iter().enumerate() {
            out.push_str(tag);
            for v in density_values(s) {
                let _ = write!(out, ",{v}");
            }
            for col in norm.iter() {
                let _ = write!(out, ",{}", col[i]);
            }
            out.push('\n');
        }
    }
    out.push_str("# energy distance between normalized id and ood columns\n");
    for (c, e) in DENSITY_COLUMNS.iter().zip(&footer) {
        let _ = writeln!(out, "# energy_distance,{c}_norm,{e}");
    }
    Ok(out)
}

pub fn cmd_export_density(cfg: &RunConfig) -> CliResult<()> {
    cfg.validate()?;
    check_inputs(cfg)?;
    prepare_out(cfg, "export-density")?;
    for &seed in &cfg.seeds {
        let (test, ood) = test_sets(cfg, seed)?;
        let model = load_model(cfg, seed, &test)?;
        let text = density_csv(&predict_dataset(&model, &test)?, &predict_dataset(&model, &ood)?)?;
        let path = cfg.out.join(format!("density_seed{seed}.csv"));
        write(&path, &text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_oracle_check(seed: u64, quick: bool, out: &Path) -> CliResult<()> {
    let started = Instant::now();
    let cfg = if quick { OracleConfig::quick(seed) } else { OracleConfig::full(seed) };
    let checks = run_all(&cfg)?;
    let mut csv = String::from("group,name,measured,bound,passed\n");
    for c in &checks {
        println!("{c}");
        let _ = writeln!(csv, "{},\"{}\",{},{},{}", c.group, c.name, c.measured, c.bound, c.passed);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!(
        "{}/{} checks passed in {:.2}s ({} Monte-Carlo draws per estimate)",
        checks.len() - failed,
        checks.len(),
        started.elapsed().as_secs_f64(),
        cfg.mc_samples
    );
    fs::create_dir_all(out).map_err(io_err(out))?;
    write(
        &out.join("oracle-check.manifest"),
        &format!("command = oracle-check\nseed = {seed}\nquick = {quick}\nmc_samples = {}\n", cfg.mc_samples),
    )?;
    write(&out.join("oracle.csv"), &csv)?;
    if failed > 0 {
        return Err(CliError::OracleFailed {
            failed,
            total: checks.len(),
        });
    }
    Ok(())
}
