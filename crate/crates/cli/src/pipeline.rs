//! Stages of an experiment run: data, training, evaluation, reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gensim::draw::Style;
use gensim::eval::{
    logistic_probe, oddball_error_rate, pca_project, ridge_probe, spearman_exact, spearman_rho, ProbeReport, Threshold,
};
use gensim::gaussian::{closed_form_log_gen_sim, GaussianMixture};
use gensim::net::{load_checkpoint, save_checkpoint, Model, NetSpec};
use gensim::numeric::dist;
use gensim::par;
use gensim::process::{pair_distances_of, Embed, PairDistances};
use gensim::quad::QuadCategory;
use gensim::raster::Raster;
use gensim::rng::derive_seed;
use gensim::train::{train_run, DataSource, EpochRecord, LossKind, TrainOptions};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, Objective};
use crate::data::{load_or_generate, write_artifacts, Datasets, DrawData, GaussData, QuadData};
use crate::error::{CliError, StageExt};
use crate::report::{write_csv, write_json, Cell};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    GenData,
    Train,
    Eval,
    Run,
    Probe,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::GenData => "gen-data",
            Stage::Train => "train",
            Stage::Eval => "eval",
            Stage::Run => "run",
            Stage::Probe => "probe",
        }
    }
}

/// What a finished invocation leaves behind.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub config_hash: String,
    /// Contents of `metrics.json` (or `probes.json`), when the stage writes one.
    pub metrics: Option<Value>,
}

pub fn default_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    let name = match cfg.experiment {
        Experiment::Gauss => "gauss",
        Experiment::Quad => "quad",
        Experiment::Draw => "draw",
    };
    PathBuf::from("runs").join(format!("{name}-seed{}", cfg.seed))
}

fn checkpoint_path(out: &Path, o: Objective) -> PathBuf {
    out.join("models").join(format!("{}.ckpt", o.name()))
}

#[derive(Debug, Clone, Serialize)]
struct Manifest {
    config_hash: String,
    code_version: &'static str,
    data_key: String,
    data_from_cache: Option<bool>,
    stages_completed: Vec<&'static str>,
    partial: bool,
    failed_stage: Option<String>,
    error: Option<String>,
    artifacts: Vec<String>,
}

impl Manifest {
    fn save(&self, out: &Path) -> Result<(), CliError> {
        let mut m = self.clone();
        m.artifacts.sort();
        m.artifacts.dedup();
        write_json(&out.join("manifest.json"), &serde_json::to_value(&m).expect("manifest serializes"))
    }
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    out: PathBuf,
    manifest: Manifest,
}

/// Runs `stage` of the experiment described by `cfg`, writing everything under
/// its output directory. The manifest records progress; on failure it is left
/// marked partial with the failing stage.
pub fn run_experiment(cfg: &ExperimentConfig, stage: Stage) -> Result<RunSummary, CliError> {
    let out = cfg.out_dir.clone().unwrap_or_else(|| default_out_dir(cfg));
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let manifest = Manifest {
        config_hash: cfg.hash(),
        code_version: CODE_VERSION,
        data_key: crate::data::data_key(cfg),
        data_from_cache: None,
        stages_completed: Vec::new(),
        partial: true,
        failed_stage: None,
        error: None,
        artifacts: vec!["config.json".into(), "manifest.json".into()],
    };
    crate::report::write_file(&out.join("config.json"), cfg.canonical_json().as_bytes())?;
    let mut run = Run { cfg, out, manifest };
    run.manifest.save(&run.out)?;
    match run.execute(stage) {
        Ok(metrics) => {
            run.manifest.partial = false;
            run.manifest.save(&run.out)?;
            Ok(RunSummary { out_dir: run.out, config_hash: run.manifest.config_hash, metrics })
        }
        Err(e) => {
            run.manifest.failed_stage = Some(match &e {
                CliError::Stage { stage, .. } => stage.to_string(),
                _ => stage.name().to_string(),
            });
            run.manifest.error = Some(e.to_string());
            // The original error matters more than a failure to record it.
            let _ = run.manifest.save(&run.out);
            Err(e)
        }
    }
}

impl Run<'_> {
    fn record(&mut self, stage: &'static str, artifacts: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        self.manifest.stages_completed.push(stage);
        self.manifest.artifacts.extend(artifacts);
        self.manifest.save(&self.out)
    }

    fn execute(&mut self, stage: Stage) -> Result<Option<Value>, CliError> {
        if stage == Stage::Probe && self.cfg.experiment != Experiment::Draw {
            return Err(CliError::Config("probe: only the draw experiment has probes".into()));
        }
        let cache = crate::data::cache_dir();
        let (data, cached) = load_or_generate(self.cfg, cache.as_deref())?;
        self.manifest.data_from_cache = Some(cached);
        if matches!(stage, Stage::GenData | Stage::Run) {
            let written = write_artifacts(self.cfg, &data, &self.out)?;
            self.record("gen-data", written)?;
        }
        let models = match stage {
            Stage::GenData => return Ok(None),
            Stage::Train | Stage::Run => {
                let (models, written) = train_all(self.cfg, &data, &self.out)?;
                self.record("train", written)?;
                if stage == Stage::Train {
                    return Ok(None);
                }
                models
            }
            Stage::Eval | Stage::Probe => load_models(self.cfg, &self.out)?,
        };
        if stage == Stage::Probe {
            let Datasets::Draw(d) = &data else { unreachable!("checked above") };
            let mut report = serde_json::Map::new();
            for (o, m) in &models {
                let emb = embed_all(m, &d.test.0).stage("probe")?;
                report.insert(o.name().into(), serde_json::to_value(draw_probes(self.cfg, d, &emb)?).expect("json"));
            }
            let v = json!({"config_hash": self.manifest.config_hash, "probes": report});
            write_json(&self.out.join("probes.json"), &v)?;
            self.record("probe", ["probes.json".to_string()])?;
            return Ok(Some(v));
        }
        let (metrics, written) = evaluate(self.cfg, &data, &models, &self.out, &self.manifest.config_hash)?;
        self.record("eval", written)?;
        Ok(Some(metrics))
    }
}

fn load_models(cfg: &ExperimentConfig, out: &Path) -> Result<BTreeMap<Objective, Model>, CliError> {
    cfg.objectives
        .iter()
        .map(|&o| {
            let params = load_checkpoint(checkpoint_path(out, o), &cfg.net).stage("eval")?;
            Ok((o, Model::new(cfg.net.clone(), params).stage("eval")?))
        })
        .collect()
}

fn train_source<'a>(
    cfg: &ExperimentConfig,
    data: &'a Datasets,
    loss: LossKind,
    labels_storage: &'a [usize],
    rasters: &'a [Raster],
) -> Result<DataSource<'a>, CliError> {
    let src = match (data, loss) {
        (Datasets::Gauss(g), _) => DataSource::Triplets(&g.train),
        (Datasets::Quad(q), LossKind::GenSimRegression) => {
            DataSource::PairTargets { items: &q.train.0, descriptors: &q.train_descriptors }
        }
        (Datasets::Quad(q), LossKind::Supervised) => {
            DataSource::Labeled { items: &q.train.0, labels: &q.train_labels, n_classes: QuadCategory::ALL.len() }
        }
        (Datasets::Quad(q), l) if l.is_triplet() => DataSource::LabeledTriplets { items: &q.train.0, labels: &q.train_labels },
        (Datasets::Draw(d), LossKind::Supervised) => {
            DataSource::Labeled { items: &d.train.0, labels: labels_storage, n_classes: Style::ALL.len() }
        }
        (Datasets::Draw(d), l) if l.is_triplet() => DataSource::LabeledTriplets { items: &d.train.0, labels: labels_storage },
        (Datasets::Quad(_) | Datasets::Draw(_), LossKind::InfoNce { .. }) => {
            DataSource::Augmented { items: rasters, augment: cfg.augment }
        }
        (_, l) => return Err(CliError::Config(format!("train.loss: {l:?} does not fit the {:?} experiment", cfg.experiment))),
    };
    Ok(src)
}

fn rasters_of(inputs: &[Vec<f64>], size: usize) -> gensim::Result<Vec<Raster>> {
    inputs.iter().map(|v| Raster::from_vec(size, v.clone())).collect()
}

fn train_all(
    cfg: &ExperimentConfig,
    data: &Datasets,
    out: &Path,
) -> Result<(BTreeMap<Objective, Model>, Vec<String>), CliError> {
    let draw_labels: Vec<usize> = match data {
        Datasets::Draw(d) => d.train_meta.iter().map(|m| m.style_label).collect(),
        _ => Vec::new(),
    };
    let rasters = if cfg.objectives.contains(&Objective::Simclr) {
        match data {
            Datasets::Quad(q) => {
                let size = cfg.quad.as_ref().expect("resolved").raster_size;
                let src = q.train_rasters.as_ref().ok_or_else(|| CliError::Config("simclr needs raster input".into()))?;
                rasters_of(&src.0, size).stage("train")?
            }
            Datasets::Draw(d) => rasters_of(&d.train.0, cfg.draw.as_ref().expect("resolved").raster_size).stage("train")?,
            Datasets::Gauss(_) => Vec::new(),
        }
    } else {
        Vec::new()
    };
    let mut models = BTreeMap::new();
    let mut written = Vec::new();
    for &o in &cfg.objectives {
        let tc = cfg.objective_train(o);
        let source = train_source(cfg, data, tc.loss, &draw_labels, &rasters)?;
        let ckpt = checkpoint_path(out, o);
        let options = TrainOptions { initial: None, checkpoint_path: Some(ckpt.clone()) };
        let result = train_run(&cfg.net, &tc, source, &options).stage("train")?;
        // Also written for zero-epoch runs, where the loop never saves.
        save_checkpoint(&ckpt, &cfg.net, &result.params).stage("train")?;
        let log_name = format!("logs/epochs_{}.csv", o.name());
        write_epoch_log(&out.join(&log_name), &result.log)?;
        written.push(format!("models/{}.ckpt", o.name()));
        written.push(log_name);
        models.insert(o, Model::new(cfg.net.clone(), result.params).stage("train")?);
    }
    Ok((models, written))
}

fn write_epoch_log(path: &Path, log: &[EpochRecord]) -> Result<(), CliError> {
    let rows: Vec<Vec<Cell>> =
        log.iter().map(|r| vec![r.epoch.into(), r.mean_loss.into(), r.wall_ms.into()]).collect();
    write_csv(path, &["epoch", "mean_loss", "wall_ms"], &rows)
}

fn embed_all(model: &Model, inputs: &[Vec<f64>]) -> gensim::Result<Vec<Vec<f64>>> {
    par::try_map_indexed(inputs.len(), |i| model.embed(&inputs[i]))
}

fn separation_json(p: &PairDistances) -> Value {
    json!({
        "mean_same": p.mean_same,
        "mean_diff": p.mean_diff,
        "ci_same": [p.ci_same.lo, p.ci_same.hi],
        "ci_diff": [p.ci_diff.lo, p.ci_diff.hi],
        "n": p.n,
        "separated": p.separated(),
    })
}

fn rho_json(r: gensim::Result<(f64, f64)>) -> Value {
    match r {
        Ok((rho, p)) => json!({"rho": rho, "p_value": p}),
        // Constant error rates leave the correlation undefined.
        Err(_) => json!({"rho": null, "p_value": null}),
    }
}

fn evaluate(
    cfg: &ExperimentConfig,
    data: &Datasets,
    models: &BTreeMap<Objective, Model>,
    out: &Path,
    config_hash: &str,
) -> Result<(Value, Vec<String>), CliError> {
    let mut per_objective = serde_json::Map::new();
    let mut written = Vec::new();
    for (o, model) in models {
        let sep = match data {
            Datasets::Gauss(g) => pair_distances_of(model, &g.separation),
            Datasets::Quad(q) => pair_distances_of(model, &q.separation),
            Datasets::Draw(d) => pair_distances_of(model, &d.separation),
        }
        .stage("eval")?;
        let mut m = match data {
            Datasets::Gauss(g) => eval_gauss(cfg, g, model, out, &mut written)?,
            Datasets::Quad(q) => eval_quad(q, *o, model, out, &mut written)?,
            Datasets::Draw(d) => eval_draw(cfg, d, *o, model, out, &mut written)?,
        };
        m["separation"] = separation_json(&sep);
        let log_path = out.join(format!("logs/epochs_{}.csv", o.name()));
        m["final_loss"] = last_logged_loss(&log_path).map_or(Value::Null, Value::from);
        per_objective.insert(o.name().into(), m);
    }
    let mut metrics = json!({
        "config_hash": config_hash,
        "code_version": CODE_VERSION,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "objectives": per_objective,
    });
    if cfg.experiment == Experiment::Draw {
        let get = |o: &str, k: &str| metrics["objectives"][o][k]["mean"].as_f64();
        if let (Some(ga), Some(sa), Some(gr), Some(sr)) = (
            get("gensim", "style_probe"),
            get("simclr", "style_probe"),
            get("gensim", "count_probe"),
            get("simclr", "count_probe"),
        ) {
            metrics["comparison"] = json!({"style_accuracy_gap": ga - sa, "count_r2_gap": gr - sr});
        }
    }
    write_json(&out.join("metrics.json"), &metrics)?;
    written.push("metrics.json".into());
    Ok((metrics, written))
}

fn last_logged_loss(path: &Path) -> Option<f64> {
    let mut r = csv::Reader::from_path(path).ok()?;
    r.records().filter_map(|rec| rec.ok()).last().and_then(|rec| rec.get(1)?.parse().ok())
}

/// One scalar per input: the embedding itself when it is one-dimensional,
/// else its projection on the first principal axis of `fit`.
fn scalar_scores(fit: &[Vec<f64>], rest: &[Vec<f64>]) -> gensim::Result<(Vec<f64>, Vec<f64>)> {
    if fit[0].len() == 1 {
        return Ok((fit.iter().map(|e| e[0]).collect(), rest.iter().map(|e| e[0]).collect()));
    }
    let pca = pca_project(fit, 1)?;
    let axis = &pca.components[0];
    let proj = |e: &Vec<f64>| e.iter().zip(&pca.mean).zip(axis).map(|((x, m), a)| (x - m) * a).sum::<f64>();
    Ok((fit.iter().map(proj).collect(), rest.iter().map(proj).collect()))
}

fn eval_gauss(
    cfg: &ExperimentConfig,
    g: &GaussData,
    model: &Model,
    out: &Path,
    written: &mut Vec<String>,
) -> Result<Value, CliError> {
    let section = cfg.gauss.as_ref().expect("resolved");
    let mix = GaussianMixture::new(section.means.clone(), section.variance, None).stage("eval")?;
    let fit = embed_all(model, &g.fit_points).stage("eval")?;
    let test = embed_all(model, &g.test_points).stage("eval")?;
    let (fit_s, test_s) = scalar_scores(&fit, &test).stage("eval")?;
    let fit_l: Vec<bool> = g.fit_labels.iter().map(|k| *k == 0).collect();
    let test_l: Vec<bool> = g.test_labels.iter().map(|k| *k == 0).collect();
    let threshold = Threshold::fit(&fit_s, &fit_l).stage("eval")?;
    let accuracy = threshold.accuracy(&test_s, &test_l);

    let mut points: Vec<(f64, f64)> = par::try_map_indexed(g.pairs.len(), |i| {
        let (a, b) = &g.pairs[i];
        let d = dist(&model.embed(a)?, &model.embed(b)?);
        Ok::<_, gensim::Error>((d, closed_form_log_gen_sim(&mix, a, b)?))
    })
    .stage("eval")?;
    points.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let n_bins = section.n_bins;
    let mut rows = Vec::with_capacity(n_bins);
    let (mut mean_d, mut mean_g) = (Vec::new(), Vec::new());
    for b in 0..n_bins {
        let chunk = &points[b * points.len() / n_bins..(b + 1) * points.len() / n_bins];
        let n = chunk.len() as f64;
        let d = chunk.iter().map(|p| p.0).sum::<f64>() / n;
        let s = chunk.iter().map(|p| p.1).sum::<f64>() / n;
        rows.push(vec![b.into(), chunk.len().into(), d.into(), s.into()]);
        mean_d.push(d);
        mean_g.push(s);
    }
    write_csv(&out.join("gensim_vs_distance.csv"), &["bin", "n", "mean_distance", "mean_log_gen_sim"], &rows)?;
    written.push("gensim_vs_distance.csv".into());
    Ok(json!({
        "threshold_accuracy": accuracy,
        "threshold": {"cut": threshold.cut, "sign": threshold.sign},
        "gensim_vs_distance": {"n_bins": n_bins, "spearman": rho_json(spearman_rho(&mean_d, &mean_g))},
    }))
}

fn eval_quad(q: &QuadData, o: Objective, model: &Model, out: &Path, written: &mut Vec<String>) -> Result<Value, CliError> {
    let res = oddball_error_rate(model, &q.trials).stage("eval")?;
    let mut rows = Vec::new();
    let mut per_category = serde_json::Map::new();
    let (mut rates, mut ranks, mut totals) = (Vec::new(), Vec::new(), Vec::new());
    for c in QuadCategory::ALL {
        let Some(e) = res.per_category.get(&c) else { continue };
        let total = c.regularity().total();
        rows.push(vec![
            c.name().into(),
            c.regularity_rank().into(),
            (total as usize).into(),
            e.error_rate.into(),
            e.n_trials.into(),
            e.ties.into(),
        ]);
        per_category.insert(c.name().into(), serde_json::to_value(e).expect("json"));
        rates.push(e.error_rate);
        ranks.push(c.regularity_rank() as f64);
        totals.push(f64::from(total));
    }
    let name = format!("oddball_{}.csv", o.name());
    write_csv(
        &out.join(&name),
        &["category", "regularity_rank", "regularity_total", "error_rate", "n_trials", "ties"],
        &rows,
    )?;
    written.push(name);
    let mean_error = rates.iter().sum::<f64>() / rates.len() as f64;
    Ok(json!({
        "oddball": {
            "per_category": per_category,
            "mean_error": mean_error,
            "rank_correlation": rho_json(spearman_exact(&rates, &ranks)),
            "total_correlation": rho_json(spearman_exact(&rates, &totals)),
        }
    }))
}

/// Style classification and primitive-count regression on frozen test
/// embeddings.
fn draw_probes(cfg: &ExperimentConfig, d: &DrawData, emb: &[Vec<f64>]) -> Result<BTreeMap<&'static str, ProbeReport>, CliError> {
    let labels: Vec<bool> = d.test_meta.iter().map(|m| m.style_label == Style::Celtic.label()).collect();
    let counts: Vec<f64> = d.test_meta.iter().map(|m| (m.motor_count + m.control_count) as f64).collect();
    let grey: Vec<f64> = d.test_meta.iter().map(|m| m.mean_grey).collect();
    let style = logistic_probe(emb, &labels, derive_seed(cfg.seed, "probe/style")).stage("probe")?;
    let count = ridge_probe(emb, &counts, &grey, derive_seed(cfg.seed, "probe/count")).stage("probe")?;
    Ok(BTreeMap::from([("style_probe", style), ("count_probe", count)]))
}

fn eval_draw(
    cfg: &ExperimentConfig,
    d: &DrawData,
    o: Objective,
    model: &Model,
    out: &Path,
    written: &mut Vec<String>,
) -> Result<Value, CliError> {
    let emb = embed_all(model, &d.test.0).stage("eval")?;
    let probes = draw_probes(cfg, d, &emb)?;
    let k = cfg.draw.as_ref().expect("resolved").pca_components;
    let pca = pca_project(&emb, k).stage("eval")?;
    let mut header = vec!["index".to_string(), "style".into(), "motor_count".into(), "control_count".into()];
    header.extend((1..=k).map(|i| format!("pc{i}")));
    let rows: Vec<Vec<Cell>> = d
        .test_meta
        .iter()
        .zip(&pca.projected)
        .enumerate()
        .map(|(i, (m, p))| {
            let mut row: Vec<Cell> = vec![
                i.into(),
                Style::ALL[m.style_label].name().into(),
                m.motor_count.into(),
                m.control_count.into(),
            ];
            row.extend(p.iter().map(|v| Cell::from(*v)));
            row
        })
        .collect();
    let name = format!("pca_{}.csv", o.name());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join(&name), &header, &rows)?;
    written.push(name);
    let mut v = serde_json::to_value(&probes).expect("json");
    v["pca"] = json!({"explained_variance": pca.explained_variance, "truncated": pca.truncated});
    Ok(v)
}

/// Finite-difference check of every loss on the configured network and on a
/// small network of the other architecture. Writes `gradcheck.json`; the flag
/// is false when any check exceeds the tolerance.
pub fn gradcheck(cfg: &ExperimentConfig) -> Result<(Value, bool), CliError> {
    let out = cfg.out_dir.clone().unwrap_or_else(|| default_out_dir(cfg));
    let (mut report, ok) = crate::gradcheck::run(&cfg.net, &small_counterpart(&cfg.net), cfg.seed).stage("gradcheck")?;
    report["config_hash"] = Value::from(cfg.hash());
    write_json(&out.join("gradcheck.json"), &report)?;
    Ok((report, ok))
}

fn small_counterpart(spec: &NetSpec) -> NetSpec {
    match spec {
        NetSpec::Mlp { .. } => NetSpec::conv(16, 2, 4, 4),
        NetSpec::Conv { .. } => NetSpec::mlp(&[8, 16, 4]),
    }
}
