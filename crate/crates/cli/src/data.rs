//! Dataset generation for the three experiments, the on-disk cache and the
//! human-readable data artifacts.

use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use gensim::draw::{count_primitives, mean_grey, DrawProcess, Style};
use gensim::eval::EvalTrial;
use gensim::gaussian::GaussianMixture;
use gensim::par;
use gensim::process::{sample_triplet_batch_seeded, HierarchicalProcess, Triplet};
use gensim::quad::{make_oddball_trial, rasterize_quad, QuadCategory, Quadrilateral, TransformRanges};
use gensim::raster::Raster;
use gensim::rng::{child_rng, derive_seed};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{DrawSection, ExperimentConfig, Experiment, GaussSection, QuadSection};
use crate::error::{CliError, StageExt};
use crate::report::{canonical_json, sha256_hex, write_file};

/// Bumped whenever generation changes, so stale caches are not reused.
const DATA_FORMAT: &str = "gensim-data-v1";

/// Equal-length network inputs, stored compactly in the cache: as bytes when
/// every value is a multiple of 1/255 in [0, 1], else as raw f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Inputs(pub Vec<Vec<f64>>);

#[derive(Serialize, Deserialize)]
struct EncodedInputs {
    rows: usize,
    cols: usize,
    encoding: String,
    data: String,
}

impl Serialize for Inputs {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        let flat = self.0.iter().flatten();
        let bytes_ok = self.0.iter().flatten().all(|v| (0.0..=1.0).contains(v) && f64::from((v * 255.0).round() as u8) / 255.0 == *v);
        let (encoding, raw): (&str, Vec<u8>) = if bytes_ok {
            ("u8", flat.map(|v| (v * 255.0).round() as u8).collect())
        } else {
            ("f64le", flat.flat_map(|v| v.to_le_bytes()).collect())
        };
        EncodedInputs { rows, cols, encoding: encoding.into(), data: B64.encode(raw) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Inputs {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let e = EncodedInputs::deserialize(d)?;
        let raw = B64.decode(e.data).map_err(D::Error::custom)?;
        let values: Vec<f64> = match e.encoding.as_str() {
            "u8" => raw.iter().map(|b| f64::from(*b) / 255.0).collect(),
            "f64le" => raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect(),
            other => return Err(D::Error::custom(format!("unknown encoding {other}"))),
        };
        if values.len() != e.rows * e.cols {
            return Err(D::Error::custom("input block has the wrong length"));
        }
        if e.cols == 0 {
            return Ok(Inputs(vec![Vec::new(); e.rows]));
        }
        Ok(Inputs(values.chunks(e.cols).map(<[f64]>::to_vec).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussData {
    pub train: Vec<Triplet<Vec<f64>>>,
    /// Points and component labels for fitting the threshold.
    pub fit_points: Vec<Vec<f64>>,
    pub fit_labels: Vec<usize>,
    pub test_points: Vec<Vec<f64>>,
    pub test_labels: Vec<usize>,
    /// Independent draws from the mixture, paired up.
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    pub separation: Vec<Triplet<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub category: QuadCategory,
    pub oddball_index: usize,
    pub seed: u64,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadData {
    pub train: Inputs,
    pub train_labels: Vec<usize>,
    /// The category's 22 feature bits as 0/1.
    pub train_descriptors: Vec<Vec<f64>>,
    /// Present for raster input only.
    pub train_rasters: Option<Inputs>,
    pub trials: Vec<EvalTrial>,
    pub trial_meta: Vec<TrialMeta>,
    pub separation: Vec<Triplet<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawMeta {
    pub program: String,
    pub style_label: usize,
    pub motor_count: usize,
    pub control_count: usize,
    pub seed: u64,
    pub index: u64,
    pub mean_grey: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawData {
    pub train: Inputs,
    pub train_meta: Vec<DrawMeta>,
    pub test: Inputs,
    pub test_meta: Vec<DrawMeta>,
    pub separation: Vec<Triplet<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "lowercase")]
pub enum Datasets {
    Gauss(GaussData),
    Quad(QuadData),
    Draw(DrawData),
}

/// Network input for a quadrilateral.
pub fn quad_input(q: &Quadrilateral, section: &QuadSection) -> Vec<f64> {
    if section.vector_input {
        let c = q.centroid();
        q.vertices().iter().flat_map(|v| [v.x - c.x, v.y - c.y]).collect()
    } else {
        rasterize_quad(q, section.raster_size).into_vec()
    }
}

fn gauss_data(seed: u64, g: &GaussSection, n_sep: usize) -> gensim::Result<GaussData> {
    let mix = GaussianMixture::new(g.means.clone(), g.variance, None)?;
    let points = |purpose: &str, n: usize| -> gensim::Result<(Vec<Vec<f64>>, Vec<usize>)> {
        let base = derive_seed(seed, purpose);
        let drawn = par::try_map_indexed(n, |i| {
            let mut rng = child_rng(base, i as u64);
            let k = mix.sample_param(&mut rng)?;
            Ok::<_, gensim::Error>((mix.sample_datum(&k, &mut rng)?, k))
        })?;
        Ok(drawn.into_iter().unzip())
    };
    let (fit_points, fit_labels) = points("data/fit", g.n_eval_points)?;
    let (test_points, test_labels) = points("data/test", g.n_eval_points)?;
    let (pair_points, _) = points("data/pairs", 2 * g.n_pairs)?;
    let pairs = pair_points.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
    Ok(GaussData {
        train: sample_triplet_batch_seeded(&mix, derive_seed(seed, "data/train"), g.n_triplets)?,
        fit_points,
        fit_labels,
        test_points,
        test_labels,
        pairs,
        separation: sample_triplet_batch_seeded(&mix, derive_seed(seed, "data/separation"), n_sep)?,
    })
}

fn transformed_exemplar<R: Rng>(c: QuadCategory, ranges: &TransformRanges, rng: &mut R) -> gensim::Result<Quadrilateral> {
    let q = c.generate_exemplar(rng)?;
    ranges.apply(&q, rng)
}

fn quad_data(seed: u64, q: &QuadSection, n_sep: usize) -> gensim::Result<QuadData> {
    let n_cat = QuadCategory::ALL.len();
    // Training shapes and trial shapes come from disjoint seed streams.
    let train_base = derive_seed(seed, "data/train");
    let shapes = par::try_map_indexed(n_cat * q.train_per_category, |i| {
        let c = QuadCategory::ALL[i / q.train_per_category];
        let mut rng = child_rng(train_base, i as u64);
        transformed_exemplar(c, &q.transforms, &mut rng)
    })?;
    let train_labels: Vec<usize> = (0..shapes.len()).map(|i| i / q.train_per_category).collect();
    let train_descriptors =
        train_labels.iter().map(|&l| QuadCategory::ALL[l].signature().to_f64()).collect();
    let train = Inputs(shapes.iter().map(|s| quad_input(s, q)).collect());
    let train_rasters = if q.vector_input {
        None
    } else {
        Some(Inputs(train.0.clone()))
    };

    let trial_base = derive_seed(seed, "data/trials");
    let trials = par::try_map_indexed(n_cat * q.trials_per_category, |i| {
        let c = QuadCategory::ALL[i / q.trials_per_category];
        let mut rng = child_rng(trial_base, i as u64);
        let t = make_oddball_trial(c, &q.transforms, &mut rng)?;
        let meta = TrialMeta { category: c, oddball_index: t.oddball_index, seed: trial_base, index: i as u64 };
        let items = t.items.iter().map(|s| quad_input(s, q)).collect();
        Ok::<_, gensim::Error>((EvalTrial { category: c, items, oddball_index: t.oddball_index }, meta))
    })?;
    let (trials, trial_meta) = trials.into_iter().unzip();

    let sep_base = derive_seed(seed, "data/separation");
    let separation = par::try_map_indexed(n_sep, |i| {
        let mut rng = child_rng(sep_base, i as u64);
        let plus = QuadCategory::ALL[rng.random_range(0..n_cat)];
        let minus = QuadCategory::ALL[rng.random_range(0..n_cat)];
        let mut draw = |c| transformed_exemplar(c, &q.transforms, &mut rng).map(|s| quad_input(&s, q));
        Ok::<_, gensim::Error>(Triplet {
            anchor: draw(plus)?,
            positive: draw(plus)?,
            negative: draw(minus)?,
            theta_plus_label: Some(plus.index()),
            theta_minus_label: Some(minus.index()),
        })
    })?;
    Ok(QuadData { train, train_labels, train_descriptors, train_rasters, trials, trial_meta, separation })
}

fn drawings(process: &DrawProcess, base: u64, per_style: usize) -> gensim::Result<(Inputs, Vec<DrawMeta>)> {
    let drawn = par::try_map_indexed(2 * per_style, |i| {
        let style = Style::ALL[i / per_style];
        let mut rng = child_rng(base, i as u64);
        let d = process.sample_drawing(style, &mut rng)?;
        let (motor, control) = count_primitives(&d.program);
        let meta = DrawMeta {
            program: d.program.to_string(),
            style_label: style.label(),
            motor_count: motor,
            control_count: control,
            seed: base,
            index: i as u64,
            mean_grey: mean_grey(&d.raster),
        };
        Ok::<_, gensim::Error>((d.raster.into_vec(), meta))
    })?;
    let (inputs, meta): (Vec<_>, Vec<_>) = drawn.into_iter().unzip();
    Ok((Inputs(inputs), meta))
}

fn draw_data(seed: u64, d: &DrawSection, n_sep: usize) -> gensim::Result<DrawData> {
    let process = DrawProcess::new(&d.grammars.greek, &d.grammars.celtic, d.raster_size)?;
    let (train, train_meta) = drawings(&process, derive_seed(seed, "data/train"), d.train_per_grammar)?;
    let (test, test_meta) = drawings(&process, derive_seed(seed, "data/test"), d.test_per_grammar)?;
    let separation = sample_triplet_batch_seeded(&process, derive_seed(seed, "data/separation"), n_sep)?;
    Ok(DrawData { train, train_meta, test, test_meta, separation })
}

/// The part of the config that determines the generated data.
pub fn data_key(cfg: &ExperimentConfig) -> String {
    let section = match cfg.experiment {
        Experiment::Gauss => serde_json::to_value(&cfg.gauss),
        Experiment::Quad => serde_json::to_value(&cfg.quad),
        Experiment::Draw => serde_json::to_value(&cfg.draw),
    }
    .expect("sections serialize");
    let key = json!({
        "format": DATA_FORMAT,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "section": section,
        "separation_triplets": cfg.eval.separation_triplets,
    });
    sha256_hex(canonical_json(&key).as_bytes())
}

pub fn generate(cfg: &ExperimentConfig) -> Result<Datasets, CliError> {
    let n_sep = cfg.eval.separation_triplets;
    let data = match cfg.experiment {
        Experiment::Gauss => Datasets::Gauss(gauss_data(cfg.seed, cfg.gauss.as_ref().expect("resolved"), n_sep).stage("gen-data")?),
        Experiment::Quad => Datasets::Quad(quad_data(cfg.seed, cfg.quad.as_ref().expect("resolved"), n_sep).stage("gen-data")?),
        Experiment::Draw => Datasets::Draw(draw_data(cfg.seed, cfg.draw.as_ref().expect("resolved"), n_sep).stage("gen-data")?),
    };
    Ok(data)
}

/// Cache directory from `GENSIM_CACHE_DIR`, if set and nonempty.
pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os("GENSIM_CACHE_DIR").filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Loads the datasets from `cache` when present there, otherwise generates
/// them and stores them. Returns the data and whether it came from the cache.
pub fn load_or_generate(cfg: &ExperimentConfig, cache: Option<&Path>) -> Result<(Datasets, bool), CliError> {
    let Some(dir) = cache else {
        return Ok((generate(cfg)?, false));
    };
    let path = dir.join(format!("{}.json", data_key(cfg)));
    if path.exists() {
        let text = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        match serde_json::from_slice(&text) {
            Ok(data) => return Ok((data, true)),
            // A truncated or outdated entry is regenerated below.
            Err(_) => {}
        }
    }
    let data = generate(cfg)?;
    let bytes = serde_json::to_vec(&data).expect("datasets serialize");
    let tmp = path.with_extension("json.tmp");
    write_file(&tmp, &bytes)?;
    std::fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
    Ok((data, false))
}

fn write_raster(path: &Path, values: &[f64], size: usize) -> Result<(), CliError> {
    let r = Raster::from_vec(size, values.to_vec()).stage("gen-data")?;
    write_file(path, &r.to_pgm())
}

/// Number of example images written next to the manifests.
const PGM_SAMPLES: usize = 8;

/// Writes JSON-lines manifests and a handful of example PGM images under
/// `dir`; returns the written paths relative to `dir`.
pub fn write_artifacts(cfg: &ExperimentConfig, data: &Datasets, dir: &Path) -> Result<Vec<String>, CliError> {
    let mut written = Vec::new();
    let mut jsonl = |name: &str, lines: Vec<serde_json::Value>| -> Result<(), CliError> {
        let mut out = String::new();
        for l in lines {
            out.push_str(&serde_json::to_string(&l).expect("json"));
            out.push('\n');
        }
        write_file(&dir.join(name), out.as_bytes())?;
        written.push(name.to_string());
        Ok(())
    };
    match data {
        Datasets::Gauss(g) => {
            let lines = g
                .test_points
                .iter()
                .zip(&g.test_labels)
                .map(|(x, k)| json!({"x": x, "component": k}))
                .collect();
            jsonl("data/test_points.jsonl", lines)?;
        }
        Datasets::Quad(q) => {
            let lines = q.trial_meta.iter().map(|m| serde_json::to_value(m).expect("json")).collect();
            jsonl("data/trials.jsonl", lines)?;
            let section = cfg.quad.as_ref().expect("resolved");
            if !section.vector_input {
                let per_cat = q.trial_meta.len() / QuadCategory::ALL.len();
                for (c, cat) in QuadCategory::ALL.iter().enumerate().take(PGM_SAMPLES) {
                    let t = &q.trials[c * per_cat];
                    for (i, item) in t.items.iter().enumerate() {
                        let name = format!("data/trials/{}_{i}.pgm", cat.name());
                        write_raster(&dir.join(&name), item, section.raster_size)?;
                        written.push(name);
                    }
                }
            }
        }
        Datasets::Draw(d) => {
            let size = cfg.draw.as_ref().expect("resolved").raster_size;
            for (split, inputs, meta) in [("train", &d.train, &d.train_meta), ("test", &d.test, &d.test_meta)] {
                let per_style = meta.len() / 2;
                let mut lines = Vec::with_capacity(meta.len());
                for (i, m) in meta.iter().enumerate() {
                    let sample = i % per_style < PGM_SAMPLES / 2;
                    let raster_path = sample.then(|| format!("data/{split}/{i:05}.pgm"));
                    if let Some(p) = &raster_path {
                        write_raster(&dir.join(p), &inputs.0[i], size)?;
                    }
                    let mut v = serde_json::to_value(m).expect("json");
                    v["raster_path"] = json!(raster_path);
                    lines.push(v);
                }
                jsonl(&format!("data/{split}.jsonl"), lines)?;
            }
        }
    }
    Ok(written)
}
