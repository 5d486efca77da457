//! Experiment configuration: the JSON schema, per-experiment defaults and
//! validation.

use std::path::{Path, PathBuf};

use gensim::draw::{Grammar, Style};
use gensim::net::NetSpec;
use gensim::quad::TransformRanges;
use gensim::train::{AugmentSpec, LossKind, Optimizer, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Gauss,
    Quad,
    Draw,
}

/// Training pathway. All objectives of one run share data and network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Gensim,
    Supervised,
    Simclr,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Gensim => "gensim",
            Objective::Supervised => "supervised",
            Objective::Simclr => "simclr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(Objective),
    Many(Vec<Objective>),
}

/// Overrides for the training settings; anything absent takes the
/// experiment default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub loss: Option<LossKind>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub optimizer: Option<Optimizer>,
    /// InfoNCE temperature of the simclr objective.
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussSection {
    pub means: Vec<Vec<f64>>,
    pub variance: f64,
    pub n_triplets: usize,
    /// Points drawn for fitting and scoring the 1D threshold.
    pub n_eval_points: usize,
    /// Point pairs behind the similarity-vs-distance curve.
    pub n_pairs: usize,
    pub n_bins: usize,
}

impl Default for GaussSection {
    fn default() -> Self {
        Self {
            means: vec![vec![5.0, 5.0], vec![1.0, 1.0]],
            variance: 1.0,
            n_triplets: 10_000,
            n_eval_points: 2_000,
            n_pairs: 20_000,
            n_bins: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadSection {
    pub raster_size: usize,
    pub train_per_category: usize,
    pub trials_per_category: usize,
    pub transforms: TransformRanges,
    /// Feed the eight centroid-relative vertex coordinates to an MLP instead
    /// of rasters.
    pub vector_input: bool,
}

impl Default for QuadSection {
    fn default() -> Self {
        Self {
            raster_size: 64,
            train_per_category: 200,
            trials_per_category: 40,
            transforms: TransformRanges::default(),
            vector_input: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrammarPair {
    pub greek: Grammar,
    pub celtic: Grammar,
}

impl Default for GrammarPair {
    fn default() -> Self {
        Self { greek: Grammar::builtin(Style::Greek), celtic: Grammar::builtin(Style::Celtic) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DrawSection {
    pub raster_size: usize,
    pub train_per_grammar: usize,
    pub test_per_grammar: usize,
    pub grammars: GrammarPair,
    pub pca_components: usize,
}

impl Default for DrawSection {
    fn default() -> Self {
        Self {
            raster_size: 128,
            train_per_grammar: 2_000,
            test_per_grammar: 400,
            grammars: GrammarPair::default(),
            pca_components: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Held-out triplets for the same/different distance comparison.
    pub separation_triplets: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { separation_triplets: 1_000 }
    }
}

/// The file as written by a user: everything but `experiment` and `seed` may
/// be left out.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    seed: u64,
    objective: Option<OneOrMany>,
    out_dir: Option<PathBuf>,
    net: Option<NetSpec>,
    #[serde(default)]
    train: TrainSection,
    augment: Option<AugmentSpec>,
    gauss: Option<GaussSection>,
    quad: Option<QuadSection>,
    draw: Option<DrawSection>,
    eval: Option<EvalSection>,
}

/// Fully resolved configuration. Its canonical JSON is what gets hashed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub objectives: Vec<Objective>,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
    pub net: NetSpec,
    /// Settings of the gensim objective. The baselines reuse everything but
    /// the loss.
    pub train: TrainConfig,
    pub temperature: f64,
    pub augment: AugmentSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauss: Option<GaussSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad: Option<QuadSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draw: Option<DrawSection>,
    pub eval: EvalSection,
}

/// Command-line adjustments applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub paper_scale: bool,
    pub vector_input: bool,
}

fn bad(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

impl ExperimentConfig {
    /// Parses and resolves a config from JSON text.
    pub fn from_json(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        resolve(raw, overrides)
    }

    pub fn objective_train(&self, objective: Objective) -> TrainConfig {
        let loss = match objective {
            Objective::Gensim => self.train.loss,
            Objective::Supervised => LossKind::Supervised,
            Objective::Simclr => LossKind::InfoNce { temperature: self.temperature },
        };
        TrainConfig { loss, ..self.train.clone() }
    }

    /// Canonical JSON of the resolved settings.
    pub fn canonical_json(&self) -> String {
        crate::report::canonical_json(&serde_json::to_value(self).expect("config serializes"))
    }

    /// Hex SHA-256 of [`Self::canonical_json`].
    pub fn hash(&self) -> String {
        crate::report::sha256_hex(self.canonical_json().as_bytes())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.net.validate().map_err(|e| bad("net", e))?;
        self.train.validate().map_err(|e| bad("train", e))?;
        if self.train.epochs == 0 {
            return Err(bad("train.epochs", "must be positive"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(bad("train.temperature", "must be positive"));
        }
        self.augment.validate().map_err(|e| bad("augment", e))?;
        if self.objectives.is_empty() {
            return Err(bad("objective", "at least one objective is required"));
        }
        let mut seen = self.objectives.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.objectives.len() {
            return Err(bad("objective", "listed twice"));
        }
        if self.eval.separation_triplets < 2 {
            return Err(bad("eval.separation_triplets", "need at least 2"));
        }
        let loss = self.train.loss;
        match self.experiment {
            Experiment::Gauss => {
                let g = self.gauss.as_ref().expect("resolved");
                if self.objectives != [Objective::Gensim] {
                    return Err(bad("objective", "the gauss experiment only trains the gensim objective"));
                }
                if !loss.is_triplet() {
                    return Err(bad("train.loss", "the gauss experiment trains on triplets"));
                }
                if g.n_triplets == 0 || g.n_eval_points < 4 || g.n_bins < 3 || g.n_pairs < g.n_bins {
                    return Err(bad("gauss", "sizes too small (need n_pairs >= n_bins >= 3)"));
                }
                if self.net.input_dim() != g.means.first().map_or(0, Vec::len) {
                    return Err(bad("net", "input width differs from the mixture dimension"));
                }
            }
            Experiment::Quad => {
                let q = self.quad.as_ref().expect("resolved");
                if !(loss.is_triplet() || loss == LossKind::GenSimRegression) {
                    return Err(bad("train.loss", "quad gensim trains on triplets or feature-distance regression"));
                }
                if q.train_per_category < 2 || q.trials_per_category == 0 {
                    return Err(bad("quad", "need at least 2 training shapes and 1 trial per category"));
                }
                if !q.vector_input && q.raster_size < 16 {
                    return Err(bad("quad.raster_size", "must be at least 16"));
                }
                let expected = if q.vector_input { 8 } else { q.raster_size * q.raster_size };
                if self.net.input_dim() != expected {
                    return Err(bad("net", format!("input width {} but the data has {expected}", self.net.input_dim())));
                }
                if q.vector_input && self.objectives.contains(&Objective::Simclr) {
                    return Err(bad("objective", "simclr augments images and needs raster input"));
                }
            }
            Experiment::Draw => {
                let d = self.draw.as_ref().expect("resolved");
                if !loss.is_triplet() {
                    return Err(bad("train.loss", "draw gensim trains on triplets"));
                }
                d.grammars.greek.validate().map_err(|e| bad("draw.grammars.greek", e))?;
                d.grammars.celtic.validate().map_err(|e| bad("draw.grammars.celtic", e))?;
                if d.raster_size < 32 {
                    return Err(bad("draw.raster_size", "must be at least 32"));
                }
                if d.train_per_grammar < 2 || d.test_per_grammar < 10 {
                    return Err(bad("draw", "need at least 2 training and 10 test drawings per grammar"));
                }
                if self.net.input_dim() != d.raster_size * d.raster_size {
                    return Err(bad("net", "input width differs from the raster size"));
                }
                if d.pca_components == 0 || d.pca_components > self.net.output_dim() {
                    return Err(bad("draw.pca_components", "must be between 1 and the embedding width"));
                }
            }
        }
        Ok(())
    }
}

fn resolve(raw: RawConfig, ov: &Overrides) -> Result<ExperimentConfig, CliError> {
    let exp = raw.experiment;
    let foreign = [
        ("gauss", raw.gauss.is_some() && exp != Experiment::Gauss),
        ("quad", raw.quad.is_some() && exp != Experiment::Quad),
        ("draw", raw.draw.is_some() && exp != Experiment::Draw),
    ];
    if let Some((name, _)) = foreign.iter().find(|(_, bad)| *bad) {
        return Err(bad(name, "section does not belong to this experiment"));
    }
    let mut gauss = (exp == Experiment::Gauss).then(|| raw.gauss.clone().unwrap_or_default());
    let mut quad = (exp == Experiment::Quad).then(|| raw.quad.clone().unwrap_or_default());
    let mut draw = (exp == Experiment::Draw).then(|| raw.draw.clone().unwrap_or_default());
    if ov.vector_input {
        match quad.as_mut() {
            Some(q) => q.vector_input = true,
            None => return Err(bad("--vector-input", "only applies to the quad experiment")),
        }
    }
    if ov.paper_scale {
        if let Some(d) = draw.as_mut() {
            d.raster_size = 128;
            d.train_per_grammar = 20_000;
            d.test_per_grammar = 800;
        }
        if let Some(g) = gauss.as_mut() {
            *g = GaussSection { means: g.means.clone(), variance: g.variance, ..GaussSection::default() };
        }
        if let Some(q) = quad.as_mut() {
            q.train_per_category = q.train_per_category.max(1_000);
        }
    }

    let (default_loss, lr, batch, epochs) = match exp {
        Experiment::Gauss => (LossKind::SoftmaxTriplet, 1e-5, 256, 300),
        Experiment::Quad => (LossKind::GenSimRegression, 5e-4, 32, 13),
        Experiment::Draw => (LossKind::LinearTriplet, 1e-3, 128, 10),
    };
    let t = &raw.train;
    let seed = ov.seed.unwrap_or(raw.seed);
    let train = TrainConfig {
        loss: t.loss.unwrap_or(default_loss),
        learning_rate: t.learning_rate.unwrap_or(lr),
        batch_size: t.batch_size.unwrap_or(batch),
        epochs: t.epochs.unwrap_or(epochs),
        seed,
        optimizer: t.optimizer.unwrap_or_default(),
    };
    let net = match raw.net {
        Some(n) => n,
        None => match exp {
            Experiment::Gauss => {
                let dim = gauss.as_ref().and_then(|g| g.means.first()).map_or(2, Vec::len);
                NetSpec::mlp(&[dim, 32, 1])
            }
            Experiment::Quad => {
                let q = quad.as_ref().expect("quad section");
                if q.vector_input {
                    NetSpec::mlp(&[8, 64, 64, 32])
                } else {
                    NetSpec::conv(q.raster_size, 4, 8, 32)
                }
            }
            Experiment::Draw => NetSpec::conv(draw.as_ref().expect("draw section").raster_size, 4, 8, 32),
        },
    };
    let objectives = match raw.objective {
        Some(OneOrMany::One(o)) => vec![o],
        Some(OneOrMany::Many(v)) => v,
        None => match exp {
            Experiment::Gauss => vec![Objective::Gensim],
            Experiment::Quad if quad.as_ref().is_some_and(|q| q.vector_input) => {
                vec![Objective::Gensim, Objective::Supervised]
            }
            Experiment::Quad => vec![Objective::Gensim, Objective::Supervised, Objective::Simclr],
            Experiment::Draw => vec![Objective::Gensim, Objective::Simclr],
        },
    };
    let cfg = ExperimentConfig {
        experiment: exp,
        seed,
        objectives,
        out_dir: ov.out_dir.clone().or(raw.out_dir),
        net,
        train,
        temperature: t.temperature.unwrap_or(0.5),
        augment: raw.augment.unwrap_or_default(),
        gauss,
        quad,
        draw,
        eval: raw.eval.unwrap_or_default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads, parses and validates a config file.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ExperimentConfig::from_json(&text, overrides)
}
