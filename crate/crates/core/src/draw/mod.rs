//! Turtle-graphics drawing programs sampled from weighted grammars.

mod grammar;
mod program;
mod render;

use rand::Rng;

pub use grammar::{sample_program, Choices, Grammar, GrammarSampler, ProductionWeights, Style};
pub use program::{count_primitives, Motor, Program, MAX_REPEAT, MIN_REPEAT};
pub use render::{interpret, interpret_from, mean_grey, rasterize_path, Segment, StrokePath, TurtleState};

use crate::error::{Error, Result};
use crate::process::HierarchicalProcess;
use crate::raster::Raster;

const MAX_BLANK_REDRAWS: usize = 1000;

/// A sampled drawing that leaves ink on the canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct Drawing {
    pub program: Program,
    pub raster: Raster,
}

/// Samples programs until one renders at least one pixel.
pub fn sample_drawing<R: Rng + ?Sized>(sampler: &GrammarSampler, size: usize, rng: &mut R) -> Result<Drawing> {
    for _ in 0..MAX_BLANK_REDRAWS {
        let program = sampler.sample(rng);
        let raster = rasterize_path(&interpret(&program), size);
        if raster.count_nonzero() > 0 {
            return Ok(Drawing { program, raster });
        }
    }
    Err(Error::Sampling { stage: "drawing", reason: format!("{MAX_BLANK_REDRAWS} blank programs in a row") })
}

/// Two-grammar process: the latent picks a style uniformly, data are rendered
/// programs from that style's grammar.
#[derive(Debug, Clone)]
pub struct DrawProcess {
    samplers: [GrammarSampler; 2],
    pub raster_size: usize,
}

impl DrawProcess {
    pub fn new(greek: &Grammar, celtic: &Grammar, raster_size: usize) -> Result<Self> {
        if raster_size < 32 {
            return Err(Error::invalid("raster_size", "must be at least 32"));
        }
        Ok(Self { samplers: [greek.sampler()?, celtic.sampler()?], raster_size })
    }

    pub fn builtin(raster_size: usize) -> Result<Self> {
        Self::new(&Grammar::builtin(Style::Greek), &Grammar::builtin(Style::Celtic), raster_size)
    }

    pub fn sampler(&self, style: Style) -> &GrammarSampler {
        &self.samplers[style.label()]
    }

    pub fn sample_drawing<R: Rng + ?Sized>(&self, style: Style, rng: &mut R) -> Result<Drawing> {
        sample_drawing(self.sampler(style), self.raster_size, rng)
    }
}

impl HierarchicalProcess for DrawProcess {
    type Param = Style;
    type Datum = Vec<f64>;

    fn sample_param<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Style> {
        Ok(if rng.random_bool(0.5) { Style::Celtic } else { Style::Greek })
    }

    fn sample_datum<R: Rng + ?Sized>(&self, style: &Style, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.sample_drawing(*style, rng)?.raster.into_vec())
    }

    fn label_of(&self, style: &Style) -> Option<usize> {
        Some(style.label())
    }
}
