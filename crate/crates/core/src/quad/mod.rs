//! Quadrilaterals: geometry, 22-bit descriptors, the eleven categories, the
//! Beta-Bernoulli similarity and the oddball task.

mod category;
mod features;
mod geometry;
mod oddball;
mod similarity;

use rand::Rng;

pub use category::{QuadCategory, RegularityRow};
pub use features::{
    canonicalize, cyclic_shift, extract_features, raw_features, ExtractionTolerances,
    GeometricFeatureVector, N_FEATURES, PAIRS,
};
pub use geometry::{apply_transform, Point, Quadrilateral};
pub use oddball::{make_oddball, make_oddball_trial, rasterize_quad, OddballTrial, TransformRanges, TRIAL_SIZE};
pub use similarity::{
    feature_sq_distance, shape_log_gen_sim_general, shape_log_gen_sim_limit, BetaBernoulliParams,
};

use crate::process::HierarchicalProcess;

/// Category-level process: the latent is a uniformly drawn category and each
/// datum is the flattened raster of a fresh, randomly transformed exemplar.
#[derive(Debug, Clone)]
pub struct QuadProcess {
    pub raster_size: usize,
    pub transforms: TransformRanges,
}

impl QuadProcess {
    pub fn new(raster_size: usize) -> Self {
        Self { raster_size, transforms: TransformRanges::default() }
    }
}

impl HierarchicalProcess for QuadProcess {
    type Param = QuadCategory;
    type Datum = Vec<f64>;

    fn sample_param<R: Rng + ?Sized>(&self, rng: &mut R) -> crate::Result<QuadCategory> {
        Ok(QuadCategory::ALL[rng.random_range(0..QuadCategory::ALL.len())])
    }

    fn sample_datum<R: Rng + ?Sized>(&self, param: &QuadCategory, rng: &mut R) -> crate::Result<Vec<f64>> {
        let q = param.generate_exemplar(rng)?;
        let q = self.transforms.apply(&q, rng)?;
        Ok(rasterize_quad(&q, self.raster_size).into_vec())
    }

    fn label_of(&self, param: &QuadCategory) -> Option<usize> {
        Some(param.index())
    }
}
