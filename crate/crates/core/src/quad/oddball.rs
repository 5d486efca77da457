use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::category::QuadCategory;
use super::features::{extract_features, raw_features, ExtractionTolerances};
use super::geometry::{apply_transform, Point, Quadrilateral};
use crate::error::{Error, Result};
use crate::raster::Raster;

pub const TRIAL_SIZE: usize = 6;
const MAX_ATTEMPTS: usize = 10_000;

/// Ranges of the random similarity transform applied to every item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformRanges {
    pub scale: (f64, f64),
    pub rotation: (f64, f64),
}

impl Default for TransformRanges {
    fn default() -> Self {
        Self { scale: (0.6, 1.0), rotation: (0.0, 2.0 * PI) }
    }
}

impl TransformRanges {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let s = if self.scale.0 < self.scale.1 { rng.random_range(self.scale.0..self.scale.1) } else { self.scale.0 };
        let r = if self.rotation.0 < self.rotation.1 {
            rng.random_range(self.rotation.0..self.rotation.1)
        } else {
            self.rotation.0
        };
        (s, r)
    }

    pub fn apply<R: Rng + ?Sized>(&self, quad: &Quadrilateral, rng: &mut R) -> Result<Quadrilateral> {
        let (s, r) = self.sample(rng);
        apply_transform(quad, s, r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddballTrial {
    pub category: QuadCategory,
    pub items: Vec<Quadrilateral>,
    pub oddball_index: usize,
}

/// Moves the lowest-rightmost vertex of `reference` by 5% to 25% of its
/// bounding-box diagonal in a random direction until one of the reference's
/// properties is visibly broken. The random category has none, so any valid
/// displacement of that size is accepted.
pub fn make_oddball<R: Rng + ?Sized>(
    reference: &Quadrilateral,
    category: QuadCategory,
    rng: &mut R,
) -> Result<Quadrilateral> {
    let ref_raw = raw_features(reference, ExtractionTolerances::EXACT);
    let ref_loose = extract_features(reference, ExtractionTolerances::LOOSE);
    let idx = reference.lowest_rightmost();
    let diag = reference.diagonal_of_bounds();
    for _ in 0..MAX_ATTEMPTS {
        let dist = rng.random_range(0.05..0.25) * diag;
        let dir = rng.random_range(0.0..2.0 * PI);
        let moved = reference.vertex(idx).add(Point::new(dist * dir.cos(), dist * dir.sin()));
        let Ok(q) = reference.with_vertex(idx, moved) else { continue };
        if category == QuadCategory::Random {
            return Ok(q);
        }
        let odd_raw = raw_features(&q, ExtractionTolerances::PERCEPTUAL);
        let lost = ref_raw.iter().zip(&odd_raw).any(|(r, o)| *r && !*o);
        if lost && extract_features(&q, ExtractionTolerances::LOOSE) != ref_loose {
            return Ok(q);
        }
    }
    Err(Error::ConstructionFailure { what: format!("{category} oddball"), attempts: MAX_ATTEMPTS })
}

/// Five transformed copies of one exemplar and one transformed deviant, the
/// deviant at a uniformly drawn position.
pub fn make_oddball_trial<R: Rng + ?Sized>(
    category: QuadCategory,
    ranges: &TransformRanges,
    rng: &mut R,
) -> Result<OddballTrial> {
    let reference = category.generate_exemplar(rng)?;
    let odd = make_oddball(&reference, category, rng)?;
    let oddball_index = rng.random_range(0..TRIAL_SIZE);
    let items = (0..TRIAL_SIZE)
        .map(|i| ranges.apply(if i == oddball_index { &odd } else { &reference }, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(OddballTrial { category, items, oddball_index })
}

/// Draws the closed outline into a `size` x `size` raster. World coordinates
/// are relative to the centroid; a radius of 1 spans 40% of the image width,
/// so size differences between items stay visible.
pub fn rasterize_quad(quad: &Quadrilateral, size: usize) -> Raster {
    let mut r = Raster::zeros(size);
    let c = quad.centroid();
    let s = size as f64;
    let to_px = |p: Point| {
        let q = p.sub(c);
        (s / 2.0 + q.x * 0.4 * s, s / 2.0 - q.y * 0.4 * s)
    };
    for i in 0..4 {
        let (x0, y0) = to_px(quad.vertex(i));
        let (x1, y1) = to_px(quad.vertex(i + 1));
        r.draw_segment(x0, y0, x1, y1);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn trials_have_one_deviant() {
        let mut rng = seeded(5);
        for c in QuadCategory::ALL {
            let t = make_oddball_trial(c, &TransformRanges::default(), &mut rng).unwrap();
            assert_eq!(t.items.len(), TRIAL_SIZE);
            assert!(t.oddball_index < TRIAL_SIZE);
            if c == QuadCategory::Square {
                let odd = extract_features(&t.items[t.oddball_index], ExtractionTolerances::EXACT);
                assert!(odd.right_angles().iter().filter(|b| **b).count() < 4);
            }
            let sig = extract_features(&t.items[(t.oddball_index + 1) % TRIAL_SIZE], ExtractionTolerances::LOOSE);
            for (i, q) in t.items.iter().enumerate() {
                let same = extract_features(q, ExtractionTolerances::LOOSE) == sig;
                if i != t.oddball_index {
                    assert!(same, "{c}: item {i}");
                } else if c != QuadCategory::Random {
                    assert!(!same, "{c}: oddball indistinct");
                }
            }
        }
    }

    #[test]
    fn outline_has_enough_ink() {
        let mut rng = seeded(9);
        for c in QuadCategory::ALL {
            let q = c.generate_exemplar(&mut rng).unwrap();
            let q = apply_transform(&q, 0.6, 0.3).unwrap();
            for size in [32, 64, 128] {
                let r = rasterize_quad(&q, size);
                assert!(r.count_nonzero() as f64 >= 4.0 * size as f64 * 0.1, "{c} at {size}");
            }
        }
    }
}
