use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, ExtractionTolerances, GeometricFeatureVector};
use super::geometry::{Point, Quadrilateral};
use crate::error::{Error, Result};

const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum QuadCategory {
    Square,
    Rectangle,
    Losange,
    Parallelogram,
    RightKite,
    Kite,
    IsoTrapezoid,
    Hinge,
    RustedHinge,
    Trapezoid,
    Random,
}

/// Counts of right angles, parallel pairs, symmetry axes, equal-side pairs and
/// equal-angle pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularityRow {
    pub right_angles: u8,
    pub parallels: u8,
    pub symmetry: u8,
    pub equal_sides: u8,
    pub equal_angles: u8,
}

impl RegularityRow {
    const fn new(r: u8, p: u8, s: u8, e: u8, a: u8) -> Self {
        Self { right_angles: r, parallels: p, symmetry: s, equal_sides: e, equal_angles: a }
    }

    pub fn total(&self) -> u32 {
        [self.right_angles, self.parallels, self.symmetry, self.equal_sides, self.equal_angles]
            .iter()
            .map(|v| u32::from(*v))
            .sum()
    }
}

impl QuadCategory {
    /// Ordered from most to least regular.
    pub const ALL: [QuadCategory; 11] = [
        QuadCategory::Square,
        QuadCategory::Rectangle,
        QuadCategory::Losange,
        QuadCategory::Parallelogram,
        QuadCategory::RightKite,
        QuadCategory::Kite,
        QuadCategory::IsoTrapezoid,
        QuadCategory::Hinge,
        QuadCategory::RustedHinge,
        QuadCategory::Trapezoid,
        QuadCategory::Random,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            QuadCategory::Square => "square",
            QuadCategory::Rectangle => "rectangle",
            QuadCategory::Losange => "losange",
            QuadCategory::Parallelogram => "parallelogram",
            QuadCategory::RightKite => "rightKite",
            QuadCategory::Kite => "kite",
            QuadCategory::IsoTrapezoid => "isoTrapezoid",
            QuadCategory::Hinge => "hinge",
            QuadCategory::RustedHinge => "rustedHinge",
            QuadCategory::Trapezoid => "trapezoid",
            QuadCategory::Random => "random",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == name)
    }

    /// 1 for the most regular shape, 11 for the least.
    pub fn regularity_rank(self) -> usize {
        self.index() + 1
    }

    pub fn regularity(self) -> RegularityRow {
        match self {
            QuadCategory::Square => RegularityRow::new(4, 2, 4, 4, 4),
            QuadCategory::Rectangle => RegularityRow::new(4, 2, 2, 2, 4),
            QuadCategory::Losange => RegularityRow::new(0, 0, 2, 4, 2),
            QuadCategory::Parallelogram => RegularityRow::new(0, 2, 1, 2, 2),
            QuadCategory::RightKite => RegularityRow::new(2, 0, 1, 2, 2),
            QuadCategory::Kite => RegularityRow::new(0, 0, 1, 2, 2),
            QuadCategory::IsoTrapezoid => RegularityRow::new(0, 1, 1, 1, 2),
            QuadCategory::Hinge => RegularityRow::new(1, 0, 0, 1, 0),
            QuadCategory::RustedHinge => RegularityRow::new(0, 0, 0, 1, 0),
            QuadCategory::Trapezoid => RegularityRow::new(0, 1, 0, 0, 0),
            QuadCategory::Random => RegularityRow::new(0, 0, 0, 0, 0),
        }
    }

    /// The canonical feature vector every exemplar of the category has.
    pub fn signature(self) -> GeometricFeatureVector {
        let s = match self {
            QuadCategory::Square => "111111 111111 010010 1111",
            QuadCategory::Rectangle => "010010 111111 010010 1111",
            QuadCategory::Losange => "111111 010010 010010 0000",
            QuadCategory::Parallelogram => "010010 010010 010010 0000",
            QuadCategory::RightKite => "100001 010000 000000 1010",
            QuadCategory::Kite => "100001 010000 000000 0000",
            QuadCategory::IsoTrapezoid => "010000 001100 000010 0000",
            QuadCategory::Hinge => "100000 000000 000000 0100",
            QuadCategory::RustedHinge => "100000 000000 000000 0000",
            QuadCategory::Trapezoid => "000000 000000 010000 0000",
            QuadCategory::Random => "000000 000000 000000 0000",
        };
        GeometricFeatureVector::parse(s).expect("well-formed signature")
    }

    fn construct<R: Rng + ?Sized>(self, rng: &mut R) -> Option<Quadrilateral> {
        let p = Point::new;
        let deg = PI / 180.0;
        let pts = match self {
            QuadCategory::Square => [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)],
            QuadCategory::Rectangle => {
                let b = rng.random_range(0.3..0.75);
                [p(0.0, 0.0), p(1.0, 0.0), p(1.0, b), p(0.0, b)]
            }
            QuadCategory::Losange => {
                let (s, c) = (rng.random_range(45.0..75.0) * deg).sin_cos();
                [p(0.0, 0.0), p(1.0, 0.0), p(1.0 + c, s), p(c, s)]
            }
            QuadCategory::Parallelogram => {
                let b = rng.random_range(0.35..0.75);
                let (s, c) = (rng.random_range(45.0..75.0) * deg).sin_cos();
                [p(0.0, 0.0), p(1.0, 0.0), p(1.0 + b * c, b * s), p(b * c, b * s)]
            }
            QuadCategory::RightKite => {
                // Right angles at v1 and v3, |v0v1| = |v3v0| = 1, |v1v2| = |v2v3| = b.
                let b: f64 = rng.random_range(0.35..0.7);
                let d = (1.0 + b * b).sqrt();
                let (x, y) = (1.0 / d, b / d);
                [p(0.0, 0.0), p(x, -y), p(d, 0.0), p(x, y)]
            }
            QuadCategory::Kite => {
                let x = rng.random_range(0.15..0.4);
                let h = rng.random_range(0.25..0.6);
                [p(0.0, 0.0), p(x, -h), p(1.0, 0.0), p(x, h)]
            }
            QuadCategory::IsoTrapezoid => {
                let w = rng.random_range(0.3..0.7) / 2.0;
                let h = rng.random_range(0.35..0.8);
                [p(-0.5, 0.0), p(0.5, 0.0), p(w, h), p(-w, h)]
            }
            QuadCategory::Hinge | QuadCategory::RustedHinge => {
                // Two equal sides meeting at v1, at 90 degrees or 10 degrees off.
                let angle = if self == QuadCategory::Hinge { 90.0 } else { 100.0 };
                let (s, c) = ((180.0 - angle) * deg).sin_cos();
                let v2 = p(1.0 + c, s);
                let v3 = p(rng.random_range(-0.6..0.6), rng.random_range(0.4..1.6));
                [p(0.0, 0.0), p(1.0, 0.0), v2, v3]
            }
            QuadCategory::Trapezoid => {
                let s = rng.random_range(-0.3..0.5);
                let w = rng.random_range(0.25..0.8);
                let h = rng.random_range(0.35..0.9);
                [p(0.0, 0.0), p(1.0, 0.0), p(s + w, h), p(s, h)]
            }
            QuadCategory::Random => {
                let mut angles: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
                angles.sort_by(f64::total_cmp);
                let mut pts = [p(0.0, 0.0); 4];
                for (v, a) in pts.iter_mut().zip(angles) {
                    let r = rng.random_range(0.5..1.0);
                    *v = p(r * a.cos(), r * a.sin());
                }
                pts
            }
        };
        Quadrilateral::new(pts).ok()
    }

    /// A normalized exemplar (centroid at the origin, unit radius) whose exact
    /// features equal [`signature`](Self::signature) and which has no further
    /// property that is nearly satisfied.
    pub fn generate_exemplar<R: Rng + ?Sized>(self, rng: &mut R) -> Result<Quadrilateral> {
        let target = self.signature();
        for _ in 0..MAX_ATTEMPTS {
            let Some(q) = self.construct(rng) else { continue };
            let q = q.normalized();
            if !q.is_convex() {
                continue;
            }
            if extract_features(&q, ExtractionTolerances::EXACT) == target
                && extract_features(&q, ExtractionTolerances::PERCEPTUAL) == target
            {
                return Ok(q);
            }
        }
        Err(Error::ConstructionFailure { what: self.name().to_string(), attempts: MAX_ATTEMPTS })
    }
}

impl std::fmt::Display for QuadCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
