//! Binary geometric descriptors of a quadrilateral.
//!
//! Layout (22 bits): equal lengths for the six edge pairs, equal angles for the
//! six vertex pairs, parallel edges for the six edge pairs, then one right-angle
//! bit per vertex. Pairs are ordered `01, 02, 03, 12, 13, 23`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::geometry::Quadrilateral;

pub const N_FEATURES: usize = 22;
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

const LEN: usize = 0;
const ANG: usize = 6;
const PAR: usize = 12;
const RIGHT: usize = 18;

/// Tolerances for the predicate tests: lengths compare relative to the longer
/// one, angles (and the angle between edge directions) compare in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionTolerances {
    pub length_rel: f64,
    pub angle_rad: f64,
}

impl ExtractionTolerances {
    pub const EXACT: Self = Self { length_rel: 1e-6, angle_rad: 1e-6 };
    /// For inputs that went through noisy transforms.
    pub const LOOSE: Self = Self { length_rel: 1e-2, angle_rad: 1e-2 };
    /// Properties that hold at this level are visible by eye. Generated
    /// shapes must not satisfy any property here that they lack under `EXACT`.
    pub const PERCEPTUAL: Self = Self { length_rel: 0.05, angle_rad: 0.05 };
}

impl Default for ExtractionTolerances {
    fn default() -> Self {
        Self::EXACT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeometricFeatureVector {
    bits: [bool; N_FEATURES],
}

impl GeometricFeatureVector {
    pub fn from_bits(bits: [bool; N_FEATURES]) -> Self {
        Self { bits }
    }

    /// Parses a string of `0`/`1` characters, ignoring spaces.
    pub fn parse(s: &str) -> Option<Self> {
        let digits: Vec<bool> = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<_>>()?;
        Some(Self { bits: digits.try_into().ok()? })
    }

    pub fn bits(&self) -> &[bool; N_FEATURES] {
        &self.bits
    }

    pub fn to_u8(&self) -> [u8; N_FEATURES] {
        self.bits.map(u8::from)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    pub fn equal_lengths(&self) -> &[bool] {
        &self.bits[LEN..LEN + 6]
    }

    pub fn equal_angles(&self) -> &[bool] {
        &self.bits[ANG..ANG + 6]
    }

    pub fn parallel_edges(&self) -> &[bool] {
        &self.bits[PAR..PAR + 6]
    }

    pub fn right_angles(&self) -> &[bool] {
        &self.bits[RIGHT..RIGHT + 4]
    }
}

impl std::fmt::Display for GeometricFeatureVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, b) in self.bits.iter().enumerate() {
            if i > 0 && i % 6 == 0 {
                f.write_str(" ")?;
            }
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn pair_index(a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    PAIRS.iter().position(|p| *p == (a, b)).expect("distinct indices")
}

/// Features with the vertex labelling exactly as stored.
pub fn raw_features(quad: &Quadrilateral, tol: ExtractionTolerances) -> [bool; N_FEATURES] {
    let mut bits = [false; N_FEATURES];
    let lens: Vec<f64> = (0..4).map(|i| quad.edge_length(i)).collect();
    let angles: Vec<f64> = (0..4).map(|i| quad.interior_angle(i)).collect();
    let max_parallel_sin = tol.angle_rad.sin();
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        bits[LEN + k] = (lens[i] - lens[j]).abs() <= tol.length_rel * lens[i].max(lens[j]);
        bits[ANG + k] = (angles[i] - angles[j]).abs() <= tol.angle_rad;
        let (u, v) = (quad.edge_vector(i), quad.edge_vector(j));
        bits[PAR + k] = u.cross(v).abs() <= max_parallel_sin * lens[i] * lens[j];
    }
    for i in 0..4 {
        bits[RIGHT + i] = (angles[i] - FRAC_PI_2).abs() <= tol.angle_rad;
    }
    bits
}

/// Relabels vertices `j -> (j + shift) mod 4`.
pub fn cyclic_shift(bits: &[bool; N_FEATURES], shift: usize) -> [bool; N_FEATURES] {
    let mut out = [false; N_FEATURES];
    for (k, &(a, b)) in PAIRS.iter().enumerate() {
        let src = pair_index((a + shift) % 4, (b + shift) % 4);
        out[LEN + k] = bits[LEN + src];
        out[ANG + k] = bits[ANG + src];
        out[PAR + k] = bits[PAR + src];
    }
    for j in 0..4 {
        out[RIGHT + j] = bits[RIGHT + (j + shift) % 4];
    }
    out
}

/// Picks the starting vertex whose feature vector is lexicographically
/// largest (set bits first), making the result independent of which vertex
/// the polygon was listed from.
pub fn canonicalize(bits: &[bool; N_FEATURES]) -> [bool; N_FEATURES] {
    (0..4).map(|s| cyclic_shift(bits, s)).max().expect("four shifts")
}

pub fn extract_features(quad: &Quadrilateral, tol: ExtractionTolerances) -> GeometricFeatureVector {
    GeometricFeatureVector { bits: canonicalize(&raw_features(quad, tol)) }
}

#[cfg(test)]
mod tests {
    use super::super::geometry::{apply_transform, Point};
    use super::*;

    fn quad(pts: [(f64, f64); 4]) -> Quadrilateral {
        Quadrilateral::new(pts.map(|(x, y)| Point::new(x, y))).unwrap()
    }

    #[test]
    fn square_sets_everything_but_crossed_parallels() {
        let q = quad([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let f = extract_features(&q, ExtractionTolerances::EXACT);
        assert_eq!(f.to_string(), "111111 111111 010010 1111");
        assert_eq!(f.count_ones(), 18);
    }

    #[test]
    fn starting_vertex_does_not_matter() {
        let pts = [(0.0, 0.0), (3.0, 0.0), (2.0, 1.0), (0.5, 1.0)];
        let f0 = extract_features(&quad(pts), ExtractionTolerances::EXACT);
        for s in 1..4 {
            let mut rolled = pts;
            rolled.rotate_left(s);
            assert_eq!(extract_features(&quad(rolled), ExtractionTolerances::EXACT), f0);
        }
    }

    #[test]
    fn shift_composes() {
        let bits = raw_features(
            &quad([(0.0, 0.0), (3.0, 0.0), (2.2, 1.0), (0.5, 1.4)]),
            ExtractionTolerances::PERCEPTUAL,
        );
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(
                    cyclic_shift(&cyclic_shift(&bits, a), b),
                    cyclic_shift(&bits, (a + b) % 4)
                );
            }
        }
    }

    #[test]
    fn similarity_transforms_preserve_features() {
        let q = quad([(0.0, 0.0), (3.0, 0.0), (2.0, 1.0), (1.0, 1.0)]);
        let f = extract_features(&q, ExtractionTolerances::EXACT);
        let t = apply_transform(&q, 2.7, 1.1).unwrap();
        assert_eq!(extract_features(&t, ExtractionTolerances::EXACT), f);
    }

    #[test]
    fn parse_round_trip() {
        let f = GeometricFeatureVector::parse("010000 001100 000010 0000").unwrap();
        assert_eq!(GeometricFeatureVector::parse(&f.to_string()), Some(f));
        assert!(GeometricFeatureVector::parse("0101").is_none());
    }
}
