use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// Simple, counterclockwise quadrilateral with no three collinear vertices.
/// Edge `i` runs from vertex `i` to vertex `i + 1 (mod 4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrilateral {
    vertices: [Point; 4],
}

const COLLINEAR_SIN: f64 = 1e-9;

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = b.sub(a).cross(c.sub(a));
    let o2 = b.sub(a).cross(d.sub(a));
    let o3 = d.sub(c).cross(a.sub(c));
    let o4 = d.sub(c).cross(b.sub(c));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

impl Quadrilateral {
    /// Validates and orients the polygon; a clockwise input is reversed while
    /// keeping vertex 0 first.
    pub fn new(vertices: [Point; 4]) -> Result<Self> {
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invalid("quadrilateral", "non-finite vertex"));
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                for k in (j + 1)..4 {
                    let (a, b, c) = (vertices[i], vertices[j], vertices[k]);
                    let u = b.sub(a);
                    let v = c.sub(a);
                    let scale = u.norm() * v.norm();
                    if scale == 0.0 || u.cross(v).abs() <= COLLINEAR_SIN * scale {
                        return Err(Error::invalid("quadrilateral", "three collinear vertices"));
                    }
                }
            }
        }
        let [a, b, c, d] = vertices;
        if segments_cross(a, b, c, d) || segments_cross(b, c, d, a) {
            return Err(Error::invalid("quadrilateral", "self-intersecting"));
        }
        let mut q = Quadrilateral { vertices };
        if q.signed_area() < 0.0 {
            q.vertices = [a, d, c, b];
        }
        Ok(q)
    }

    pub fn vertices(&self) -> &[Point; 4] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i % 4]
    }

    /// Shoelace area, positive for counterclockwise order.
    pub fn signed_area(&self) -> f64 {
        0.5 * (0..4)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % 4]))
            .sum::<f64>()
    }

    /// Mean of the four vertices.
    pub fn centroid(&self) -> Point {
        let s = self.vertices.iter().fold(Point::new(0.0, 0.0), |acc, p| acc.add(*p));
        s.scale(0.25)
    }

    pub fn edge_vector(&self, i: usize) -> Point {
        self.vertex(i + 1).sub(self.vertex(i))
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        self.edge_vector(i).norm()
    }

    /// Interior angle at vertex `i` in `(0, 2π)`.
    pub fn interior_angle(&self, i: usize) -> f64 {
        let incoming = self.vertex(i).sub(self.vertex(i + 3));
        let outgoing = self.vertex(i + 1).sub(self.vertex(i));
        let turn = incoming.cross(outgoing).atan2(incoming.dot(outgoing));
        PI - turn
    }

    pub fn is_convex(&self) -> bool {
        (0..4).all(|i| self.edge_vector(i).cross(self.edge_vector(i + 1)) > 0.0)
    }

    pub fn diagonal_of_bounds(&self) -> f64 {
        let (mut lo, mut hi) = (self.vertices[0], self.vertices[0]);
        for p in &self.vertices {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        hi.sub(lo).norm()
    }

    /// Largest vertex distance from the centroid.
    pub fn radius(&self) -> f64 {
        let c = self.centroid();
        self.vertices.iter().map(|p| p.sub(c).norm()).fold(0.0, f64::max)
    }

    /// Centered at the origin with unit [`radius`](Self::radius).
    pub fn normalized(&self) -> Quadrilateral {
        let c = self.centroid();
        let r = self.radius();
        Quadrilateral { vertices: self.vertices.map(|p| p.sub(c).scale(1.0 / r)) }
    }

    /// Index of the vertex with the smallest y, ties to the largest x.
    pub fn lowest_rightmost(&self) -> usize {
        let mut best = 0;
        for i in 1..4 {
            let (p, b) = (self.vertices[i], self.vertices[best]);
            let tie = (p.y - b.y).abs() <= 1e-9 * (1.0 + b.y.abs());
            if (tie && p.x > b.x) || (!tie && p.y < b.y) {
                best = i;
            }
        }
        best
    }

    pub fn with_vertex(&self, i: usize, p: Point) -> Result<Quadrilateral> {
        let mut v = self.vertices;
        v[i] = p;
        Quadrilateral::new(v)
    }
}

/// Rotation by `rotation` radians and uniform scaling by `scale`, both about
/// the centroid.
pub fn apply_transform(quad: &Quadrilateral, scale: f64, rotation: f64) -> Result<Quadrilateral> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Precondition(format!("scale must be positive, got {scale}")));
    }
    let c = quad.centroid();
    Ok(Quadrilateral {
        vertices: quad.vertices.map(|p| c.add(p.sub(c).rotate(rotation).scale(scale))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Quadrilateral {
        Quadrilateral::new([
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn rejects_degenerate_and_crossing_polygons() {
        let collinear = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(Quadrilateral::new(collinear).is_err());
        let bowtie = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(Quadrilateral::new(bowtie).is_err());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let q = Quadrilateral::new([
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(q.signed_area() > 0.0);
        assert_eq!(q.vertex(0), Point::new(0.0, 0.0));
    }

    #[test]
    fn angles_of_a_concave_dart_sum_to_two_pi() {
        let q = Quadrilateral::new([
            Point::new(0.0, 0.0),
            Point::new(2.0, -1.0),
            Point::new(0.5, 0.0),
            Point::new(2.0, 1.0),
        ])
        .unwrap();
        let total: f64 = (0..4).map(|i| q.interior_angle(i)).sum();
        assert!((total - 2.0 * PI).abs() < 1e-12);
        assert!(!q.is_convex());
        assert!(q.interior_angle(2) > PI);
    }

    #[test]
    fn identity_transform() {
        let q = unit_square();
        assert_eq!(apply_transform(&q, 1.0, 0.0).unwrap(), q);
        assert!(apply_transform(&q, 0.0, 0.0).is_err());
    }

    #[test]
    fn half_turn_maps_square_onto_itself() {
        let q = unit_square();
        let r = apply_transform(&q, 1.0, PI).unwrap();
        for p in r.vertices() {
            assert!(q.vertices().iter().any(|v| v.sub(*p).norm() < 1e-9), "{p:?}");
        }
    }

    #[test]
    fn lowest_rightmost_vertex() {
        assert_eq!(unit_square().lowest_rightmost(), 1);
    }
}
