//! Small 2D vector type shared by every module.
//!
//! All lane-graph quantities live on the ground plane, so a single planar
//! point type suffices. In normalized BEV coordinates `x` is the lateral
//! axis and `y` carries the depth (the paper's `z`); in pixel space the
//! dedicated `(row, col)` tuple is used instead of this type.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// A 2D point / vector. Serialized compactly as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// 2D cross product (z component of the 3D cross).
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Sum of absolute coordinate differences.
    pub fn l1_dist(self, other: Point2) -> f64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        self + (other - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Componentwise clamp into the unit square.
    pub fn clamp_unit(self) -> Point2 {
        Point2::new(self.x.clamp(0.0, 1.0), self.y.clamp(0.0, 1.0))
    }

    /// True when both coordinates lie in `[0, 1]`.
    pub fn in_unit_square(self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_and_euclidean() {
        let a = Point2::new(0.0, 0.0);
        let b = Point2::new(3.0, 4.0);
        assert_eq!(a.l1_dist(b), 7.0);
        assert_eq!(a.dist(b), 5.0);
    }

    #[test]
    fn serde_roundtrip_is_pair() {
        let p = Point2::new(0.25, 0.75);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[0.25,0.75]");
        let back: Point2 = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
