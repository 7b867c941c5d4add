//! North-East-Down vectors.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// A point or direction in the local NED navigation frame, in meters
/// (or m/s when used as a velocity). `d` is positive down.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub n: f64,
    pub e: f64,
    pub d: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(n: f64, e: f64, d: f64) -> Self {
        Vec3 { n, e, d }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.n * other.n + self.e * other.e + self.d * other.d
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.e * o.d - self.d * o.e,
            self.d * o.n - self.n * o.d,
            self.n * o.e - self.e * o.n,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Unit vector, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let len = self.norm();
        (len > 1e-12).then(|| self * (1.0 / len))
    }

    pub fn is_finite(self) -> bool {
        self.n.is_finite() && self.e.is_finite() && self.d.is_finite()
    }

    /// Componentwise `self <= other`.
    pub fn le(self, other: Vec3) -> bool {
        self.n <= other.n && self.e <= other.e && self.d <= other.d
    }

    pub fn lerp(self, other: Vec3, s: f64) -> Vec3 {
        self + (other - self) * s
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.n, self.e, self.d]
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.n, self.e, self.d)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.n + o.n, self.e + o.e, self.d + o.d)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.n - o.n, self.e - o.e, self.d - o.d)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.n * s, self.e * s, self.d * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.n, -self.e, -self.d)
    }
}
