use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// A point or displacement in the local east/north/up frame, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Points are plain vectors; the alias keeps signatures readable.
pub type Position3 = Vec3;

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const UNIT_Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-9
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Position3,
    direction: Vec3,
}

impl Ray {
    pub fn new(origin: Position3, direction: Vec3) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::InvalidPosition("ray origin is not finite".into()));
        }
        if !direction.is_finite() || !direction.is_unit() {
            return Err(Error::Domain(format!(
                "ray direction must be a unit vector, got norm {}",
                direction.norm()
            )));
        }
        Ok(Self { origin, direction })
    }

    /// Builds a ray from any non-zero direction by normalizing it.
    pub fn towards(origin: Position3, direction: Vec3) -> Result<Self> {
        let d = direction
            .normalized()
            .ok_or_else(|| Error::Domain("ray direction has zero length".into()))?;
        Self::new(origin, d)
    }

    pub fn origin(&self) -> Position3 {
        self.origin
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Position3 {
        self.origin + self.direction * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_is_right_handed() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(x.cross(y), Vec3::UNIT_Z);
    }

    #[test]
    fn ray_rejects_non_unit_direction() {
        assert!(Ray::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 2.0)).is_err());
        let r = Ray::towards(Vec3::ZERO, Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert!(r.direction().is_unit());
    }
}
