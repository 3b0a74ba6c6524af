//! Points on the 3-torus R^3/Z^3, stored in the fundamental domain [0,1)^3.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// A point on T^3. Every constructor wraps coordinates into [0,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: [f64; 3],
}

fn wrap_coord(x: f64) -> f64 {
    let y = x - x.floor();
    // x slightly below an integer can round to 1.0
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

impl TorusPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self {
            coords: [wrap_coord(x), wrap_coord(y), wrap_coord(z)],
        }
    }

    pub fn origin() -> Self {
        Self { coords: [0.0; 3] }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn coords(&self) -> [f64; 3] {
        self.coords
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.coords[0], self.coords[1], self.coords[2])
    }

    /// Representative of `self - other` with each coordinate in [-1/2, 1/2).
    pub fn displacement_from(&self, other: &TorusPoint) -> Vector3<f64> {
        let mut d = Vector3::zeros();
        for i in 0..3 {
            let mut di = self.coords[i] - other.coords[i];
            if di >= 0.5 {
                di -= 1.0;
            } else if di < -0.5 {
                di += 1.0;
            }
            d[i] = di;
        }
        d
    }

    /// Torus distance: Euclidean norm of the per-coordinate minimal representatives.
    pub fn dist(&self, other: &TorusPoint) -> f64 {
        self.displacement_from(other).norm()
    }

    /// Lift closest to the origin, coordinates in [-1/2, 1/2).
    pub fn lift_near_origin(&self) -> Vector3<f64> {
        self.displacement_from(&TorusPoint::origin())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_on_construction() {
        let p = TorusPoint::new(1.25, -0.25, 3.0);
        assert_eq!(p.coords(), [0.25, 0.75, 0.0]);
        let q = TorusPoint::new(-1e-18, 0.999_999_999_999_999_9, 0.0);
        for c in q.coords() {
            assert!((0.0..1.0).contains(&c), "coord {c} not wrapped");
        }
    }

    #[test]
    fn distance_basics() {
        let a = TorusPoint::new(0.05, 0.0, 0.0);
        let b = TorusPoint::new(0.95, 0.0, 0.0);
        assert!((a.dist(&b) - 0.1).abs() < 1e-15);
        assert_eq!(a.dist(&b), b.dist(&a));
        // max possible distance is sqrt(3)/2
        let c = TorusPoint::new(0.5, 0.5, 0.5);
        let o = TorusPoint::origin();
        assert!((c.dist(&o) - (3.0f64).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_inequality_random() {
        let mut state = 0x12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let a = TorusPoint::new(next(), next(), next());
            let b = TorusPoint::new(next(), next(), next());
            let c = TorusPoint::new(next(), next(), next());
            assert!(a.dist(&c) <= a.dist(&b) + b.dist(&c) + 1e-12);
        }
    }
}
