//! Integer lattice primitives shared by every module.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Neg, Sub};

/// A site of the square lattice, or an offset between sites.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeVector {
    pub x: i64,
    pub y: i64,
}

pub const ORIGIN: LatticeVector = LatticeVector { x: 0, y: 0 };

pub fn v(x: i64, y: i64) -> LatticeVector {
    LatticeVector { x, y }
}

impl fmt::Debug for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl Add for LatticeVector {
    type Output = LatticeVector;
    fn add(self, o: LatticeVector) -> LatticeVector {
        v(self.x + o.x, self.y + o.y)
    }
}

impl Sub for LatticeVector {
    type Output = LatticeVector;
    fn sub(self, o: LatticeVector) -> LatticeVector {
        v(self.x - o.x, self.y - o.y)
    }
}

impl Neg for LatticeVector {
    type Output = LatticeVector;
    fn neg(self) -> LatticeVector {
        v(-self.x, -self.y)
    }
}

impl LatticeVector {
    pub fn dot(self, o: LatticeVector) -> i64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product; positive when `o` is counterclockwise from `self`.
    pub fn cross(self, o: LatticeVector) -> i64 {
        self.x * o.y - self.y * o.x
    }

    pub fn scale(self, k: i64) -> LatticeVector {
        v(self.x * k, self.y * k)
    }

    pub fn norm_sq(self) -> i64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn linf(self) -> i64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn is_origin(self) -> bool {
        self.x == 0 && self.y == 0
    }

    /// The primitive vector on the same ray, `None` for the origin.
    pub fn primitive(self) -> Option<LatticeVector> {
        if self.is_origin() {
            return None;
        }
        let g = gcd(self.x.unsigned_abs(), self.y.unsigned_abs()) as i64;
        Some(v(self.x / g, self.y / g))
    }

    /// Angle in [0, 2π) used to order directions counterclockwise from (1,0).
    pub fn angle(self) -> f64 {
        let a = (self.y as f64).atan2(self.x as f64);
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Extended gcd: returns (g, s, t) with a*s + b*t = g.
pub fn extended_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        let sign = if a < 0 { -1 } else { 1 };
        (a.abs(), sign, 0)
    } else {
        let (g, s, t) = extended_gcd(b, a % b);
        (g, t, s - (a / b) * t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitive_reduces() {
        assert_eq!(v(4, -6).primitive(), Some(v(2, -3)));
        assert_eq!(v(0, 5).primitive(), Some(v(0, 1)));
        assert_eq!(ORIGIN.primitive(), None);
    }

    #[test]
    fn bezout() {
        for (a, b) in [(3, 5), (-2, 7), (1, 0), (0, -1), (12, -18)] {
            let (g, s, t) = extended_gcd(a, b);
            assert_eq!(a * s + b * t, g);
            assert!(g > 0);
        }
    }

    #[test]
    fn angle_order() {
        let mut dirs = vec![v(0, -1), v(1, 0), v(-1, 0), v(0, 1)];
        dirs.sort_by(|a, b| a.angle().partial_cmp(&b.angle()).unwrap());
        assert_eq!(dirs, vec![v(1, 0), v(0, 1), v(-1, 0), v(0, -1)]);
    }
}
