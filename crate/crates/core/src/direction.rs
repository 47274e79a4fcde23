//! Rational directions: primitive integer vectors with line machinery.

use crate::lattice::{extended_gcd, v, LatticeVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A rational direction u, stored as the primitive vector (a, b).
///
/// The line l_u(n) is {x : a·x₁ + b·x₂ = n}; the open half-plane ℍ_u is
/// {x : a·x₁ + b·x₂ < 0}; consecutive sites on a line differ by u^⊥ = (b, −a).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction {
    pub a: i64,
    pub b: i64,
}

impl Direction {
    /// Reduce any nonzero vector to its primitive direction.
    pub fn new(x: i64, y: i64) -> Option<Direction> {
        let p = v(x, y).primitive()?;
        Some(Direction { a: p.x, b: p.y })
    }

    pub fn vector(self) -> LatticeVector {
        v(self.a, self.b)
    }

    /// ρ_u = 1/‖u‖: the spacing between consecutive lines l_u(n).
    pub fn rho(self) -> f64 {
        1.0 / self.vector().norm()
    }

    /// u^⊥, the step between consecutive sites of a line l_u(n).
    pub fn perp(self) -> LatticeVector {
        v(self.b, -self.a)
    }

    /// A site on l_u(n), from a Bézout solution of a·x + b·y = 1.
    pub fn line_rep(self, n: i64) -> LatticeVector {
        let (g, s, t) = extended_gcd(self.a, self.b);
        debug_assert_eq!(g, 1, "direction must be primitive");
        v(s * n, t * n)
    }

    /// The index n of the line l_u(n) through x.
    pub fn line_value(self, x: LatticeVector) -> i64 {
        self.vector().dot(x)
    }

    pub fn negated(self) -> Direction {
        Direction {
            a: -self.a,
            b: -self.b,
        }
    }

    pub fn angle(self) -> f64 {
        self.vector().angle()
    }
}

impl Serialize for Direction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.a, self.b].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [a, b] = <[i64; 2]>::deserialize(d)?;
        Direction::new(a, b).ok_or_else(|| D::Error::custom("zero direction"))
    }
}
