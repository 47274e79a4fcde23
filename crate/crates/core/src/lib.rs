//! Two-dimensional U-bootstrap percolation.
//!
//! Rule analysis (stability, difficulty, voracity, isotropy), lattice
//! dynamics, exact droplet geometry, Monte Carlo estimation of traversability
//! functions, and numerical minimization of the sharp metastability constant.

pub mod analysis;
pub mod direction;
pub mod droplet;
pub mod engine;
pub mod hfun;
pub mod lambda;
pub mod lattice;
pub mod oracle;
pub mod rng;
pub mod rules;
pub mod scalar;
pub mod scaling;

/// Droplet over `f64` radii, for numerics.
pub type DropletF64 = droplet::Droplet<f64>;
/// Droplet over exact rational radii, for algebraic law checks.
pub type DropletRat = droplet::Droplet<num_rational::BigRational>;
