//! Rank-one hyperbolic geometry over `R`, `C` and `H`, boundary kernels,
//! random walks on `Gamma(2)`-orbits and a ball-based discretization of
//! hyperbolic Brownian motion.
//!
//! Module map:
//!
//! * [`falgebra`]: scalars of the division algebras.
//! * [`hypspace`]: points, geodesics, `F`-lines, projection, bisectors, curvature.
//! * [`boundary`]: boundary points, Busemann functions, Martin kernels, bisector foliation.
//! * [`lattice`]: free generators of `Gamma(2)`, orbits, cusps and horoballs.
//! * [`walk`]: equivariant random walks, Green's functions and harmonicity defects.
//! * [`brownian`]: exact exit sampling, walk-on-spheres, Harnack constants.
//! * [`lyossul`]: ball data, validation and the discretization loop.
//! * [`par`]: run-indexed parallel maps with a sequential fallback.
//! * [`suite`]: seeded property checks with pinned tolerances.

pub mod boundary;
pub mod brownian;
pub mod falgebra;
pub mod hypspace;
pub mod lattice;
pub mod lyossul;
pub mod par;
pub mod suite;
pub mod walk;

pub use falgebra::{Field, Scalar};
pub use hypspace::{Point, Space, Tangent};
