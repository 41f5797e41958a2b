//! Fourier-spectral x isogeometric discretization of Maxwell problems on
//! axisymmetric domains.
//!
//! A cross-section `S` in the `(rho, z)` half-plane is parametrized by a
//! NURBS map of the unit square. On it we build the compatible B-spline
//! complex `X0 -> X1 -> X1* -> X2` and, for every Fourier mode `m != 0`,
//! the cylindrical mode spaces obtained from it through the `eta` maps.
//! All discrete unknowns live in the Cartesian ("tilde") factor spaces, so
//! the discrete grad/curl/div matrices are exact, independent of `m`, and
//! no `1/rho` ever has to be evaluated.
//!
//! Module map:
//!
//! * [`spline`]: knot vectors, B-spline and NURBS bases.
//! * [`quadrature`]: Gauss-Legendre rules and weighted element rules.
//! * [`geometry`]: the cross-section map, its Jacobian and the pullbacks.
//! * [`derham`]: the discrete complex, its operator matrices, mode fields.
//! * [`assembly`]: per-mode mass, curl-curl, mixed and load assembly.
//! * [`manufactured`]: closed-form manufactured vector potential.
//! * [`solve`]: dense generalized eigensolver and saddle-point solver.
//! * [`bessel`]: Bessel functions, their roots, pillbox frequencies.
//! * [`study`]: experiment drivers, configuration and reports.

// index loops mirror the formulas; `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod bessel;
pub mod derham;
pub mod error;
pub mod geometry;
pub mod manufactured;
pub mod quadrature;
pub mod solve;
pub mod sparse;
pub mod spline;
pub mod study;

pub use error::{Error, Result};

/// Vacuum permittivity in F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.8542e-12;
/// Vacuum permeability in H/m.
pub const VACUUM_PERMEABILITY: f64 = 4.0e-7 * std::f64::consts::PI;
