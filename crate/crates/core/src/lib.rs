//! Solid-angle weighted lattice sums over integer polytopes.
//!
//! The crate evaluates sums `Σ_n ω_P(x+n) q(x+n)` over the lattice points of
//! an integer simplicial complex `P`, weighting boundary points by the
//! normalized solid angle `ω_P`, and expands them in multivariate periodized
//! Bernoulli polynomials.  The expansion yields a weighted Riemann sum whose
//! error contains only even powers of the mesh size, which Richardson-type
//! extrapolation turns into a high-order quadrature rule.
//!
//! Module map:
//!
//! * [`bernoulli1d`] – periodized Bernoulli polynomials on the line.
//! * [`bases`] – the recursive basis families, λ-vectors and cone partition.
//! * [`geometry`] – integer simplices, complexes, solid angles, lattice sums.
//! * [`field`] – parsed integrands with exact symbolic partial derivatives.
//! * [`mvb`] – multivariate periodized Bernoulli functions `𝔅_{J,L}`.
//! * [`mu`] – the integro-differential functionals `μ(V,I,J)`.
//! * [`fourier`] – asymptotic Fourier expansion of `g·χ_simplex`.
//! * [`em`] – Euler–Maclaurin expansions and the `γ_k` coefficients.
//! * [`quadrature`] – extrapolated quadrature and convergence tables.

pub mod bases;
pub mod bernoulli1d;
pub mod em;
pub mod field;
pub mod fourier;
pub mod geometry;
pub mod gl;
pub mod linalg;
pub mod mu;
pub mod mvb;
pub mod quadrature;
pub mod sum;

mod error;

pub use error::Error;
