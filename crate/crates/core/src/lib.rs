//! Numerical toolkit for generalized scattering asymptotics.
//!
//! The crate groups, per module, the machinery needed to compute and test
//! scattering matrices, deviation (regularization) factors, and the
//! divergence structure of truncated interaction expansions for the Coulomb
//! problem, radial Schrodinger and Dirac equations, Dirac-type first-order
//! systems, and the momentum-space Dirac operator:
//!
//! * [`specfun`] - complex log-gamma / digamma, Legendre Q.
//! * [`coulomb`] - closed-form dynamical and stationary Coulomb scattering
//!   functions, deviation factors, and the first-order expansion coefficient.
//! * [`oscillate`] - oscillatory log-singular quadrature for truncated
//!   expansion terms and fits of their logarithmic growth.
//! * [`radial`] - regular-solution integration and S-extraction for radial
//!   Schrodinger, radial Dirac, and Dirac-type systems.
//! * [`ergodic`] - dynamical deviation factors and stationary/dynamical
//!   consistency checks.
//! * [`diracq`] - momentum-space Dirac matrices, spectral projectors, and
//!   block-structure checks for scattering matrices.
//! * [`renorm`] - Dyson-expansion coefficients, divergence-profile fits, and
//!   cutoff renormalization factors.
//!
//! Shared infrastructure lives in [`quad`] (adaptive Gauss-Kronrod),
//! [`ode`] (embedded Runge-Kutta 5(4)), and [`cmatrix`] (small dense complex
//! matrices with a Jacobi eigensolver).

pub mod cmatrix;
pub mod coulomb;
pub mod diracq;
pub mod ergodic;
pub mod error;
pub mod ode;
pub mod oscillate;
pub mod quad;
pub mod radial;
pub mod renorm;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64;
