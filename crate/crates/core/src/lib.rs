//! Data-driven planar limit surfaces.
//!
//! A limit surface is the 1-level set of a convex, even, homogeneous function
//! `H` of the normalized generalized load `F = (fx, fy, tau/rho)`. Under
//! maximum work the sliding twist is parallel to `grad H(F)`. This crate fits
//! `H` as a polynomial from `(F, V)` pairs, optionally certifying convexity
//! with a sum-of-squares Gram matrix, and uses the fit to predict quasi-static
//! pushing and free dynamic sliding.
//!
//! ```
//! use limit_surface::poly_model::PolyModel;
//! use nalgebra::Vector3;
//!
//! let model = PolyModel::sphere_quartic();
//! let v = model.predict_velocity_direction(&Vector3::new(0.0, 0.6, 0.8)).unwrap();
//! assert!((v - Vector3::new(0.0, 0.6, 0.8)).norm() < 1e-12);
//! ```

pub mod applications;
pub mod error;
pub mod harness;
pub mod identification;
pub mod inversion;
pub mod io;
pub mod poly_model;
pub mod solver;
pub mod sos;
pub mod support_oracle;
pub mod wrench_space;

pub use error::{Error, Result};
pub use poly_model::{ModelKind, PolyModel};
pub use wrench_space::{GeneralizedLoad, GeneralizedVelocity};
