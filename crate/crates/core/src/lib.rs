//! Numerical verification and spectral analysis for harmonic maps from the
//! round 3-sphere to the 2-sphere.
//!
//! The crate is organised bottom-up:
//!
//! * [`s3geom`]: closed-form frame, coframe, connection, curvature and
//!   conformal Killing field calculus on S³.
//! * [`maps`]: the map grammar (Hopf map, isometries, rational
//!   postcompositions, Möbius maps, singular equator maps) with value and
//!   differential evaluation, energy density and conformality defect.
//! * [`quadrature`]: deterministic Hopf-coordinate quadrature on S³.
//! * [`harmonics`]: harmonic polynomials on ℝ⁴.
//! * [`jacobi`]: the second variation, the Jacobi operator and the Galerkin
//!   Morse index computation.
//! * [`verify`]: identity suites producing [`verify::CheckReport`]s.
//! * [`family`]: conformal sweeps, averages, degrees and the Hopf invariant.

pub mod error;
pub mod family;
pub mod harmonics;
pub mod jacobi;
pub mod maps;
pub mod quadrature;
pub mod reduce;
pub mod rng;
pub mod s3geom;
pub mod verify;

pub use error::{Error, Result};
pub use maps::{MapJet, MapSpec, SphereMap, SurfaceMap};
pub use quadrature::{Integral, QuadratureGrid, SingularPolicy};
pub use s3geom::{CovectorS3, Frame, PointS3, TangentVec};

pub use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
