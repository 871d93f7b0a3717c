//! A numerical laboratory for the multi-frequency inverse source problem of the
//! time-harmonic Maxwell equations in a homogeneous medium.
//!
//! The crate is organised bottom-up:
//!
//! * [`field`], [`geometry`] and [`source`] hold the closure algebra for
//!   divergence-free currents, the domain/mesh description and volume Sobolev
//!   norms.
//! * [`forward`] evaluates radiated fields and boundary traces from the
//!   Green's-function representation, for real and complex wave numbers.
//! * [`spectral`] synthesises multi-frequency boundary datasets and their data
//!   norms; [`dataset_io`] persists them.
//! * [`continuation`] evaluates the entire functionals `I0(k)`, `I1(k)` along
//!   complex paths together with the analytic-continuation bounds.
//! * [`time_domain`] is an independent Kirchhoff (spherical means) solver used as
//!   ground truth for Huygens' principle, the Fourier-Laplace link and Parseval.
//! * [`reconstruction`] is the Tikhonov inverse step and the increasing-stability
//!   sweep; [`cavity`] checks ball eigenvalue monotonicity.
//!
//! All public types are immutable after construction and every operation is a
//! pure function of its inputs, so evaluations may be fanned out freely.

pub mod cavity;
pub mod continuation;
pub mod dataset_io;
pub mod error;
pub mod field;
pub mod forward;
pub mod geometry;
pub mod quadrature;
pub mod reconstruction;
pub mod source;
pub mod spectral;
pub mod stats;
pub mod time_domain;
pub mod volume;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// A point (or real vector) in R^3.
pub type Point = nalgebra::Vector3<f64>;
/// A complex 3-vector.
pub type CVec3 = nalgebra::Vector3<C64>;


pub use field::{Bump, Poly, VectorField};
pub use forward::{FieldSnapshot, ForwardSolver, FrequencyPoint};
pub use geometry::{DomainGeometry, MediumParams, SurfaceMesh};
pub use source::SourcePair;
pub use spectral::{BoundaryDataset, DataNorms};
pub use continuation::{ContinuationFunctional, FunctionalKind, StabilityEnvelope};


pub(crate) fn cvec(v: &Point) -> CVec3 {
    v.map(|x| C64::new(x, 0.0))
}
