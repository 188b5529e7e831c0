//! Carathéodory evolution on groups of diffeomorphisms.
//!
//! The crate computes `Evol(γ)` for velocities `γ ∈ L^p([0,1], C¹_K(R^n, R^n))`
//! by Banach fixed-point iteration on short subintervals and glues the pieces
//! with the right translations of the group `Diff¹_K(R^n)`. Supporting layers:
//!
//! - [`lp_space`]: step-function representatives of `L^p([a,b], R^m)`.
//! - [`ac_path`]: absolutely continuous paths `η(a) + ∫ γ`.
//! - [`vector_field`]: cubic B-spline fields with compact or periodic support.
//! - [`diff_group`]: the group law `φ ⋆ ψ = ψ + φ∘(id + ψ)`, inverses, group paths.
//! - [`evolution`]: Picard solvers, subdivision and the evolution map.
//! - [`manifold_paths`]: AC paths on the flat torus and the circle via local additions.
//! - [`formats`]: JSON documents and the binary field format.
//!
//! Everything is generic over the scalar ([`Real`]: `f32` or `f64`); the
//! aliases below fix `f64` and `f32`.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ac_path;
pub mod diff_group;
pub mod error;
pub mod evolution;
pub mod formats;
pub mod linalg;
pub mod lp_space;
pub mod manifold_paths;
pub mod scalar;
pub mod vector_field;

pub use ac_path::AcPath;
pub use diff_group::{GroupElement, GroupPath};
pub use error::{Error, Result};
pub use evolution::{evolve, EvolutionResult, EvolveOptions, TimeVelocity};
pub use lp_space::{LpSample, SampleMode, TimeGrid};
pub use manifold_paths::{Circle, FlatTorus, LocalAddition, ManifoldAcPath, SectionTuple};
pub use scalar::Real;
pub use vector_field::{CompactField, Geometry, PeriodicField, VectorField};

pub type TimeGrid64 = TimeGrid<f64>;
pub type LpSample64 = LpSample<f64>;
pub type AcPath64 = AcPath<f64>;
pub type Geometry64 = Geometry<f64>;
pub type CompactField64 = CompactField<f64>;
pub type PeriodicField64 = PeriodicField<f64>;
pub type GroupElement64 = GroupElement<f64, CompactField<f64>>;
pub type GroupPath64 = GroupPath<f64, CompactField<f64>>;
pub type TimeVelocity64 = TimeVelocity<f64, CompactField<f64>>;
pub type TorusVelocity64 = TimeVelocity<f64, PeriodicField<f64>>;
pub type EvolutionResult64 = EvolutionResult<f64, CompactField<f64>>;
pub type ManifoldAcPath64 = ManifoldAcPath<f64>;

pub type TimeGrid32 = TimeGrid<f32>;
pub type LpSample32 = LpSample<f32>;
pub type AcPath32 = AcPath<f32>;
pub type CompactField32 = CompactField<f32>;
pub type TimeVelocity32 = TimeVelocity<f32, CompactField<f32>>;
pub type EvolutionResult32 = EvolutionResult<f32, CompactField<f32>>;
