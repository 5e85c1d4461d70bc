//! Phaseless inverse scattering for the 3-d Schrödinger equation.
//!
//! Point sources and receivers sit on a circle `S_a` cut from the sphere of
//! radius `B`; only the modulus `f = |u_sc|` of the scattered field is
//! measured. At high frequency `k·f` tends to the chord integral of the
//! potential divided by `8·pi·|x − x⁰|`, so the measured moduli carry the
//! 2-d Radon transform of each slice of the potential, and filtered
//! back-projection recovers the slice.
//!
//! The crate is organized along that pipeline:
//!
//! * [`geometry`] — the chord parametrization `(alpha, s) ↔ (x, x⁰)` and
//!   the confocal-ellipsoid frames used by the time-domain series;
//! * [`phantom`] — compactly supported bump potentials and chord integrals;
//! * [`radon`] — forward sinograms and FBP inversion;
//! * [`timedomain`] — the regular part of the causal fundamental solution,
//!   as a rescattering series over ellipsoids;
//! * [`scatter`] — frequency-domain fields (exact-series and asymptotic
//!   routes) and phaseless dataset synthesis;
//! * [`recon`] — high-frequency limit extraction, sinogram assembly, and
//!   slice/volume reconstruction;
//! * [`io`] — file formats with provenance sidecars.
//!
//! All numerics are generic over the floating scalar through [`Scalar`];
//! the type aliases at the crate root fix `f64` (default) and `f32`
//! instantiations.

// Validation guards are written as `if !(x > y)` on purpose: the negated
// form also rejects NaN, which `if x <= y` would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod io;
pub mod phantom;
pub mod quad;
pub mod radon;
pub mod recon;
pub mod scalar;
pub mod scatter;
pub mod timedomain;
pub mod vec3;

pub use error::{Error, Result};
pub use scalar::Scalar;

// Concrete f64 instantiations: the working types of the pipeline.
pub type Vec3f64 = vec3::Vec3<f64>;
pub type SliceGeometryF64 = geometry::SliceGeometry<f64>;
pub type ChordF64 = geometry::Chord<f64>;
pub type PotentialF64 = phantom::Potential<f64>;
pub type SinogramF64 = radon::Sinogram<f64>;
pub type SliceImageF64 = radon::SliceImage<f64>;
pub type KernelEvaluationF64 = timedomain::KernelEvaluation<f64>;
pub type FrequencyLadderF64 = scatter::FrequencyLadder<f64>;
pub type PhaselessDatasetF64 = scatter::PhaselessDataset<f64>;
pub type VolumeF64 = recon::Volume<f64>;

// f32 instantiations, for memory-bound experimentation.
pub type Vec3f32 = vec3::Vec3<f32>;
pub type SliceGeometryF32 = geometry::SliceGeometry<f32>;
pub type ChordF32 = geometry::Chord<f32>;
pub type PotentialF32 = phantom::Potential<f32>;
pub type SinogramF32 = radon::Sinogram<f32>;
pub type SliceImageF32 = radon::SliceImage<f32>;
pub type KernelEvaluationF32 = timedomain::KernelEvaluation<f32>;
pub type FrequencyLadderF32 = scatter::FrequencyLadder<f32>;
pub type PhaselessDatasetF32 = scatter::PhaselessDataset<f32>;
pub type VolumeF32 = recon::Volume<f32>;
