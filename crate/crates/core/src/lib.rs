//! Singular density models on R^n with large-scale averaging experiments.
//!
//! The crate models densities that blow up or vanish on small sets (points,
//! hyperplanes, spheres) while remaining integrable, and provides the
//! numerical machinery to probe their large-scale behaviour:
//!
//! * [`density`] - the density catalog, closed-form ball masses, and
//!   membership tests for the Muckenhoupt-type average-product condition;
//! * [`geometry`] - balls, distance functions, and the inclusion checks
//!   behind the overlap argument for comparing two observers;
//! * [`integrate`] - deterministic stratified Monte Carlo mass estimates
//!   and singularity-aware line integrals;
//! * [`ap`] - empirical average-product scans, doubling ratios, and
//!   subset-concentration scans over a ball family;
//! * [`homogeneity`] - paired-observer mass-ratio curves across growing
//!   radii with envelope fits;
//! * [`isotropy`] - directional line masses from a fixed observer and the
//!   sandwich brackets that pin their ratios.
//!
//! All random experiments are driven by explicit seeds and produce
//! bit-identical results for a fixed seed regardless of worker count.

pub mod ap;
pub mod cli;
pub mod density;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod homogeneity;
pub mod integrate;
pub mod isotropy;
pub mod quad;
pub(crate) mod rng;

pub use density::{Density, DensityKind, GeometricSet, Membership, Point, RadialFactor};
pub use error::{Error, Result};
pub use geometry::{Ball, InclusionReport};
