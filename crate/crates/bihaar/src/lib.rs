//! Biparameter dyadic Haar analysis on finite grids over the unit square.
//!
//! The crate provides the model operators of biparameter dyadic harmonic
//! analysis — Haar transforms, paraproducts, dyadic shifts (cancellative and
//! non-cancellative), square and maximal functions, Muckenhoupt weights and
//! weighted BMO norms — together with exact decomposition identities and
//! norm-ratio estimators for two-weight commutator experiments.

pub mod axis;
pub mod bmo;
pub mod error;
pub mod function;
pub mod grid;
pub mod haar;
pub mod para;
pub mod sqmax;
pub mod weight;

pub use axis::{Axis, AxisFunction};
pub use error::{Error, Result};
pub use function::GridFunction;
pub use grid::{CubeId, DyadicGrid, Param, RectId};
pub use haar::{haar_forward, haar_inverse, Analysis, HaarSpectrum, MartingaleMask, MaskScope};
pub use weight::{
    ap_characteristic, averaged_weight, conjugate_weight, duality_gap, generate_weight,
    weighted_lp_norm, ApScope, AxisWeight, BloomTriple, GeneratorKind, Weight, WeightFamilyConfig,
};
