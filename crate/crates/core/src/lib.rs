//! Varilet decomposition of piecewise-linear scalar fields on graphs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod field;
pub mod generate;
pub mod io;
pub mod lens;
pub mod mlf;
pub mod subdivision;
pub mod transform;
pub mod ttv;
mod union_find;
pub mod verify;

pub use field::{load_series, DomainGraph, FieldError, ScalarField};
pub use lens::{build_branch_lens, build_threshold_lens, validate_lens, Lens, Region, ResolvedLens};
pub use mlf::{factorize, MiddlePoint, MiddleSpace, MonotoneFactor};
pub use transform::{filter, varilet_transform, FilterCoefficients, TransformError, VariletBasis};
pub use ttv::{ttv, ttv_of};
