//! Conversion of matrix-exponential distributions to Markovian phase-type
//! representations.

// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod deconv;
pub mod error;
pub mod linalg;
pub mod monocyclic;
pub mod pipeline;
pub mod rep;
pub mod spectral;
pub mod tail;
pub mod tolerance;
pub mod validate;

pub use error::{Error, Result};
pub use pipeline::{convert, ConvertOptions, PaperBounds};
pub use rep::MERep;
pub use tail::PHRep;
pub use tolerance::ToleranceConfig;
