// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod error;
pub mod field;
pub mod geom;
pub mod net;
pub mod oracle;
pub mod plan;
pub mod speed;
pub mod train;

pub use error::{Error, Result};
pub use field::{predicted_speed, AnalyticDistanceField, FieldEval, FieldFamily, TimeField};
