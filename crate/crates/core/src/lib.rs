//! Rosen continued fractions: the map `T_q`, its transfer operator, invariant
//! density, mixing of intervals and central limit experiments.

pub mod bv;
pub mod clt;
pub mod error;
pub mod export;
pub mod interval;
pub mod mixing;
pub mod piecewise;
pub mod rosen_map;
pub mod special;
pub mod transfer;

pub use error::{Error, Result};
pub use interval::{Interval, IntervalSet};
pub use piecewise::PiecewiseFn;
pub use rosen_map::{Branch, Digit, RosenParams, Sign};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/expansions.md")]
    mod expansions {}
    #[doc = include_str!("../../../book/src/transfer.md")]
    mod transfer {}
    #[doc = include_str!("../../../book/src/variation.md")]
    mod variation {}
    #[doc = include_str!("../../../book/src/mixing.md")]
    mod mixing {}
    #[doc = include_str!("../../../book/src/clt.md")]
    mod clt {}
}
