//! Desk-scale backend flow for face-to-face two-die 3D ICs.

// Negated float comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod check;
pub mod def;
pub mod design;
pub mod error;
pub mod flow;
pub mod gen;
pub mod geom;
pub mod lef;
pub mod metrics;
pub mod partition;
pub mod pdk3d;
pub mod placer;
mod lexer;
pub mod svg;
pub mod tech;
pub mod thermal;
pub mod tiling;

pub use error::{Error, Result};
pub use lexer::Warning;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/library.md")]
    mod library {}
    #[doc = include_str!("../../../book/src/pdk3d.md")]
    mod pdk3d {}
    #[doc = include_str!("../../../book/src/partition.md")]
    mod partition {}
    #[doc = include_str!("../../../book/src/placement.md")]
    mod placement {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/testing.md")]
    mod testing {}
}
