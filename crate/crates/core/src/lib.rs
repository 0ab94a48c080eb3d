//! Exponential sums, local densities and point counts for ternary quadratic
//! equations F(x) = m, checked against brute-force oracles.

pub mod arith;
pub mod characters;
pub mod cli;
pub mod counter;
pub mod delta;
pub mod densities;
pub mod error;
pub mod expsums;
pub mod forms;
pub mod predictor;
pub mod quad;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub mod chapter1 {}
    #[doc = include_str!("../../../book/src/problems.md")]
    pub mod chapter2 {}
    #[doc = include_str!("../../../book/src/expsums.md")]
    pub mod chapter3 {}
    #[doc = include_str!("../../../book/src/densities.md")]
    pub mod chapter4 {}
    #[doc = include_str!("../../../book/src/counting.md")]
    pub mod chapter5 {}
    #[doc = include_str!("../../../book/src/prediction.md")]
    pub mod chapter6 {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod chapter7 {}
}
