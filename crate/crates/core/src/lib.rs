#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod harness;
pub mod optimizers;
pub mod oracle;
pub mod problems;
pub mod rng;
pub mod schedules;
pub mod vector;

pub use error::{Error, Result};
pub use vector::ParamVector;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/momentum.md")]
    mod momentum {}
    #[doc = include_str!("../../../book/src/schedules.md")]
    mod schedules {}
    #[doc = include_str!("../../../book/src/normalized.md")]
    mod normalized {}
    #[doc = include_str!("../../../book/src/adaptive.md")]
    mod adaptive {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
