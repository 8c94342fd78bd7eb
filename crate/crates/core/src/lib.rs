//! Conformal transformations of the Einstein static universe `R x S^n`:
//! the group `O(2, n+1)`, lifts to the universal cover, and the split of lifts
//! into escaping and non-escaping ones.
//!
//! The guide in `book/` walks through the pieces; its code blocks run as
//! doctests of this crate.

pub mod bridge;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod eins;
pub mod io;
pub mod lift;
pub mod linalg;
pub mod samples;
pub mod survey;
pub mod verify;

pub use config::{Budgets, RunConfig, Tolerances};
pub use error::{Diagnostics, Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/groups.md")]
    mod groups {}
    #[doc = include_str!("../../../book/src/einstein.md")]
    mod einstein {}
    #[doc = include_str!("../../../book/src/lifts.md")]
    mod lifts {}
    #[doc = include_str!("../../../book/src/dichotomy.md")]
    mod dichotomy {}
    #[doc = include_str!("../../../book/src/diamonds.md")]
    mod diamonds {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
