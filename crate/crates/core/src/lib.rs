//! Countable-scale constructions of ω-homogeneous but not ω-transitive
//! permutation groups.
//!
//! * [`ordcore`]: Cantor-normal-form ordinals, interval sets, canonical isos.
//! * [`funcalc`]: partial injections, identity extension, support.
//! * [`termcalc`]: words over registered functions and an indeterminate.
//! * [`niceord`]: nice families and their coherent type-ω orders.
//! * [`homgroup`]: piecewise-monotone groups, the block witness, escapes.
//! * [`bfengine`]: avoidance extension, back-and-forth engine, pair catalogs.
//! * [`genericity`]: scheduled density meeting and the stepping-up rewrites.
//! * [`trace`]: JSON-lines records and the replay verifier.

pub mod bfengine;
pub mod cli;
pub mod error;
pub mod funcalc;
pub mod genericity;
pub mod homgroup;
pub mod niceord;
pub mod ordcore;
pub mod termcalc;
pub mod trace;

pub use error::{Error, Result};
