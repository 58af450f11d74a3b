//! Simulation and estimation toolkit for a two-player teaching game.
//!
//! A learner collects shaped, colored objects from one of four clusters per
//! trial while a teacher helps through demonstrations or chat, under full or
//! partial visibility of what the learner sees. The crate generates boards,
//! simulates teacher/learner pairs, and recovers feature utilities from
//! choices with a nested logit model fitted by L1-regularized MAP estimation
//! using Powell's method.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod analysis;
pub mod choicemodel;
pub mod env;
pub mod error;
pub mod optimize;
pub mod seed;

pub use error::{Error, Result};
