//! Spoken-command control of a simulated seven-joint arm.

// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod deptree;
pub mod grasp;
pub mod lexicon;
pub mod sdc;
pub mod server;
pub mod sim;
