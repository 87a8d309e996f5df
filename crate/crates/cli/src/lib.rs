//! Configuration, strategy registries and commands behind the `qdsaw` binary.

// negated comparisons are how NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod recipes;
pub mod registry;
