//! Stochastic Keller–Segel simulation on a Neumann rectangle.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod fields;
pub mod integrator;
pub mod model;
pub mod noise;
pub mod operators;
pub mod output;
pub mod picard;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
