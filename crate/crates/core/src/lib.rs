#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autoencoder;
pub mod error;
pub mod evaluation;
pub mod itr;
pub mod learners;
pub mod math;
pub mod model;
pub mod outcomes;
pub mod rng;
pub mod screening;
pub mod superlearner;
pub mod synthetic;
pub mod treatment_tree;

pub use error::{Error, Result};
