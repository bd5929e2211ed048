#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod formats;
pub mod io;
pub mod pipeline;
pub mod report;

pub use pdx_itr_core as core;
