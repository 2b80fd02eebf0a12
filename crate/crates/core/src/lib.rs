//! SGD with escalating restarts: plateau-triggered warm restarts whose
//! learning rate grows linearly with the restart count, alongside the usual
//! baseline schedules, desk-scale objectives and an experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod error;
pub mod escape;
pub mod harness;
pub mod landscape;
pub mod optim;
pub mod schedule;

pub use error::{Error, Result};
