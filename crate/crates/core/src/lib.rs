//! Simulator for federated learning over a mobile-edge network with
//! partial dataset offloading and closed-form resource allocation.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod error;
pub mod fl;
pub mod link;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
pub mod optimizer;
pub mod oracle;
pub mod orchestrator;
pub mod io;
pub mod verify;
