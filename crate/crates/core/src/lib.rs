//! Lorenz-system trajectories and small neural forecasters trained from
//! scratch with hand-written backward passes.

pub mod cli;
pub mod error;
pub mod lorenz;
pub mod models;
pub mod nn;
pub mod optim;
pub mod par;
pub mod train_eval;

pub use error::{Error, Result};
