//! Risk minimization for losses with only a finite p-th moment (`1 < p ≤ 2`).
//!
//! The building block is a generalized Catoni M-estimator of a mean
//! ([`catoni::solve_catoni`]) driven by an influence function from
//! [`influence`]. On top of it sit three robust gradient-descent schemes and
//! the usual baselines ([`optim`]), synthetic heavy-tailed data ([`datagen`]),
//! loss families ([`models`]) and the experiment harness ([`harness`]).

pub mod catoni;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod influence;
pub mod models;
pub mod optim;

pub use error::{Error, Result};
