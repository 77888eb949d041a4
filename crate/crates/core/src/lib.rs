//! Exact certification of de Finetti, threshold and channel-distinguishability
//! bounds for nonlocal boxes.

pub mod boxes;
pub mod channels;
pub mod corpus;
pub mod definetti;
pub mod error;
pub mod linprog;
pub mod numerics;
pub mod symmetrize;
pub mod threshold;

pub use error::{Error, Result};
