//! Feasible planning regions for distribution grids.
//!
//! The pipeline runs from a grid model through supply-task variation and
//! heuristic reinforcement to feasible operation regions (FORs) at the PCC,
//! stacks those along the cost axis into a feasible planning region (FPR),
//! linearizes it and plugs the result into a linear capacity expansion model.

pub mod cep;
pub mod error;
pub mod expansion;
pub mod for_engine;
pub mod fpr_builder;
pub mod geometry;
pub mod grid_model;
pub mod lp;
pub mod pipeline;
pub mod power_flow;
pub mod scenario_gen;

#[cfg(test)]
mod test_support;

pub use error::{Error, Result};
