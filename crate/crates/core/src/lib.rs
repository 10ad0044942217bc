//! Deterministic discrete-velocity kinetic solver for rarefied gas flows
//! around moving rigid bodies on cut-cell Cartesian grids.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod geometry;
pub mod output;
pub mod rigid_body;
pub mod run;
pub mod scenarios;
pub mod scene;
pub mod shapes;
pub mod solver;
pub mod velocity_space;

pub use error::{Error, Result};

pub type Vec2 = nalgebra::Vector2<f64>;
