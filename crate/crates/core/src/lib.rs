//! Proximal fixed-point method for non-convex consensus problems over unions of
//! polyhedra, with hybrid MPC construction, an ADMM baseline, an enumeration
//! oracle and a geometric regularity checker.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod a3check;
pub mod admm;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod operator;
pub mod oracle;
pub mod polyhedra;
pub mod mpc;
pub mod problem;
pub mod solver;

pub use error::{Error, Result};
pub use numerics::DenseMatrix;
