//! Rothe-scheme simulator for crystal surface relaxation under a
//! gradient-dependent mobility.
//!
//! Each time step solves the coupled second-order system
//!
//! ```text
//! (u_k - u_{k-1}) / dt - div([M(grad u_k) + eps I] grad v_k) + eps v_k = 0
//!            -div(F_eps(|grad u_k|^2) grad u_k) + eps u_k = v_k
//! ```
//!
//! with homogeneous Neumann conditions on a rectangle, and records the
//! discrete energy ledger and mass law the scheme is expected to satisfy.

pub mod error;
pub mod grid;
pub mod config;
pub mod drivers;
pub mod initial;
pub mod model;
pub mod oracles;
pub mod output;
pub mod scheme;
pub mod solvers;

pub use error::{Error, Result};
