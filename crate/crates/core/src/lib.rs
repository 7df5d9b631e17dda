//! Coalescence of weighted coupled-cell networks and steady-state branch
//! analysis of feedforward coalescence networks (FFCNs).
//!
//! The crate is layered bottom-up:
//!
//! * [`network`] builds weighted uniform networks, their adjacency, valency and
//!   Laplacian matrices, and the coalescence operation.
//! * [`spectral`] computes exact (or tolerance-tagged) eigenstructure of
//!   Laplacians and the FFCN spectral identities.
//! * [`system`] realizes diffusive admissible systems from a Taylor jet.
//! * [`branch`] classifies the bifurcation-extension case and produces
//!   analytic predictions via Lyapunov–Schmidt style series computations.
//! * [`continuation`] is an independent Newton/continuation oracle.
//! * [`report`] and [`cli`] assemble everything for the `ffcn` binary.

pub mod branch;
pub mod cli;
pub mod continuation;
pub mod error;
pub mod exact;
pub mod linalg;
pub mod network;
pub mod poly;
pub mod report;
pub mod series;
pub mod spectral;
pub mod system;

pub use error::{Error, Result};
pub use exact::Q;
