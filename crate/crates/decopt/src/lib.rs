//! Solvers, bounds, and a bulk-synchronous network simulator for
//! decentralized non-convex consensus optimization.
//!
//! The crate provides:
//!
//! - [`graph`]: connected unweighted graphs, incidence/Laplacian matrices,
//!   and spectral-gap summaries;
//! - [`problems`]: gradient-oracle problem families (binary classification
//!   with a smooth non-convex regularizer, zero-chain worst-case instances,
//!   an activation-function test suite);
//! - [`algorithms`]: two primal-dual consensus solvers (`dgpda`, a gradient
//!   primal-dual scheme, and `xfilter`, which accelerates consensus with a
//!   Chebyshev inner loop) plus a distributed-subgradient baseline;
//! - [`simulator`]: a neighbor-broadcast round simulator that counts
//!   communication and gradient work and can audit message usage;
//! - [`metrics`]: stationarity measures, potential functions, trajectory
//!   inequality checks, and iteration-bound calculators;
//! - [`runner`] / [`config`]: a configuration-driven experiment interface
//!   backing the `decopt` binary and the runnable examples.
//!
//! Start with the `examples/` directory: each file exercises one capability
//! end to end (`cargo run --release --example graph_spectra`, ...).

pub mod graph;
pub mod problems;
pub mod algorithms;
pub mod metrics;
pub mod simulator;
pub mod verify;
pub mod config;
pub mod runner;
pub mod linalg;

pub use graph::{Graph, GraphFamily, GraphMatrices, SpectralSummary};
