//! Frequency placement for lattices of tunable coupled qubits.
//!
//! The crate models a planar processor of frequency-tunable qubits as a graph
//! of *gate variables* (one idle frequency per qubit, one interaction
//! frequency per coupler), predicts per-gate benchmark error from a
//! characterization of the processor through a decomposable error model, and
//! optimizes the variables with a scoped graph traversal that balances
//! solution quality against combinatorial cost. Supporting modules provide a
//! generative characterization sampler for simulation studies, weight
//! training against measured benchmarks, healing and stitching workflows for
//! incremental recalibration, and a benchmarking harness with standard
//! reports.
//!
//! Entry points:
//!
//! * [`topology`]: processors, lattices, and the gate-variable graph.
//! * [`genmodel`]: sampled processor characterizations and their statistics.
//! * [`estimator`]: the decomposable error model, bounds, and weight training.
//! * [`snake`]: the scoped optimizer plus healing and stitching.
//! * [`benchlab`]: percentile reports, model fits, sweeps, and baselines.
//! * [`fileio`]: atomic artifact writing and run manifests.
//! * [`cli`]: the `snakeopt` command-line tool built from the above.

pub mod benchlab;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod fileio;
pub mod genmodel;
pub mod snake;
pub mod topology;
pub mod train;

pub use error::{Error, Result};
