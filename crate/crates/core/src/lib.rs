//! Lower bounds for the centered cube maximal function in high dimension.
//!
//! The pieces, bottom up:
//!
//! - [`measures`]: finite sums of point masses and the integer lattice.
//! - [`maxfun`]: exact evaluation of the centered ℓ∞ maximal function.
//! - [`probability`]: binomial tails and the bracketed estimates built on them.
//! - [`construction`]: the off-center band, union bounds and bound certificates.
//! - [`estimation`]: seeded, parallel Monte Carlo bounds and dimension sweeps.
//! - [`oned`]: the one-dimensional functional and a position optimizer.
//! - [`report`] and [`cli`]: stable CSV/JSON output and the `cubemax` binary.
//!
//! Each capability has a runnable program under `examples/`
//! (`cargo run --release --example eval_point`, `claim_checks`, `eu_exact`,
//! `union_bound`, `mc_bound`, `dimension_sweep`, `oned_search`, `ms_bound`,
//! `certificate`, `reports`).

pub mod cli;
pub mod construction;
pub mod error;
pub mod estimation;
pub mod maxfun;
pub mod measures;
pub mod oned;
pub mod probability;
pub mod report;

pub use error::{Error, Result};
