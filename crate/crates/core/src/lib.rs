//! Numerical laboratory for the Lohe tensor aggregation model.
//!
//! An ensemble of `N` complex rank-`m` tensors `T_j` evolves under a shared
//! skew-Hermitian free flow and up to `2^m` cubic coupling terms indexed by
//! binary multi-indices. The crate provides the contractions and their
//! matricized fast path, the free-flow exponential and consistency checks,
//! an RK4 integrator, Lyapunov diagnostics, the low-rank reductions used as
//! cross-validation oracles, and the scenario harness behind the `lohe` CLI.
//!
//! Tensor entries are stored first-index-fastest: the entry at `(α_1,…,α_m)`
//! lives at `Σ_k α_k · Π_{l<k} d_l`.

pub mod coupling;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod expm;
pub mod freeflow;
pub mod harness;
pub mod matrix;
pub mod models;
pub mod reshape;
pub mod rng;
pub mod tensor;

pub use coupling::{CouplingIndex, CouplingSet};
pub use diagnostics::{DiagnosticsRecord, PoleAssignment, PoleVerdict};
pub use dynamics::{simulate, EnsembleState, SimParams, Trajectory};
pub use error::{LoheError, Result};
pub use freeflow::{FlowExp, FreeFlowOp};
pub use matrix::MatC;
pub use reshape::ReshapePlan;
pub use tensor::{MultiIndex, MultiShape, TensorC, C64};
