//! Hardcore models on finite and ℤᵈ-periodic graphs.
//!
//! Partition functions and free energies are computed from trees of
//! self-avoiding walks truncated at increasing depths; evaluating each tree
//! under the all-unoccupied and all-occupied boundary conditions brackets the
//! exact marginal, so every reported interval is certified. Shifts of finite
//! type with a safe symbol reduce to hardcore models, which gives entropy,
//! pressure, monomer-dimer free energies and spectral radii.

pub mod engine;
pub mod error;
pub mod graph;
pub mod io;
pub mod numeric;
pub mod oracle;
pub mod periodic;
pub mod reductions;
pub mod saw;

pub use engine::{CertifiedInterval, EngineConfig, Normalization};
pub use error::{Error, Result};
pub use graph::{ActivityMap, FiniteGraph};
pub use periodic::{PeriodicGraph, PeriodicVertex};
pub use reductions::TransitionSystem;
