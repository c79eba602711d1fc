//! Recoverable detectable SWAP over simulated persistent memory.
//!
//! Two self-implementations of a detectable swap object from reads, writes
//! and primitive swap: one for system-wide crashes (global recovery followed
//! by per-process recovery) and one for independent crashes (blocking
//! recovery serialized by a recoverable mutex). A deterministic simulator
//! drives them step by step under crash injection, and the checkers verify
//! every produced history.

pub mod algorithm;
pub mod checker;
pub mod error;
pub mod fragments;
pub mod memory;
pub mod rme_lock;
pub mod sim;
pub mod swap_global;
pub mod swap_indep;
pub mod trace;
pub mod types;

pub use algorithm::{algorithm_for, lookup_algorithm, Model, SwapAlgorithm};
pub use error::Fault;
pub use types::{NodeId, NodeRecord, OpId, Value, VectorTimestamp};
