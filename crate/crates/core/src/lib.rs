//! Contention management for the compare-and-swap primitive.
//!
//! A [`CmCell`] is a word-sized shared reference whose `read` and `cas`
//! operations are routed through a [`ContentionManager`]. The manager decides
//! what a thread does after a failed CAS (or before a read, for the queueing
//! policies):
//!
//! - [`Policy::Native`]: nothing, the raw hardware CAS.
//! - [`Policy::ConstBackoff`]: spin for a fixed time after a failure.
//! - [`Policy::ExpBackoff`]: spin for `2^min(c·f, m)` ns once the per-thread
//!   failure statistic `f` exceeds a threshold.
//! - [`Policy::TimeSlice`]: when more than `conc` threads are registered, wait
//!   for a randomly chosen time slice after a failure.
//! - [`Policy::Mcs`]: under high contention, serialize read/CAS pairs through
//!   an MCS-style queue of thread indices with bounded waiting.
//! - [`Policy::ArrayBased`]: under high contention, serialize read/CAS pairs
//!   through an ownership token handed off by scanning a record array.
//!
//! Every wait is bounded, so the wrapped CAS stays nonblocking.
//!
//! The crate is `no_std` (it needs `alloc`). Anything that touches a clock,
//! thread-local storage or the OS is injected through [`WaitEnv`]; the
//! `cascm-bench` crate supplies the std implementations.

#![no_std]
#![deny(unsafe_code)]
#![warn(missing_debug_implementations)]

extern crate alloc;

mod arena;
mod array_based;
mod backoff;
mod cell;
mod manager;
mod mcs;
mod params;
mod policy;
mod queue;
mod registry;
mod stack;
mod wait;

pub use arena::{Arena, ArenaExhausted, NodeRef};
pub use array_based::AbState;
pub use backoff::{exp_backoff_exponent, ExpBackoffState, TimeSliceState};
pub use cell::CmCell;
pub use manager::{ContentionManager, ModeSnapshot};
pub use mcs::McsState;
pub use params::{Platform, PolicyParams};
pub use policy::{ParsePolicyError, Policy};
pub use queue::{MsQueue, QueueConfig};
pub use registry::{Registry, RegistryError, ThreadIndex, DEFAULT_MAX_THREADS, NONE};
pub use stack::{CasTally, TreiberStack};
pub use wait::{spin, SpinCalibration, WaitEnv};

/// The opaque payload stored in a cell. The library never dereferences it.
pub type Word = usize;
