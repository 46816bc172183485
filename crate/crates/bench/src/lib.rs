//! Benchmark harness, fairness statistics and tuning for contention-managed CAS.

pub mod calibrate;
pub mod cli;
pub mod harness;
pub mod output;
pub mod registration;
pub mod stats;
pub mod tune;
pub mod verify;
pub mod workload;
