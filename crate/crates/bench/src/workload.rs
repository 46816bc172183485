use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use cascm_core::{Policy, PolicyParams, DEFAULT_MAX_THREADS};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed the default seed list is derived from.
pub const DEFAULT_BASE_SEED: u64 = 0x5EED_CA5C;
pub const DEFAULT_RUNS: usize = 10;
pub const DEFAULT_DURATION: Duration = Duration::from_secs(5);
pub const DEFAULT_WARMUP: Duration = Duration::from_millis(500);
pub const DEFAULT_PREPOPULATE: usize = 1000;
/// Length of each thread's pre-generated payload array / operation pattern.
pub const PATTERN_LEN: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchKind {
    Cas,
    Queue,
    Stack,
}

impl BenchKind {
    pub fn name(self) -> &'static str {
        match self {
            BenchKind::Cas => "cas",
            BenchKind::Queue => "queue",
            BenchKind::Stack => "stack",
        }
    }
}

impl fmt::Display for BenchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cas" => Ok(BenchKind::Cas),
            "queue" => Ok(BenchKind::Queue),
            "stack" => Ok(BenchKind::Stack),
            _ => Err(format!(
                "unknown bench `{s}` (expected cas, queue or stack)"
            )),
        }
    }
}

/// How long each worker runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    /// Until a shared stop flag is raised after the duration.
    Timed(Duration),
    /// Until the worker has completed this many operations.
    Ops(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadSpec {
    pub bench: BenchKind,
    pub policy: Policy,
    pub params: PolicyParams,
    pub threads: usize,
    pub mode: RunMode,
    /// One run per seed.
    pub seeds: Vec<u64>,
    pub prepopulate: usize,
    /// Untimed run before the measured runs (timed mode only).
    pub warmup: Duration,
    /// Manage queue node links as well as head and tail.
    pub manage_next: bool,
    /// Registry capacity (MAX_THREADS).
    pub max_threads: usize,
    /// Record per-thread operation logs for conservation checks.
    pub audit: bool,
}

impl WorkloadSpec {
    pub fn new(bench: BenchKind, policy: Policy, params: PolicyParams, threads: usize) -> Self {
        WorkloadSpec {
            bench,
            policy,
            params,
            threads,
            mode: RunMode::Timed(DEFAULT_DURATION),
            seeds: default_seeds(DEFAULT_BASE_SEED, DEFAULT_RUNS),
            prepopulate: match bench {
                BenchKind::Cas => 0,
                _ => DEFAULT_PREPOPULATE,
            },
            warmup: DEFAULT_WARMUP,
            manage_next: true,
            max_threads: DEFAULT_MAX_THREADS,
            audit: false,
        }
    }

    pub fn runs(&self) -> usize {
        self.seeds.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.threads == 0 {
            return Err("threads must be at least 1".into());
        }
        if self.threads > self.max_threads {
            return Err(format!(
                "threads ({}) exceeds MAX_THREADS ({})",
                self.threads, self.max_threads
            ));
        }
        if self.threads > 255 {
            return Err("at most 255 worker threads are supported".into());
        }
        if self.seeds.is_empty() {
            return Err("at least one seed (run) is required".into());
        }
        if let RunMode::Ops(0) = self.mode {
            return Err("operation count must be positive".into());
        }
        self.params.validate().map_err(str::to_owned)
    }
}

/// `n` seeds drawn from a generator seeded with `base`.
pub fn default_seeds(base: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    (0..n).map(|_| rng.next_u64()).collect()
}

fn thread_rng(seed: u64, thread: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(thread as u64);
    rng
}

/// The 128 integers of a queue worker: operation `i` enqueues iff entry
/// `i mod 128` is even.
pub fn queue_pattern(seed: u64, thread: usize) -> [u32; PATTERN_LEN] {
    let mut rng = thread_rng(seed, thread);
    std::array::from_fn(|_| rng.next_u32())
}

/// The 128 bits of a stack worker: operation `i` pushes iff bit `i mod 128`
/// is set.
pub fn stack_pattern(seed: u64, thread: usize) -> u128 {
    let mut rng = thread_rng(seed, thread);
    (rng.next_u64() as u128) << 64 | rng.next_u64() as u128
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_reproducible() {
        assert_eq!(default_seeds(1, 10), default_seeds(1, 10));
        assert_ne!(default_seeds(1, 10), default_seeds(2, 10));
        assert_eq!(default_seeds(1, 10).len(), 10);
    }

    #[test]
    fn patterns_depend_on_seed_and_thread() {
        assert_eq!(queue_pattern(3, 0), queue_pattern(3, 0));
        assert_ne!(queue_pattern(3, 0), queue_pattern(3, 1));
        assert_ne!(stack_pattern(3, 0), stack_pattern(4, 0));
        let evens = queue_pattern(9, 2).iter().filter(|x| *x % 2 == 0).count();
        assert!(evens > 30 && evens < 98);
    }

    #[test]
    fn defaults() {
        let s = WorkloadSpec::new(BenchKind::Queue, Policy::Native, PolicyParams::default(), 4);
        assert_eq!(s.prepopulate, 1000);
        assert_eq!(s.runs(), 10);
        assert_eq!(s.mode, RunMode::Timed(Duration::from_secs(5)));
        assert_eq!(
            WorkloadSpec::new(BenchKind::Cas, Policy::Native, PolicyParams::default(), 1)
                .prepopulate,
            0
        );
        let mut bad = s.clone();
        bad.threads = 0;
        assert!(bad.validate().is_err());
        bad.threads = 200;
        assert!(bad.validate().is_err());
    }
}
