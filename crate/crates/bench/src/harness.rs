//! Workload drivers: spawn workers, release them together, stop them, join
//! and collect their private counters.

use std::collections::HashMap;
use std::io;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use cascm_core::{
    ArenaExhausted, CasTally, CmCell, ContentionManager, MsQueue, QueueConfig, Registry,
    RegistryError, ThreadIndex, TreiberStack, Word,
};

use crate::calibrate;
use crate::registration::Registration;
use crate::stats::BenchResult;
use crate::workload::{
    queue_pattern, stack_pattern, BenchKind, RunMode, WorkloadSpec, PATTERN_LEN,
};

const _: () = assert!(usize::BITS == 64, "payload encoding assumes 64-bit words");

/// Low 48 bits of a CAS-benchmark payload: its position in the value chain.
pub const CHAIN_MASK: Word = (1 << 48) - 1;
const ITEM_SEQ_BITS: u32 = 40;
/// Node limit for timed structure runs.
const TIMED_NODE_LIMIT: usize = 1 << 26;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid workload: {0}")]
    InvalidSpec(String),
    #[error("failed to spawn worker thread: {0}")]
    Spawn(#[from] io::Error),
    #[error(transparent)]
    Arena(#[from] ArenaExhausted),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Payload of a CAS-benchmark install: thread tag, object slot `j` of the
/// thread's 128, and chain position.
pub fn cas_payload(thread: usize, slot: usize, position: u64) -> Word {
    ((thread + 1) << 56) | ((slot & (PATTERN_LEN - 1)) << 48) | (position as Word & CHAIN_MASK)
}

/// Queue/stack item: producer 0 is the prepopulation, worker `i` is `i + 1`.
pub fn item_tag(producer: usize, seq: u64) -> Word {
    producer << ITEM_SEQ_BITS | seq as Word
}

pub fn item_producer(item: Word) -> usize {
    item >> ITEM_SEQ_BITS
}

pub fn item_seq(item: Word) -> u64 {
    (item & ((1 << ITEM_SEQ_BITS) - 1)) as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Insert,
    Remove,
}

/// Raw logs of a structure run, for conservation and order checks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Audit {
    /// Items inserted per producer; producer `p` inserted sequence numbers
    /// `0..inserted[p]`.
    pub inserted: Vec<u64>,
    /// Items each worker removed, in removal order.
    pub removed: Vec<Vec<Word>>,
    /// Items left after the run (queue: head to tail; stack: top to bottom).
    pub residual: Vec<Word>,
    /// Operation kinds each worker performed, in order.
    pub op_kinds: Vec<Vec<OpKind>>,
}

impl Audit {
    /// inserted = removed ⊎ residual, exactly.
    pub fn check_conservation(&self) -> Result<(), String> {
        let mut seen: HashMap<usize, Vec<u64>> = HashMap::new();
        for item in self.removed.iter().flatten().chain(&self.residual) {
            seen.entry(item_producer(*item))
                .or_default()
                .push(item_seq(*item));
        }
        for (producer, &n) in self.inserted.iter().enumerate() {
            let mut got = seen.remove(&producer).unwrap_or_default();
            got.sort_unstable();
            if got.len() as u64 != n || got.iter().enumerate().any(|(i, &s)| s != i as u64) {
                return Err(format!(
                    "producer {producer}: inserted {n} items, found {} (duplicates or losses)",
                    got.len()
                ));
            }
        }
        if let Some(p) = seen.keys().next() {
            return Err(format!("items from unknown producer {p}"));
        }
        Ok(())
    }

    /// Every consumer, and the residual, sees each producer's items in
    /// increasing sequence order.
    pub fn check_producer_fifo(&self) -> Result<(), String> {
        for (who, log) in self
            .removed
            .iter()
            .chain(std::iter::once(&self.residual))
            .enumerate()
        {
            let mut last: HashMap<usize, u64> = HashMap::new();
            for &item in log {
                let (p, s) = (item_producer(item), item_seq(item));
                if let Some(prev) = last.insert(p, s) {
                    if prev >= s {
                        return Err(format!("log {who}: producer {p} item {s} after {prev}"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub run_index: usize,
    pub seed: u64,
    pub result: BenchResult,
    /// CAS benchmark: number of transitions the cell went through.
    pub chain_length: Option<u64>,
    pub audit: Option<Audit>,
}

#[derive(Default)]
struct WorkerOut {
    successes: u64,
    failures: u64,
    ops: u64,
    removed: Vec<Word>,
    inserted: u64,
    op_kinds: Vec<OpKind>,
}

struct Control {
    stop: AtomicBool,
    target: Option<u64>,
}

impl Control {
    #[inline]
    fn running(&self, done: u64) -> bool {
        match self.target {
            Some(n) => done < n,
            None => !self.stop.load(Ordering::Relaxed),
        }
    }
}

/// Runs `work` on `threads` registered workers released together. Returns
/// each worker's output and the wall time from release to the last join.
fn execute<F>(
    threads: usize,
    mode: RunMode,
    registry: &Arc<Registry>,
    work: F,
) -> Result<(Vec<WorkerOut>, f64), HarnessError>
where
    F: Fn(usize, ThreadIndex, &Control) -> Result<WorkerOut, HarnessError> + Sync,
{
    let control = Control {
        stop: AtomicBool::new(false),
        target: match mode {
            RunMode::Ops(n) => Some(n),
            RunMode::Timed(_) => None,
        },
    };
    let ready = AtomicUsize::new(0);
    let go = AtomicBool::new(false);
    let abort = AtomicBool::new(false);

    thread::scope(|scope| {
        let mut handles = Vec::with_capacity(threads);
        for no in 0..threads {
            let (work, control, ready, go, abort) = (&work, &control, &ready, &go, &abort);
            let registry = registry.clone();
            let spawned = thread::Builder::new()
                .name(format!("worker-{no}"))
                .spawn_scoped(scope, move || -> Result<Option<WorkerOut>, HarnessError> {
                    let reg = Registration::new(registry);
                    ready.fetch_add(1, Ordering::AcqRel);
                    while !go.load(Ordering::Acquire) {
                        if abort.load(Ordering::Acquire) {
                            return Ok(None);
                        }
                        thread::yield_now();
                    }
                    let reg = reg?;
                    work(no, reg.index(), control).map(Some)
                });
            match spawned {
                Ok(h) => handles.push(h),
                Err(e) => {
                    abort.store(true, Ordering::Release);
                    return Err(HarnessError::Spawn(e));
                }
            }
        }
        while ready.load(Ordering::Acquire) < threads {
            thread::yield_now();
        }
        let start = Instant::now();
        go.store(true, Ordering::Release);
        if let RunMode::Timed(d) = mode {
            thread::sleep(d);
            control.stop.store(true, Ordering::Relaxed);
        }
        let mut outs = Vec::with_capacity(threads);
        let mut first_err = None;
        for h in handles {
            match h.join().expect("worker panicked") {
                Ok(Some(o)) => outs.push(o),
                Ok(None) => {}
                Err(e) => {
                    control.stop.store(true, Ordering::Relaxed);
                    first_err.get_or_insert(e);
                }
            }
        }
        let wall = start.elapsed().as_secs_f64();
        match first_err {
            Some(e) => Err(e),
            None => Ok((outs, wall)),
        }
    })
}

fn manager(spec: &WorkloadSpec, registry: &Arc<Registry>, seed: u64) -> ContentionManager {
    ContentionManager::new(
        spec.policy,
        spec.params,
        registry.clone(),
        calibrate::env(),
        seed,
    )
}

fn collect(outs: &[WorkerOut], wall: f64) -> BenchResult {
    BenchResult {
        per_thread_successes: outs.iter().map(|o| o.successes).collect(),
        per_thread_failures: outs.iter().map(|o| o.failures).collect(),
        per_thread_ops: outs.iter().map(|o| o.ops).collect(),
        wall_time_s: wall,
    }
}

fn node_limit(spec: &WorkloadSpec, mode: RunMode) -> usize {
    match mode {
        RunMode::Ops(n) => spec.prepopulate + spec.threads * n as usize + 2,
        RunMode::Timed(_) => TIMED_NODE_LIMIT,
    }
}

/// One run of the CAS micro-benchmark: every worker repeatedly reads the
/// shared cell and tries to install the next of its 128 payloads.
pub fn run_cas_once(
    spec: &WorkloadSpec,
    mode: RunMode,
    run_index: usize,
    seed: u64,
) -> Result<RunReport, HarnessError> {
    let registry = Arc::new(Registry::with_capacity(spec.max_threads));
    let cell = CmCell::new(0, manager(spec, &registry, seed));
    let (outs, wall) = execute(spec.threads, mode, &registry, |no, t, ctl| {
        let mut out = WorkerOut::default();
        let mut slot = 0;
        while ctl.running(out.successes) {
            let seen = cell.read(t);
            let next = cas_payload(no, slot, ((seen & CHAIN_MASK) + 1) as u64);
            slot = (slot + 1) % PATTERN_LEN;
            if cell.cas(t, seen, next) {
                out.successes += 1;
            } else {
                out.failures += 1;
            }
        }
        out.ops = out.successes;
        Ok(out)
    })?;
    let result = collect(&outs, wall);
    let chain = (cell.read_native() & CHAIN_MASK) as u64;
    if chain != result.successes() {
        return Err(HarnessError::Invariant(format!(
            "{} successful CAS but the value chain has {chain} links",
            result.successes()
        )));
    }
    Ok(RunReport {
        run_index,
        seed,
        result,
        chain_length: Some(chain),
        audit: None,
    })
}

/// Operations of a structure benchmark, abstracted over queue and stack.
trait Structure: Sync {
    fn insert(
        &self,
        t: ThreadIndex,
        item: Word,
        tally: &mut CasTally,
    ) -> Result<(), ArenaExhausted>;
    fn remove(&self, t: ThreadIndex, tally: &mut CasTally) -> Option<Word>;
    fn residual(&self) -> Vec<Word>;
}

impl Structure for MsQueue {
    fn insert(
        &self,
        t: ThreadIndex,
        item: Word,
        tally: &mut CasTally,
    ) -> Result<(), ArenaExhausted> {
        self.enqueue_tallied(t, item, tally)
    }
    fn remove(&self, t: ThreadIndex, tally: &mut CasTally) -> Option<Word> {
        self.dequeue_tallied(t, tally)
    }
    fn residual(&self) -> Vec<Word> {
        self.snapshot()
    }
}

impl Structure for TreiberStack {
    fn insert(
        &self,
        t: ThreadIndex,
        item: Word,
        tally: &mut CasTally,
    ) -> Result<(), ArenaExhausted> {
        self.push_tallied(t, item, tally)
    }
    fn remove(&self, t: ThreadIndex, tally: &mut CasTally) -> Option<Word> {
        self.pop_tallied(t, tally)
    }
    fn residual(&self) -> Vec<Word> {
        self.snapshot()
    }
}

fn run_structure<S: Structure>(
    spec: &WorkloadSpec,
    mode: RunMode,
    run_index: usize,
    seed: u64,
    registry: Arc<Registry>,
    structure: S,
    is_insert: impl Fn(usize, usize) -> bool + Sync,
) -> Result<RunReport, HarnessError> {
    {
        let main = Registration::new(registry.clone())?;
        let mut tally = CasTally::default();
        for seq in 0..spec.prepopulate {
            structure.insert(main.index(), item_tag(0, seq as u64), &mut tally)?;
        }
    }
    let audit = spec.audit;
    let (outs, wall) = execute(spec.threads, mode, &registry, |no, t, ctl| {
        let mut out = WorkerOut::default();
        let mut tally = CasTally::default();
        let mut i = 0usize;
        while ctl.running(out.ops) {
            if is_insert(no, i % PATTERN_LEN) {
                structure.insert(t, item_tag(no + 1, out.inserted), &mut tally)?;
                out.inserted += 1;
                if audit {
                    out.op_kinds.push(OpKind::Insert);
                }
            } else {
                let got = structure.remove(t, &mut tally);
                if audit {
                    out.op_kinds.push(OpKind::Remove);
                    out.removed.extend(got);
                }
            }
            out.ops += 1;
            i += 1;
        }
        out.successes = tally.successes;
        out.failures = tally.failures;
        Ok(out)
    })?;
    let result = collect(&outs, wall);
    let audit = audit.then(|| {
        let mut inserted = vec![spec.prepopulate as u64];
        inserted.extend(outs.iter().map(|o| o.inserted));
        Audit {
            inserted,
            residual: structure.residual(),
            removed: outs.iter().map(|o| o.removed.clone()).collect(),
            op_kinds: outs.iter().map(|o| o.op_kinds.clone()).collect(),
        }
    });
    Ok(RunReport {
        run_index,
        seed,
        result,
        chain_length: None,
        audit,
    })
}

/// One run of the queue benchmark.
pub fn run_queue_once(
    spec: &WorkloadSpec,
    mode: RunMode,
    run_index: usize,
    seed: u64,
) -> Result<RunReport, HarnessError> {
    let registry = Arc::new(Registry::with_capacity(spec.max_threads));
    let queue = MsQueue::new(
        || manager(spec, &registry, seed),
        QueueConfig {
            manage_next: spec.manage_next,
            node_limit: node_limit(spec, mode),
        },
    );
    let patterns: Vec<_> = (0..spec.threads)
        .map(|no| queue_pattern(seed, no))
        .collect();
    run_structure(spec, mode, run_index, seed, registry, queue, |no, k| {
        patterns[no][k] % 2 == 0
    })
}

/// One run of the stack benchmark.
pub fn run_stack_once(
    spec: &WorkloadSpec,
    mode: RunMode,
    run_index: usize,
    seed: u64,
) -> Result<RunReport, HarnessError> {
    let registry = Arc::new(Registry::with_capacity(spec.max_threads));
    let stack = TreiberStack::new(manager(spec, &registry, seed), node_limit(spec, mode));
    let patterns: Vec<_> = (0..spec.threads)
        .map(|no| stack_pattern(seed, no))
        .collect();
    run_structure(spec, mode, run_index, seed, registry, stack, |no, k| {
        patterns[no] >> k & 1 == 1
    })
}

fn run_all(
    spec: &WorkloadSpec,
    once: fn(&WorkloadSpec, RunMode, usize, u64) -> Result<RunReport, HarnessError>,
) -> Result<Vec<RunReport>, HarnessError> {
    spec.validate().map_err(HarnessError::InvalidSpec)?;
    if let RunMode::Timed(_) = spec.mode {
        if spec.warmup > Duration::ZERO {
            let mut warm = spec.clone();
            warm.audit = false;
            once(&warm, RunMode::Timed(spec.warmup), 0, spec.seeds[0])?;
        }
    }
    spec.seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| once(spec, spec.mode, i, seed))
        .collect()
}

/// All runs of a CAS micro-benchmark configuration, one per seed.
pub fn run_cas_micro(spec: &WorkloadSpec) -> Result<Vec<RunReport>, HarnessError> {
    expect_kind(spec, BenchKind::Cas)?;
    run_all(spec, run_cas_once)
}

pub fn run_queue_bench(spec: &WorkloadSpec) -> Result<Vec<RunReport>, HarnessError> {
    expect_kind(spec, BenchKind::Queue)?;
    run_all(spec, run_queue_once)
}

pub fn run_stack_bench(spec: &WorkloadSpec) -> Result<Vec<RunReport>, HarnessError> {
    expect_kind(spec, BenchKind::Stack)?;
    run_all(spec, run_stack_once)
}

/// Dispatches on `spec.bench`.
pub fn run(spec: &WorkloadSpec) -> Result<Vec<RunReport>, HarnessError> {
    match spec.bench {
        BenchKind::Cas => run_cas_micro(spec),
        BenchKind::Queue => run_queue_bench(spec),
        BenchKind::Stack => run_stack_bench(spec),
    }
}

fn expect_kind(spec: &WorkloadSpec, kind: BenchKind) -> Result<(), HarnessError> {
    if spec.bench == kind {
        Ok(())
    } else {
        Err(HarnessError::InvalidSpec(format!(
            "expected a {kind} workload, got {}",
            spec.bench
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cascm_core::{Platform, Policy};

    fn spec(bench: BenchKind, policy: Policy, threads: usize, ops: u64) -> WorkloadSpec {
        let mut s = WorkloadSpec::new(bench, policy, Platform::Xeon.params(policy), threads);
        s.mode = RunMode::Ops(ops);
        s.seeds = vec![7];
        s.warmup = Duration::ZERO;
        s.audit = true;
        s
    }

    #[test]
    fn payload_fields() {
        let p = cas_payload(3, 130, 99);
        assert_eq!(p & CHAIN_MASK, 99);
        assert_eq!(p >> 56, 4);
        assert_eq!((p >> 48) & 0xff, 2);
        let it = item_tag(5, 123);
        assert_eq!((item_producer(it), item_seq(it)), (5, 123));
    }

    #[test]
    fn single_thread_native_never_fails() {
        let r = run_cas_micro(&spec(BenchKind::Cas, Policy::Native, 1, 1000)).unwrap();
        assert_eq!(r.len(), 1);
        let res = &r[0].result;
        assert_eq!(res.successes(), 1000);
        assert_eq!(res.failures(), 0);
        assert_eq!(res.ops(), 1000);
        assert_eq!(r[0].chain_length, Some(1000));
    }

    #[test]
    fn chain_length_matches_successes_with_contention() {
        for policy in Policy::ALL {
            let r = run_cas_micro(&spec(BenchKind::Cas, policy, 4, 2_000)).unwrap();
            assert_eq!(r[0].chain_length, Some(8_000), "{policy}");
        }
    }

    #[test]
    fn timed_mode_stops() {
        let mut s = spec(BenchKind::Cas, Policy::ConstBackoff, 2, 0);
        s.mode = RunMode::Timed(Duration::from_millis(50));
        let r = run_cas_micro(&s).unwrap();
        let wall = r[0].result.wall_time_s;
        assert!((0.05..2.0).contains(&wall), "{wall}");
        assert!(r[0].result.successes() > 0);
    }

    #[test]
    fn single_thread_queue_is_exact() {
        let r = run_queue_bench(&spec(BenchKind::Queue, Policy::Native, 1, 10_000)).unwrap();
        assert_eq!(r[0].result.ops(), 10_000);
        let audit = r[0].audit.as_ref().unwrap();
        audit.check_conservation().unwrap();
        audit.check_producer_fifo().unwrap();
        // One thread: the first dequeue returns the first prepopulated item.
        let pattern = queue_pattern(7, 0);
        let first_remove = (0..).find(|&i| pattern[i % 128] % 2 == 1).unwrap();
        assert_eq!(audit.op_kinds[0][first_remove], OpKind::Remove);
        assert_eq!(audit.removed[0][0], item_tag(0, 0));
    }

    #[test]
    fn prepopulated_queue_starts_with_1000() {
        let mut s = spec(BenchKind::Queue, Policy::Native, 1, 1);
        s.prepopulate = 1000;
        let r = run_queue_bench(&s).unwrap();
        let a = r[0].audit.as_ref().unwrap();
        assert_eq!(a.inserted[0], 1000);
        assert_eq!(
            a.residual.len() + a.removed[0].len(),
            1000 + a.inserted[1] as usize
        );
    }

    #[test]
    fn stack_ops_are_exact() {
        let r = run_stack_bench(&spec(BenchKind::Stack, Policy::ExpBackoff, 3, 5_000)).unwrap();
        assert_eq!(r[0].result.per_thread_ops, vec![5_000; 3]);
        r[0].audit.as_ref().unwrap().check_conservation().unwrap();
    }

    #[test]
    fn op_sequences_are_deterministic() {
        let s = spec(BenchKind::Stack, Policy::Native, 3, 3_000);
        let a = run_stack_bench(&s).unwrap();
        let b = run_stack_bench(&s).unwrap();
        assert_eq!(
            a[0].audit.as_ref().unwrap().op_kinds,
            b[0].audit.as_ref().unwrap().op_kinds
        );
        let q = spec(BenchKind::Queue, Policy::TimeSlice, 3, 3_000);
        let a = run_queue_bench(&q).unwrap();
        let b = run_queue_bench(&q).unwrap();
        assert_eq!(
            a[0].audit.as_ref().unwrap().op_kinds,
            b[0].audit.as_ref().unwrap().op_kinds
        );
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let s = spec(BenchKind::Queue, Policy::Native, 1, 10);
        assert!(matches!(
            run_cas_micro(&s),
            Err(HarnessError::InvalidSpec(_))
        ));
    }

    #[test]
    fn audit_detects_loss_and_reordering() {
        let mut a = Audit {
            inserted: vec![2],
            removed: vec![vec![item_tag(0, 1), item_tag(0, 0)]],
            residual: vec![],
            op_kinds: vec![],
        };
        a.check_conservation().unwrap();
        assert!(a.check_producer_fifo().is_err());
        a.removed[0].pop();
        assert!(a.check_conservation().is_err());
    }
}
