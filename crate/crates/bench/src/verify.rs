//! Self-checks runnable from the command line.

use std::fmt;
use std::str::FromStr;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use cascm_core::{
    CmCell, ContentionManager, ModeSnapshot, Platform, Policy, PolicyParams, Registry,
};

use crate::calibrate;
use crate::harness::{self, HarnessError};
use crate::registration::Registration;
use crate::workload::{BenchKind, RunMode, WorkloadSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Chain,
    Conservation,
    Fairness,
    BoundedWait,
    Modes,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Chain,
        Suite::Conservation,
        Suite::Fairness,
        Suite::BoundedWait,
        Suite::Modes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Chain => "chain",
            Suite::Conservation => "conservation",
            Suite::Fairness => "fairness",
            Suite::BoundedWait => "bounded-wait",
            Suite::Modes => "modes",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                format!("unknown suite `{s}` (expected chain, conservation, fairness, bounded-wait or modes)")
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Intensity {
    pub threads: usize,
    pub ops: u64,
    pub trials: usize,
}

impl Intensity {
    pub const QUICK: Intensity = Intensity {
        threads: 4,
        ops: 10_000,
        trials: 10,
    };
    pub const FULL: Intensity = Intensity {
        threads: 8,
        ops: 100_000,
        trials: 100,
    };
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub suite: Suite,
    pub policy: Policy,
    /// `None` when the check does not apply to the policy.
    pub passed: Option<bool>,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match self.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        write!(
            f,
            "{status} {} {}: {}",
            self.suite, self.policy, self.detail
        )
    }
}

/// Runs `suite` for every policy in `policies` with its platform preset.
pub fn run_suite(
    suite: Suite,
    policies: &[Policy],
    platform: Platform,
    intensity: Intensity,
) -> Vec<CheckResult> {
    policies
        .iter()
        .map(|&policy| {
            let params = platform.params(policy);
            let outcome = match suite {
                Suite::Chain => check_chain(policy, params, intensity),
                Suite::Conservation => check_conservation(policy, params, intensity),
                Suite::Fairness => check_fairness(policy, params, intensity),
                Suite::BoundedWait => check_bounded_wait(policy, params, intensity.trials),
                Suite::Modes => check_modes(policy, params),
            };
            let (passed, detail) = match outcome {
                Ok(Some(d)) => (Some(true), d),
                Ok(None) => (None, "not applicable".to_owned()),
                Err(d) => (Some(false), d),
            };
            CheckResult {
                suite,
                policy,
                passed,
                detail,
            }
        })
        .collect()
}

type Outcome = Result<Option<String>, String>;

fn ops_spec(bench: BenchKind, policy: Policy, params: PolicyParams, n: Intensity) -> WorkloadSpec {
    let mut s = WorkloadSpec::new(bench, policy, params, n.threads);
    s.mode = RunMode::Ops(n.ops);
    s.seeds = vec![crate::workload::DEFAULT_BASE_SEED];
    s.warmup = Duration::ZERO;
    s
}

fn harness_err(e: HarnessError) -> String {
    e.to_string()
}

fn check_chain(policy: Policy, params: PolicyParams, n: Intensity) -> Outcome {
    let spec = ops_spec(BenchKind::Cas, policy, params, n);
    let r = harness::run(&spec).map_err(harness_err)?;
    let chain = r[0].chain_length.unwrap_or(0);
    let expected = n.threads as u64 * n.ops;
    if chain != expected {
        return Err(format!("chain length {chain}, expected {expected}"));
    }
    Ok(Some(format!("{chain} installs, chain intact")))
}

fn check_conservation(policy: Policy, params: PolicyParams, n: Intensity) -> Outcome {
    let mut details = Vec::new();
    for bench in [BenchKind::Queue, BenchKind::Stack] {
        let mut spec = ops_spec(bench, policy, params, n);
        spec.audit = true;
        let r = harness::run(&spec).map_err(harness_err)?;
        let audit = r[0].audit.as_ref().expect("audit requested");
        audit
            .check_conservation()
            .map_err(|e| format!("{bench}: {e}"))?;
        if bench == BenchKind::Queue {
            audit
                .check_producer_fifo()
                .map_err(|e| format!("{bench}: {e}"))?;
        }
        details.push(format!("{bench} {} ops", r[0].result.ops()));
    }
    Ok(Some(details.join(", ")))
}

fn check_fairness(policy: Policy, params: PolicyParams, n: Intensity) -> Outcome {
    let spec = ops_spec(BenchKind::Cas, policy, params, n);
    let r = harness::run(&spec).map_err(harness_err)?;
    let res = &r[0].result;
    // Use failures as the sample: with a fixed operation count the
    // completed-operation counts are all equal.
    let failures: Vec<f64> = res.per_thread_failures.iter().map(|&x| x as f64).collect();
    let f = res.fairness().map_err(|e| e.to_string())?;
    let nf = n.threads as f64;
    if (f.jain - 1.0).abs() > 1e-12 || f.norm_stdev.abs() > 1e-12 {
        return Err(format!(
            "equal op counts gave jain {} cv {}",
            f.jain, f.norm_stdev
        ));
    }
    match crate::stats::jain_index(&failures) {
        Ok(j) if j < 1.0 / nf - 1e-12 || j > 1.0 + 1e-12 => {
            Err(format!("jain of failures {j} outside [1/n, 1]"))
        }
        Ok(j) => Ok(Some(format!("jain(failures) {j:.4}"))),
        Err(_) => Ok(Some("no failures".to_owned())),
    }
}

/// A thread is parked while holding the serialization resource (MCS queue
/// tail or AB ownership token); other threads must still finish a read/CAS
/// pair within ten maximum waits.
fn check_bounded_wait(policy: Policy, params: PolicyParams, trials: usize) -> Outcome {
    if !matches!(policy, Policy::Mcs | Policy::ArrayBased) {
        return Ok(None);
    }
    let hw = thread::available_parallelism().map_or(1, |n| n.get());
    let worst = bounded_wait_worst(policy, params, trials, bounded_wait_contenders(hw))?;
    let bound = Duration::from_secs_f64(10.0 * params.max_wait_ms / 1e3);
    if worst > bound {
        return Err(format!("worst read/CAS pair {worst:?} exceeds {bound:?}"));
    }
    Ok(Some(format!(
        "worst pair {worst:?} over {trials} trials (bound {bound:?})"
    )))
}

/// Threads competing with the parked holder. Spinning waiters share the
/// CPU on small machines, which stretches their iteration-counted waits, so
/// fewer are used there.
pub fn bounded_wait_contenders(hw_threads: usize) -> usize {
    (hw_threads + 1).clamp(2, 3)
}

/// Worst read+CAS latency of `others` threads while a parked thread holds
/// the policy's serialization resource.
pub fn bounded_wait_worst(
    policy: Policy,
    params: PolicyParams,
    trials: usize,
    others: usize,
) -> Result<Duration, String> {
    let mut worst = Duration::ZERO;
    for _ in 0..trials {
        let registry = Arc::new(Registry::new());
        let cell = CmCell::new(
            0,
            ContentionManager::new(policy, params, registry.clone(), calibrate::env(), 1),
        );
        let (held_tx, held_rx) = mpsc::channel();
        let (release_tx, release_rx) = mpsc::channel::<()>();
        let times = thread::scope(|s| {
            let (cell, registry) = (&cell, &registry);
            s.spawn(move || {
                let reg = Registration::new(registry.clone()).unwrap();
                force_high(cell, &reg);
                cell.read(reg.index());
                let holding = match policy {
                    Policy::Mcs => {
                        cell.manager().mcs_state().unwrap().tail() == reg.index().get() as i32
                    }
                    _ => cell.manager().ab_state().unwrap().owner() == reg.index().get() as i32,
                };
                held_tx.send(holding).unwrap();
                let _ = release_rx.recv();
            });
            if !held_rx.recv().unwrap() {
                drop(release_tx);
                return Err("parked thread did not acquire the resource".to_owned());
            }
            let handles: Vec<_> = (0..others)
                .map(|_| {
                    s.spawn(move || {
                        let reg = Registration::new(registry.clone()).unwrap();
                        force_high(cell, &reg);
                        let t = reg.index();
                        let start = Instant::now();
                        let v = cell.read(t);
                        cell.cas(t, v, v + 1);
                        start.elapsed()
                    })
                })
                .collect();
            let times: Vec<Duration> = handles.into_iter().map(|h| h.join().unwrap()).collect();
            drop(release_tx);
            Ok(times)
        })?;
        worst = times.into_iter().fold(worst, Duration::max);
    }
    Ok(worst)
}

/// Drives the calling thread into high-contention mode with failing CAS.
fn force_high(cell: &CmCell, reg: &Registration) {
    let t = reg.index();
    let threshold = cell.manager().params().contention_threshold;
    for _ in 0..threshold {
        let v = cell.read_native();
        cell.cas(t, v.wrapping_add(1), v);
    }
}

/// Scripted single-thread walk through both mode transitions.
fn check_modes(policy: Policy, params: PolicyParams) -> Outcome {
    if !matches!(policy, Policy::Mcs | Policy::ArrayBased) {
        return Ok(None);
    }
    let registry = Arc::new(Registry::new());
    let cell = CmCell::new(
        0,
        ContentionManager::new(policy, params, registry.clone(), calibrate::env(), 1),
    );
    let reg = Registration::new(registry).map_err(|e| e.to_string())?;
    let t = reg.index();
    let mode = || cell.manager().mode(t).expect("policy keeps modes");
    let ct = params.contention_threshold;
    for k in 1..ct {
        cell.cas(t, 1, 2);
        if mode() != ModeSnapshot::low(k) {
            return Err(format!("after {k} failures: {:?}", mode()));
        }
    }
    cell.cas(t, 1, 2);
    if mode() != ModeSnapshot::high(0) {
        return Err(format!("after {ct} failures: {:?}", mode()));
    }
    for k in 1..params.num_ops {
        let v = cell.read(t);
        cell.cas(t, v, v + 1);
        if mode() != ModeSnapshot::high(k) {
            return Err(format!("after {k} high-mode CAS: {:?}", mode()));
        }
    }
    let v = cell.read(t);
    cell.cas(t, v, v + 1);
    if mode() != ModeSnapshot::low(0) {
        return Err(format!(
            "after {} high-mode CAS: {:?}",
            params.num_ops,
            mode()
        ));
    }
    Ok(Some(format!(
        "low→high after {ct} failures, back after {} ops",
        params.num_ops
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>(), Ok(s));
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn modes_pass_for_queueing_policies() {
        let r = run_suite(Suite::Modes, &Policy::ALL, Platform::Xeon, Intensity::QUICK);
        for c in &r {
            match c.policy {
                Policy::Mcs | Policy::ArrayBased => assert_eq!(c.passed, Some(true), "{c}"),
                _ => assert_eq!(c.passed, None, "{c}"),
            }
        }
    }

    #[test]
    fn bounded_wait_quick() {
        let small = Intensity {
            trials: 3,
            ..Intensity::QUICK
        };
        for c in run_suite(
            Suite::BoundedWait,
            &[Policy::Mcs, Policy::ArrayBased],
            Platform::Xeon,
            small,
        ) {
            assert_eq!(c.passed, Some(true), "{c}");
        }
    }

    #[test]
    fn chain_and_conservation_quick() {
        let small = Intensity {
            threads: 2,
            ops: 2_000,
            trials: 1,
        };
        for suite in [Suite::Chain, Suite::Conservation, Suite::Fairness] {
            for c in run_suite(suite, &Policy::ALL, Platform::Xeon, small) {
                assert_eq!(c.passed, Some(true), "{c}");
            }
        }
    }
}
