use alloc::sync::Arc;
use core::fmt;
use core::sync::atomic::AtomicUsize;

use crate::backoff::{cb_cas, ExpBackoffState, TimeSliceState};
use crate::cell::{native_cas, native_read};
use crate::{AbState, McsState, Policy, PolicyParams, Registry, ThreadIndex, WaitEnv, Word};

/// Per-thread mode of the queueing policies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeSnapshot {
    pub contention_mode: bool,
    pub mode_count: u64,
}

impl ModeSnapshot {
    pub const fn low(mode_count: u64) -> Self {
        ModeSnapshot {
            contention_mode: false,
            mode_count,
        }
    }

    pub const fn high(mode_count: u64) -> Self {
        ModeSnapshot {
            contention_mode: true,
            mode_count,
        }
    }
}

enum State {
    Native,
    ConstBackoff { wait_iters: u64 },
    ExpBackoff(ExpBackoffState),
    TimeSlice(TimeSliceState),
    Mcs(McsState),
    ArrayBased(AbState),
}

/// Policy plus its per-location state. One manager may serve several raw
/// cells; the queueing policies then treat them as a single contention
/// domain.
pub struct ContentionManager {
    policy: Policy,
    params: PolicyParams,
    env: WaitEnv,
    registry: Arc<Registry>,
    state: State,
}

impl ContentionManager {
    /// `seed` feeds the time-slice policy's per-thread generators and is
    /// ignored by the others.
    pub fn new(
        policy: Policy,
        params: PolicyParams,
        registry: Arc<Registry>,
        env: WaitEnv,
        seed: u64,
    ) -> Self {
        let max_threads = registry.capacity();
        let max_wait_iters = env.calibration.iters_for_ms(params.max_wait_ms);
        let state = match policy {
            Policy::Native => State::Native,
            Policy::ConstBackoff => State::ConstBackoff {
                wait_iters: env.calibration.iters_for_ms(params.waiting_time_ms),
            },
            Policy::ExpBackoff => State::ExpBackoff(ExpBackoffState::new(
                max_threads,
                params.exp_threshold,
                params.c,
                params.m,
            )),
            Policy::TimeSlice => State::TimeSlice(TimeSliceState::new(
                registry.clone(),
                params.conc,
                params.slice,
                seed,
            )),
            Policy::Mcs => State::Mcs(McsState::new(
                max_threads,
                params.contention_threshold,
                params.num_ops,
                max_wait_iters,
            )),
            Policy::ArrayBased => State::ArrayBased(AbState::new(
                max_threads,
                params.contention_threshold,
                params.num_ops,
                max_wait_iters,
            )),
        };
        ContentionManager {
            policy,
            params,
            env,
            registry,
            state,
        }
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn env(&self) -> &WaitEnv {
        &self.env
    }

    #[inline]
    pub fn read(&self, cell: &AtomicUsize, tind: ThreadIndex) -> Word {
        match &self.state {
            State::Mcs(s) => s.read(cell, tind),
            State::ArrayBased(s) => s.read(cell, tind),
            _ => native_read(cell),
        }
    }

    #[inline]
    pub fn cas(&self, cell: &AtomicUsize, tind: ThreadIndex, old: Word, new: Word) -> bool {
        match &self.state {
            State::Native => native_cas(cell, old, new),
            State::ConstBackoff { wait_iters } => cb_cas(cell, *wait_iters, old, new),
            State::ExpBackoff(s) => s.cas(cell, &self.env, tind, old, new),
            State::TimeSlice(s) => s.cas(cell, &self.env, tind, old, new),
            State::Mcs(s) => s.cas(cell, tind, old, new),
            State::ArrayBased(s) => s.cas(cell, tind, old, new),
        }
    }

    /// `(contentionMode, modeCount)` of `tind` for the queueing policies.
    pub fn mode(&self, tind: ThreadIndex) -> Option<ModeSnapshot> {
        match &self.state {
            State::Mcs(s) => Some(s.mode(tind)),
            State::ArrayBased(s) => Some(s.mode(tind)),
            _ => None,
        }
    }

    pub fn exp_state(&self) -> Option<&ExpBackoffState> {
        match &self.state {
            State::ExpBackoff(s) => Some(s),
            _ => None,
        }
    }

    pub fn time_slice_state(&self) -> Option<&TimeSliceState> {
        match &self.state {
            State::TimeSlice(s) => Some(s),
            _ => None,
        }
    }

    pub fn mcs_state(&self) -> Option<&McsState> {
        match &self.state {
            State::Mcs(s) => Some(s),
            _ => None,
        }
    }

    pub fn ab_state(&self) -> Option<&AbState> {
        match &self.state {
            State::ArrayBased(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Debug for ContentionManager {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContentionManager")
            .field("policy", &self.policy)
            .field("params", &self.params)
            .field("registry", &self.registry)
            .finish_non_exhaustive()
    }
}
