//! Constant backoff, exponential backoff and time-slice contention management.
//!
//! All three leave the read path untouched and only act after a failed CAS.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use crossbeam_utils::CachePadded;

use crate::cell::native_cas;
use crate::{Registry, ThreadIndex, WaitEnv, Word};

#[inline]
pub(crate) fn cb_cas(cell: &AtomicUsize, wait_iters: u64, old: Word, new: Word) -> bool {
    if native_cas(cell, old, new) {
        true
    } else {
        crate::spin(wait_iters);
        false
    }
}

/// Exponent of the exponential backoff wait: `min(c·f, m)`.
#[inline]
pub fn exp_backoff_exponent(c: u32, failures: u64, m: u32) -> u32 {
    let scaled = (c as u64).saturating_mul(failures);
    scaled.min(m as u64) as u32
}

/// Per-thread consecutive-failure statistics for exponential backoff.
///
/// Entry `i` is written only by the thread registered at index `i`; relaxed
/// loads and stores suffice.
pub struct ExpBackoffState {
    failures: Box<[CachePadded<AtomicU64>]>,
    threshold: u64,
    c: u32,
    m: u32,
}

impl ExpBackoffState {
    pub fn new(max_threads: usize, threshold: u32, c: u32, m: u32) -> Self {
        let failures: Vec<_> = (0..max_threads)
            .map(|_| CachePadded::new(AtomicU64::new(0)))
            .collect();
        ExpBackoffState {
            failures: failures.into_boxed_slice(),
            threshold: threshold as u64,
            c,
            m,
        }
    }

    pub fn failures(&self, tind: ThreadIndex) -> u64 {
        self.failures[tind.get()].load(Ordering::Relaxed)
    }

    /// Nanoseconds to wait after a failure whose pre-increment statistic was
    /// `f`, or `None` when `f` does not exceed the threshold.
    #[inline]
    pub fn wait_ns_for(&self, f: u64) -> Option<u64> {
        if f > self.threshold {
            let e = exp_backoff_exponent(self.c, f, self.m).min(63);
            Some(1u64 << e)
        } else {
            None
        }
    }

    #[inline]
    pub(crate) fn cas(
        &self,
        cell: &AtomicUsize,
        env: &WaitEnv,
        tind: ThreadIndex,
        old: Word,
        new: Word,
    ) -> bool {
        let slot = &self.failures[tind.get()];
        if native_cas(cell, old, new) {
            let f = slot.load(Ordering::Relaxed);
            if f > 0 {
                slot.store(f - 1, Ordering::Relaxed);
            }
            true
        } else {
            let f = slot.load(Ordering::Relaxed);
            slot.store(f + 1, Ordering::Relaxed);
            if let Some(ns) = self.wait_ns_for(f) {
                env.wait_ns(ns);
            }
            false
        }
    }
}

impl fmt::Debug for ExpBackoffState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpBackoffState")
            .field("threads", &self.failures.len())
            .field("threshold", &self.threshold)
            .field("c", &self.c)
            .field("m", &self.m)
            .finish()
    }
}

/// Time-division state: the registry (for `regN`) and one private random
/// stream per thread index.
pub struct TimeSliceState {
    registry: Arc<Registry>,
    conc: u64,
    slice: u32,
    rngs: Box<[CachePadded<AtomicU64>]>,
}

impl TimeSliceState {
    /// `seed` is mixed with each thread index to seed that thread's stream.
    pub fn new(registry: Arc<Registry>, conc: u32, slice: u32, seed: u64) -> Self {
        let rngs: Vec<_> = (0..registry.capacity() as u64)
            .map(|i| {
                let mut s = seed ^ i.wrapping_mul(0xA076_1D64_78BD_642F);
                CachePadded::new(AtomicU64::new(splitmix64(&mut s)))
            })
            .collect();
        TimeSliceState {
            registry,
            conc: conc.max(1) as u64,
            slice,
            rngs: rngs.into_boxed_slice(),
        }
    }

    /// Number of slices, `⌈regN / conc⌉`.
    #[inline]
    pub fn slice_count(registered: u64, conc: u64) -> u64 {
        registered.div_ceil(conc)
    }

    /// Slice index active at `now_ns`.
    #[inline]
    pub fn current_slice(now_ns: u64, slice: u32, slices: u64) -> u64 {
        (now_ns >> slice) % slices
    }

    /// Draws a slice number in `[0, slices)` from the thread's stream.
    pub fn draw_slice(&self, tind: ThreadIndex, slices: u64) -> u64 {
        let cell = &self.rngs[tind.get()];
        let mut s = cell.load(Ordering::Relaxed);
        let r = splitmix64(&mut s);
        cell.store(s, Ordering::Relaxed);
        // Multiply-shift range reduction.
        ((r as u128 * slices as u128) >> 64) as u64
    }

    /// Waits until the slice drawn for `tind` is current. Returns immediately
    /// when at most `conc` threads are registered.
    pub(crate) fn wait_for_slice(&self, env: &WaitEnv, tind: ThreadIndex) {
        let registered = self.registry.registered() as u64;
        if registered <= self.conc {
            return;
        }
        let slices = Self::slice_count(registered, self.conc);
        let target = self.draw_slice(tind, slices);
        loop {
            let current = Self::current_slice((env.now_ns)(), self.slice, slices);
            if current == target {
                break;
            }
            core::hint::spin_loop();
        }
    }

    #[inline]
    pub(crate) fn cas(
        &self,
        cell: &AtomicUsize,
        env: &WaitEnv,
        tind: ThreadIndex,
        old: Word,
        new: Word,
    ) -> bool {
        if native_cas(cell, old, new) {
            return true;
        }
        self.wait_for_slice(env, tind);
        false
    }
}

impl fmt::Debug for TimeSliceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeSliceState")
            .field("conc", &self.conc)
            .field("slice", &self.slice)
            .finish_non_exhaustive()
    }
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SpinCalibration;

    fn env() -> WaitEnv {
        WaitEnv::new(SpinCalibration::from_iters_per_ms(0), || 0)
    }

    #[test]
    fn exponent_is_capped() {
        assert_eq!(exp_backoff_exponent(1, 20, 15), 15);
        assert_eq!(exp_backoff_exponent(8, 2, 24), 16);
        assert_eq!(exp_backoff_exponent(8, 3, 24), 24);
        assert_eq!(exp_backoff_exponent(u32::MAX, u64::MAX, 27), 27);
        assert_eq!(exp_backoff_exponent(9, 0, 27), 0);
    }

    #[test]
    fn sparc_wait_for_twenty_failures() {
        let s = ExpBackoffState::new(1, 1, 1, 15);
        assert_eq!(s.wait_ns_for(20), Some(1 << 15));
        assert_eq!(s.wait_ns_for(1), None);
        assert_eq!(s.wait_ns_for(2), Some(4));
    }

    #[test]
    fn failure_below_threshold_counts_without_wait() {
        let s = ExpBackoffState::new(4, 2, 8, 24);
        let cell = AtomicUsize::new(1);
        let t = ThreadIndex::new(0);
        assert!(!s.cas(&cell, &env(), t, 0, 2));
        assert_eq!(s.failures(t), 1);
        assert_eq!(s.wait_ns_for(0), None);
    }

    #[test]
    fn success_decrements_after_failures() {
        let s = ExpBackoffState::new(4, 2, 8, 24);
        let cell = AtomicUsize::new(1);
        let t = ThreadIndex::new(2);
        for _ in 0..3 {
            assert!(!s.cas(&cell, &env(), t, 0, 2));
        }
        assert_eq!(s.failures(t), 3);
        assert!(s.cas(&cell, &env(), t, 1, 2));
        assert_eq!(s.failures(t), 2);
        assert_eq!(s.failures(ThreadIndex::new(0)), 0);
    }

    #[test]
    fn slice_arithmetic() {
        assert_eq!(TimeSliceState::slice_count(20, 10), 2);
        assert_eq!(TimeSliceState::slice_count(21, 10), 3);
        assert_eq!(TimeSliceState::slice_count(1, 1), 1);
        assert_eq!(TimeSliceState::current_slice(3 << 20, 20, 2), 1);
        assert_eq!(TimeSliceState::current_slice(4 << 20, 20, 2), 0);
    }

    #[test]
    fn draws_stay_in_range() {
        let reg = Arc::new(Registry::with_capacity(4));
        let s = TimeSliceState::new(reg, 1, 20, 7);
        let t = ThreadIndex::new(3);
        let mut seen = [false; 5];
        for _ in 0..1000 {
            let d = s.draw_slice(t, 5);
            assert!(d < 5);
            seen[d as usize] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn guard_skips_wait_at_conc() {
        // regN = 10 with conc = 10: the failure path returns without waiting,
        // even with a clock that would never reach the drawn slice.
        let reg = Arc::new(Registry::with_capacity(16));
        for _ in 0..10 {
            reg.claim().unwrap();
        }
        let s = TimeSliceState::new(reg, 10, 6, 1);
        let cell = AtomicUsize::new(5);
        assert!(!s.cas(&cell, &env(), ThreadIndex::new(0), 4, 6));
    }
}
