//! Array-based serialization of read/CAS pairs.
//!
//! High-contention threads compete for an ownership token. The owner performs
//! `num_ops` CAS operations without waiting, then scans the record array
//! circularly from its own index and hands the token to the first thread
//! with a pending request. Waiters give up after a bounded number of
//! iterations.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicBool, AtomicI32, AtomicU64, AtomicUsize, Ordering};

use crossbeam_utils::CachePadded;

use crate::cell::{native_cas, native_read};
use crate::manager::ModeSnapshot;
use crate::{ThreadIndex, Word, NONE};

#[derive(Debug)]
struct AbRecord {
    mode_count: AtomicU64,
    contention_mode: AtomicBool,
    request: AtomicBool,
}

pub struct AbState {
    records: Box<[CachePadded<AbRecord>]>,
    owner: CachePadded<AtomicI32>,
    contention_threshold: u64,
    num_ops: u64,
    max_wait_iters: u64,
}

impl AbState {
    pub fn new(
        max_threads: usize,
        contention_threshold: u64,
        num_ops: u64,
        max_wait_iters: u64,
    ) -> Self {
        let records: Vec<_> = (0..max_threads)
            .map(|_| {
                CachePadded::new(AbRecord {
                    mode_count: AtomicU64::new(0),
                    contention_mode: AtomicBool::new(false),
                    request: AtomicBool::new(false),
                })
            })
            .collect();
        AbState {
            records: records.into_boxed_slice(),
            owner: CachePadded::new(AtomicI32::new(NONE)),
            contention_threshold,
            num_ops,
            max_wait_iters,
        }
    }

    /// Index of the current owner, or [`NONE`].
    pub fn owner(&self) -> i32 {
        self.owner.load(Ordering::Acquire)
    }

    pub fn has_request(&self, tind: ThreadIndex) -> bool {
        self.records[tind.get()].request.load(Ordering::Acquire)
    }

    pub fn mode(&self, tind: ThreadIndex) -> ModeSnapshot {
        let r = &self.records[tind.get()];
        ModeSnapshot {
            contention_mode: r.contention_mode.load(Ordering::Relaxed),
            mode_count: r.mode_count.load(Ordering::Relaxed),
        }
    }

    /// Marks `tind` as waiting without entering the wait loop. Used by
    /// scripted tests to set up handoff scenarios.
    pub fn set_request(&self, tind: ThreadIndex, pending: bool) {
        self.records[tind.get()]
            .request
            .store(pending, Ordering::Release);
    }

    pub(crate) fn read(&self, cell: &AtomicUsize, tind: ThreadIndex) -> Word {
        let me = tind.as_raw();
        let r = &self.records[tind.get()];
        if r.contention_mode.load(Ordering::Relaxed) && self.owner.load(Ordering::Acquire) != me {
            r.request.store(true, Ordering::SeqCst);
            let mut i = 0;
            while i < self.max_wait_iters && r.request.load(Ordering::Acquire) {
                if self.owner.load(Ordering::Acquire) == NONE
                    && self
                        .owner
                        .compare_exchange(NONE, me, Ordering::AcqRel, Ordering::Acquire)
                        .is_ok()
                {
                    r.request.store(false, Ordering::Release);
                    break;
                }
                i += 1;
                core::hint::spin_loop();
            }
            if r.request.load(Ordering::Acquire) {
                r.request.store(false, Ordering::Release);
            }
        }
        native_read(cell)
    }

    pub(crate) fn cas(&self, cell: &AtomicUsize, tind: ThreadIndex, old: Word, new: Word) -> bool {
        let ret = native_cas(cell, old, new);
        let r = &self.records[tind.get()];
        if r.contention_mode.load(Ordering::Relaxed) {
            let count = r.mode_count.load(Ordering::Relaxed) + 1;
            if count >= self.num_ops {
                r.mode_count.store(0, Ordering::Relaxed);
                r.contention_mode.store(false, Ordering::Relaxed);
                self.hand_off(tind);
            } else {
                r.mode_count.store(count, Ordering::Relaxed);
            }
        } else if ret {
            r.mode_count.store(0, Ordering::Relaxed);
        } else {
            let count = r.mode_count.load(Ordering::Relaxed) + 1;
            if count >= self.contention_threshold {
                r.mode_count.store(0, Ordering::Relaxed);
                r.contention_mode.store(true, Ordering::Relaxed);
            } else {
                r.mode_count.store(count, Ordering::Relaxed);
            }
        }
        ret
    }

    /// Passes ownership to the first requesting thread after `tind` in
    /// circular order, or clears it. Returns the new owner.
    fn hand_off(&self, tind: ThreadIndex) -> i32 {
        let n = self.records.len();
        let start = tind.get();
        let mut i = (start + 1) % n;
        while i != start {
            let rec = &self.records[i];
            if rec.request.load(Ordering::SeqCst) {
                self.owner.store(i as i32, Ordering::Release);
                #[cfg(not(feature = "ab-literal-handoff"))]
                rec.request.store(false, Ordering::Release);
                #[cfg(feature = "ab-literal-handoff")]
                self.records[start].request.store(false, Ordering::Release);
                return i as i32;
            }
            i = (i + 1) % n;
        }
        self.owner.store(NONE, Ordering::Release);
        NONE
    }
}

impl fmt::Debug for AbState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AbState")
            .field("owner", &self.owner())
            .field("contention_threshold", &self.contention_threshold)
            .field("num_ops", &self.num_ops)
            .field("max_wait_iters", &self.max_wait_iters)
            .finish_non_exhaustive()
    }
}
