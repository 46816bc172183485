//! MCS-style serialization of read/CAS pairs.
//!
//! In low-contention mode a thread uses the raw cell. After
//! `contention_threshold` consecutive CAS failures it switches to
//! high-contention mode, where every `read` appends the thread to a queue of
//! thread indices and waits (bounded) for its predecessor to finish a CAS.
//! After `num_ops` high-mode CAS operations the thread returns to low mode.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicBool, AtomicI32, AtomicU64, AtomicUsize, Ordering};

use crossbeam_utils::CachePadded;

use crate::cell::{native_cas, native_read};
use crate::manager::ModeSnapshot;
use crate::{ThreadIndex, Word, NONE};

#[derive(Debug)]
struct McsRecord {
    // Thread-private: only the owning thread reads or writes these.
    mode_count: AtomicU64,
    contention_mode: AtomicBool,
    // Written by the successor.
    next: AtomicI32,
    // Written by the predecessor.
    notify: AtomicBool,
}

impl McsRecord {
    fn new() -> Self {
        McsRecord {
            mode_count: AtomicU64::new(0),
            contention_mode: AtomicBool::new(false),
            next: AtomicI32::new(NONE),
            notify: AtomicBool::new(false),
        }
    }
}

pub struct McsState {
    records: Box<[CachePadded<McsRecord>]>,
    tail: CachePadded<AtomicI32>,
    contention_threshold: u64,
    num_ops: u64,
    max_wait_iters: u64,
}

impl McsState {
    pub fn new(
        max_threads: usize,
        contention_threshold: u64,
        num_ops: u64,
        max_wait_iters: u64,
    ) -> Self {
        let records: Vec<_> = (0..max_threads)
            .map(|_| CachePadded::new(McsRecord::new()))
            .collect();
        McsState {
            records: records.into_boxed_slice(),
            tail: CachePadded::new(AtomicI32::new(NONE)),
            contention_threshold,
            num_ops,
            max_wait_iters,
        }
    }

    /// Index of the thread at the queue tail, or [`NONE`].
    pub fn tail(&self) -> i32 {
        self.tail.load(Ordering::Acquire)
    }

    /// Successor index published into `tind`'s record, or [`NONE`].
    pub fn next_of(&self, tind: ThreadIndex) -> i32 {
        self.records[tind.get()].next.load(Ordering::Acquire)
    }

    pub fn is_notified(&self, tind: ThreadIndex) -> bool {
        self.records[tind.get()].notify.load(Ordering::Acquire)
    }

    pub fn mode(&self, tind: ThreadIndex) -> ModeSnapshot {
        let r = &self.records[tind.get()];
        ModeSnapshot {
            contention_mode: r.contention_mode.load(Ordering::Relaxed),
            mode_count: r.mode_count.load(Ordering::Relaxed),
        }
    }

    pub(crate) fn read(&self, cell: &AtomicUsize, tind: ThreadIndex) -> Word {
        let me = tind.as_raw();
        let r = &self.records[tind.get()];
        if r.contention_mode.load(Ordering::Relaxed) {
            r.next.store(NONE, Ordering::Relaxed);
            // Cleared before publishing ourselves so the predecessor's signal
            // cannot be overwritten.
            r.notify.store(false, Ordering::Relaxed);
            let pred = self.tail.swap(me, Ordering::AcqRel);
            // pred == me: our previous read was never followed by a CAS; we
            // are still the tail and have nobody to wait for.
            if pred != NONE && pred != me {
                self.records[pred as usize]
                    .next
                    .store(me, Ordering::Release);
                let mut wait = self.max_wait_iters;
                while !r.notify.load(Ordering::Acquire) && wait > 0 {
                    wait -= 1;
                    core::hint::spin_loop();
                }
            }
        }
        native_read(cell)
    }

    pub(crate) fn cas(&self, cell: &AtomicUsize, tind: ThreadIndex, old: Word, new: Word) -> bool {
        let ret = native_cas(cell, old, new);
        let me = tind.as_raw();
        let r = &self.records[tind.get()];
        if r.contention_mode.load(Ordering::Relaxed) {
            let successor = r.next.load(Ordering::Acquire);
            if successor == NONE {
                if self
                    .tail
                    .compare_exchange(me, NONE, Ordering::AcqRel, Ordering::Acquire)
                    .is_err()
                {
                    // Someone swapped in behind us; give them a bounded time
                    // to publish their index.
                    let mut wait = self.max_wait_iters;
                    while r.next.load(Ordering::Acquire) == NONE && wait > 0 {
                        wait -= 1;
                        core::hint::spin_loop();
                    }
                    let successor = r.next.load(Ordering::Acquire);
                    if successor != NONE {
                        self.signal(successor);
                    }
                }
            } else {
                self.signal(successor);
            }
            let count = r.mode_count.load(Ordering::Relaxed) + 1;
            if count == self.num_ops {
                r.mode_count.store(0, Ordering::Relaxed);
                r.contention_mode.store(false, Ordering::Relaxed);
            } else {
                r.mode_count.store(count, Ordering::Relaxed);
            }
        } else if ret {
            r.mode_count.store(0, Ordering::Relaxed);
        } else {
            let count = r.mode_count.load(Ordering::Relaxed) + 1;
            if count == self.contention_threshold {
                r.contention_mode.store(true, Ordering::Relaxed);
                r.mode_count.store(0, Ordering::Relaxed);
            } else {
                r.mode_count.store(count, Ordering::Relaxed);
            }
        }
        ret
    }

    #[inline]
    fn signal(&self, successor: i32) {
        self.records[successor as usize]
            .notify
            .store(true, Ordering::Release);
    }
}

impl fmt::Debug for McsState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("McsState")
            .field("tail", &self.tail())
            .field("contention_threshold", &self.contention_threshold)
            .field("num_ops", &self.num_ops)
            .field("max_wait_iters", &self.max_wait_iters)
            .finish_non_exhaustive()
    }
}
