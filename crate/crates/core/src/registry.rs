use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};

use crossbeam_utils::CachePadded;

/// Registry capacity used when none is given.
pub const DEFAULT_MAX_THREADS: usize = 128;

/// Sentinel stored in index-valued atomics (queue tail, owner, next links).
pub const NONE: i32 = -1;

static NEXT_REGISTRY_ID: AtomicU64 = AtomicU64::new(1);

/// A small per-thread index into per-object record arrays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThreadIndex(u32);

impl ThreadIndex {
    pub const fn new(index: u32) -> Self {
        ThreadIndex(index)
    }

    #[inline]
    pub const fn get(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub(crate) const fn as_raw(self) -> i32 {
        self.0 as i32
    }
}

impl fmt::Display for ThreadIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("registry capacity exhausted ({capacity} threads)")]
    CapacityExhausted { capacity: usize },
    #[error("thread is already registered at index {0}")]
    AlreadyRegistered(ThreadIndex),
    #[error("index {0} is not a live registration")]
    NotRegistered(ThreadIndex),
    #[error("index {0} belongs to another thread")]
    NotOwner(ThreadIndex),
    #[error("index {index} out of range for capacity {capacity}")]
    OutOfRange { index: usize, capacity: usize },
}

/// Fixed-capacity set of thread slots plus the live registration count.
///
/// Slot claiming is lock-free. Per-thread bookkeeping (which index the
/// calling thread holds) is not kept here; the std layer keeps it in
/// thread-local storage.
pub struct Registry {
    id: u64,
    slots: Box<[CachePadded<AtomicBool>]>,
    registered: CachePadded<AtomicUsize>,
}

impl Registry {
    pub fn new() -> Self {
        Self::with_capacity(DEFAULT_MAX_THREADS)
    }

    /// # Panics
    /// If `capacity` is 0 or does not fit the `i32` index encoding.
    pub fn with_capacity(capacity: usize) -> Self {
        assert!(capacity > 0, "registry capacity must be positive");
        assert!(capacity <= i32::MAX as usize, "registry capacity too large");
        let slots: Vec<_> = (0..capacity)
            .map(|_| CachePadded::new(AtomicBool::new(false)))
            .collect();
        Registry {
            id: NEXT_REGISTRY_ID.fetch_add(1, Ordering::Relaxed),
            slots: slots.into_boxed_slice(),
            registered: CachePadded::new(AtomicUsize::new(0)),
        }
    }

    /// Process-unique identifier, used to key per-thread index storage.
    pub fn id(&self) -> u64 {
        self.id
    }

    /// MAX_THREADS for every record array sized from this registry.
    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    /// Current number of registered threads (`regN`).
    #[inline]
    pub fn registered(&self) -> usize {
        self.registered.load(Ordering::Acquire)
    }

    /// Claims the lowest free slot.
    pub fn claim(&self) -> Result<ThreadIndex, RegistryError> {
        for (i, slot) in self.slots.iter().enumerate() {
            if !slot.load(Ordering::Relaxed)
                && slot
                    .compare_exchange(false, true, Ordering::AcqRel, Ordering::Relaxed)
                    .is_ok()
            {
                self.registered.fetch_add(1, Ordering::AcqRel);
                return Ok(ThreadIndex(i as u32));
            }
        }
        Err(RegistryError::CapacityExhausted {
            capacity: self.capacity(),
        })
    }

    /// Frees a slot previously returned by [`claim`](Self::claim).
    pub fn release(&self, index: ThreadIndex) -> Result<(), RegistryError> {
        let slot = self
            .slots
            .get(index.get())
            .ok_or(RegistryError::OutOfRange {
                index: index.get(),
                capacity: self.capacity(),
            })?;
        slot.compare_exchange(true, false, Ordering::AcqRel, Ordering::Relaxed)
            .map_err(|_| RegistryError::NotRegistered(index))?;
        self.registered.fetch_sub(1, Ordering::AcqRel);
        Ok(())
    }

    pub fn is_live(&self, index: ThreadIndex) -> bool {
        self.slots
            .get(index.get())
            .is_some_and(|s| s.load(Ordering::Acquire))
    }

    /// Live indices, in increasing order. Only meaningful at quiescent points.
    pub fn live_indices(&self) -> Vec<ThreadIndex> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.load(Ordering::Acquire))
            .map(|(i, _)| ThreadIndex(i as u32))
            .collect()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("id", &self.id)
            .field("capacity", &self.capacity())
            .field("registered", &self.registered())
            .finish()
    }
}
