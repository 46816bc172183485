use core::sync::atomic::{AtomicUsize, Ordering};

use crate::{ContentionManager, ThreadIndex, Word};

#[inline]
pub(crate) fn native_read(cell: &AtomicUsize) -> Word {
    cell.load(Ordering::Acquire)
}

#[inline]
pub(crate) fn native_cas(cell: &AtomicUsize, old: Word, new: Word) -> bool {
    cell.compare_exchange(old, new, Ordering::SeqCst, Ordering::Acquire)
        .is_ok()
}

/// A shared word whose `read`/`cas` go through a contention manager.
///
/// Successful CAS is a full barrier; reads are acquire loads.
#[derive(Debug)]
pub struct CmCell {
    value: AtomicUsize,
    manager: ContentionManager,
}

impl CmCell {
    pub fn new(initial: Word, manager: ContentionManager) -> Self {
        CmCell {
            value: AtomicUsize::new(initial),
            manager,
        }
    }

    pub fn manager(&self) -> &ContentionManager {
        &self.manager
    }

    /// Policy-managed read. For the queueing policies this may wait (bounded)
    /// and should be followed by a [`cas`](Self::cas) from the same thread.
    #[inline]
    pub fn read(&self, tind: ThreadIndex) -> Word {
        self.manager.read(&self.value, tind)
    }

    /// Policy-managed compare-and-swap. Returns exactly what the underlying
    /// hardware CAS returned.
    #[inline]
    pub fn cas(&self, tind: ThreadIndex, old: Word, new: Word) -> bool {
        self.manager.cas(&self.value, tind, old, new)
    }

    /// Unmanaged acquire load.
    #[inline]
    pub fn read_native(&self) -> Word {
        native_read(&self.value)
    }

    /// Unmanaged compare-and-swap.
    #[inline]
    pub fn cas_native(&self, old: Word, new: Word) -> bool {
        native_cas(&self.value, old, new)
    }

    pub fn into_inner(self) -> Word {
        self.value.into_inner()
    }
}
