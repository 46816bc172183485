use alloc::vec::Vec;
use core::sync::atomic::Ordering;

use crate::arena::{Arena, ArenaExhausted, NodeRef};
use crate::{CmCell, ContentionManager, ThreadIndex, Word};

/// Counts of CAS outcomes observed by one thread's structure operations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CasTally {
    pub successes: u64,
    pub failures: u64,
}

impl CasTally {
    #[inline]
    pub(crate) fn record(&mut self, ok: bool) -> bool {
        if ok {
            self.successes += 1;
        } else {
            self.failures += 1;
        }
        ok
    }
}

/// Treiber's lock-free stack over a contention-managed top reference.
#[derive(Debug)]
pub struct TreiberStack {
    top: CmCell,
    arena: Arena,
}

impl TreiberStack {
    pub fn new(manager: ContentionManager, node_limit: usize) -> Self {
        TreiberStack {
            top: CmCell::new(0, manager),
            arena: Arena::with_limit(node_limit),
        }
    }

    pub fn manager(&self) -> &ContentionManager {
        self.top.manager()
    }

    pub fn push(&self, tind: ThreadIndex, item: Word) -> Result<(), ArenaExhausted> {
        self.push_tallied(tind, item, &mut CasTally::default())
    }

    pub fn push_tallied(
        &self,
        tind: ThreadIndex,
        item: Word,
        tally: &mut CasTally,
    ) -> Result<(), ArenaExhausted> {
        let node = self.arena.alloc(item)?;
        let n = self.arena.node(node);
        loop {
            let top = self.top.read(tind);
            n.next.store(top, Ordering::Relaxed);
            if tally.record(self.top.cas(tind, top, node.to_word())) {
                return Ok(());
            }
        }
    }

    pub fn pop(&self, tind: ThreadIndex) -> Option<Word> {
        self.pop_tallied(tind, &mut CasTally::default())
    }

    /// Every managed read is completed by a CAS on the same cell; an empty
    /// observation is confirmed with `cas(nil, nil)`.
    pub fn pop_tallied(&self, tind: ThreadIndex, tally: &mut CasTally) -> Option<Word> {
        loop {
            let top = self.top.read(tind);
            match NodeRef::from_word(top) {
                None => {
                    if tally.record(self.top.cas(tind, 0, 0)) {
                        return None;
                    }
                }
                Some(r) => {
                    let node = self.arena.node(r);
                    let next = node.next.load(Ordering::Relaxed);
                    if tally.record(self.top.cas(tind, top, next)) {
                        return Some(node.item.load(Ordering::Relaxed));
                    }
                }
            }
        }
    }

    /// Items from top to bottom. Only meaningful at a quiescent point.
    pub fn snapshot(&self) -> Vec<Word> {
        let mut out = Vec::new();
        let mut cur = self.top.read_native();
        while let Some(r) = NodeRef::from_word(cur) {
            let node = self.arena.node(r);
            out.push(node.item.load(Ordering::Acquire));
            cur = node.next.load(Ordering::Acquire);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.top.read_native() == 0
    }

    pub fn nodes_allocated(&self) -> usize {
        self.arena.allocated()
    }
}
