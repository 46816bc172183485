use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::arena::{Arena, ArenaExhausted, NodeRef};
use crate::stack::CasTally;
use crate::{CmCell, ContentionManager, Policy, ThreadIndex, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueueConfig {
    /// Route node `next` CASes through the policy too (they share one
    /// manager). When false only head and tail are managed.
    pub manage_next: bool,
    pub node_limit: usize,
}

impl Default for QueueConfig {
    fn default() -> Self {
        QueueConfig {
            manage_next: true,
            node_limit: 1 << 26,
        }
    }
}

/// Michael–Scott FIFO queue with contention-managed head, tail and links.
#[derive(Debug)]
pub struct MsQueue {
    head: CmCell,
    tail: CmCell,
    links: ContentionManager,
    arena: Arena,
}

impl MsQueue {
    /// `make_manager` is called three times: head, tail, links. With
    /// `manage_next` off the links manager is replaced by a native one.
    pub fn new(mut make_manager: impl FnMut() -> ContentionManager, config: QueueConfig) -> Self {
        let arena = Arena::with_limit(config.node_limit.max(1));
        let sentinel = arena
            .alloc(0)
            .expect("fresh arena has room for the sentinel")
            .to_word();
        let head = CmCell::new(sentinel, make_manager());
        let tail = CmCell::new(sentinel, make_manager());
        let mut links = make_manager();
        if !config.manage_next {
            links = ContentionManager::new(
                Policy::Native,
                *links.params(),
                links.registry().clone(),
                *links.env(),
                0,
            );
        }
        MsQueue {
            head,
            tail,
            links,
            arena,
        }
    }

    pub fn head_manager(&self) -> &ContentionManager {
        self.head.manager()
    }

    pub fn links_manager(&self) -> &ContentionManager {
        &self.links
    }

    #[inline]
    fn next_of(&self, node: Word) -> &AtomicUsize {
        &self
            .arena
            .node(NodeRef::from_word(node).expect("queue nodes are never nil"))
            .next
    }

    pub fn enqueue(&self, tind: ThreadIndex, item: Word) -> Result<(), ArenaExhausted> {
        self.enqueue_tallied(tind, item, &mut CasTally::default())
    }

    /// Each iteration pairs every managed read with a CAS on the same cell:
    /// the tail read is completed by the swing (after linking) or by a
    /// helping CAS (when the link attempt lost).
    pub fn enqueue_tallied(
        &self,
        tind: ThreadIndex,
        item: Word,
        tally: &mut CasTally,
    ) -> Result<(), ArenaExhausted> {
        let node = self.arena.alloc(item)?.to_word();
        loop {
            let last = self.tail.read(tind);
            let link = self.next_of(last);
            let next = link.load(Ordering::Acquire);
            if next != 0 {
                tally.record(self.tail.cas(tind, last, next));
                continue;
            }
            self.links.read(link, tind);
            if tally.record(self.links.cas(link, tind, 0, node)) {
                tally.record(self.tail.cas(tind, last, node));
                return Ok(());
            }
            let next = link.load(Ordering::Acquire);
            tally.record(self.tail.cas(tind, last, next));
        }
    }

    pub fn dequeue(&self, tind: ThreadIndex) -> Option<Word> {
        self.dequeue_tallied(tind, &mut CasTally::default())
    }

    pub fn dequeue_tallied(&self, tind: ThreadIndex, tally: &mut CasTally) -> Option<Word> {
        loop {
            let first = self.head.read(tind);
            let next = self.next_of(first).load(Ordering::Acquire);
            if next == 0 {
                // Head never returns to an old node, so a successful
                // confirming CAS means `first` was head when `next` was read.
                if tally.record(self.head.cas(tind, first, first)) {
                    return None;
                }
                continue;
            }
            if self.tail.read_native() == first {
                let _ = self.tail.read(tind);
                tally.record(self.tail.cas(tind, first, next));
            }
            let item = self
                .arena
                .node(NodeRef::from_word(next).unwrap())
                .item
                .load(Ordering::Relaxed);
            if tally.record(self.head.cas(tind, first, next)) {
                return Some(item);
            }
        }
    }

    /// Items from head to tail. Only meaningful at a quiescent point.
    pub fn snapshot(&self) -> Vec<Word> {
        let mut out = Vec::new();
        let mut cur = self
            .next_of(self.head.read_native())
            .load(Ordering::Acquire);
        while cur != 0 {
            let node = self.arena.node(NodeRef::from_word(cur).unwrap());
            out.push(node.item.load(Ordering::Acquire));
            cur = node.next.load(Ordering::Acquire);
        }
        out
    }

    /// Checks the quiescent structural invariants: tail is reachable from
    /// head and lags the last node by at most one link.
    pub fn check_quiescent(&self) -> bool {
        let tail = self.tail.read_native();
        let mut cur = self.head.read_native();
        let mut seen_tail = false;
        loop {
            if cur == tail {
                seen_tail = true;
            }
            let next = self.next_of(cur).load(Ordering::Acquire);
            if next == 0 {
                return seen_tail
                    && (cur == tail || self.next_of(tail).load(Ordering::Acquire) == cur);
            }
            cur = next;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.next_of(self.head.read_native())
            .load(Ordering::Acquire)
            == 0
    }

    pub fn nodes_allocated(&self) -> usize {
        self.arena.allocated()
    }
}
