//! Bump allocation of list nodes with no reuse.
//!
//! Nodes are never freed while the arena lives, so a node address observed by
//! any thread can never come back with a different meaning: CAS on node
//! references is ABA-free. Memory is reclaimed when the arena is dropped,
//! after all workers have quiesced.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;
use core::num::NonZeroUsize;
use core::sync::atomic::{AtomicUsize, Ordering};

use once_cell::race::OnceBox;

use crate::Word;

const FIRST_SEGMENT_BITS: u32 = 10;
const FIRST_SEGMENT: usize = 1 << FIRST_SEGMENT_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("node arena exhausted ({limit} nodes)")]
pub struct ArenaExhausted {
    pub limit: usize,
}

/// Handle to an arena node. Encodes as a non-zero [`Word`]; zero is nil.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeRef(NonZeroUsize);

impl NodeRef {
    #[inline]
    pub fn from_word(word: Word) -> Option<NodeRef> {
        NonZeroUsize::new(word).map(NodeRef)
    }

    #[inline]
    pub fn to_word(self) -> Word {
        self.0.get()
    }

    #[inline]
    fn index(self) -> usize {
        self.0.get() - 1
    }
}

#[derive(Debug, Default)]
pub(crate) struct Node {
    pub(crate) item: AtomicUsize,
    pub(crate) next: AtomicUsize,
}

/// Segmented node pool. Segment `k` holds `1024 · 2^k` nodes and is
/// allocated on first use, so capacity grows without moving nodes.
pub struct Arena {
    segments: Box<[OnceBox<Vec<Node>>]>,
    next: AtomicUsize,
    limit: usize,
}

impl Arena {
    /// Arena that refuses allocations beyond `limit` nodes.
    pub fn with_limit(limit: usize) -> Self {
        let (last, _) = locate(limit.max(1) - 1);
        let segments: Vec<_> = (0..=last).map(|_| OnceBox::new()).collect();
        Arena {
            segments: segments.into_boxed_slice(),
            next: AtomicUsize::new(0),
            limit,
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// Nodes handed out so far.
    pub fn allocated(&self) -> usize {
        self.next.load(Ordering::Acquire).min(self.limit)
    }

    pub(crate) fn alloc(&self, item: Word) -> Result<NodeRef, ArenaExhausted> {
        let index = self.next.fetch_add(1, Ordering::Relaxed);
        if index >= self.limit {
            return Err(ArenaExhausted { limit: self.limit });
        }
        let (seg, offset) = locate(index);
        let segment = self.segments[seg].get_or_init(|| {
            let len = FIRST_SEGMENT << seg;
            let mut v = Vec::with_capacity(len);
            v.resize_with(len, Node::default);
            Box::new(v)
        });
        let node = &segment[offset];
        node.item.store(item, Ordering::Relaxed);
        node.next.store(0, Ordering::Relaxed);
        Ok(NodeRef(NonZeroUsize::new(index + 1).unwrap()))
    }

    /// # Panics
    /// If `r` was not allocated from this arena.
    #[inline]
    pub(crate) fn node(&self, r: NodeRef) -> &Node {
        let (seg, offset) = locate(r.index());
        &self.segments[seg].get().expect("node from another arena")[offset]
    }
}

impl fmt::Debug for Arena {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Arena")
            .field("allocated", &self.allocated())
            .field("limit", &self.limit)
            .finish()
    }
}

#[inline]
fn locate(index: usize) -> (usize, usize) {
    let q = index / FIRST_SEGMENT + 1;
    let seg = (usize::BITS - 1 - q.leading_zeros()) as usize;
    let base = FIRST_SEGMENT * ((1 << seg) - 1);
    (seg, index - base)
}
