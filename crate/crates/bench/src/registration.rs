//! Thread registration with the index kept in thread-local storage, so code
//! holding only a registry can find the calling thread's index.

use std::cell::RefCell;
use std::sync::Arc;

use cascm_core::{CmCell, Registry, RegistryError, ThreadIndex, Word};

thread_local! {
    static INDICES: RefCell<Vec<(u64, ThreadIndex)>> = const { RefCell::new(Vec::new()) };
}

/// Index the calling thread holds in `registry`, if any.
pub fn current_index(registry: &Registry) -> Option<ThreadIndex> {
    let id = registry.id();
    INDICES.with(|m| m.borrow().iter().find(|(r, _)| *r == id).map(|(_, t)| *t))
}

/// Claims a free index for the calling thread and remembers it.
pub fn register_thread(registry: &Registry) -> Result<ThreadIndex, RegistryError> {
    if let Some(t) = current_index(registry) {
        return Err(RegistryError::AlreadyRegistered(t));
    }
    let t = registry.claim()?;
    INDICES.with(|m| m.borrow_mut().push((registry.id(), t)));
    Ok(t)
}

/// Releases `index`, which must be the calling thread's own registration.
pub fn deregister_thread(registry: &Registry, index: ThreadIndex) -> Result<(), RegistryError> {
    match current_index(registry) {
        Some(t) if t == index => {}
        _ if registry.is_live(index) => return Err(RegistryError::NotOwner(index)),
        _ => return Err(RegistryError::NotRegistered(index)),
    }
    registry.release(index)?;
    let id = registry.id();
    INDICES.with(|m| m.borrow_mut().retain(|(r, _)| *r != id));
    Ok(())
}

/// Registration that is released when dropped.
#[derive(Debug)]
pub struct Registration {
    registry: Arc<Registry>,
    index: ThreadIndex,
}

impl Registration {
    pub fn new(registry: Arc<Registry>) -> Result<Self, RegistryError> {
        let index = register_thread(&registry)?;
        Ok(Registration { registry, index })
    }

    pub fn index(&self) -> ThreadIndex {
        self.index
    }
}

impl Drop for Registration {
    fn drop(&mut self) {
        let _ = deregister_thread(&self.registry, self.index);
    }
}

/// `read`/`cas` that look the index up in thread-local storage instead of
/// taking it as an argument.
pub trait CurrentThread {
    fn read_current(&self) -> Result<Word, RegistryError>;
    fn cas_current(&self, old: Word, new: Word) -> Result<bool, RegistryError>;
}

impl CurrentThread for CmCell {
    fn read_current(&self) -> Result<Word, RegistryError> {
        let t = lookup(self)?;
        Ok(self.read(t))
    }

    fn cas_current(&self, old: Word, new: Word) -> Result<bool, RegistryError> {
        let t = lookup(self)?;
        Ok(self.cas(t, old, new))
    }
}

fn lookup(cell: &CmCell) -> Result<ThreadIndex, RegistryError> {
    let registry = cell.manager().registry();
    current_index(registry).ok_or(RegistryError::NotRegistered(ThreadIndex::new(u32::MAX)))
}
