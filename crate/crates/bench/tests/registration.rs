use std::collections::HashSet;
use std::sync::{Arc, Barrier};
use std::thread;

use cascm_bench::registration::{current_index, deregister_thread, register_thread, Registration};
use cascm_core::{Registry, RegistryError};

#[test]
fn full_registry_hands_out_a_bijection() {
    let registry = Arc::new(Registry::with_capacity(128));
    let barrier = Arc::new(Barrier::new(128));
    let handles: Vec<_> = (0..128)
        .map(|_| {
            let (registry, barrier) = (registry.clone(), barrier.clone());
            thread::spawn(move || {
                let reg = Registration::new(registry.clone()).unwrap();
                // Everyone holds an index before anyone releases.
                barrier.wait();
                reg.index().get()
            })
        })
        .collect();
    let indices: HashSet<usize> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(indices, (0..128).collect());
    assert_eq!(registry.registered(), 0);
}

#[test]
fn capacity_is_enforced() {
    let registry = Arc::new(Registry::with_capacity(2));
    let _a = Registration::new(registry.clone()).unwrap();
    let r = registry.clone();
    let b = thread::spawn(move || register_thread(&r).map(|t| t.get()))
        .join()
        .unwrap();
    assert!(b.is_ok());
    let r = registry.clone();
    let c = thread::spawn(move || register_thread(&r)).join().unwrap();
    assert_eq!(c, Err(RegistryError::CapacityExhausted { capacity: 2 }));
}

#[test]
fn churn_leaves_no_registrations() {
    let registry = Arc::new(Registry::with_capacity(8));
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let registry = registry.clone();
            thread::spawn(move || {
                for _ in 0..20_000 {
                    let t = register_thread(&registry).unwrap();
                    assert_eq!(current_index(&registry), Some(t));
                    assert!(registry.is_live(t));
                    deregister_thread(&registry, t).unwrap();
                    assert_eq!(current_index(&registry), None);
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(registry.registered(), 0);
}
