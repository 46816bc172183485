#![allow(dead_code)]

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use cascm_core::{ContentionManager, Policy, PolicyParams, Registry, SpinCalibration, WaitEnv};

pub fn now_ns() -> u64 {
    static START: OnceLock<Instant> = OnceLock::new();
    START.get_or_init(Instant::now).elapsed().as_nanos() as u64
}

/// Waits cost nothing; bounded loops exit after zero iterations.
pub fn zero_env() -> WaitEnv {
    WaitEnv::new(SpinCalibration::from_iters_per_ms(0), now_ns)
}

/// Roughly one spin per 10 ns, enough for short real waits in tests.
pub fn small_env() -> WaitEnv {
    WaitEnv::new(SpinCalibration::from_iters_per_ms(100_000), now_ns)
}

pub fn manager(
    policy: Policy,
    params: PolicyParams,
    registry: &Arc<Registry>,
    env: WaitEnv,
) -> ContentionManager {
    ContentionManager::new(policy, params, registry.clone(), env, 42)
}
