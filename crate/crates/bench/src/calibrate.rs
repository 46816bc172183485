//! Process-wide spin calibration and monotonic clock.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use cascm_core::{spin, SpinCalibration, WaitEnv};

const PROBE_ITERS: u64 = 1 << 16;
const PROBE_TRIALS: usize = 9;

fn epoch() -> Instant {
    static EPOCH: OnceLock<Instant> = OnceLock::new();
    *EPOCH.get_or_init(Instant::now)
}

/// Nanoseconds since the first call in this process.
pub fn now_ns() -> u64 {
    epoch().elapsed().as_nanos() as u64
}

/// Measures spin iterations per millisecond. Preemption can only make a probe
/// slower, so the fastest trial is kept.
pub fn measure() -> SpinCalibration {
    spin(PROBE_ITERS);
    let best = (0..PROBE_TRIALS)
        .map(|_| {
            let start = Instant::now();
            spin(PROBE_ITERS);
            start.elapsed()
        })
        .min()
        .unwrap_or(Duration::from_millis(1))
        .max(Duration::from_nanos(1));
    let per_ms = PROBE_ITERS as u128 * 1_000_000 / best.as_nanos();
    SpinCalibration::from_iters_per_ms(per_ms.max(1) as u64)
}

/// The calibration measured once at first use.
pub fn calibration() -> SpinCalibration {
    static CAL: OnceLock<SpinCalibration> = OnceLock::new();
    *CAL.get_or_init(|| {
        epoch();
        measure()
    })
}

/// Calibrated spin plus the monotonic clock, for building managers.
pub fn env() -> WaitEnv {
    WaitEnv::new(calibration(), now_ns)
}

/// Busy-waits for approximately `amount` without yielding to the scheduler.
pub fn calibrated_wait(amount: Duration) {
    if amount.is_zero() {
        return;
    }
    spin(calibration().iters_for_ns(amount.as_nanos().min(u64::MAX as u128) as u64));
}
