use core::fmt;

/// Converts nominal durations into spin-loop iteration counts.
///
/// One iteration is one [`core::hint::spin_loop`] hint; the bounded polling
/// loops of the queueing policies cost one hint plus one atomic load per
/// iteration, which is the same order of magnitude. The rate is measured once
/// per process by the std layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpinCalibration {
    iters_per_ms: u64,
}

impl SpinCalibration {
    pub const fn from_iters_per_ms(iters_per_ms: u64) -> Self {
        SpinCalibration { iters_per_ms }
    }

    pub const fn iters_per_ms(&self) -> u64 {
        self.iters_per_ms
    }

    #[inline]
    pub fn iters_for_ns(&self, ns: u64) -> u64 {
        ((ns as u128 * self.iters_per_ms as u128) / 1_000_000) as u64
    }

    #[inline]
    pub fn iters_for_ms(&self, ms: f64) -> u64 {
        if ms <= 0.0 || ms.is_nan() {
            return 0;
        }
        let iters = ms * self.iters_per_ms as f64;
        if iters >= u64::MAX as f64 {
            u64::MAX
        } else {
            iters as u64
        }
    }
}

/// Spins for `iters` iterations without touching shared memory.
#[inline]
pub fn spin(iters: u64) {
    for _ in 0..iters {
        core::hint::spin_loop();
    }
}

/// Platform services a contention manager needs: the spin calibration and a
/// monotonic nanosecond clock (for time-slice scheduling).
#[derive(Clone, Copy)]
pub struct WaitEnv {
    pub calibration: SpinCalibration,
    pub now_ns: fn() -> u64,
}

impl WaitEnv {
    pub fn new(calibration: SpinCalibration, now_ns: fn() -> u64) -> Self {
        WaitEnv {
            calibration,
            now_ns,
        }
    }

    #[inline]
    pub fn wait_ns(&self, ns: u64) {
        spin(self.calibration.iters_for_ns(ns));
    }
}

impl fmt::Debug for WaitEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaitEnv")
            .field("calibration", &self.calibration)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        let c = SpinCalibration::from_iters_per_ms(1_000);
        assert_eq!(c.iters_for_ns(1_000_000), 1_000);
        assert_eq!(c.iters_for_ns(0), 0);
        assert_eq!(c.iters_for_ms(0.13), 130);
        assert_eq!(c.iters_for_ms(0.0), 0);
        assert_eq!(c.iters_for_ms(-1.0), 0);
        // 2^27 ns
        assert_eq!(c.iters_for_ns(1 << 27), 134_217);
    }

    #[test]
    fn spin_zero_returns() {
        spin(0);
    }
}
