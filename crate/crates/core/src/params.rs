use core::fmt;
use core::str::FromStr;

use crate::Policy;

/// Platform-dependent tuning constants shared by all policies.
///
/// Durations are nominal milliseconds; they are turned into spin iterations
/// through the process calibration. Each policy reads only its own fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyParams {
    /// Constant backoff: spin time after a failed CAS.
    pub waiting_time_ms: f64,
    /// Exponential backoff: failures tolerated before waiting.
    pub exp_threshold: u32,
    /// Exponential backoff: exponent multiplier.
    pub c: u32,
    /// Exponential backoff: exponent cap.
    pub m: u32,
    /// Time slice: concurrency allowed per slice (at least 1).
    pub conc: u32,
    /// Time slice: log2 of the slice length in nanoseconds.
    pub slice: u32,
    /// MCS / array-based: consecutive low-mode failures before switching to
    /// high-contention mode.
    pub contention_threshold: u64,
    /// MCS / array-based: high-mode operations before switching back.
    pub num_ops: u64,
    /// MCS / array-based: bound on every internal wait.
    pub max_wait_ms: f64,
}

impl PolicyParams {
    /// Checks the structural invariants (`conc >= 1`, finite non-negative
    /// durations, non-zero mode thresholds).
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.conc == 0 {
            return Err("conc must be at least 1");
        }
        if !(self.waiting_time_ms.is_finite() && self.waiting_time_ms >= 0.0) {
            return Err("waiting_time_ms must be finite and non-negative");
        }
        if !(self.max_wait_ms.is_finite() && self.max_wait_ms >= 0.0) {
            return Err("max_wait_ms must be finite and non-negative");
        }
        if self.contention_threshold == 0 {
            return Err("contention_threshold must be positive");
        }
        if self.num_ops == 0 {
            return Err("num_ops must be positive");
        }
        if self.slice >= 64 {
            return Err("slice must be below 64");
        }
        Ok(())
    }
}

impl Default for PolicyParams {
    fn default() -> Self {
        Platform::Xeon.params(Policy::Native)
    }
}

/// The three machines the shipped presets were tuned on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Platform {
    Xeon,
    I7,
    Sparc,
}

impl Platform {
    pub const ALL: [Platform; 3] = [Platform::Xeon, Platform::I7, Platform::Sparc];

    pub fn name(self) -> &'static str {
        match self {
            Platform::Xeon => "xeon",
            Platform::I7 => "i7",
            Platform::Sparc => "sparc",
        }
    }

    /// Tuned constants for `policy` on this platform.
    ///
    /// MCS and array-based were tuned separately, so the contention
    /// threshold, op count and wait bound depend on the policy; every other
    /// policy carries the MCS row in those fields.
    pub fn params(self, policy: Policy) -> PolicyParams {
        let (waiting_time_ms, exp_threshold, c, m, conc, slice) = match self {
            Platform::Xeon => (0.13, 2, 8, 24, 1, 20),
            Platform::I7 => (0.8, 2, 9, 27, 1, 25),
            Platform::Sparc => (0.2, 1, 1, 15, 10, 6),
        };
        let mcs = match self {
            Platform::Xeon => (8, 10_000, 0.9),
            Platform::I7 => (8, 10_000, 7.5),
            Platform::Sparc => (14, 10, 1.0),
        };
        let ab = match self {
            Platform::Xeon => (2, 10_000, 0.9),
            Platform::I7 => (2, 100_000, 7.5),
            Platform::Sparc => (14, 100, 1.0),
        };
        let (contention_threshold, num_ops, max_wait_ms) = match policy {
            Policy::ArrayBased => ab,
            _ => mcs,
        };
        PolicyParams {
            waiting_time_ms,
            exp_threshold,
            c,
            m,
            conc,
            slice,
            contention_threshold,
            num_ops,
            max_wait_ms,
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Platform {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xeon" => Ok(Platform::Xeon),
            "i7" => Ok(Platform::I7),
            "sparc" => Ok(Platform::Sparc),
            _ => Err(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xeon_table_values() {
        let cb = Platform::Xeon.params(Policy::ConstBackoff);
        assert_eq!(cb.waiting_time_ms, 0.13);
        assert_eq!((cb.exp_threshold, cb.c, cb.m), (2, 8, 24));
        assert_eq!((cb.conc, cb.slice), (1, 20));
        let mcs = Platform::Xeon.params(Policy::Mcs);
        assert_eq!(
            (mcs.contention_threshold, mcs.num_ops, mcs.max_wait_ms),
            (8, 10_000, 0.9)
        );
        let ab = Platform::Xeon.params(Policy::ArrayBased);
        assert_eq!(
            (ab.contention_threshold, ab.num_ops, ab.max_wait_ms),
            (2, 10_000, 0.9)
        );
    }

    #[test]
    fn i7_and_sparc_table_values() {
        let i7 = Platform::I7.params(Policy::ArrayBased);
        assert_eq!(i7.waiting_time_ms, 0.8);
        assert_eq!((i7.c, i7.m, i7.slice), (9, 27, 25));
        assert_eq!((i7.num_ops, i7.max_wait_ms), (100_000, 7.5));
        let sp = Platform::Sparc.params(Policy::Mcs);
        assert_eq!(sp.waiting_time_ms, 0.2);
        assert_eq!((sp.exp_threshold, sp.c, sp.m), (1, 1, 15));
        assert_eq!((sp.conc, sp.slice), (10, 6));
        assert_eq!((sp.contention_threshold, sp.num_ops), (14, 10));
        assert_eq!(Platform::Sparc.params(Policy::ArrayBased).num_ops, 100);
    }

    #[test]
    fn presets_are_valid_and_m_at_least_c() {
        for p in Platform::ALL {
            for policy in Policy::ALL {
                let params = p.params(policy);
                assert_eq!(params.validate(), Ok(()));
                assert!(params.m >= params.c);
            }
        }
    }

    #[test]
    fn rejects_zero_conc() {
        let p = PolicyParams {
            conc: 0,
            ..PolicyParams::default()
        };
        assert!(p.validate().is_err());
    }
}
