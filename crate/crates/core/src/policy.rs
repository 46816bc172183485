use core::fmt;
use core::str::FromStr;

/// Contention-management policy of a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    Native,
    ConstBackoff,
    ExpBackoff,
    TimeSlice,
    Mcs,
    ArrayBased,
}

impl Policy {
    pub const ALL: [Policy; 6] = [
        Policy::Native,
        Policy::ConstBackoff,
        Policy::ExpBackoff,
        Policy::TimeSlice,
        Policy::Mcs,
        Policy::ArrayBased,
    ];

    /// Short name used on the command line and in result files.
    pub fn name(self) -> &'static str {
        match self {
            Policy::Native => "native",
            Policy::ConstBackoff => "cb",
            Policy::ExpBackoff => "exp",
            Policy::TimeSlice => "ts",
            Policy::Mcs => "mcs",
            Policy::ArrayBased => "ab",
        }
    }

    /// Whether the policy keeps per-thread state and therefore needs callers
    /// to pass a registered index.
    pub fn uses_thread_records(self) -> bool {
        matches!(self, Policy::ExpBackoff | Policy::Mcs | Policy::ArrayBased)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown policy name (expected native, cb, exp, ts, mcs or ab)")]
pub struct ParsePolicyError;

impl FromStr for Policy {
    type Err = ParsePolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or(ParsePolicyError)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>(), Ok(p));
        }
        assert!("all".parse::<Policy>().is_err());
    }
}
