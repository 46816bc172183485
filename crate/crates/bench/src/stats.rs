//! Per-run counters, fairness metrics and run aggregation.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("metric undefined for an empty sample")]
    Empty,
    #[error("metric undefined when every sample is zero")]
    AllZero,
    #[error("sample contains a negative or non-finite value")]
    InvalidSample,
}

fn check(xs: &[f64]) -> Result<(), StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    if xs.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(StatsError::InvalidSample);
    }
    Ok(())
}

/// Jain's fairness index `(Σx)² / (n·Σx²)`, in `[1/n, 1]`.
pub fn jain_index(xs: &[f64]) -> Result<f64, StatsError> {
    check(xs)?;
    let sum: f64 = xs.iter().sum();
    let sum_sq: f64 = xs.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return Err(StatsError::AllZero);
    }
    Ok(sum * sum / (xs.len() as f64 * sum_sq))
}

/// Coefficient of variation: population standard deviation over the mean.
pub fn norm_stdev(xs: &[f64]) -> Result<f64, StatsError> {
    check(xs)?;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(StatsError::AllZero);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FairnessStats {
    pub jain: f64,
    pub norm_stdev: f64,
}

impl FairnessStats {
    pub fn of(xs: &[f64]) -> Result<Self, StatsError> {
        Ok(FairnessStats {
            jain: jain_index(xs)?,
            norm_stdev: norm_stdev(xs)?,
        })
    }
}

/// Counters of one run. For the CAS benchmark an operation is a successful
/// install, so `ops == successes`; for the queue and stack an operation is a
/// completed enqueue/dequeue or push/pop and the success/failure counts are
/// the CAS outcomes inside those operations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub per_thread_successes: Vec<u64>,
    pub per_thread_failures: Vec<u64>,
    pub per_thread_ops: Vec<u64>,
    pub wall_time_s: f64,
}

impl BenchResult {
    pub fn threads(&self) -> usize {
        self.per_thread_ops.len()
    }

    pub fn successes(&self) -> u64 {
        self.per_thread_successes.iter().sum()
    }

    pub fn failures(&self) -> u64 {
        self.per_thread_failures.iter().sum()
    }

    pub fn ops(&self) -> u64 {
        self.per_thread_ops.iter().sum()
    }

    /// Completed operations per second.
    pub fn throughput(&self) -> f64 {
        if self.wall_time_s > 0.0 {
            self.ops() as f64 / self.wall_time_s
        } else {
            0.0
        }
    }

    /// Fairness of the per-thread completed operations.
    pub fn fairness(&self) -> Result<FairnessStats, StatsError> {
        let xs: Vec<f64> = self.per_thread_ops.iter().map(|&x| x as f64).collect();
        FairnessStats::of(&xs)
    }
}

/// Mean of a set of runs of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub runs: usize,
    pub successes: f64,
    pub failures: f64,
    pub ops: f64,
    pub throughput: f64,
    pub fairness: FairnessStats,
}

/// Averages totals across runs; fairness is computed per run and then
/// averaged.
///
/// # Panics
/// If `results` is empty.
pub fn aggregate_runs(results: &[BenchResult]) -> Result<RunSummary, StatsError> {
    assert!(!results.is_empty(), "aggregate_runs needs at least one run");
    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&BenchResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    let fair: Vec<FairnessStats> = results
        .iter()
        .map(BenchResult::fairness)
        .collect::<Result<_, _>>()?;
    Ok(RunSummary {
        runs: results.len(),
        successes: mean(&|r| r.successes() as f64),
        failures: mean(&|r| r.failures() as f64),
        ops: mean(&|r| r.ops() as f64),
        throughput: mean(&|r| r.throughput()),
        fairness: FairnessStats {
            jain: fair.iter().map(|f| f.jain).sum::<f64>() / n,
            norm_stdev: fair.iter().map(|f| f.norm_stdev).sum::<f64>() / n,
        },
    })
}

/// Averages per-level summaries of a concurrency sweep into one fairness
/// figure per policy.
pub fn sweep_fairness(levels: &[RunSummary]) -> Option<FairnessStats> {
    if levels.is_empty() {
        return None;
    }
    let n = levels.len() as f64;
    Some(FairnessStats {
        jain: levels.iter().map(|s| s.fairness.jain).sum::<f64>() / n,
        norm_stdev: levels.iter().map(|s| s.fairness.norm_stdev).sum::<f64>() / n,
    })
}
