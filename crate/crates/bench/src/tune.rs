//! Grid search over policy parameters.

use std::collections::BTreeMap;

use cascm_core::{Policy, PolicyParams};

use crate::harness::{self, HarnessError};
use crate::stats::aggregate_runs;
use crate::workload::{BenchKind, RunMode, WorkloadSpec};

#[derive(Debug, thiserror::Error)]
pub enum TuneError {
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("no concurrency levels to evaluate")]
    NoLevels,
    #[error("grid point {index} is invalid: {reason}")]
    InvalidPoint { index: usize, reason: &'static str },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("bad value `{value}` for `{name}`")]
    BadValue { name: String, value: String },
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("measurement failed: {0}")]
    Measure(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub best: PolicyParams,
    pub best_index: usize,
    /// Mean score of every grid point, in grid order.
    pub scores: Vec<f64>,
}

/// Evaluates every grid point at every level and returns the point with the
/// highest mean score. Ties go to the earliest point.
pub fn tune_params<F>(
    grid: &[PolicyParams],
    levels: &[usize],
    seeds: &[u64],
    mut measure: F,
) -> Result<TuneOutcome, TuneError>
where
    F: FnMut(&PolicyParams, usize, &[u64]) -> Result<f64, TuneError>,
{
    if grid.is_empty() {
        return Err(TuneError::EmptyGrid);
    }
    if levels.is_empty() {
        return Err(TuneError::NoLevels);
    }
    for (index, p) in grid.iter().enumerate() {
        p.validate()
            .map_err(|reason| TuneError::InvalidPoint { index, reason })?;
    }
    let mut scores = Vec::with_capacity(grid.len());
    for p in grid {
        let mut total = 0.0;
        for &level in levels {
            total += measure(p, level, seeds)?;
        }
        scores.push(total / levels.len() as f64);
    }
    let mut best_index = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best_index] {
            best_index = i;
        }
    }
    Ok(TuneOutcome {
        best: grid[best_index],
        best_index,
        scores,
    })
}

/// Measure function backed by the harness: mean throughput of `bench` with
/// `policy` over the given seeds.
pub fn harness_measure(
    bench: BenchKind,
    policy: Policy,
    mode: RunMode,
) -> impl FnMut(&PolicyParams, usize, &[u64]) -> Result<f64, TuneError> {
    move |params, threads, seeds| {
        let mut spec = WorkloadSpec::new(bench, policy, *params, threads);
        spec.mode = mode;
        spec.seeds = seeds.to_vec();
        let reports = harness::run(&spec)?;
        let results: Vec<_> = reports.into_iter().map(|r| r.result).collect();
        Ok(aggregate_runs(&results)
            .map_err(|e| TuneError::Measure(e.to_string()))?
            .throughput)
    }
}

/// Sets one named parameter from its textual value.
pub fn set_param(p: &mut PolicyParams, name: &str, value: &str) -> Result<(), TuneError> {
    let bad = || TuneError::BadValue {
        name: name.to_owned(),
        value: value.to_owned(),
    };
    let v = value.trim();
    match name {
        "waiting_time_ms" => p.waiting_time_ms = v.parse().map_err(|_| bad())?,
        "exp_threshold" => p.exp_threshold = v.parse().map_err(|_| bad())?,
        "c" => p.c = v.parse().map_err(|_| bad())?,
        "m" => p.m = v.parse().map_err(|_| bad())?,
        "conc" => p.conc = v.parse().map_err(|_| bad())?,
        "slice" => p.slice = v.parse().map_err(|_| bad())?,
        "contention_threshold" => p.contention_threshold = v.parse().map_err(|_| bad())?,
        "num_ops" => p.num_ops = v.parse().map_err(|_| bad())?,
        "max_wait_ms" => p.max_wait_ms = v.parse().map_err(|_| bad())?,
        _ => return Err(TuneError::UnknownParam(name.to_owned())),
    }
    Ok(())
}

/// Cartesian product of `axes` applied on top of `base`. Later axes vary
/// fastest.
pub fn cartesian_grid(
    base: PolicyParams,
    axes: &[(String, Vec<String>)],
) -> Result<Vec<PolicyParams>, TuneError> {
    let mut grid = vec![base];
    for (name, values) in axes {
        let mut next = Vec::with_capacity(grid.len() * values.len());
        for p in &grid {
            for v in values {
                let mut q = *p;
                set_param(&mut q, name, v)?;
                next.push(q);
            }
        }
        grid = next;
    }
    Ok(grid)
}

/// Reads a grid from CSV: a header of parameter names, one point per row.
/// Unlisted parameters keep their value from `base`.
pub fn grid_from_csv<R: std::io::Read>(
    base: PolicyParams,
    input: R,
) -> Result<Vec<PolicyParams>, TuneError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| TuneError::Measure(e.to_string()))?
        .clone();
    let mut grid = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| TuneError::Measure(e.to_string()))?;
        let mut p = base;
        for (name, value) in headers.iter().zip(row.iter()) {
            set_param(&mut p, name, value)?;
        }
        grid.push(p);
    }
    Ok(grid)
}

/// TOML block describing `params`, keyed by policy name.
pub fn preset_toml(policy: Policy, params: &PolicyParams) -> String {
    let mut table = BTreeMap::new();
    table.insert(policy.name(), params_table(params));
    toml::to_string(&table).expect("parameters serialize to TOML")
}

fn params_table(p: &PolicyParams) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("waiting_time_ms".into(), p.waiting_time_ms.into());
    t.insert("exp_threshold".into(), i64::from(p.exp_threshold).into());
    t.insert("c".into(), i64::from(p.c).into());
    t.insert("m".into(), i64::from(p.m).into());
    t.insert("conc".into(), i64::from(p.conc).into());
    t.insert("slice".into(), i64::from(p.slice).into());
    t.insert(
        "contention_threshold".into(),
        (p.contention_threshold as i64).into(),
    );
    t.insert("num_ops".into(), (p.num_ops as i64).into());
    t.insert("max_wait_ms".into(), p.max_wait_ms.into());
    t
}

/// One-line description of a grid point for progress logs.
pub fn describe(p: &PolicyParams) -> String {
    format!(
        "waiting_time_ms={} exp_threshold={} c={} m={} conc={} slice={} \
         contention_threshold={} num_ops={} max_wait_ms={}",
        p.waiting_time_ms,
        p.exp_threshold,
        p.c,
        p.m,
        p.conc,
        p.slice,
        p.contention_threshold,
        p.num_ops,
        p.max_wait_ms
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(c: u32) -> PolicyParams {
        PolicyParams {
            c,
            ..PolicyParams::default()
        }
    }

    #[test]
    fn picks_highest_mean_and_counts_calls() {
        let grid = [point(1), point(2), point(3)];
        let mut calls = 0;
        let out = tune_params(&grid, &[1, 2], &[0], |p, level, _| {
            calls += 1;
            Ok(match p.c {
                2 => 10.0 * level as f64,
                _ => level as f64,
            })
        })
        .unwrap();
        assert_eq!(calls, 6);
        assert_eq!(out.best_index, 1);
        assert_eq!(out.best.c, 2);
        assert_eq!(out.scores, vec![1.5, 15.0, 1.5]);
    }

    #[test]
    fn ties_go_to_earliest() {
        let grid = [point(1), point(2), point(3)];
        let out = tune_params(&grid, &[4], &[0], |p, _, _| {
            Ok(if p.c == 1 { 1.0 } else { 2.0 })
        })
        .unwrap();
        assert_eq!(out.best_index, 1);
    }

    #[test]
    fn empty_inputs_are_errors() {
        let f = |_: &PolicyParams, _: usize, _: &[u64]| Ok(0.0);
        assert!(matches!(
            tune_params(&[], &[1], &[0], f),
            Err(TuneError::EmptyGrid)
        ));
        assert!(matches!(
            tune_params(&[point(1)], &[], &[0], f),
            Err(TuneError::NoLevels)
        ));
    }

    #[test]
    fn cartesian_grid_order() {
        let axes = vec![
            ("c".to_string(), vec!["1".to_string(), "2".to_string()]),
            ("m".to_string(), vec!["10".to_string(), "20".to_string()]),
        ];
        let g = cartesian_grid(PolicyParams::default(), &axes).unwrap();
        let pairs: Vec<_> = g.iter().map(|p| (p.c, p.m)).collect();
        assert_eq!(pairs, vec![(1, 10), (1, 20), (2, 10), (2, 20)]);
        let bad = vec![("q".to_string(), vec!["1".to_string()])];
        assert!(matches!(
            cartesian_grid(PolicyParams::default(), &bad),
            Err(TuneError::UnknownParam(_))
        ));
    }

    #[test]
    fn csv_grid() {
        let g = grid_from_csv(
            PolicyParams::default(),
            "c, max_wait_ms\n3, 1.5\n4, 2\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].c, g[0].max_wait_ms), (3, 1.5));
        assert_eq!(g[1].m, PolicyParams::default().m);
    }

    #[test]
    fn toml_round_trip() {
        let p = point(5);
        let text = preset_toml(Policy::ExpBackoff, &p);
        let parsed: toml::Table = text.parse().unwrap();
        assert_eq!(parsed["exp"]["c"].as_integer(), Some(5));
        assert_eq!(parsed["exp"]["max_wait_ms"].as_float(), Some(p.max_wait_ms));
    }
}
