//! Per-run result rows in CSV and JSON Lines.

use std::io::Write;

use serde::Serialize;

use crate::harness::RunReport;
use crate::workload::{BenchKind, WorkloadSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

/// One measured run. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputRow {
    pub bench: BenchKind,
    pub policy: &'static str,
    pub threads: usize,
    pub run_index: usize,
    pub seed: u64,
    pub successes: u64,
    pub failures: u64,
    pub ops: u64,
    pub wall_time_s: f64,
    pub throughput: f64,
    /// Empty when undefined (no thread completed an operation).
    pub jain: Option<f64>,
    pub norm_stdev: Option<f64>,
    pub waiting_time_ms: f64,
    pub exp_threshold: u32,
    pub c: u32,
    pub m: u32,
    pub conc: u32,
    pub slice: u32,
    pub contention_threshold: u64,
    pub num_ops: u64,
    pub max_wait_ms: f64,
}

impl OutputRow {
    pub fn new(spec: &WorkloadSpec, report: &RunReport) -> Self {
        let r = &report.result;
        let fair = r.fairness().ok();
        let p = &spec.params;
        OutputRow {
            bench: spec.bench,
            policy: spec.policy.name(),
            threads: r.threads(),
            run_index: report.run_index,
            seed: report.seed,
            successes: r.successes(),
            failures: r.failures(),
            ops: r.ops(),
            wall_time_s: r.wall_time_s,
            throughput: r.throughput(),
            jain: fair.map(|f| f.jain),
            norm_stdev: fair.map(|f| f.norm_stdev),
            waiting_time_ms: p.waiting_time_ms,
            exp_threshold: p.exp_threshold,
            c: p.c,
            m: p.m,
            conc: p.conc,
            slice: p.slice,
            contention_threshold: p.contention_threshold,
            num_ops: p.num_ops,
            max_wait_ms: p.max_wait_ms,
        }
    }
}

/// Streams rows to a writer in the chosen format.
pub struct RowWriter<W: Write> {
    inner: Inner<W>,
}

enum Inner<W: Write> {
    Csv(Box<csv::Writer<W>>),
    Jsonl(W),
}

impl<W: Write> RowWriter<W> {
    pub fn new(format: Format, out: W) -> Self {
        let inner = match format {
            Format::Csv => Inner::Csv(Box::new(csv::Writer::from_writer(out))),
            Format::Jsonl => Inner::Jsonl(out),
        };
        RowWriter { inner }
    }

    pub fn write(&mut self, row: &OutputRow) -> anyhow::Result<()> {
        match &mut self.inner {
            Inner::Csv(w) => w.serialize(row)?,
            Inner::Jsonl(w) => {
                serde_json::to_writer(&mut *w, row)?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn flush(&mut self) -> anyhow::Result<()> {
        match &mut self.inner {
            Inner::Csv(w) => w.flush()?,
            Inner::Jsonl(w) => w.flush()?,
        }
        Ok(())
    }
}
