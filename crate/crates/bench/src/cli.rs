//! Command-line front end: `bench`, `tune` and `verify`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use cascm_core::{Platform, Policy, PolicyParams, DEFAULT_MAX_THREADS};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::harness;
use crate::output::{Format, OutputRow, RowWriter};
use crate::tune::{self, TuneError};
use crate::verify::{self, Intensity, Suite};
use crate::workload::{
    default_seeds, BenchKind, RunMode, WorkloadSpec, DEFAULT_BASE_SEED, DEFAULT_RUNS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cascm", version, about = "Contention-managed CAS benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a benchmark sweep and write one row per run.
    Bench(BenchArgs),
    /// Grid-search policy parameters and print the best as a preset.
    Tune(TuneArgs),
    /// Run correctness self-checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Timed,
    Ops,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Xeon,
    I7,
    Sparc,
    Auto,
}

#[derive(Debug, Clone, Args)]
pub struct WorkloadArgs {
    #[arg(long, default_value = "cas")]
    pub bench: BenchKind,
    /// Thread counts: `N` or `A..B[:STEP]` (inclusive).
    #[arg(long, default_value = "1")]
    pub threads: ThreadRange,
    #[arg(long, value_enum, default_value_t = ModeArg::Timed)]
    pub mode: ModeArg,
    /// Seconds per run in timed mode.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Operations per thread in ops mode.
    #[arg(long)]
    pub ops: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Seed of the first run; run `i` uses `SEED + i`. Without `--runs`,
    /// a single run.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// File with one seed per line; one run per seed.
    #[arg(long)]
    pub seeds: Option<PathBuf>,
    /// Initial items in the queue or stack.
    #[arg(long)]
    pub prepopulate: Option<usize>,
    /// Manage only head and tail of the queue, not node links.
    #[arg(long)]
    pub native_links: bool,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Platform preset (xeon, i7, sparc, auto).
    #[arg(long, value_enum, env = "CASCM_PRESET")]
    pub preset: Option<PresetArg>,
    #[arg(long)]
    pub waiting_time_ms: Option<f64>,
    #[arg(long)]
    pub exp_threshold: Option<u32>,
    #[arg(long = "c")]
    pub c: Option<u32>,
    #[arg(long = "m")]
    pub m: Option<u32>,
    #[arg(long)]
    pub conc: Option<u32>,
    #[arg(long)]
    pub slice: Option<u32>,
    #[arg(long)]
    pub contention_threshold: Option<u64>,
    #[arg(long)]
    pub num_ops: Option<u64>,
    #[arg(long)]
    pub max_wait_ms: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Policy name or `all`.
    #[arg(long, default_value = "all")]
    pub algo: AlgoArg,
    #[command(flatten)]
    pub workload: WorkloadArgs,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub algo: Policy,
    #[command(flatten)]
    pub workload: WorkloadArgs,
    /// CSV file whose header names parameters and whose rows are grid points.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// `NAME=V1,V2,...`; repeat to build a cartesian grid.
    #[arg(long = "grid-param")]
    pub grid_param: Vec<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Short run (finishes in well under a minute).
    #[arg(long)]
    pub quick: bool,
    /// Check only this policy (repeatable).
    #[arg(long)]
    pub policy: Vec<Policy>,
    /// Run only this suite (repeatable).
    #[arg(long)]
    pub suite: Vec<Suite>,
    #[arg(long, value_enum, env = "CASCM_PRESET")]
    pub preset: Option<PresetArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoArg {
    One(Policy),
    All,
}

impl std::str::FromStr for AlgoArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(AlgoArg::All);
        }
        s.parse().map(AlgoArg::One).map_err(|e| format!("{e}"))
    }
}

impl AlgoArg {
    pub fn policies(self) -> Vec<Policy> {
        match self {
            AlgoArg::One(p) => vec![p],
            AlgoArg::All => Policy::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadRange(pub Vec<usize>);

impl std::str::FromStr for ThreadRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("invalid thread range `{s}` (expected N or A..B[:STEP])");
        let num = |x: &str| x.trim().parse::<usize>().map_err(|_| bad());
        let (range, step) = match s.split_once(':') {
            Some((r, st)) => (r, num(st)?),
            None => (s, 1),
        };
        let (lo, hi) = match range.split_once("..") {
            Some((a, b)) => (num(a)?, num(b)?),
            None if step == 1 && !s.contains(':') => (num(range)?, num(range)?),
            None => return Err(bad()),
        };
        if lo == 0 || hi < lo || step == 0 {
            return Err(bad());
        }
        Ok(ThreadRange((lo..=hi).step_by(step).collect()))
    }
}

/// Error that maps to the usage exit code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Bench(a) => cmd_bench(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn hardware_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Platform for a preset choice; `auto` picks by hardware thread count.
pub fn resolve_platform(preset: Option<PresetArg>, hw_threads: usize) -> Platform {
    match preset.unwrap_or(PresetArg::Auto) {
        PresetArg::Xeon => Platform::Xeon,
        PresetArg::I7 => Platform::I7,
        PresetArg::Sparc => Platform::Sparc,
        PresetArg::Auto if hw_threads <= 8 => Platform::I7,
        PresetArg::Auto if hw_threads <= 20 => Platform::Xeon,
        PresetArg::Auto => Platform::Sparc,
    }
}

impl ParamArgs {
    pub fn resolve(&self, policy: Policy) -> anyhow::Result<PolicyParams> {
        let mut p = resolve_platform(self.preset, hardware_threads()).params(policy);
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        apply!(
            waiting_time_ms,
            exp_threshold,
            c,
            m,
            conc,
            slice,
            contention_threshold,
            num_ops,
            max_wait_ms
        );
        p.validate().map_err(usage)?;
        Ok(p)
    }
}

impl WorkloadArgs {
    fn run_mode(&self) -> anyhow::Result<RunMode> {
        match self.mode {
            ModeArg::Timed => {
                if self.ops.is_some() {
                    return Err(usage("--ops requires --mode ops"));
                }
                let secs = self
                    .duration
                    .unwrap_or(crate::workload::DEFAULT_DURATION.as_secs_f64());
                if !(secs.is_finite() && secs > 0.0) {
                    return Err(usage("--duration must be a positive number of seconds"));
                }
                Ok(RunMode::Timed(Duration::from_secs_f64(secs)))
            }
            ModeArg::Ops => {
                if self.duration.is_some() {
                    return Err(usage("--duration requires --mode timed"));
                }
                match self.ops.unwrap_or(100_000) {
                    0 => Err(usage("--ops must be positive")),
                    n => Ok(RunMode::Ops(n)),
                }
            }
        }
    }

    fn seed_list(&self) -> anyhow::Result<Vec<u64>> {
        if let Some(path) = &self.seeds {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading seeds from {}", path.display()))?;
            let seeds = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| {
                    l.parse::<u64>()
                        .map_err(|_| usage(format!("bad seed `{l}` in {}", path.display())))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            if seeds.is_empty() {
                return Err(usage("seed file is empty"));
            }
            if let Some(r) = self.runs {
                if r != seeds.len() {
                    return Err(usage(format!(
                        "--runs {r} but the seed file lists {}",
                        seeds.len()
                    )));
                }
            }
            return Ok(seeds);
        }
        match (self.seed, self.runs) {
            (_, Some(0)) => Err(usage("--runs must be at least 1")),
            // An explicit seed is used as-is for the first run.
            (Some(seed), runs) => Ok((0..runs.unwrap_or(1) as u64)
                .map(|i| seed.wrapping_add(i))
                .collect()),
            (None, runs) => Ok(default_seeds(
                DEFAULT_BASE_SEED,
                runs.unwrap_or(DEFAULT_RUNS),
            )),
        }
    }

    /// One spec per thread level.
    pub fn specs(&self, policy: Policy, params: PolicyParams) -> anyhow::Result<Vec<WorkloadSpec>> {
        let mode = self.run_mode()?;
        let seeds = self.seed_list()?;
        self.threads
            .0
            .iter()
            .map(|&threads| {
                let mut s = WorkloadSpec::new(self.bench, policy, params, threads);
                s.mode = mode;
                s.seeds = seeds.clone();
                s.manage_next = !self.native_links;
                s.max_threads = DEFAULT_MAX_THREADS.max(threads);
                if let Some(n) = self.prepopulate {
                    s.prepopulate = n;
                }
                s.validate().map_err(usage)?;
                Ok(s)
            })
            .collect()
    }
}

fn open_out(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn cmd_bench(args: BenchArgs) -> anyhow::Result<i32> {
    let mut plan = Vec::new();
    for policy in args.algo.policies() {
        let params = args.workload.params.resolve(policy)?;
        plan.extend(args.workload.specs(policy, params)?);
    }
    let format = match args.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Jsonl => Format::Jsonl,
    };
    let mut out = RowWriter::new(format, open_out(args.out.as_ref())?);
    for spec in &plan {
        let reports = harness::run(spec).with_context(|| {
            format!(
                "{} {} with {} threads",
                spec.bench, spec.policy, spec.threads
            )
        })?;
        for r in &reports {
            out.write(&OutputRow::new(spec, r))?;
        }
        out.flush()?;
    }
    Ok(EXIT_OK)
}

fn parse_grid_param(s: &str) -> anyhow::Result<(String, Vec<String>)> {
    let (name, values) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("--grid-param `{s}` is not NAME=V1,V2,...")))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_owned()).collect();
    if values.iter().any(String::is_empty) {
        return Err(usage(format!("--grid-param `{s}` has an empty value")));
    }
    Ok((name.trim().to_owned(), values))
}

fn tune_usage(e: TuneError) -> anyhow::Error {
    match e {
        TuneError::Harness(_) | TuneError::Measure(_) => e.into(),
        other => usage(other.to_string()),
    }
}

pub fn cmd_tune(args: TuneArgs) -> anyhow::Result<i32> {
    let policy = args.algo;
    let base = args.workload.params.resolve(policy)?;
    let mut grid = match &args.grid {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            tune::grid_from_csv(base, f).map_err(tune_usage)?
        }
        None => vec![base],
    };
    let axes = args
        .grid_param
        .iter()
        .map(|s| parse_grid_param(s))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if !axes.is_empty() {
        let mut expanded = Vec::new();
        for p in grid {
            expanded.extend(tune::cartesian_grid(p, &axes).map_err(tune_usage)?);
        }
        grid = expanded;
    }
    // Validates mode, seeds and thread levels up front.
    let specs = args.workload.specs(policy, base)?;
    let levels: Vec<usize> = specs.iter().map(|s| s.threads).collect();
    let seeds = specs[0].seeds.clone();
    let mode = specs[0].mode;

    let mut inner = tune::harness_measure(args.workload.bench, policy, mode);
    let mut index = 0usize;
    let outcome = tune::tune_params(&grid, &levels, &seeds, |p, threads, seeds| {
        let score = inner(p, threads, seeds)?;
        eprintln!(
            "measure point={} threads={threads} score={score:.1} {}",
            index / levels.len(),
            tune::describe(p)
        );
        index += 1;
        Ok(score)
    })
    .map_err(tune_usage)?;
    eprintln!(
        "best point {} of {} (mean throughput {:.1}, {index} measurements)",
        outcome.best_index,
        grid.len(),
        outcome.scores[outcome.best_index]
    );
    print!("{}", tune::preset_toml(policy, &outcome.best));
    Ok(EXIT_OK)
}

pub fn cmd_verify(args: VerifyArgs) -> anyhow::Result<i32> {
    let suites = if args.suite.is_empty() {
        Suite::ALL.to_vec()
    } else {
        args.suite.clone()
    };
    let policies = if args.policy.is_empty() {
        Policy::ALL.to_vec()
    } else {
        args.policy.clone()
    };
    let platform = resolve_platform(args.preset, hardware_threads());
    let intensity = if args.quick {
        Intensity::QUICK
    } else {
        Intensity::FULL
    };
    let mut failed = 0;
    for suite in suites {
        for r in verify::run_suite(suite, &policies, platform, intensity) {
            println!("{r}");
            if r.passed == Some(false) {
                failed += 1;
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} check(s) failed");
        Ok(EXIT_FAILURE)
    } else {
        Ok(EXIT_OK)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_ranges() {
        let p = |s: &str| s.parse::<ThreadRange>().map(|r| r.0);
        assert_eq!(p("4"), Ok(vec![4]));
        assert_eq!(p("1..4"), Ok(vec![1, 2, 3, 4]));
        assert_eq!(p("2..9:3"), Ok(vec![2, 5, 8]));
        assert!(p("0").is_err());
        assert!(p("4..1").is_err());
        assert!(p("1..4:0").is_err());
        assert!(p("3:2").is_err());
        assert!(p("x").is_err());
    }

    #[test]
    fn auto_preset_by_hardware() {
        assert_eq!(resolve_platform(Some(PresetArg::Auto), 1), Platform::I7);
        assert_eq!(resolve_platform(None, 8), Platform::I7);
        assert_eq!(resolve_platform(None, 9), Platform::Xeon);
        assert_eq!(resolve_platform(None, 20), Platform::Xeon);
        assert_eq!(resolve_platform(None, 21), Platform::Sparc);
        assert_eq!(resolve_platform(Some(PresetArg::Sparc), 1), Platform::Sparc);
    }

    #[test]
    fn overrides_apply_on_top_of_preset() {
        let a = ParamArgs {
            preset: Some(PresetArg::Xeon),
            m: Some(30),
            ..Default::default()
        };
        let p = a.resolve(Policy::ExpBackoff).unwrap();
        assert_eq!((p.c, p.m, p.exp_threshold), (8, 30, 2));
    }

    #[test]
    fn grid_param_syntax() {
        assert_eq!(
            parse_grid_param("c=1, 2").unwrap(),
            ("c".to_owned(), vec!["1".to_owned(), "2".to_owned()])
        );
        assert!(parse_grid_param("c").is_err());
        assert!(parse_grid_param("c=1,,2").is_err());
    }
}
