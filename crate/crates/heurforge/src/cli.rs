//! Batch command-line surface: simulate, compare, search, check, ccsim,
//! synth-trace. Every file-writing run also writes a manifest (resolved
//! config, input digests, output paths, wall time) alongside its outputs.
//!
//! Exit codes: 0 success, 1 domain failure (check failed, no ok candidates),
//! 2 usage or configuration error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cache::{improvement_over_fifo, oracle_improvement, simulate, CacheConfig, MissReport};
use crate::ccsim::{run_cc, LinkConfig, AIMD_SEED, FIXED_CWND_SEED};
use crate::dsl::{check_program, parse, Mode, Program, LFU_SEED, LRU_SEED};
use crate::policies::{make_policy, parse_policy_spec, PolicyName};
use crate::priority::make_priority_policy;
use crate::search::{
    llm_config_from_env, run_search, DbMode, EvaluatorSpec, Generator, LlmGenerator,
    MockGenerator, SearchConfig, SearchError,
};
use crate::trace::{compute_stats, parse_trace, synth_scan_churn, synth_zipf, write_trace_csv,
    Phase, SizeDist};

/// Reproducibility record written next to every run's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub tool_version: String,
    /// input label -> sha256 hex digest of its bytes.
    pub input_digests: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub wall_time_ms: u64,
}

#[derive(Debug)]
enum CliError {
    /// Bad arguments or configuration: exit 2.
    Usage(String),
    /// The run itself failed (check rejection, no surviving candidates,
    /// generator outage): exit 1.
    Domain(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "heurforge", version, about = "Heuristic synthesis toolkit: trace simulation, policy comparison, evolutionary search")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Replay a trace against one eviction policy or DSL program.
    Simulate(SimulateArgs),
    /// Miss-ratio table for many policies/programs over many traces.
    Compare(CompareArgs),
    /// Run an evolutionary heuristic search from a config file.
    Search(SearchArgs),
    /// Validate a program; print diagnostics.
    Check(CheckArgs),
    /// Run a program as congestion controller on a bottleneck link.
    Ccsim(CcsimArgs),
    /// Generate a synthetic trace CSV.
    SynthTrace(SynthTraceArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Trace CSV (time,object_id,size).
    #[arg(long)]
    trace: PathBuf,
    /// Policy spec like `lru`, `s3fifo:small=0.1`, or `program:<path>`.
    #[arg(long)]
    policy: String,
    /// Capacity in bytes, or a percentage of the trace footprint like `10%`.
    #[arg(long)]
    capacity: String,
    /// Eviction-history ring size for program policies.
    #[arg(long, default_value_t = 1024)]
    history: usize,
    /// Where to write the miss report JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Trace CSV paths (repeatable).
    #[arg(long = "trace", required = true)]
    traces: Vec<PathBuf>,
    /// Comma-separated baseline policy specs; `all` for every baseline.
    #[arg(long, default_value = "all")]
    policies: String,
    /// DSL program paths to include in the pool (repeatable).
    #[arg(long = "program")]
    programs: Vec<PathBuf>,
    /// Capacity in bytes or `N%` of each trace's footprint.
    #[arg(long)]
    capacity: String,
    #[arg(long, default_value_t = 1024)]
    history: usize,
    /// Worker thread cap for the evaluation grid.
    #[arg(long)]
    jobs: Option<usize>,
    /// Where to write the comparison CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SearchArgs {
    /// Flat key-value config file; see `search_config` docs in the README.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "mock")]
    generator: GeneratorKind,
    /// Continue a previous run from its database.
    #[arg(long, conflicts_with = "overwrite")]
    resume: bool,
    /// Discard any existing database and start over.
    #[arg(long)]
    overwrite: bool,
    /// Worker thread cap for fitness evaluation.
    #[arg(long)]
    jobs: Option<usize>,
    /// Where to write the best program (default: `best.dsl` next to the db).
    #[arg(long)]
    best_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum GeneratorKind {
    Mock,
    Llm,
}

#[derive(Args, Debug)]
struct CheckArgs {
    program: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    mode: Mode,
}

#[derive(Args, Debug)]
struct CcsimArgs {
    /// DSL program path, or the built-in names `aimd` / `fixed`.
    #[arg(long)]
    program: String,
    #[arg(long, default_value_t = 12_000_000)]
    rate_bps: u64,
    #[arg(long, default_value_t = 20)]
    delay_ms: u64,
    /// Drop-tail buffer bytes; defaults to one bandwidth-delay product.
    #[arg(long)]
    queue_bytes: Option<u64>,
    #[arg(long, default_value_t = 1500)]
    mss: u64,
    #[arg(long, default_value_t = 60)]
    duration: u64,
    #[arg(long, default_value_t = 1)]
    flows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the metrics JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthTraceArgs {
    #[command(subcommand)]
    kind: SynthKind,
}

#[derive(Subcommand, Debug)]
enum SynthKind {
    /// Zipf-popularity trace.
    Zipf {
        #[arg(long, default_value_t = 100_000)]
        requests: u64,
        #[arg(long, default_value_t = 1_000)]
        objects: u64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Fixed object size; mutually exclusive with --size-min/--size-max.
        #[arg(long, conflicts_with_all = ["size_min", "size_max"])]
        size: Option<u64>,
        #[arg(long, default_value_t = 1, requires = "size_max")]
        size_min: u64,
        #[arg(long, default_value_t = 64)]
        size_max: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Alternating scan (fresh ids) and churn (fixed working set) phases.
    ScanChurn {
        /// Phase list like `scan:1000,churn:5000x200,recur:500`
        /// (churn:LENGTHxWORKING_SET; recur replays the last working set).
        #[arg(long)]
        phases: String,
        #[arg(long, default_value_t = 100)]
        size: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "cache" => Ok(Mode::Cache),
        "kernel" => Ok(Mode::Kernel),
        _ => Err(format!("unknown mode '{s}' (expected cache or kernel)")),
    }
}

/// Entry point used by the binary and by tests. Parses `args` (including
/// argv[0]) and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap already distinguishes --help/--version (success) from
            // genuine usage errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(&a),
        Cmd::Compare(a) => cmd_compare(&a),
        Cmd::Search(a) => cmd_search(&a),
        Cmd::Check(a) => cmd_check(&a),
        Cmd::Ccsim(a) => cmd_ccsim(&a),
        Cmd::SynthTrace(a) => cmd_synth_trace(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

fn digest_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Manifest path for an output file: `report.json` -> `report.manifest.json`.
fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn write_manifest(
    out: &Path,
    subcommand: &str,
    config: serde_json::Value,
    input_digests: BTreeMap<String, String>,
    outputs: Vec<String>,
    started: Instant,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        config,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input_digests,
        outputs,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(manifest_path(out), text)
        .map_err(|e| CliError::Domain(format!("cannot write manifest: {e}")))
}

/// `"123456"` -> bytes; `"10%"` -> floor(fraction x trace footprint).
fn resolve_capacity(spec: &str, footprint_bytes: u64) -> Result<u64, CliError> {
    let bytes = if let Some(pct) = spec.strip_suffix('%') {
        let pct: f64 = pct
            .parse()
            .map_err(|_| usage(format!("bad capacity percentage '{spec}'")))?;
        if !(pct > 0.0 && pct <= 100.0) {
            return Err(usage(format!("capacity percentage out of range: '{spec}'")));
        }
        (footprint_bytes as f64 * pct / 100.0).floor() as u64
    } else {
        spec.parse()
            .map_err(|_| usage(format!("bad capacity '{spec}' (bytes or N%)")))?
    };
    if bytes == 0 {
        return Err(usage(format!("capacity '{spec}' resolves to 0 bytes")));
    }
    Ok(bytes)
}

fn load_program(path: &Path, mode: Mode) -> Result<Program, CliError> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let program =
        parse(&source, mode).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
    let report = check_program(&program);
    if !report.ok {
        let mut msg = format!("{} rejected by checker:", path.display());
        for d in &report.diagnostics {
            msg.push_str(&format!("\n  {d}"));
        }
        return Err(CliError::Domain(msg));
    }
    Ok(program)
}

fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(usage("--jobs must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Domain(format!("thread pool: {e}"))),
    }
}

fn run_one_policy(
    trace: &[crate::trace::Request],
    policy_spec: &str,
    capacity_bytes: u64,
    history: usize,
) -> Result<MissReport, CliError> {
    let mut policy: Box<dyn crate::cache::EvictionPolicy> =
        if let Some(path) = policy_spec.strip_prefix("program:") {
            let program = load_program(Path::new(path), Mode::Cache)?;
            Box::new(
                make_priority_policy(program, history)
                    .map_err(|e| CliError::Domain(e.to_string()))?,
            )
        } else {
            let (name, params) =
                parse_policy_spec(policy_spec, capacity_bytes).map_err(usage)?;
            make_policy(name, &params).map_err(usage)?
        };
    simulate(trace, policy.as_mut(), &CacheConfig::new(capacity_bytes))
        .map_err(|e| CliError::Domain(e.to_string()))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let trace = parse_trace(&args.trace).map_err(usage)?;
    let stats = compute_stats(&trace).map_err(usage)?;
    let capacity_bytes = resolve_capacity(&args.capacity, stats.footprint_bytes)?;
    let report = run_one_policy(&trace, &args.policy, capacity_bytes, args.history)?;

    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&args.out, &json)
        .map_err(|e| CliError::Domain(format!("cannot write report: {e}")))?;
    println!("{json}");

    let mut digests = BTreeMap::new();
    digests.insert(format!("trace:{}", args.trace.display()), digest_file(&args.trace)?);
    if let Some(path) = args.policy.strip_prefix("program:") {
        digests.insert(format!("program:{path}"), digest_file(Path::new(path))?);
    }
    write_manifest(
        &args.out,
        "simulate",
        serde_json::json!({
            "trace": args.trace.display().to_string(),
            "policy": args.policy,
            "capacity_spec": args.capacity,
            "capacity_bytes": capacity_bytes,
            "history": args.history,
        }),
        digests,
        vec![args.out.display().to_string()],
        started,
    )
}

fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let started = Instant::now();
    // Baseline pool; FIFO is always included as the improvement reference.
    let mut policy_specs: Vec<String> = if args.policies == "all" {
        PolicyName::ALL.iter().map(|p| p.as_str().to_string()).collect()
    } else {
        args.policies.split(',').map(|s| s.trim().to_string()).collect()
    };
    if !policy_specs.iter().any(|s| s == "fifo" || s.starts_with("fifo:")) {
        policy_specs.push("fifo".to_string());
    }
    for spec in &policy_specs {
        parse_policy_spec(spec, 1).map_err(usage)?;
    }
    let program_specs: Vec<String> = args
        .programs
        .iter()
        .map(|p| format!("program:{}", p.display()))
        .collect();
    // Check programs up front so a bad one fails before the grid runs.
    for p in &args.programs {
        load_program(p, Mode::Cache)?;
    }

    let mut digests = BTreeMap::new();
    let mut traces = Vec::new();
    for path in &args.traces {
        let trace = parse_trace(path).map_err(usage)?;
        let stats = compute_stats(&trace).map_err(usage)?;
        let capacity = resolve_capacity(&args.capacity, stats.footprint_bytes)?;
        digests.insert(format!("trace:{}", path.display()), digest_file(path)?);
        traces.push((path.display().to_string(), trace, capacity));
    }
    for p in &args.programs {
        digests.insert(format!("program:{}", p.display()), digest_file(p)?);
    }

    let all_specs: Vec<String> =
        policy_specs.iter().chain(program_specs.iter()).cloned().collect();
    let grid: Vec<(usize, String)> = traces
        .iter()
        .enumerate()
        .flat_map(|(ti, _)| all_specs.iter().map(move |s| (ti, s.clone())))
        .collect();
    let history = args.history;
    let reports: Vec<Result<MissReport, CliError>> = with_jobs(args.jobs, || {
        use rayon::prelude::*;
        grid.par_iter()
            .map(|(ti, spec)| {
                let (_, trace, capacity) = &traces[*ti];
                run_one_policy(trace, spec, *capacity, history)
            })
            .collect()
    })?;

    // trace name -> policy label -> report.
    let mut table: BTreeMap<String, BTreeMap<String, MissReport>> = BTreeMap::new();
    for ((ti, spec), report) in grid.into_iter().zip(reports) {
        let report = report?;
        table.entry(traces[ti].0.clone()).or_default().insert(spec, report);
    }

    let baseline_pool: Vec<&str> = policy_specs.iter().map(String::as_str).collect();
    let full_pool: Vec<&str> = all_specs.iter().map(String::as_str).collect();
    let (b_oracle, b_mean) =
        oracle_improvement(&table, "fifo", &baseline_pool).map_err(|e| CliError::Domain(e.to_string()))?;
    let (ps_oracle, ps_mean) =
        oracle_improvement(&table, "fifo", &full_pool).map_err(|e| CliError::Domain(e.to_string()))?;

    // Rows sorted by (trace asc, policy asc); oracle rows use capitalized
    // labels, which sort ahead of the lowercase policy names.
    let mut csv = String::from("trace,policy,object_miss_ratio,improvement_over_fifo\n");
    for (trace_name, by_policy) in &table {
        let fifo = &by_policy["fifo"];
        let mut rows: Vec<(String, f64, f64)> = by_policy
            .iter()
            .map(|(p, r)| (p.clone(), r.object_miss_ratio, improvement_over_fifo(r, fifo)))
            .collect();
        let best_ratio = |pool: &[&str]| {
            pool.iter()
                .map(|p| by_policy[*p].object_miss_ratio)
                .fold(f64::INFINITY, f64::min)
        };
        rows.push(("B-Oracle".to_string(), best_ratio(&baseline_pool), b_oracle[trace_name]));
        rows.push(("PS-Oracle".to_string(), best_ratio(&full_pool), ps_oracle[trace_name]));
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        for (policy, ratio, imp) in rows {
            csv.push_str(&format!("{trace_name},{policy},{ratio:.6},{imp:.6}\n"));
        }
    }
    std::fs::write(&args.out, &csv)
        .map_err(|e| CliError::Domain(format!("cannot write table: {e}")))?;
    print!("{csv}");
    println!("# B-Oracle mean improvement: {b_mean:.6}");
    println!("# PS-Oracle mean improvement: {ps_mean:.6}");

    write_manifest(
        &args.out,
        "compare",
        serde_json::json!({
            "traces": args.traces.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "policies": policy_specs,
            "programs": program_specs,
            "capacity_spec": args.capacity,
            "history": args.history,
            "jobs": args.jobs,
        }),
        digests,
        vec![args.out.display().to_string()],
        started,
    )
}

/// Flat `key = value` config file; `#` starts a comment.
fn parse_kv_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut kv = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(kv)
}

struct KvConfig {
    kv: BTreeMap<String, String>,
    path: PathBuf,
}

impl KvConfig {
    fn get(&self, key: &str) -> Option<&str> {
        self.kv.get(key).map(String::as_str)
    }
    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.kv.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                usage(format!("{}: bad value for {key}: '{v}'", self.path.display()))
            }),
        }
    }
    fn required(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| usage(format!("{}: missing required key '{key}'", self.path.display())))
    }
}

/// Resolve a seed spec: a built-in name or a program file path.
fn resolve_seed(spec: &str, mode: Mode) -> Result<String, CliError> {
    match (spec, mode) {
        ("lru", Mode::Cache) => Ok(LRU_SEED.to_string()),
        ("lfu", Mode::Cache) => Ok(LFU_SEED.to_string()),
        ("aimd", Mode::Kernel) => Ok(AIMD_SEED.to_string()),
        ("fixed", Mode::Kernel) => Ok(FIXED_CWND_SEED.to_string()),
        _ => std::fs::read_to_string(spec)
            .map_err(|e| usage(format!("seed '{spec}': not a built-in name and not readable: {e}"))),
    }
}

fn cmd_search(args: &SearchArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = KvConfig {
        kv: parse_kv_file(&args.config)?,
        path: args.config.clone(),
    };

    let evaluator_kind = cfg.get("evaluator").unwrap_or("cache");
    let mut digests = BTreeMap::new();
    digests.insert(
        format!("config:{}", args.config.display()),
        digest_file(&args.config)?,
    );

    let (evaluator, mode) = match evaluator_kind {
        "cache" => {
            let trace_path = PathBuf::from(cfg.required("trace")?);
            let trace = parse_trace(&trace_path).map_err(usage)?;
            let stats = compute_stats(&trace).map_err(usage)?;
            let capacity_bytes =
                resolve_capacity(cfg.get("capacity").unwrap_or("10%"), stats.footprint_bytes)?;
            digests.insert(format!("trace:{}", trace_path.display()), digest_file(&trace_path)?);
            (
                EvaluatorSpec::Cache {
                    trace: Arc::new(trace),
                    capacity_bytes,
                    history_capacity: cfg.parsed("history_capacity", 1024usize)?,
                },
                Mode::Cache,
            )
        }
        "cc" => {
            let link = LinkConfig {
                rate_bps: cfg.parsed("rate_bps", 12_000_000u64)?,
                one_way_delay_ms: cfg.parsed("delay_ms", 20u64)?,
                queue_capacity_bytes: cfg
                    .get("queue_bytes")
                    .map(|v| v.parse().map_err(|_| usage(format!("bad queue_bytes '{v}'"))))
                    .transpose()?,
                mss_bytes: cfg.parsed("mss", 1500u64)?,
                duration_s: cfg.parsed("duration_s", 60u64)?,
                flows: cfg.parsed("flows", 1usize)?,
                rng_seed: cfg.parsed("link_seed", 0u64)?,
            };
            (
                EvaluatorSpec::Cc {
                    link,
                    lambda: cfg.parsed("lambda", 0.5f64)?,
                    max_delay_budget_ms: cfg.parsed("delay_budget_ms", 100.0f64)?,
                },
                Mode::Kernel,
            )
        }
        other => return Err(usage(format!("unknown evaluator '{other}' (cache or cc)"))),
    };

    let default_seeds = match mode {
        Mode::Cache => "lru,lfu",
        Mode::Kernel => "aimd,fixed",
    };
    let mut seeds = Vec::new();
    for spec in cfg.get("seeds").unwrap_or(default_seeds).split(',') {
        let spec = spec.trim();
        seeds.push(resolve_seed(spec, mode)?);
        if Path::new(spec).is_file() {
            digests.insert(format!("seed:{spec}"), digest_file(Path::new(spec))?);
        }
    }

    let db_path = PathBuf::from(cfg.required("db")?);
    let search_config = SearchConfig {
        rounds: cfg.parsed("rounds", 20u32)?,
        candidates_per_round: cfg.parsed("candidates", 25u32)?,
        exemplar_count: cfg.parsed("exemplars", 2usize)?,
        repair_attempts: cfg.parsed("repair_attempts", 3u32)?,
        seeds,
        evaluator,
        run_seed: cfg.parsed("run_seed", 1u64)?,
        db_path: db_path.clone(),
        db_mode: if args.resume {
            DbMode::Resume
        } else if args.overwrite {
            DbMode::Overwrite
        } else {
            DbMode::Fresh
        },
    };

    let mut generator: Box<dyn Generator + Send> = match args.generator {
        GeneratorKind::Mock => Box::new(MockGenerator::new(mode, search_config.run_seed)),
        GeneratorKind::Llm => {
            let llm_config = llm_config_from_env().map_err(usage)?;
            Box::new(LlmGenerator::new(llm_config, mode))
        }
    };

    let result = with_jobs(args.jobs, || run_search(&search_config, generator.as_mut()))?
        .map_err(|e| match e {
            SearchError::Config(_) | SearchError::SeedInvalid(_) | SearchError::DbExists(_) => {
                usage(e)
            }
            other => CliError::Domain(other.to_string()),
        })?;

    let best_out = args
        .best_out
        .clone()
        .unwrap_or_else(|| db_path.with_file_name("best.dsl"));
    std::fs::write(&best_out, &result.best_source)
        .map_err(|e| CliError::Domain(format!("cannot write best program: {e}")))?;
    println!(
        "{}",
        serde_json::json!({
            "best_fitness": result.best_fitness,
            "rounds_run": result.rounds_run,
            "records_written": result.records_written,
            "best_by_round": result.best_by_round,
            "db": db_path.display().to_string(),
            "best_program": best_out.display().to_string(),
        })
    );

    write_manifest(
        &db_path,
        "search",
        serde_json::json!({
            "config_file": args.config.display().to_string(),
            "resolved": cfg.kv,
            "generator": format!("{:?}", args.generator).to_lowercase(),
            "resume": args.resume,
            "overwrite": args.overwrite,
            "jobs": args.jobs,
        }),
        digests,
        vec![db_path.display().to_string(), best_out.display().to_string()],
        started,
    )
}

fn cmd_check(args: &CheckArgs) -> Result<(), CliError> {
    let source = std::fs::read_to_string(&args.program)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.program.display())))?;
    match parse(&source, args.mode) {
        Err(e) => Err(CliError::Domain(format!("syntax error: {e}"))),
        Ok(program) => {
            let report = check_program(&program);
            if report.ok {
                println!("ok");
                Ok(())
            } else {
                let mut msg = String::from("check failed:");
                for d in &report.diagnostics {
                    msg.push_str(&format!("\n  {d}"));
                }
                Err(CliError::Domain(msg))
            }
        }
    }
}

fn cmd_ccsim(args: &CcsimArgs) -> Result<(), CliError> {
    let started = Instant::now();
    if args.duration == 0 {
        return Err(usage("--duration must be >= 1 second"));
    }
    let mut digests = BTreeMap::new();
    let program = match args.program.as_str() {
        "aimd" => parse(AIMD_SEED, Mode::Kernel).expect("built-in parses"),
        "fixed" => parse(FIXED_CWND_SEED, Mode::Kernel).expect("built-in parses"),
        path => {
            digests.insert(format!("program:{path}"), digest_file(Path::new(path))?);
            load_program(Path::new(path), Mode::Kernel)?
        }
    };
    let link = LinkConfig {
        rate_bps: args.rate_bps,
        one_way_delay_ms: args.delay_ms,
        queue_capacity_bytes: args.queue_bytes,
        mss_bytes: args.mss,
        duration_s: args.duration,
        flows: args.flows,
        rng_seed: args.seed,
    };
    let metrics = run_cc(&program, &link).map_err(|e| CliError::Domain(e.to_string()))?;
    let json = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    std::fs::write(&args.out, &json)
        .map_err(|e| CliError::Domain(format!("cannot write metrics: {e}")))?;
    println!("{json}");

    write_manifest(
        &args.out,
        "ccsim",
        serde_json::json!({
            "program": args.program,
            "link": link,
        }),
        digests,
        vec![args.out.display().to_string()],
        started,
    )
}

fn parse_phases(spec: &str) -> Result<Vec<Phase>, CliError> {
    let mut phases = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        let (kind, rest) = part
            .split_once(':')
            .ok_or_else(|| usage(format!("bad phase '{part}' (scan:N or churn:NxW)")))?;
        match kind {
            "scan" => phases.push(Phase::Scan {
                length: rest
                    .parse()
                    .map_err(|_| usage(format!("bad scan length '{rest}'")))?,
            }),
            "recur" => phases.push(Phase::Recur {
                length: rest
                    .parse()
                    .map_err(|_| usage(format!("bad recur length '{rest}'")))?,
            }),
            "churn" => {
                let (len, ws) = rest
                    .split_once('x')
                    .ok_or_else(|| usage(format!("bad churn phase '{rest}' (LENGTHxWORKING_SET)")))?;
                phases.push(Phase::Churn {
                    length: len
                        .parse()
                        .map_err(|_| usage(format!("bad churn length '{len}'")))?,
                    working_set: ws
                        .parse()
                        .map_err(|_| usage(format!("bad working set '{ws}'")))?,
                });
            }
            _ => return Err(usage(format!("unknown phase kind '{kind}'"))),
        }
    }
    Ok(phases)
}

fn cmd_synth_trace(args: &SynthTraceArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (trace, out, config) = match &args.kind {
        SynthKind::Zipf {
            requests,
            objects,
            alpha,
            size,
            size_min,
            size_max,
            seed,
            out,
        } => {
            let dist = match size {
                Some(s) => SizeDist::Fixed(*s),
                None => SizeDist::Uniform(*size_min, *size_max),
            };
            let trace =
                synth_zipf(*requests, *objects, *alpha, dist, *seed).map_err(usage)?;
            let config = serde_json::json!({
                "kind": "zipf",
                "requests": requests,
                "objects": objects,
                "alpha": alpha,
                "size_dist": format!("{dist:?}"),
                "seed": seed,
            });
            (trace, out.clone(), config)
        }
        SynthKind::ScanChurn {
            phases,
            size,
            seed,
            out,
        } => {
            let parsed = parse_phases(phases)?;
            let trace = synth_scan_churn(&parsed, *size, *seed).map_err(usage)?;
            let config = serde_json::json!({
                "kind": "scan-churn",
                "phases": phases,
                "object_size": size,
                "seed": seed,
            });
            (trace, out.clone(), config)
        }
    };
    std::fs::write(&out, write_trace_csv(&trace))
        .map_err(|e| CliError::Domain(format!("cannot write trace: {e}")))?;
    println!("wrote {} requests to {}", trace.len(), out.display());
    write_manifest(
        &out,
        "synth-trace",
        config,
        BTreeMap::new(),
        vec![out.display().to_string()],
        started,
    )
}
