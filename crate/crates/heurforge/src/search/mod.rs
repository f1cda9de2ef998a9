//! Evolutionary search loop: a pluggable generator proposes candidate
//! programs, the checker gates them (with diagnostic-driven repair retries),
//! an evaluator scores the survivors, and the top performers across all
//! rounds are fed back as exemplars. Every candidate is persisted to an
//! append-only JSON-lines database.

mod db;
mod llm;
mod mock;

pub use db::{db_append, db_load, db_rewrite};
pub use llm::{llm_config_from_env, LlmConfig, LlmGenerator, DEFAULT_PROMPT_TEMPLATE};
pub use mock::MockGenerator;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{simulate, CacheConfig, SimError};
use crate::ccsim::{run_cc, CcError, LinkConfig};
use crate::dsl::{check_program, parse, Diagnostic, Mode, Program};
use crate::priority::make_priority_policy;
use crate::trace::Request;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("heuristic db error: {0}")]
    Db(String),
    #[error("db file {0} already holds a finished search; pass resume or overwrite")]
    DbExists(PathBuf),
    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error("invalid search config: {0}")]
    Config(String),
    #[error("seed program rejected by checker: {0}")]
    SeedInvalid(String),
    #[error("evaluator error: {0}")]
    Evaluator(String),
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("generator endpoint unavailable: {0}")]
    Unavailable(String),
}

/// What a fitness evaluation runs the candidate against.
#[derive(Debug, Clone)]
pub enum EvaluatorSpec {
    /// Trace replay through the priority template; fitness = 1 - miss ratio.
    Cache {
        trace: std::sync::Arc<Vec<Request>>,
        capacity_bytes: u64,
        history_capacity: usize,
    },
    /// Link simulation; fitness = utilization - lambda x (avg delay / budget).
    Cc {
        link: LinkConfig,
        lambda: f64,
        max_delay_budget_ms: f64,
    },
}

impl EvaluatorSpec {
    pub fn mode(&self) -> Mode {
        match self {
            EvaluatorSpec::Cache { .. } => Mode::Cache,
            EvaluatorSpec::Cc { .. } => Mode::Kernel,
        }
    }

    pub fn fitness(&self, program: &Program) -> Result<f64, SearchError> {
        match self {
            EvaluatorSpec::Cache {
                trace,
                capacity_bytes,
                history_capacity,
            } => {
                let mut policy = make_priority_policy(program.clone(), *history_capacity)
                    .map_err(|e| SearchError::Evaluator(e.to_string()))?;
                let mut config = CacheConfig::new(*capacity_bytes);
                config.history_capacity = *history_capacity;
                let report = simulate(trace, &mut policy, &config)
                    .map_err(|e: SimError| SearchError::Evaluator(e.to_string()))?;
                Ok(1.0 - report.object_miss_ratio)
            }
            EvaluatorSpec::Cc {
                link,
                lambda,
                max_delay_budget_ms,
            } => {
                let m = run_cc(program, link)
                    .map_err(|e: CcError| SearchError::Evaluator(e.to_string()))?;
                Ok(m.utilization - lambda * (m.avg_queue_delay_ms / max_delay_budget_ms))
            }
        }
    }
}

/// How to open the heuristic DB file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DbMode {
    /// Fail if the file already exists.
    #[default]
    Fresh,
    /// Load existing records and continue after the last finished round.
    Resume,
    /// Truncate and start over.
    Overwrite,
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub rounds: u32,
    pub candidates_per_round: u32,
    pub exemplar_count: usize,
    pub repair_attempts: u32,
    /// Seed program sources, recorded as round 0.
    pub seeds: Vec<String>,
    pub evaluator: EvaluatorSpec,
    pub run_seed: u64,
    pub db_path: PathBuf,
    pub db_mode: DbMode,
}

impl SearchConfig {
    fn validate(&self) -> Result<(), SearchError> {
        if self.rounds < 1 || self.candidates_per_round < 1 {
            return Err(SearchError::Config(
                "rounds and candidates_per_round must be >= 1".into(),
            ));
        }
        if self.exemplar_count < 1 {
            return Err(SearchError::Config("exemplar_count must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(SearchError::Config("at least one seed program required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    CheckFailed,
    RepairExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub candidate_id: String,
    pub round: u32,
    pub source: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
    /// Present exactly when status is ok.
    pub fitness: Option<f64>,
    pub generator: String,
    pub wall_time_ms: u64,
    pub repair_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_tokens: Option<u64>,
}

/// A candidate source producer. `generate` proposes a batch for a round;
/// `repair` gets a failing source plus checker diagnostics and proposes a
/// replacement.
pub trait Generator {
    fn label(&self) -> &str;

    fn generate(
        &mut self,
        exemplars: &[(String, f64)],
        k: usize,
        round: u32,
    ) -> Result<Vec<String>, GeneratorError>;

    fn repair(
        &mut self,
        source: &str,
        diagnostics: &[Diagnostic],
        exemplars: &[(String, f64)],
        attempt_seed: u64,
    ) -> Result<String, GeneratorError>;

    /// Token usage (input, output) consumed since the previous call to this
    /// method; None for generators that do not meter tokens.
    fn take_usage(&mut self) -> Option<(u64, u64)> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_source: String,
    pub best_fitness: f64,
    pub db_path: PathBuf,
    pub rounds_run: u32,
    pub records_written: u64,
    /// Best-so-far fitness after each completed round, round 0 first.
    pub best_by_round: Vec<f64>,
}

fn syntax_diagnostic(e: &crate::dsl::SyntaxError) -> Diagnostic {
    Diagnostic {
        location: format!("{}:{}", e.line, e.col),
        category: crate::dsl::Category::Syntax,
        message: e.message.clone(),
    }
}

/// Try to turn `source` into a checked program, asking the generator for a
/// repaired version (with diagnostics as feedback) up to `repair_attempts`
/// times.
fn check_with_repair(
    source: String,
    mode: Mode,
    generator: &mut dyn Generator,
    exemplars: &[(String, f64)],
    repair_attempts: u32,
    repair_seed: u64,
) -> Result<(String, Status, Option<Program>, Vec<Diagnostic>, u32), GeneratorError> {
    let mut source = source;
    let mut repairs = 0u32;
    loop {
        let diagnostics = match parse(&source, mode) {
            Ok(program) => {
                let report = check_program(&program);
                if report.ok {
                    return Ok((source, Status::Ok, Some(program), Vec::new(), repairs));
                }
                report.diagnostics
            }
            Err(e) => vec![syntax_diagnostic(&e)],
        };
        if repairs >= repair_attempts {
            let status = if repairs == 0 {
                Status::CheckFailed
            } else {
                Status::RepairExhausted
            };
            return Ok((source, status, None, diagnostics, repairs));
        }
        source = generator.repair(
            &source,
            &diagnostics,
            exemplars,
            crate::util::derive_seed(repair_seed, repairs as u64, 0x5e9a_12),
        )?;
        repairs += 1;
    }
}

/// Global top-k exemplars: (fitness desc, candidate_id asc) over ok records.
fn pick_exemplars(records: &[CandidateRecord], k: usize) -> Vec<(String, f64)> {
    let mut ok: Vec<&CandidateRecord> = records
        .iter()
        .filter(|r| r.status == Status::Ok && r.fitness.is_some())
        .collect();
    ok.sort_by(|a, b| {
        b.fitness
            .unwrap()
            .total_cmp(&a.fitness.unwrap())
            .then_with(|| a.candidate_id.cmp(&b.candidate_id))
    });
    ok.iter()
        .take(k)
        .map(|r| (r.source.clone(), r.fitness.unwrap()))
        .collect()
}

pub fn run_search(
    config: &SearchConfig,
    generator: &mut dyn Generator,
) -> Result<SearchResult, SearchError> {
    config.validate()?;
    let mode = config.evaluator.mode();

    let mut records: Vec<CandidateRecord> = Vec::new();
    let mut start_round = 1u32;
    match config.db_mode {
        DbMode::Fresh => {
            if config.db_path.exists() {
                return Err(SearchError::DbExists(config.db_path.clone()));
            }
        }
        DbMode::Overwrite => {
            if config.db_path.exists() {
                std::fs::remove_file(&config.db_path)?;
            }
        }
        DbMode::Resume => {
            if config.db_path.exists() {
                let (mut loaded, warning) = db_load(&config.db_path)?;
                let truncated = warning.is_some();
                if let Some(w) = warning {
                    eprintln!("warning: {w}");
                }
                // A round interrupted mid-write (fewer records than expected)
                // is discarded wholesale and regenerated, so candidate ids
                // stay unique and the round is internally consistent.
                let mut dropped_tail = false;
                if let Some(max_round) = loaded.iter().map(|r| r.round).max() {
                    let expected = if max_round == 0 {
                        config.seeds.len()
                    } else {
                        config.candidates_per_round as usize
                    };
                    let have = loaded.iter().filter(|r| r.round == max_round).count();
                    if have < expected {
                        loaded.retain(|r| r.round != max_round);
                        dropped_tail = true;
                        start_round = max_round.max(1);
                    } else {
                        start_round = max_round + 1;
                    }
                }
                if truncated || dropped_tail {
                    db::db_rewrite(&config.db_path, &loaded)?;
                }
                records = loaded;
            }
        }
    }
    let mut written = 0u64;

    // Round 0: seeds, validated and scored like any candidate.
    if records.is_empty() {
        for (i, seed) in config.seeds.iter().enumerate() {
            let started = Instant::now();
            let program = parse(seed, mode)
                .map_err(|e| SearchError::SeedInvalid(e.to_string()))?;
            let report = check_program(&program);
            if !report.ok {
                return Err(SearchError::SeedInvalid(format!(
                    "{:?}",
                    report.diagnostics
                )));
            }
            let fitness = config.evaluator.fitness(&program)?;
            let record = CandidateRecord {
                candidate_id: format!("seed-{i}"),
                round: 0,
                source: seed.clone(),
                status: Status::Ok,
                diagnostics: Vec::new(),
                fitness: Some(fitness),
                generator: "seed".to_string(),
                wall_time_ms: started.elapsed().as_millis() as u64,
                repair_count: 0,
                input_tokens: None,
                output_tokens: None,
            };
            db_append(&config.db_path, &record)?;
            written += 1;
            records.push(record);
        }
        start_round = 1;
    }

    let mut best_by_round: Vec<f64> = Vec::new();
    let best_of = |records: &[CandidateRecord]| -> f64 {
        records
            .iter()
            .filter_map(|r| r.fitness)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    best_by_round.push(best_of(&records));

    for round in start_round..=config.rounds {
        let exemplars = pick_exemplars(&records, config.exemplar_count);
        if exemplars.is_empty() {
            return Err(SearchError::Config(
                "no scored exemplars available (all seeds failed?)".into(),
            ));
        }
        let sources =
            generator
                .generate(&exemplars, config.candidates_per_round as usize, round)
                .map_err(|e| SearchError::GeneratorUnavailable(e.to_string()))?;

        // Checker + repair loop is sequential (the generator is stateful);
        // fitness evaluation of the survivors runs in parallel.
        let mut staged: Vec<(String, Status, Option<Program>, Vec<Diagnostic>, u32, Option<(u64, u64)>, Instant)> =
            Vec::with_capacity(sources.len());
        for (i, source) in sources.into_iter().enumerate() {
            let started = Instant::now();
            let repair_seed = crate::util::derive_seed(config.run_seed, round as u64, i as u64);
            let out = check_with_repair(
                source,
                mode,
                generator,
                &exemplars,
                config.repair_attempts,
                repair_seed,
            )
            .map_err(|e| SearchError::GeneratorUnavailable(e.to_string()))?;
            let usage = generator.take_usage();
            staged.push((out.0, out.1, out.2, out.3, out.4, usage, started));
        }

        let fitnesses: Vec<Option<Result<f64, SearchError>>> = staged
            .par_iter()
            .map(|(_, status, program, _, _, _, _)| {
                if *status == Status::Ok {
                    Some(config.evaluator.fitness(program.as_ref().expect("ok has program")))
                } else {
                    None
                }
            })
            .collect();

        for (i, ((source, status, _, diagnostics, repairs, usage, started), fit)) in
            staged.into_iter().zip(fitnesses).enumerate()
        {
            let fitness = match fit {
                Some(Ok(f)) => Some(f),
                Some(Err(e)) => return Err(e),
                None => None,
            };
            let record = CandidateRecord {
                candidate_id: format!("r{round:03}-c{i:03}"),
                round,
                source,
                status,
                diagnostics,
                fitness,
                generator: generator.label().to_string(),
                wall_time_ms: started.elapsed().as_millis() as u64,
                repair_count: repairs,
                input_tokens: usage.map(|(i, _)| i),
                output_tokens: usage.map(|(_, o)| o),
            };
            db_append(&config.db_path, &record)?;
            written += 1;
            records.push(record);
        }
        best_by_round.push(best_of(&records));
    }

    let best = pick_exemplars(&records, 1);
    let (best_source, best_fitness) = best
        .into_iter()
        .next()
        .ok_or_else(|| SearchError::Config("search produced no scored candidates".into()))?;
    Ok(SearchResult {
        best_source,
        best_fitness,
        db_path: config.db_path.clone(),
        rounds_run: config.rounds,
        records_written: written,
        best_by_round,
    })
}
