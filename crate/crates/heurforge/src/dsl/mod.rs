//! The heuristic expression language: parse, check, evaluate, mutate,
//! render.
//!
//! Programs come in two modes: `cache` (priority functions over object,
//! aggregate, and eviction-history features, real arithmetic) and `kernel`
//! (congestion-window decision functions, saturating integer arithmetic with
//! statically guarded division).

pub mod ast;
pub mod check;
pub mod eval;
pub mod mutate;
pub mod parser;
pub mod sample;

pub use ast::{render, BinOp, Expr, Lit, Mode, Program, ProgramAst, Stmt, UnOp};
pub use check::{check_program, Category, CheckReport, Diagnostic};
pub use eval::{eval_cache, eval_kernel, CacheCtx, KernelCtx, MapCacheCtx, MapKernelCtx};
pub use mutate::{crossover, mutate};
pub use parser::{parse, SyntaxError};
pub use sample::{random_cache_ctx, random_kernel_ctx, sample_program};

/// The LRU seed program: evicts the least recently touched object first.
pub const LRU_SEED: &str = "return last_access_time;";

/// The LFU seed program: evicts the least frequently used object first.
pub const LFU_SEED: &str = "return count;";

/// A richer example scorer exercising the full cache feature surface:
/// frequency-weighted base score with age and size penalties, a bonus for
/// objects seen in the eviction history, and percentile-based regime
/// adjustments.
pub const COMPOSITE_SCORER: &str = "\
let score = count * 20;
let age = now - last_access_time;
score -= age / 300;
score -= size / 500;
if (history_contains(obj_id)) {
  score += history_count(obj_id) * 15;
  score += history_age_at_eviction(obj_id) / 150;
}
else score -= 40;
let recent = percentile(ages, 0.75);
if (last_access_time < recent) score -= 30;
let big = percentile(sizes, 0.75);
if (size > big) score -= 25;
else score += 10;
let frequent = percentile(counts, 0.7);
score += (count > frequent) ? 50 : -5;
if (age < 1000) score += 25;
if (count < 3) score -= 15;
return score;
";
