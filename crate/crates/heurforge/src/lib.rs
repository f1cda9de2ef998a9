#![forbid(unsafe_code)]

//! Evolutionary search over a small, safe heuristic expression language,
//! with two built-in evaluation contexts: a trace-driven cache simulator
//! (priority-queue eviction template) and a bottleneck-link congestion
//! control simulator (cwnd template).
//!
//! Start with the runnable programs in `examples/` — one per major
//! capability — or the `heurforge` CLI.

pub mod cache;
pub mod ccsim;
pub mod cli;
pub mod dsl;
pub mod policies;
pub mod priority;
pub mod search;
pub mod trace;
pub mod util;
