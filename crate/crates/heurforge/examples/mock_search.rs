//! A complete evolutionary search run with the network-free generator:
//! seeds LRU + LFU, evolves cache-eviction scorers against a Zipf trace,
//! and prints the best-so-far fitness curve and winning program.
//!
//!     cargo run --release --example mock_search

use std::sync::Arc;

use heurforge::dsl::{Mode, LFU_SEED, LRU_SEED};
use heurforge::search::{
    db_load, run_search, DbMode, EvaluatorSpec, MockGenerator, SearchConfig, Status,
};
use heurforge::trace::{compute_stats, synth_zipf, SizeDist};

fn main() {
    let trace = synth_zipf(50_000, 1_000, 1.0, SizeDist::Uniform(1, 64), 1).unwrap();
    let capacity = compute_stats(&trace).unwrap().footprint_bytes / 10;
    let dir = tempfile::tempdir().unwrap();

    let config = SearchConfig {
        rounds: 10,
        candidates_per_round: 25,
        exemplar_count: 2,
        repair_attempts: 3,
        seeds: vec![LRU_SEED.to_string(), LFU_SEED.to_string()],
        evaluator: EvaluatorSpec::Cache {
            trace: Arc::new(trace),
            capacity_bytes: capacity,
            history_capacity: 1024,
        },
        run_seed: 1,
        db_path: dir.path().join("candidates.jsonl"),
        db_mode: DbMode::Fresh,
    };

    let mut generator = MockGenerator::new(Mode::Cache, config.run_seed);
    let result = run_search(&config, &mut generator).unwrap();

    println!("best-so-far fitness by round (fitness = 1 - miss ratio):");
    for (round, f) in result.best_by_round.iter().enumerate() {
        println!("  round {round:>2}: {f:.4}");
    }

    let (records, _) = db_load(&config.db_path).unwrap();
    let ok = records.iter().filter(|r| r.status == Status::Ok).count();
    println!(
        "\n{} candidates recorded ({} passed the checker)",
        records.len(),
        ok
    );
    println!("\nbest program (fitness {:.4}):\n{}", result.best_fitness, result.best_source);
}
