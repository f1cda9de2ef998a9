//! Replay a synthetic trace against DSL scoring programs run through the
//! priority-queue eviction template, next to the classic LRU baseline.
//!
//!     cargo run --example simulate_cache

use heurforge::cache::{simulate, CacheConfig};
use heurforge::dsl::{parse, Mode, COMPOSITE_SCORER, LFU_SEED, LRU_SEED};
use heurforge::policies::{make_policy, PolicyName, PolicyParams};
use heurforge::priority::make_priority_policy;
use heurforge::trace::{compute_stats, synth_zipf, SizeDist};

fn main() {
    let trace = synth_zipf(100_000, 1_000, 1.0, SizeDist::Uniform(1, 64), 1).unwrap();
    let stats = compute_stats(&trace).unwrap();
    // Cache sized to 10% of the total footprint.
    let capacity = stats.footprint_bytes / 10;
    let config = CacheConfig::new(capacity);
    println!(
        "trace: {} requests, {} objects, footprint {} bytes, cache {} bytes\n",
        stats.request_count, stats.unique_objects, stats.footprint_bytes, capacity
    );

    // Native LRU baseline.
    let mut lru = make_policy(PolicyName::Lru, &PolicyParams::new(capacity)).unwrap();
    let report = simulate(&trace, lru.as_mut(), &config).unwrap();
    println!("lru baseline         miss ratio {:.4}", report.object_miss_ratio);

    // The same behaviors expressed as one-line scoring programs, plus a
    // richer hand-written scorer, all run through the generic template.
    for (name, source) in [
        ("lru program", LRU_SEED),
        ("lfu program", LFU_SEED),
        ("composite scorer", COMPOSITE_SCORER),
    ] {
        let program = parse(source, Mode::Cache).unwrap();
        let mut policy = make_priority_policy(program, 1024).unwrap();
        let report = simulate(&trace, &mut policy, &config).unwrap();
        println!("{name:<20} miss ratio {:.4}", report.object_miss_ratio);
    }
}
