//! Run every built-in eviction policy over one trace and report miss-ratio
//! improvement relative to FIFO, plus the best-of-pool oracle.
//!
//!     cargo run --example compare_baselines

use std::collections::BTreeMap;

use heurforge::cache::{improvement_over_fifo, oracle_improvement, simulate, CacheConfig};
use heurforge::policies::{make_policy, PolicyName, PolicyParams};
use heurforge::trace::{compute_stats, synth_zipf, SizeDist};

fn main() {
    let trace = synth_zipf(100_000, 1_000, 1.0, SizeDist::Uniform(1, 64), 1).unwrap();
    let capacity = compute_stats(&trace).unwrap().footprint_bytes / 10;
    let config = CacheConfig::new(capacity);

    let mut by_policy = BTreeMap::new();
    for &name in PolicyName::ALL {
        let mut policy = make_policy(name, &PolicyParams::new(capacity)).unwrap();
        let report = simulate(&trace, policy.as_mut(), &config).unwrap();
        by_policy.insert(name.as_str().to_string(), report);
    }

    let fifo = by_policy["fifo"].clone();
    println!("{:<10} {:>10} {:>18}", "policy", "miss", "improvement/fifo");
    for (name, report) in &by_policy {
        println!(
            "{name:<10} {:>10.4} {:>17.2}%",
            report.object_miss_ratio,
            100.0 * improvement_over_fifo(report, &fifo)
        );
    }

    let pool: Vec<String> = by_policy.keys().cloned().collect();
    let pool: Vec<&str> = pool.iter().map(String::as_str).collect();
    let mut reports = BTreeMap::new();
    reports.insert("zipf".to_string(), by_policy);
    let (_, mean) = oracle_improvement(&reports, "fifo", &pool).unwrap();
    println!("\nbest-of-pool oracle improvement: {:.2}%", 100.0 * mean);
}
