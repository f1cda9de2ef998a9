//! Generate the two built-in synthetic workloads — Zipf popularity and a
//! scan/churn composite — and print their summary statistics.
//!
//!     cargo run --example synth_traces

use heurforge::trace::{compute_stats, synth_scan_churn, synth_zipf, Phase, SizeDist};

fn main() {
    let zipf = synth_zipf(100_000, 1_000, 1.0, SizeDist::Uniform(1, 64), 1).unwrap();
    let s = compute_stats(&zipf).unwrap();
    println!("zipf(alpha=1.0):");
    println!("  requests   {}", s.request_count);
    println!("  objects    {}", s.unique_objects);
    println!("  footprint  {} bytes", s.footprint_bytes);

    // A one-shot scan through cold objects sandwiched between two churn
    // phases over fixed working sets: recency-only policies fare poorly
    // here because the scan flushes the working set.
    let phases = [
        Phase::Churn { length: 20_000, working_set: 500 },
        Phase::Scan { length: 5_000 },
        Phase::Churn { length: 20_000, working_set: 500 },
    ];
    let sc = synth_scan_churn(&phases, 100, 1).unwrap();
    let s = compute_stats(&sc).unwrap();
    println!("\nscan/churn composite:");
    println!("  requests   {}", s.request_count);
    println!("  objects    {}", s.unique_objects);
    println!("  footprint  {} bytes", s.footprint_bytes);
}
