//! Run congestion-control programs over a 12 Mbps / 20 ms bottleneck link
//! with a drop-tail buffer of one bandwidth-delay product.
//!
//!     cargo run --example congestion_sim

use heurforge::ccsim::{run_cc, LinkConfig, AIMD_SEED, FIXED_CWND_SEED};
use heurforge::dsl::{parse, Mode};

fn main() {
    let link = LinkConfig::default(); // 12 Mbps, 20 ms one-way, 1xBDP buffer
    println!(
        "link: {} Mbps, {} ms one-way, buffer {} bytes, {} s\n",
        link.rate_bps / 1_000_000,
        link.one_way_delay_ms,
        link.queue_capacity(),
        link.duration_s
    );

    for (name, source) in [
        ("aimd", AIMD_SEED),
        ("fixed 2-packet window", FIXED_CWND_SEED),
    ] {
        let program = parse(source, Mode::Kernel).unwrap();
        let m = run_cc(&program, &link).unwrap();
        println!("{name}:");
        println!("  utilization      {:>8.2}%", 100.0 * m.utilization);
        println!("  avg queue delay  {:>8.2} ms", m.avg_queue_delay_ms);
        println!("  p95 queue delay  {:>8.2} ms", m.p95_queue_delay_ms);
        println!("  loss rate        {:>8.4}", m.loss_rate);
        println!("  retransmits      {:>8}", m.retransmits);
        println!();
    }
}
