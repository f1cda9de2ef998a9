//! Static validation of heuristic programs: cache mode allows real
//! arithmetic with total division, kernel mode demands integer arithmetic
//! and statically guarded division.
//!
//!     cargo run --example check_programs

use heurforge::dsl::{check_program, parse, Mode};

fn main() {
    let cases: &[(&str, Mode, &str)] = &[
        (
            "cache scorer with percentile features",
            Mode::Cache,
            "let hot = percentile(counts, 0.9);\nreturn (count > hot) ? 100 : count;",
        ),
        (
            "kernel program, division guarded by max(1, ...)",
            Mode::Kernel,
            "return cwnd + mss * mss / max(1, cwnd);",
        ),
        (
            "kernel program, unguarded division (rejected)",
            Mode::Kernel,
            "return cwnd / acked_bytes;",
        ),
        (
            "kernel program, fractional literal (rejected)",
            Mode::Kernel,
            "return cwnd * 0.5;",
        ),
        (
            "cache scorer with an unknown variable (rejected)",
            Mode::Cache,
            "return frobnication_level;",
        ),
    ];

    for (label, mode, source) in cases {
        println!("--- {label}");
        match parse(source, *mode) {
            Err(e) => println!("    syntax error: {e}"),
            Ok(program) => {
                let report = check_program(&program);
                if report.ok {
                    println!("    ok");
                } else {
                    for d in &report.diagnostics {
                        println!("    {d}");
                    }
                }
            }
        }
    }
}
