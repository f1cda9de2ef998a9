//! Acceptance gate: one test per release criterion, each printing a single
//! PASS line on success (run with `--nocapture` to see them; a failure
//! panics with detail).

use std::sync::Arc;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use heurforge::cache::{
    simulate, CacheConfig, EvictionPolicy, MissReport,
};
use heurforge::cache::reference::{simulate_reference, ReferencePolicy};
use heurforge::ccsim::{run_cc, LinkConfig, AIMD_SEED, FIXED_CWND_SEED};
use heurforge::dsl::{
    check_program, parse, random_cache_ctx, random_kernel_ctx, render, sample_program,
    Diagnostic, Mode, COMPOSITE_SCORER, LFU_SEED, LRU_SEED,
};
use heurforge::policies::{make_policy, PolicyName, PolicyParams};
use heurforge::priority::make_priority_policy;
use heurforge::search::{
    db_load, run_search, DbMode, EvaluatorSpec, Generator, GeneratorError, LlmConfig,
    LlmGenerator, MockGenerator, SearchConfig, SearchResult, Status,
};
use heurforge::trace::{synth_scan_churn, synth_zipf, Phase, Request, SizeDist};

fn pass(n: u32, what: &str) {
    println!("criterion {n:>2}: PASS — {what}");
}

/// Reference workload: 1e5 Zipf(1.0) requests over 1e3 objects, sizes
/// U[1,64], cache = 10% of footprint (3223 bytes).
fn standard_trace() -> (Arc<Vec<Request>>, u64) {
    let trace = synth_zipf(100_000, 1_000, 1.0, SizeDist::Uniform(1, 64), 1).unwrap();
    let footprint = heurforge::trace::compute_stats(&trace).unwrap().footprint_bytes;
    (Arc::new(trace), footprint / 10)
}

/// The frozen scan/churn composite for the search-improvement gate: two
/// 300-object working sets, each interrupted by four 1000-request scans.
fn composite_trace() -> Vec<Request> {
    let mut phases = vec![Phase::Churn { length: 3_000, working_set: 300 }];
    for _ in 0..4 {
        phases.push(Phase::Scan { length: 1_000 });
        phases.push(Phase::Recur { length: 3_000 });
    }
    phases.push(Phase::Churn { length: 3_000, working_set: 300 });
    for _ in 0..4 {
        phases.push(Phase::Scan { length: 1_000 });
        phases.push(Phase::Recur { length: 3_000 });
    }
    synth_scan_churn(&phases, 100, 1).unwrap()
}

fn default_search_config(
    evaluator: EvaluatorSpec,
    run_seed: u64,
    db_path: std::path::PathBuf,
) -> SearchConfig {
    SearchConfig {
        rounds: 20,
        candidates_per_round: 25,
        exemplar_count: 2,
        repair_attempts: 3,
        seeds: vec![LRU_SEED.to_string(), LFU_SEED.to_string()],
        evaluator,
        run_seed,
        db_path,
        db_mode: DbMode::Fresh,
    }
}

fn assert_monotone_with_floor(result: &SearchResult, label: &str) {
    assert!(
        result.best_by_round.windows(2).all(|w| w[1] >= w[0]),
        "{label}: best-so-far decreased: {:?}",
        result.best_by_round
    );
    assert!(
        result.best_fitness >= result.best_by_round[0],
        "{label}: final best {} below seed best {}",
        result.best_fitness,
        result.best_by_round[0]
    );
}

/// Small random trace for the exhaustive equivalence sweeps.
fn random_trace(seed: u64) -> (Vec<Request>, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=1_000);
    let ids = rng.random_range(2..=50u64);
    let trace = (0..n)
        .map(|t| Request {
            time: t,
            object_id: rng.random_range(1..=ids),
            size: rng.random_range(1..=8),
        })
        .collect();
    let capacity = rng.random_range(8..=200);
    (trace, capacity)
}

// Criterion 1: default-configured mock search = 20 rounds x 25 candidates
// on top of the 2 seeds, with top-2 exemplar feedback, in under 5 minutes
// on the standard 1e5-request trace.
#[test]
fn c01_default_search_shape_and_runtime() {
    let started = Instant::now();
    let (trace, capacity_bytes) = standard_trace();
    let dir = tempfile::tempdir().unwrap();
    let config = default_search_config(
        EvaluatorSpec::Cache {
            trace,
            capacity_bytes,
            history_capacity: 1024,
        },
        1,
        dir.path().join("db.jsonl"),
    );
    assert_eq!((config.rounds, config.candidates_per_round), (20, 25));
    assert_eq!(config.exemplar_count, 2);

    let mut generator = MockGenerator::new(Mode::Cache, config.run_seed);
    let result = run_search(&config, &mut generator).unwrap();
    let (records, _) = db_load(&config.db_path).unwrap();

    let seeds: Vec<_> = records.iter().filter(|r| r.round == 0).collect();
    assert_eq!(seeds.len(), 2);
    assert_eq!(seeds[0].source, LRU_SEED);
    assert_eq!(seeds[1].source, LFU_SEED);
    let generated = records.iter().filter(|r| r.round >= 1).count();
    assert_eq!(generated, 500, "expected exactly 20 x 25 generated records");
    for round in 1..=20 {
        assert_eq!(records.iter().filter(|r| r.round == round).count(), 25);
    }
    assert_eq!(result.records_written, 502);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}, budget 5 min");
    pass(1, &format!("500-candidate default search completed in {elapsed:?}"));
}

// Criterion 2: the LRU/LFU seed programs run through the generic priority
// template reproduce the native baselines bit-exactly on 1,000 random
// traces.
#[test]
fn c02_seed_programs_match_baselines_exactly() {
    let run = |policy: &mut dyn EvictionPolicy, trace: &[Request], cap: u64| {
        simulate(trace, policy, &CacheConfig::new(cap)).unwrap()
    };
    (0..1_000u64).into_par_iter().for_each(|seed| {
        let (trace, cap) = random_trace(seed);
        for (source, name) in [(LRU_SEED, PolicyName::Lru), (LFU_SEED, PolicyName::Lfu)] {
            let program = parse(source, Mode::Cache).unwrap();
            let mut templated = make_priority_policy(program, 1024).unwrap();
            let mut native = make_policy(name, &PolicyParams::new(cap)).unwrap();
            let a = run(&mut templated, &trace, cap);
            let b = run(native.as_mut(), &trace, cap);
            assert_eq!(a, b, "{source:?} diverged from {name:?} on trace seed {seed}");
        }
    });
    pass(2, "seed programs bit-equal to native LRU/LFU on 1000 random traces");
}

// Criterion 3: the optimized simulator agrees bit-exactly with the naive
// reference implementation for FIFO/LRU/LFU on 1,000 random traces.
#[test]
fn c03_reference_simulator_equivalence() {
    (0..1_000u64).into_par_iter().for_each(|seed| {
        let (trace, cap) = random_trace(seed + 1_000_000);
        let config = CacheConfig::new(cap);
        for (name, reference) in [
            (PolicyName::Fifo, ReferencePolicy::Fifo),
            (PolicyName::Lru, ReferencePolicy::Lru),
            (PolicyName::Lfu, ReferencePolicy::Lfu),
        ] {
            let mut policy = make_policy(name, &PolicyParams::new(cap)).unwrap();
            let fast = simulate(&trace, policy.as_mut(), &config).unwrap();
            let slow = simulate_reference(&trace, reference, &config).unwrap();
            assert_eq!(fast, slow, "{name:?} diverged on trace seed {seed}");
        }
    });
    pass(3, "optimized simulator equals naive reference for FIFO/LRU/LFU on 1000 traces");
}

// Criterion 4 (frozen calibration): on the scan/churn composite with a
// 40 kB cache, a 20-round mock search beats the best seed by >= 2pp of
// miss ratio in at least 8 of 10 seeded runs.
// Criterion 5 is asserted on the same runs: best-so-far never decreases
// and the final best never drops below the seed floor.
#[test]
fn c04_c05_search_improvement_and_monotonicity() {
    let trace = Arc::new(composite_trace());
    let capacity_bytes = 40_000;
    let dir = tempfile::tempdir().unwrap();

    let results: Vec<SearchResult> = (1..=10u64)
        .map(|run_seed| {
            let config = default_search_config(
                EvaluatorSpec::Cache {
                    trace: trace.clone(),
                    capacity_bytes,
                    history_capacity: 1024,
                },
                run_seed,
                dir.path().join(format!("db{run_seed}.jsonl")),
            );
            let mut generator = MockGenerator::new(Mode::Cache, run_seed);
            run_search(&config, &mut generator).unwrap()
        })
        .collect();

    let mut wins = 0;
    for (i, result) in results.iter().enumerate() {
        assert_monotone_with_floor(result, &format!("run {}", i + 1));
        if result.best_fitness - result.best_by_round[0] >= 0.02 {
            wins += 1;
        }
    }
    assert!(wins >= 8, "only {wins}/10 runs improved by >= 2pp");
    pass(4, &format!("{wins}/10 composite-trace searches improved >= 2pp over best seed"));
    pass(5, "best-so-far monotone with seed floor in all 10 runs");
}

const VALID_KERNEL: &[&str] = &[
    "return cwnd;",
    "return cwnd + mss;",
    "return max(mss, cwnd - acked_bytes);",
    "return loss_flag ? cwnd / 2 : cwnd + mss;",
    "return cwnd + mss * mss / max(1, cwnd);",
    "let gap = srtt_us - min_rtt_us; return cwnd - gap / 100;",
    "let target = cwnd; if (srtt_us > 2 * min_rtt_us) target = target - mss; return max(mss, target);",
    "return min(cwnd + acked_bytes, 64 * mss);",
    "return rate_h0 != 0 ? acked_bytes * 1000 / rate_h0 : cwnd;",
    "return cwnd * min_rtt_us / max(1, rtt_us);",
    "return prev_cwnd + mss / 2;",
    "return abs(cwnd - prev_cwnd) + mss;",
    "let x = 0; x += acked_bytes; x -= mss; return cwnd + x;",
    "return loss_flag ? max(2 * mss, cwnd - cwnd / 4) : cwnd;",
    "return (cwnd + prev_cwnd) / 2;",
    "return cwnd_h0 + cwnd_h1 - cwnd_h2;",
    "return srtt_h0 > srtt_h5 ? cwnd - mss : cwnd + mss;",
    "let losses = loss_h0 + loss_h1 + loss_h2; return losses > 0 ? cwnd / 2 : cwnd + mss;",
    "return inflight_bytes < cwnd ? cwnd : cwnd + mss;",
    "return max(mss, min(cwnd + mss, 100 * mss));",
    "let bdp = rate_h0 * min_rtt_us / 1000000; return max(mss, bdp);",
    "let c = cwnd; if (loss_flag) { c = c / 2; c = max(c, mss); } return c;",
    "return cwnd + acked_bytes * mss / max(1, inflight_bytes);",
    "return cwnd % max(1, prev_cwnd) + mss;",
    "let d = srtt_us - min_rtt_us; let c = cwnd; if (d > 5000) c -= mss; else c += mss; return max(mss, c);",
];

const INVALID_KERNEL: &[&str] = &[
    "return cwnd * 0.5;",
    "return cwnd + 1.25 * mss;",
    "return 0.9 * prev_cwnd;",
    "let g = 1.5; return cwnd * g;",
    "return loss_flag ? cwnd * 0.7 : cwnd;",
    "return cwnd / acked_bytes;",
    "return mss / (cwnd - prev_cwnd);",
    "return cwnd / loss_flag;",
    "return acked_bytes * 1000 / rate_h0;",
    "return cwnd / max(0, rtt_us);",
    "return cwnd / min(1, rtt_us);",
    "return cwnd / (1 + loss_flag);",
    "return cwnd % inflight_bytes;",
    "let r = cwnd / rtt_us; return rtt_us != 0 ? r : cwnd;",
    "let x = 0.1; x += 1; return cwnd;",
    "return srtt_us != 0 ? cwnd : cwnd / srtt_us;",
    "let c = cwnd; if (rtt_us != 0) c = 1; return cwnd / rtt_us;",
    "return cwnd / 0;",
    "return cwnd * 2.0;",
    "return (cwnd + mss) / inflight_bytes;",
    "return cwnd / abs(prev_cwnd);",
    "let f = 0.25 * mss; return cwnd + f;",
    "return loss_flag ? cwnd / (mss - mss) : cwnd;",
    "return rate_h1 / srtt_h1;",
    "return cwnd - 0.5;",
];

// Criterion 6: the kernel-mode checker classifies a 50-program hand-written
// corpus (25 valid / 25 with fractional literals or unguarded division)
// with 100% accuracy, and diagnostic feedback converts a two-shot
// invalid-then-valid generator into an ok record.
#[test]
fn c06_kernel_checker_corpus_and_repair() {
    assert_eq!(VALID_KERNEL.len(), 25);
    assert_eq!(INVALID_KERNEL.len(), 25);
    for src in VALID_KERNEL {
        let p = parse(src, Mode::Kernel).unwrap_or_else(|e| panic!("{src}: {e}"));
        let r = check_program(&p);
        assert!(r.ok, "valid program rejected: {src}\n{:?}", r.diagnostics);
    }
    for src in INVALID_KERNEL {
        let p = parse(src, Mode::Kernel).unwrap_or_else(|e| panic!("{src}: {e}"));
        let r = check_program(&p);
        assert!(!r.ok, "invalid program accepted: {src}");
    }

    // Two-shot generator: always proposes an unguarded division first and
    // only produces the valid version when handed the diagnostics.
    struct TwoShot;
    impl Generator for TwoShot {
        fn label(&self) -> &str {
            "two-shot"
        }
        fn generate(
            &mut self,
            _: &[(String, f64)],
            k: usize,
            _: u32,
        ) -> Result<Vec<String>, GeneratorError> {
            Ok(vec!["return cwnd + mss * mss / cwnd;".to_string(); k])
        }
        fn repair(
            &mut self,
            _source: &str,
            diagnostics: &[Diagnostic],
            _: &[(String, f64)],
            _: u64,
        ) -> Result<String, GeneratorError> {
            assert!(
                diagnostics.iter().any(|d| d.to_string().contains("division")),
                "repair must receive the division diagnostic"
            );
            Ok(AIMD_SEED.to_string())
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let config = SearchConfig {
        rounds: 1,
        candidates_per_round: 2,
        exemplar_count: 2,
        repair_attempts: 3,
        seeds: vec![AIMD_SEED.to_string(), FIXED_CWND_SEED.to_string()],
        evaluator: EvaluatorSpec::Cc {
            link: LinkConfig { duration_s: 2, ..LinkConfig::default() },
            lambda: 0.5,
            max_delay_budget_ms: 100.0,
        },
        run_seed: 1,
        db_path: dir.path().join("db.jsonl"),
        db_mode: DbMode::Fresh,
    };
    run_search(&config, &mut TwoShot).unwrap();
    let (records, _) = db_load(&config.db_path).unwrap();
    for r in records.iter().filter(|r| r.round == 1) {
        assert_eq!(r.status, Status::Ok);
        assert_eq!(r.repair_count, 1);
        assert_eq!(r.source, AIMD_SEED);
    }
    pass(6, "50-program kernel corpus classified 100%; repair loop converts two-shot generator");
}

// Criterion 7: link-simulator sanity at 12 Mbps / 20 ms: a fixed 2-packet
// window sits at ~5% utilization (closed form), the AIMD seed fills the
// pipe with bounded queue delay, and conservation + RTT-floor invariants
// hold. Budget 30 s.
#[test]
fn c07_congestion_sanity() {
    let started = Instant::now();
    let link = LinkConfig::default();

    let fixed = run_cc(&parse(FIXED_CWND_SEED, Mode::Kernel).unwrap(), &link).unwrap();
    // Closed form: 2 x 1500 B per 41 ms RTT over 12 Mbps = 4.88%.
    let expected = (2.0 * 1500.0 * 8.0) / 0.041 / 12_000_000.0;
    assert!(
        (fixed.utilization - expected).abs() < 0.005,
        "fixed-window utilization {} vs closed-form {expected}",
        fixed.utilization
    );

    let aimd = run_cc(&parse(AIMD_SEED, Mode::Kernel).unwrap(), &link).unwrap();
    assert!(aimd.utilization >= 0.80, "AIMD utilization {}", aimd.utilization);
    assert!(
        aimd.avg_queue_delay_ms > 0.0 && aimd.avg_queue_delay_ms < 40.0,
        "AIMD avg queue delay {} ms",
        aimd.avg_queue_delay_ms
    );

    for m in [&fixed, &aimd] {
        assert_eq!(
            m.sent_bytes,
            m.delivered_bytes + m.inflight_bytes_end + m.lost_detected_bytes,
            "byte conservation violated"
        );
        // Propagation floor: 2 x 20 ms + one serialization delay (1 ms).
        assert!(m.min_rtt_us >= 40_000, "min RTT {} us below floor", m.min_rtt_us);
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, budget 30 s");
    pass(7, &format!(
        "fixed-window {:.2}% util (closed form), AIMD {:.1}% util, invariants hold ({elapsed:?})",
        100.0 * fixed.utilization,
        100.0 * aimd.utilization
    ));
}

// Criterion 8: the best-of-pool oracle over a superset pool is never worse
// than over the base pool, and a program that beats every baseline
// produces a strict gap.
#[test]
fn c08_oracle_superset_semantics() {
    use heurforge::cache::oracle_improvement;
    use std::collections::BTreeMap;

    let (trace, capacity) = standard_trace();
    let config = CacheConfig::new(capacity);
    let mut by_policy: BTreeMap<String, MissReport> = BTreeMap::new();
    for &name in PolicyName::ALL {
        let mut policy = make_policy(name, &PolicyParams::new(capacity)).unwrap();
        by_policy.insert(
            name.as_str().to_string(),
            simulate(&trace, policy.as_mut(), &config).unwrap(),
        );
    }
    let program = parse(COMPOSITE_SCORER, Mode::Cache).unwrap();
    let mut scored = make_priority_policy(program, 1024).unwrap();
    by_policy.insert(
        "program".to_string(),
        simulate(&trace, &mut scored, &config).unwrap(),
    );

    let mut reports = BTreeMap::new();
    reports.insert("zipf".to_string(), by_policy);
    let baseline_pool: Vec<&str> = PolicyName::ALL.iter().map(|p| p.as_str()).collect();
    let mut full_pool = baseline_pool.clone();
    full_pool.push("program");

    let (_, b_mean) = oracle_improvement(&reports, "fifo", &baseline_pool).unwrap();
    let (_, ps_mean) = oracle_improvement(&reports, "fifo", &full_pool).unwrap();
    assert!(ps_mean >= b_mean, "superset oracle {ps_mean} below base {b_mean}");
    assert!(
        ps_mean > b_mean,
        "constructed case must show a strict gap ({ps_mean} vs {b_mean})"
    );

    // Subset property holds for any pool prefix, zero tolerance.
    for k in 1..full_pool.len() {
        let (_, small) = oracle_improvement(&reports, "fifo", &full_pool[..k]).unwrap();
        let (_, big) = oracle_improvement(&reports, "fifo", &full_pool[..=k]).unwrap();
        assert!(big >= small);
    }
    pass(8, &format!(
        "superset oracle dominates (base {:.4}, with program {:.4}, strict gap)",
        b_mean, ps_mean
    ));
}

// Criterion 9: 1e4 randomly sampled checker-approved programs evaluate
// without trapping on random contexts, and render -> parse is an identity
// on their ASTs.
#[test]
fn c09_random_program_robustness() {
    (0..10_000u64).into_par_iter().for_each(|seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mode = if seed % 2 == 0 { Mode::Cache } else { Mode::Kernel };
        let program = sample_program(&mut rng, mode);
        let report = check_program(&program);
        assert!(report.ok, "sampled program failed its own checker: {}", program.source);

        // Totality: no panic, and a finite result in cache mode.
        match mode {
            Mode::Cache => {
                let ctx = random_cache_ctx(&mut rng);
                let v = heurforge::dsl::eval_cache(&program, &ctx);
                assert!(v.is_finite(), "non-finite score from {}", program.source);
            }
            Mode::Kernel => {
                let ctx = random_kernel_ctx(&mut rng);
                let _ = heurforge::dsl::eval_kernel(&program, &ctx);
            }
        }

        // Round trip: rendering the AST and re-parsing reproduces it.
        let rendered = render(&program);
        let reparsed = parse(&rendered, mode)
            .unwrap_or_else(|e| panic!("render not parseable: {e}\n{rendered}"));
        assert_eq!(reparsed.ast, program.ast, "round-trip mismatch for {}", program.source);
    });
    pass(9, "10000 sampled programs: checker-clean, total evaluation, render/parse identity");
}

/// Minimal HTTP stub: serves the canned (status, body) responses in order,
/// then repeats the final one for any further requests.
fn stub_server(responses: Vec<(u16, String)>) -> String {
    use std::io::{Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let mut served = 0usize;
        loop {
            let (mut sock, _) = match listener.accept() {
                Ok(s) => s,
                Err(_) => return,
            };
            let mut buf = [0u8; 65536];
            let mut req = Vec::new();
            loop {
                let n = sock.read(&mut buf).unwrap_or(0);
                if n == 0 {
                    break;
                }
                req.extend_from_slice(&buf[..n]);
                let text = String::from_utf8_lossy(&req);
                if let Some(head_end) = text.find("\r\n\r\n") {
                    let cl = text
                        .lines()
                        .find_map(|l| {
                            l.to_ascii_lowercase()
                                .strip_prefix("content-length:")
                                .map(|v| v.trim().parse::<usize>().unwrap_or(0))
                        })
                        .unwrap_or(0);
                    if req.len() >= head_end + 4 + cl {
                        break;
                    }
                }
            }
            let (status, body) = &responses[served.min(responses.len() - 1)];
            served += 1;
            let reason = if *status == 200 { "OK" } else { "Server Error" };
            let resp = format!(
                "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = sock.write_all(resp.as_bytes());
        }
    });
    format!("http://{addr}/v1/chat/completions")
}

fn chat_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}],
        "usage": {"prompt_tokens": 120, "completion_tokens": 15}
    })
    .to_string()
}

// Criterion 10: the HTTP generator fulfills its request / code-extraction /
// retry / usage-accounting contract against a local stub server, with no
// live network.
#[test]
fn c10_llm_harness_contract() {
    // Scripted conversation for a 1-round, 3-candidate search:
    //   candidate 1: fenced reply (with language tag)        -> ok
    //   candidate 2: transient 500, then a fenced reply      -> ok (retried)
    //   candidate 3: prose reply, then a fenced repair reply -> ok, 1 repair
    let url = stub_server(vec![
        (200, chat_body("```c\nreturn count + 1;\n```")),
        (500, "{}".to_string()),
        (200, chat_body("Sure!\n```\nreturn last_access_time + 2;\n```\ndone")),
        (200, chat_body("I would evict the oldest object first.")),
        (200, chat_body("```\nreturn size + count;\n```")),
    ]);
    let llm_config = LlmConfig {
        url,
        model: "stub".to_string(),
        api_key: "stub-key".to_string(),
        prompt_template: heurforge::search::DEFAULT_PROMPT_TEMPLATE.to_string(),
        max_retries: 2,
        initial_backoff_ms: 1,
        timeout_s: 5,
    };

    let trace = Arc::new(synth_zipf(2_000, 200, 1.0, SizeDist::Fixed(100), 42).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let mut config = default_search_config(
        EvaluatorSpec::Cache {
            trace,
            capacity_bytes: 2_000,
            history_capacity: 1024,
        },
        1,
        dir.path().join("db.jsonl"),
    );
    config.rounds = 1;
    config.candidates_per_round = 3;

    let mut generator = LlmGenerator::new(llm_config.clone(), Mode::Cache);
    run_search(&config, &mut generator).unwrap();
    let (records, _) = db_load(&config.db_path).unwrap();
    let round1: Vec<_> = records.iter().filter(|r| r.round == 1).collect();
    assert_eq!(round1.len(), 3);

    assert_eq!(round1[0].status, Status::Ok);
    assert_eq!(round1[0].source, "return count + 1;");
    assert_eq!(round1[1].status, Status::Ok, "retry after 500 failed");
    assert_eq!(round1[1].source, "return last_access_time + 2;");
    assert_eq!(round1[2].status, Status::Ok);
    assert_eq!(round1[2].repair_count, 1);
    assert_eq!(round1[2].source, "return size + count;");

    // Usage accounting: the stub answered four successful completions at
    // 120/15 tokens each; the records account for every one of them, and
    // the repair call is attributed to the repaired candidate.
    let in_total: u64 = round1.iter().filter_map(|r| r.input_tokens).sum();
    let out_total: u64 = round1.iter().filter_map(|r| r.output_tokens).sum();
    assert_eq!((in_total, out_total), (480, 60));
    assert_eq!(round1[2].input_tokens, Some(120));
    assert_eq!(round1[2].output_tokens, Some(15));

    // An unreachable endpoint surfaces as generator-unavailable after the
    // bounded retries, not as a hang or panic.
    let dead = LlmConfig {
        url: "http://127.0.0.1:1/v1/chat/completions".to_string(),
        max_retries: 1,
        ..llm_config
    };
    let mut dead_gen = LlmGenerator::new(dead, Mode::Cache);
    config.db_path = dir.path().join("db2.jsonl");
    let err = run_search(&config, &mut dead_gen).unwrap_err();
    assert!(matches!(
        err,
        heurforge::search::SearchError::GeneratorUnavailable(_)
    ));
    pass(10, "HTTP generator contract (extraction, retry, repair, token metering) verified on stub");
}
