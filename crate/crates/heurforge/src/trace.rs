//! Request traces: CSV ingest, footprint statistics, and deterministic
//! synthetic workload generators.
//!
//! The on-disk format is plain CSV, `time,object_id,size`, one request per
//! line, with an optional header line. Times are logical (monotone
//! non-decreasing integers), sizes are bytes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// One trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Request {
    /// Logical time; non-decreasing within a trace.
    pub time: u64,
    pub object_id: u64,
    /// Object size in bytes, always >= 1.
    pub size: u64,
}

/// Whole-trace summary used to size evaluator caches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStats {
    pub request_count: u64,
    pub unique_objects: u64,
    /// Sum of sizes over distinct object ids; if an id's size changes
    /// mid-trace, the last observed size counts.
    pub footprint_bytes: u64,
    pub time_span: u64,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io error reading trace: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("empty trace")]
    EmptyTrace,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

fn parse_err(line: usize, reason: impl Into<String>) -> TraceError {
    TraceError::Parse {
        line,
        reason: reason.into(),
    }
}

/// Parse a CSV trace. Fail-fast: any malformed line rejects the whole file.
pub fn parse_trace(path: &Path) -> Result<Vec<Request>, TraceError> {
    let text = std::fs::read_to_string(path)?;
    parse_trace_str(&text)
}

/// Parse trace CSV from memory. Lines are `time,object_id,size`; a single
/// optional header line `time,object_id,size` is skipped.
pub fn parse_trace_str(text: &str) -> Result<Vec<Request>, TraceError> {
    let mut out = Vec::new();
    let mut last_time: Option<u64> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line == "time,object_id,size" {
            continue;
        }
        let mut fields = line.split(',');
        let time = next_int(&mut fields, line_no, "time")?;
        let object_id = next_int(&mut fields, line_no, "object_id")?;
        let size = next_int(&mut fields, line_no, "size")?;
        if fields.next().is_some() {
            return Err(parse_err(line_no, "expected exactly 3 fields"));
        }
        if size == 0 {
            return Err(parse_err(line_no, "size must be >= 1"));
        }
        if let Some(prev) = last_time {
            if time < prev {
                return Err(parse_err(line_no, "time decreased"));
            }
        }
        last_time = Some(time);
        out.push(Request {
            time,
            object_id,
            size,
        });
    }
    Ok(out)
}

fn next_int<'a>(
    fields: &mut impl Iterator<Item = &'a str>,
    line: usize,
    name: &str,
) -> Result<u64, TraceError> {
    let f = fields
        .next()
        .ok_or_else(|| parse_err(line, format!("missing field {name}")))?;
    f.trim()
        .parse::<u64>()
        .map_err(|_| parse_err(line, format!("field {name} is not a non-negative integer")))
}

/// Serialize a trace back to CSV (no header).
pub fn write_trace_csv(trace: &[Request]) -> String {
    let mut s = String::with_capacity(trace.len() * 12);
    for r in trace {
        let _ = writeln!(s, "{},{},{}", r.time, r.object_id, r.size);
    }
    s
}

pub fn compute_stats(trace: &[Request]) -> Result<TraceStats, TraceError> {
    if trace.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    let mut last_size: HashMap<u64, u64> = HashMap::new();
    for r in trace {
        last_size.insert(r.object_id, r.size);
    }
    let footprint_bytes = last_size.values().sum();
    let time_span = trace.last().unwrap().time - trace.first().unwrap().time;
    Ok(TraceStats {
        request_count: trace.len() as u64,
        unique_objects: last_size.len() as u64,
        footprint_bytes,
        time_span,
    })
}

/// Object size model for synthetic traces. Sizes are fixed per object id so
/// a generated trace never resizes objects mid-stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeDist {
    Fixed(u64),
    Uniform(u64, u64),
}

impl SizeDist {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<u64, TraceError> {
        match *self {
            SizeDist::Fixed(b) => {
                if b == 0 {
                    return Err(TraceError::InvalidParam("fixed size must be >= 1".into()));
                }
                Ok(b)
            }
            SizeDist::Uniform(lo, hi) => {
                if lo == 0 || hi < lo {
                    return Err(TraceError::InvalidParam(
                        "uniform size bounds must satisfy 1 <= lo <= hi".into(),
                    ));
                }
                Ok(rng.random_range(lo..=hi))
            }
        }
    }
}

/// Zipf-popularity trace: object i is drawn with probability proportional to
/// i^(-alpha). alpha = 0 degenerates to uniform. time = request index.
pub fn synth_zipf(
    n_requests: u64,
    n_objects: u64,
    alpha: f64,
    size_dist: SizeDist,
    seed: u64,
) -> Result<Vec<Request>, TraceError> {
    if n_requests < 1 || n_objects < 1 {
        return Err(TraceError::InvalidParam(
            "n_requests and n_objects must be >= 1".into(),
        ));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(TraceError::InvalidParam("alpha must be finite and >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Sizes are assigned per object id up front so they are stable.
    let mut sizes = Vec::with_capacity(n_objects as usize);
    for _ in 0..n_objects {
        sizes.push(size_dist.sample(&mut rng)?);
    }
    // Inverse-CDF sampling over the finite Zipf pmf; exact and portable.
    let weights: Vec<f64> = (1..=n_objects)
        .map(|i| (i as f64).powf(-alpha))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cdf.push(acc);
    }
    let mut out = Vec::with_capacity(n_requests as usize);
    for t in 0..n_requests {
        let u: f64 = rng.random();
        let idx = cdf.partition_point(|&c| c < u).min(n_objects as usize - 1);
        out.push(Request {
            time: t,
            object_id: idx as u64 + 1,
            size: sizes[idx],
        });
    }
    Ok(out)
}

/// One phase of a scan/churn composite workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// `length` requests to fresh, never-repeated object ids.
    Scan { length: u64 },
    /// `length` requests sampled uniformly from a fixed working set of
    /// `working_set` objects (distinct per phase).
    Churn { length: u64, working_set: u64 },
    /// `length` requests over the working set of the most recent churn
    /// phase, letting a working set survive an interleaved scan.
    Recur { length: u64 },
}

/// Scan/churn composite trace. Scan phases emit fresh ids; each churn phase
/// gets its own working set. Object size is fixed at `object_size` bytes.
pub fn synth_scan_churn(
    phases: &[Phase],
    object_size: u64,
    seed: u64,
) -> Result<Vec<Request>, TraceError> {
    if phases.is_empty() {
        return Err(TraceError::InvalidParam("need at least one phase".into()));
    }
    if object_size == 0 {
        return Err(TraceError::InvalidParam("object_size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut next_id: u64 = 1;
    let mut t: u64 = 0;
    let mut last_ws: Option<(u64, u64)> = None; // (base id, working set size)
    for phase in phases {
        match *phase {
            Phase::Scan { length } => {
                if length == 0 {
                    return Err(TraceError::InvalidParam("scan length must be >= 1".into()));
                }
                for _ in 0..length {
                    out.push(Request {
                        time: t,
                        object_id: next_id,
                        size: object_size,
                    });
                    next_id += 1;
                    t += 1;
                }
            }
            Phase::Churn {
                length,
                working_set,
            } => {
                if length == 0 || working_set == 0 {
                    return Err(TraceError::InvalidParam(
                        "churn length and working_set must be >= 1".into(),
                    ));
                }
                let base = next_id;
                next_id += working_set;
                last_ws = Some((base, working_set));
                for _ in 0..length {
                    let off = rng.random_range(0..working_set);
                    out.push(Request {
                        time: t,
                        object_id: base + off,
                        size: object_size,
                    });
                    t += 1;
                }
            }
            Phase::Recur { length } => {
                if length == 0 {
                    return Err(TraceError::InvalidParam("recur length must be >= 1".into()));
                }
                let (base, working_set) = last_ws.ok_or_else(|| {
                    TraceError::InvalidParam("recur phase needs a preceding churn phase".into())
                })?;
                for _ in 0..length {
                    let off = rng.random_range(0..working_set);
                    out.push(Request {
                        time: t,
                        object_id: base + off,
                        size: object_size,
                    });
                    t += 1;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn parse_basic() {
        let t = parse_trace_str("0,1,100\n1,2,100\n2,1,100").unwrap();
        assert_eq!(
            t,
            vec![
                Request { time: 0, object_id: 1, size: 100 },
                Request { time: 1, object_id: 2, size: 100 },
                Request { time: 2, object_id: 1, size: 100 },
            ]
        );
    }

    #[test]
    fn parse_header_and_blank_lines() {
        let t = parse_trace_str("time,object_id,size\n0,1,100\n\n1,2,50\n").unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn parse_rejects_zero_size() {
        let e = parse_trace_str("0,1,0").unwrap_err();
        match e {
            TraceError::Parse { line, reason } => {
                assert_eq!(line, 1);
                assert!(reason.contains("size must be >= 1"));
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn parse_rejects_time_decrease() {
        let e = parse_trace_str("5,1,100\n3,2,100").unwrap_err();
        match e {
            TraceError::Parse { line, reason } => {
                assert_eq!(line, 2);
                assert!(reason.contains("time decreased"));
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn parse_rejects_garbage_fields() {
        assert!(parse_trace_str("0,x,100").is_err());
        assert!(parse_trace_str("0,1").is_err());
        assert!(parse_trace_str("0,1,100,7").is_err());
    }

    #[test]
    fn stats_footprint_distinct() {
        let t = parse_trace_str("0,10,100\n1,11,50\n2,10,100").unwrap();
        let s = compute_stats(&t).unwrap();
        assert_eq!(s.footprint_bytes, 150);
        assert_eq!(s.unique_objects, 2);
        assert_eq!(s.request_count, 3);
    }

    #[test]
    fn stats_last_size_wins() {
        let t = parse_trace_str("0,1,100\n1,1,200").unwrap();
        assert_eq!(compute_stats(&t).unwrap().footprint_bytes, 200);
    }

    #[test]
    fn stats_single_request() {
        let t = parse_trace_str("0,1,100").unwrap();
        assert_eq!(compute_stats(&t).unwrap().footprint_bytes, 100);
    }

    #[test]
    fn stats_empty_trace() {
        assert!(matches!(compute_stats(&[]), Err(TraceError::EmptyTrace)));
    }

    #[test]
    fn roundtrip_csv() {
        let src = "0,1,100\n1,2,50\n2,1,100\n";
        let t = parse_trace_str(src).unwrap();
        assert_eq!(write_trace_csv(&t), src);
    }

    #[test]
    fn zipf_deterministic() {
        let a = synth_zipf(1000, 50, 1.0, SizeDist::Uniform(1, 100), 42).unwrap();
        let b = synth_zipf(1000, 50, 1.0, SizeDist::Uniform(1, 100), 42).unwrap();
        assert_eq!(a, b);
        let c = synth_zipf(1000, 50, 1.0, SizeDist::Uniform(1, 100), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zipf_single_object() {
        let t = synth_zipf(5, 1, 1.0, SizeDist::Fixed(10), 0).unwrap();
        assert!(t.iter().all(|r| r.object_id == 1 && r.size == 10));
        assert_eq!(t.len(), 5);
    }

    #[test]
    fn zipf_unique_bound() {
        let t = synth_zipf(10_000, 30, 0.8, SizeDist::Fixed(1), 7).unwrap();
        let s = compute_stats(&t).unwrap();
        assert!(s.unique_objects <= 30);
    }

    #[test]
    fn zipf_alpha_zero_is_uniform() {
        // Chi-square style check: every object count within 3 sigma of n/k.
        let n = 100_000u64;
        let k = 10u64;
        let t = synth_zipf(n, k, 0.0, SizeDist::Fixed(1), 123).unwrap();
        let mut counts = HashMap::new();
        for r in &t {
            *counts.entry(r.object_id).or_insert(0u64) += 1;
        }
        let p = 1.0 / k as f64;
        let mean = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for i in 1..=k {
            let c = *counts.get(&i).unwrap_or(&0) as f64;
            assert!(
                (c - mean).abs() <= 3.0 * sigma,
                "object {i} count {c} outside 3 sigma of {mean}"
            );
        }
    }

    #[test]
    fn scan_emits_fresh_ids() {
        let t = synth_scan_churn(&[Phase::Scan { length: 5 }], 1, 0).unwrap();
        let ids: HashSet<_> = t.iter().map(|r| r.object_id).collect();
        assert_eq!(ids.len(), 5);
    }

    #[test]
    fn churn_stays_in_working_set() {
        let t = synth_scan_churn(
            &[Phase::Churn { length: 100, working_set: 4 }],
            1,
            9,
        )
        .unwrap();
        let ids: HashSet<_> = t.iter().map(|r| r.object_id).collect();
        assert!(ids.len() <= 4);
    }

    #[test]
    fn recur_replays_last_working_set_across_a_scan() {
        let t = synth_scan_churn(
            &[
                Phase::Churn { length: 50, working_set: 4 },
                Phase::Scan { length: 10 },
                Phase::Recur { length: 50 },
            ],
            1,
            9,
        )
        .unwrap();
        let churn_ids: HashSet<_> = t[..50].iter().map(|r| r.object_id).collect();
        let recur_ids: HashSet<_> = t[60..].iter().map(|r| r.object_id).collect();
        assert!(recur_ids.is_subset(&churn_ids));
        assert!(matches!(
            synth_scan_churn(&[Phase::Recur { length: 5 }], 1, 0),
            Err(TraceError::InvalidParam(_))
        ));
    }

    #[test]
    fn scan_churn_deterministic() {
        let phases = [
            Phase::Scan { length: 10 },
            Phase::Churn { length: 50, working_set: 8 },
        ];
        let a = synth_scan_churn(&phases, 100, 5).unwrap();
        let b = synth_scan_churn(&phases, 100, 5).unwrap();
        assert_eq!(a, b);
    }
}
