//! Reference eviction policies used as baselines, search seeds, and oracle
//! pool members.
//!
//! Tie-breaking is fixed globally: lowest insert_time first, then lowest
//! object_id, so cross-implementation tests can be exact.

mod arc;
mod gdsf;
mod s3fifo;
mod sieve;
mod simple;
mod twoq;

use std::collections::HashMap;

use thiserror::Error;

use crate::cache::EvictionPolicy;

pub use arc::Arc;
pub use gdsf::Gdsf;
pub use s3fifo::S3Fifo;
pub use sieve::Sieve;
pub use simple::{Fifo, FifoReinsertion, Lfu, Lru, Mru};
pub use twoq::TwoQ;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyName {
    Fifo,
    Lru,
    Lfu,
    Mru,
    FifoReinsertion,
    Sieve,
    S3Fifo,
    Gdsf,
    Arc,
    TwoQ,
}

impl PolicyName {
    pub const ALL: &'static [PolicyName] = &[
        PolicyName::Fifo,
        PolicyName::Lru,
        PolicyName::Lfu,
        PolicyName::Mru,
        PolicyName::FifoReinsertion,
        PolicyName::Sieve,
        PolicyName::S3Fifo,
        PolicyName::Gdsf,
        PolicyName::Arc,
        PolicyName::TwoQ,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyName::Fifo => "fifo",
            PolicyName::Lru => "lru",
            PolicyName::Lfu => "lfu",
            PolicyName::Mru => "mru",
            PolicyName::FifoReinsertion => "fifo-re",
            PolicyName::Sieve => "sieve",
            PolicyName::S3Fifo => "s3fifo",
            PolicyName::Gdsf => "gdsf",
            PolicyName::Arc => "arc",
            PolicyName::TwoQ => "twoq",
        }
    }
}

impl std::str::FromStr for PolicyName {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, PolicyError> {
        match s {
            "fifo" => Ok(PolicyName::Fifo),
            "lru" => Ok(PolicyName::Lru),
            "lfu" => Ok(PolicyName::Lfu),
            "mru" => Ok(PolicyName::Mru),
            "fifo-re" | "fifo-reinsertion" => Ok(PolicyName::FifoReinsertion),
            "sieve" => Ok(PolicyName::Sieve),
            "s3fifo" => Ok(PolicyName::S3Fifo),
            "gdsf" => Ok(PolicyName::Gdsf),
            "arc" => Ok(PolicyName::Arc),
            "twoq" | "2q" => Ok(PolicyName::TwoQ),
            _ => Err(PolicyError::UnknownName(s.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown policy '{0}'")]
    UnknownName(String),
    #[error("invalid parameter {key}={value} for policy {policy}")]
    InvalidParam {
        policy: &'static str,
        key: String,
        value: String,
    },
    #[error("unknown parameter '{key}' for policy {policy}")]
    UnknownParam { policy: &'static str, key: String },
}

/// Parameters for [`make_policy`]. Queue-sizing policies (S3-FIFO, TwoQ,
/// ARC) need the cache capacity to size their internal queues and ghosts.
#[derive(Debug, Clone)]
pub struct PolicyParams {
    pub capacity_bytes: u64,
    pub kv: HashMap<String, f64>,
}

impl PolicyParams {
    pub fn new(capacity_bytes: u64) -> Self {
        PolicyParams {
            capacity_bytes,
            kv: HashMap::new(),
        }
    }

    fn frac(&self, policy: &'static str, key: &str, default: f64) -> Result<f64, PolicyError> {
        match self.kv.get(key) {
            None => Ok(default),
            Some(&v) if v > 0.0 && v < 1.0 => Ok(v),
            Some(&v) => Err(PolicyError::InvalidParam {
                policy,
                key: key.to_string(),
                value: v.to_string(),
            }),
        }
    }
}

/// Construct a fresh, empty policy instance. All baselines are
/// deterministic.
pub fn make_policy(
    name: PolicyName,
    params: &PolicyParams,
) -> Result<Box<dyn EvictionPolicy>, PolicyError> {
    let known: &[&str] = match name {
        PolicyName::S3Fifo => &["small"],
        PolicyName::TwoQ => &["kin", "kout"],
        _ => &[],
    };
    for key in params.kv.keys() {
        if !known.contains(&key.as_str()) {
            return Err(PolicyError::UnknownParam {
                policy: name.as_str(),
                key: key.clone(),
            });
        }
    }
    Ok(match name {
        PolicyName::Fifo => Box::new(Fifo::new()),
        PolicyName::Lru => Box::new(Lru::new()),
        PolicyName::Lfu => Box::new(Lfu::new()),
        PolicyName::Mru => Box::new(Mru::new()),
        PolicyName::FifoReinsertion => Box::new(FifoReinsertion::new()),
        PolicyName::Sieve => Box::new(Sieve::new()),
        PolicyName::S3Fifo => {
            let small = params.frac("s3fifo", "small", 0.10)?;
            Box::new(S3Fifo::new(params.capacity_bytes, small))
        }
        PolicyName::Gdsf => Box::new(Gdsf::new()),
        PolicyName::Arc => Box::new(Arc::new(params.capacity_bytes)),
        PolicyName::TwoQ => {
            let kin = params.frac("twoq", "kin", 0.25)?;
            let kout = params.frac("twoq", "kout", 0.50)?;
            Box::new(TwoQ::new(params.capacity_bytes, kin, kout))
        }
    })
}

/// Parse a CLI policy spec like `lru` or `s3fifo:small=0.1`.
pub fn parse_policy_spec(
    spec: &str,
    capacity_bytes: u64,
) -> Result<(PolicyName, PolicyParams), PolicyError> {
    let (name_s, rest) = match spec.split_once(':') {
        Some((n, r)) => (n, Some(r)),
        None => (spec, None),
    };
    let name: PolicyName = name_s.parse()?;
    let mut params = PolicyParams::new(capacity_bytes);
    if let Some(rest) = rest {
        for pair in rest.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = pair.split_once('=').ok_or_else(|| PolicyError::InvalidParam {
                policy: name.as_str(),
                key: pair.to_string(),
                value: String::new(),
            })?;
            let v: f64 = v.parse().map_err(|_| PolicyError::InvalidParam {
                policy: name.as_str(),
                key: k.to_string(),
                value: v.to_string(),
            })?;
            params.kv.insert(k.to_string(), v);
        }
    }
    Ok((name, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{simulate, CacheConfig, MissReport};
    use crate::trace::{parse_trace_str, synth_zipf, Request, SizeDist};

    pub(crate) fn run(name: PolicyName, trace: &[Request], capacity: u64) -> MissReport {
        let mut p = make_policy(name, &PolicyParams::new(capacity)).unwrap();
        simulate(trace, p.as_mut(), &CacheConfig::new(capacity)).unwrap()
    }

    #[test]
    fn fifo_hand_trace() {
        let trace = parse_trace_str("0,1,1\n1,2,1\n2,3,1\n3,1,1").unwrap();
        let r = run(PolicyName::Fifo, &trace, 2);
        assert_eq!(r.object_misses, 4);
        assert_eq!(r.evictions, 2);
    }

    #[test]
    fn mru_hand_trace() {
        // [A,B,C,B] cap 2, MRU: C evicts B (most recent), then B misses.
        let trace = parse_trace_str("0,1,1\n1,2,1\n2,3,1\n3,2,1").unwrap();
        let r = run(PolicyName::Mru, &trace, 2);
        assert_eq!(r.object_misses, 4);
    }

    #[test]
    fn all_policies_survive_random_traces() {
        for &name in PolicyName::ALL {
            let trace = synth_zipf(100_000, 2000, 0.9, SizeDist::Uniform(1, 64), 11).unwrap();
            let stats = crate::trace::compute_stats(&trace).unwrap();
            let cap = stats.footprint_bytes / 10;
            let r = run(name, &trace, cap.max(1));
            assert!(r.object_miss_ratio > 0.0 && r.object_miss_ratio <= 1.0, "{name:?}");
        }
    }

    #[test]
    fn full_capacity_makes_policies_agree() {
        let trace = synth_zipf(5_000, 200, 1.0, SizeDist::Uniform(1, 32), 3).unwrap();
        let stats = crate::trace::compute_stats(&trace).unwrap();
        // Capacity >= footprint: every policy sees only compulsory misses.
        let reports: Vec<MissReport> = PolicyName::ALL
            .iter()
            .map(|&n| run(n, &trace, stats.footprint_bytes))
            .collect();
        for r in &reports {
            assert_eq!(r.object_misses, stats.unique_objects);
            assert_eq!(r.evictions, 0);
        }
    }

    #[test]
    fn unknown_name_and_params_rejected() {
        assert!("nosuch".parse::<PolicyName>().is_err());
        let mut params = PolicyParams::new(100);
        params.kv.insert("bogus".to_string(), 1.0);
        assert!(matches!(
            make_policy(PolicyName::Lru, &params),
            Err(PolicyError::UnknownParam { .. })
        ));
        let (_, p) = parse_policy_spec("s3fifo:small=0.2", 100).unwrap();
        assert_eq!(p.kv["small"], 0.2);
        assert!(parse_policy_spec("s3fifo:small=oops", 100).is_err());
        let mut bad = PolicyParams::new(100);
        bad.kv.insert("small".to_string(), 1.5);
        assert!(make_policy(PolicyName::S3Fifo, &bad).is_err());
    }
}
