//! Event-driven cache simulator: replays a trace against an eviction policy
//! and reports miss-ratio metrics.

pub mod reference;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::Request;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheConfig {
    pub capacity_bytes: u64,
    /// Eviction-history ring size for policies that keep one.
    pub history_capacity: usize,
}

impl CacheConfig {
    pub fn new(capacity_bytes: u64) -> Self {
        CacheConfig {
            capacity_bytes,
            history_capacity: DEFAULT_HISTORY_CAPACITY,
        }
    }
}

pub const DEFAULT_HISTORY_CAPACITY: usize = 1024;

/// Per-object metadata the simulator and policies agree on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectMeta {
    pub object_id: u64,
    pub size: u64,
    /// Accesses since insertion, >= 1.
    pub count: u64,
    pub last_access_time: u64,
    pub insert_time: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissReport {
    pub requests: u64,
    pub object_misses: u64,
    pub byte_misses: u64,
    pub object_miss_ratio: f64,
    pub byte_miss_ratio: f64,
    pub evictions: u64,
}

/// Behavioral interface every eviction policy implements.
///
/// The simulator owns occupancy accounting; a policy only tracks whatever
/// metadata its victim choice needs. `evict_victim` must return a currently
/// resident id and drop its internal metadata for that id.
pub trait EvictionPolicy {
    fn name(&self) -> &str;
    fn on_hit(&mut self, now: u64, id: u64, size: u64);
    fn on_insert(&mut self, now: u64, id: u64, size: u64);
    fn evict_victim(&mut self, now: u64) -> u64;
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("empty trace")]
    EmptyTrace,
    #[error("policy contract violation: {policy} evicted non-resident object {id}")]
    PolicyContractViolation { policy: String, id: u64 },
    #[error("cache capacity must be >= 1 byte")]
    ZeroCapacity,
}

/// Replay `trace` against `policy`. Objects larger than the cache bypass
/// (counted as misses, never inserted). A size change on hit is applied as
/// an update, evicting others until the new size fits.
pub fn simulate(
    trace: &[Request],
    policy: &mut dyn EvictionPolicy,
    config: &CacheConfig,
) -> Result<MissReport, SimError> {
    if trace.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    if config.capacity_bytes == 0 {
        return Err(SimError::ZeroCapacity);
    }
    let mut resident: HashMap<u64, u64> = HashMap::new();
    let mut occupancy: u64 = 0;
    let mut report = MissReport {
        requests: 0,
        object_misses: 0,
        byte_misses: 0,
        object_miss_ratio: 0.0,
        byte_miss_ratio: 0.0,
        evictions: 0,
    };
    let mut byte_total: u64 = 0;

    for req in trace {
        report.requests += 1;
        byte_total += req.size;
        let now = req.time;
        match resident.get(&req.object_id).copied() {
            Some(old_size) => {
                if old_size != req.size {
                    occupancy = occupancy - old_size + req.size;
                    resident.insert(req.object_id, req.size);
                }
                policy.on_hit(now, req.object_id, req.size);
                while occupancy > config.capacity_bytes {
                    evict_one(policy, &mut resident, &mut occupancy, &mut report, now)?;
                }
            }
            None => {
                report.object_misses += 1;
                report.byte_misses += req.size;
                if req.size > config.capacity_bytes {
                    continue;
                }
                while occupancy + req.size > config.capacity_bytes {
                    evict_one(policy, &mut resident, &mut occupancy, &mut report, now)?;
                }
                resident.insert(req.object_id, req.size);
                occupancy += req.size;
                policy.on_insert(now, req.object_id, req.size);
            }
        }
        debug_assert!(occupancy <= config.capacity_bytes);
    }

    report.object_miss_ratio = report.object_misses as f64 / report.requests as f64;
    report.byte_miss_ratio = report.byte_misses as f64 / byte_total as f64;
    Ok(report)
}

fn evict_one(
    policy: &mut dyn EvictionPolicy,
    resident: &mut HashMap<u64, u64>,
    occupancy: &mut u64,
    report: &mut MissReport,
    now: u64,
) -> Result<(), SimError> {
    let victim = policy.evict_victim(now);
    match resident.remove(&victim) {
        Some(size) => {
            *occupancy -= size;
            report.evictions += 1;
            Ok(())
        }
        None => Err(SimError::PolicyContractViolation {
            policy: policy.name().to_string(),
            id: victim,
        }),
    }
}

/// Relative miss-ratio improvement over the FIFO baseline:
/// (m_fifo - m_p) / m_fifo. Returns 0 when FIFO has no misses.
pub fn improvement_over_fifo(report_p: &MissReport, report_fifo: &MissReport) -> f64 {
    let m_f = report_fifo.object_miss_ratio;
    if m_f == 0.0 {
        return 0.0;
    }
    (m_f - report_p.object_miss_ratio) / m_f
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("empty policy pool")]
    EmptyPool,
    #[error("no FIFO report for trace '{0}'")]
    MissingFifo(String),
    #[error("no report for policy '{policy}' on trace '{trace}'")]
    MissingReport { trace: String, policy: String },
}

/// Per-trace best improvement over FIFO across a policy pool, plus the mean
/// across traces. `reports` maps trace name -> policy name -> report.
pub fn oracle_improvement(
    reports: &BTreeMap<String, BTreeMap<String, MissReport>>,
    fifo_policy: &str,
    pool: &[&str],
) -> Result<(BTreeMap<String, f64>, f64), OracleError> {
    if pool.is_empty() {
        return Err(OracleError::EmptyPool);
    }
    let mut per_trace = BTreeMap::new();
    for (trace, by_policy) in reports {
        let fifo = by_policy
            .get(fifo_policy)
            .ok_or_else(|| OracleError::MissingFifo(trace.clone()))?;
        let mut best = f64::NEG_INFINITY;
        for p in pool {
            let r = by_policy
                .get(*p)
                .ok_or_else(|| OracleError::MissingReport {
                    trace: trace.clone(),
                    policy: p.to_string(),
                })?;
            best = best.max(improvement_over_fifo(r, fifo));
        }
        per_trace.insert(trace.clone(), best);
    }
    let mean = if per_trace.is_empty() {
        0.0
    } else {
        per_trace.values().sum::<f64>() / per_trace.len() as f64
    };
    Ok((per_trace, mean))
}
