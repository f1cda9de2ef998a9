//! Intentionally naive reference simulator: linear-scan victim selection
//! over fully recomputed object state. It shares no code with the optimized
//! simulator or the policy implementations and exists as an independent
//! cross-check for FIFO/LRU/LFU.

use crate::trace::Request;

use super::{CacheConfig, MissReport, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferencePolicy {
    Fifo,
    Lru,
    Lfu,
}

#[derive(Debug, Clone)]
struct Entry {
    id: u64,
    size: u64,
    insert_time: u64,
    last_access: u64,
    count: u64,
}

/// O(n)-per-request replay. Victim = argmin of the policy key with global
/// tie-break (insert_time, object_id).
pub fn simulate_reference(
    trace: &[Request],
    policy: ReferencePolicy,
    config: &CacheConfig,
) -> Result<MissReport, SimError> {
    if trace.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    if config.capacity_bytes == 0 {
        return Err(SimError::ZeroCapacity);
    }
    let mut cache: Vec<Entry> = Vec::new();
    let mut requests = 0u64;
    let mut object_misses = 0u64;
    let mut byte_misses = 0u64;
    let mut byte_total = 0u64;
    let mut evictions = 0u64;

    for req in trace {
        requests += 1;
        byte_total += req.size;
        let occupancy = |c: &Vec<Entry>| c.iter().map(|e| e.size).sum::<u64>();
        if let Some(pos) = cache.iter().position(|e| e.id == req.object_id) {
            cache[pos].size = req.size;
            cache[pos].last_access = req.time;
            cache[pos].count += 1;
            while occupancy(&cache) > config.capacity_bytes {
                let v = pick_victim(&cache, policy);
                cache.remove(v);
                evictions += 1;
            }
        } else {
            object_misses += 1;
            byte_misses += req.size;
            if req.size > config.capacity_bytes {
                continue;
            }
            while occupancy(&cache) + req.size > config.capacity_bytes {
                let v = pick_victim(&cache, policy);
                cache.remove(v);
                evictions += 1;
            }
            cache.push(Entry {
                id: req.object_id,
                size: req.size,
                insert_time: req.time,
                last_access: req.time,
                count: 1,
            });
        }
    }

    Ok(MissReport {
        requests,
        object_misses,
        byte_misses,
        object_miss_ratio: object_misses as f64 / requests as f64,
        byte_miss_ratio: byte_misses as f64 / byte_total as f64,
        evictions,
    })
}

fn pick_victim(cache: &[Entry], policy: ReferencePolicy) -> usize {
    let key = |e: &Entry| match policy {
        ReferencePolicy::Fifo => (e.insert_time, e.insert_time, e.id),
        ReferencePolicy::Lru => (e.last_access, e.insert_time, e.id),
        ReferencePolicy::Lfu => (e.count, e.insert_time, e.id),
    };
    let mut best = 0;
    for i in 1..cache.len() {
        if key(&cache[i]) < key(&cache[best]) {
            best = i;
        }
    }
    best
}
