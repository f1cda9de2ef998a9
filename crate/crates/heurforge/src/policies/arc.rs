//! Adaptive Replacement Cache, byte-sized. T1 holds objects seen once, T2
//! objects seen at least twice; ghost lists B1/B2 remember recent evictions
//! from each side and steer the adaptive target `p` (bytes granted to T1).

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::cache::EvictionPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum List {
    T1,
    T2,
}

#[derive(Debug, Default)]
struct Ghost {
    queue: VecDeque<(u64, u64)>, // (id, size), oldest first
    sizes: HashMap<u64, u64>,
    bytes: u64,
}

impl Ghost {
    fn push(&mut self, id: u64, size: u64) {
        if self.sizes.insert(id, size).is_none() {
            self.queue.push_back((id, size));
            self.bytes += size;
        }
    }

    fn remove(&mut self, id: u64) -> Option<u64> {
        let size = self.sizes.remove(&id)?;
        if let Some(pos) = self.queue.iter().position(|&(g, _)| g == id) {
            self.queue.remove(pos);
        }
        self.bytes -= size;
        Some(size)
    }

    fn trim_to(&mut self, budget: u64) {
        while self.bytes > budget {
            let (id, size) = self.queue.pop_front().expect("ghost accounting");
            self.sizes.remove(&id);
            self.bytes -= size;
        }
    }
}

#[derive(Debug)]
pub struct Arc {
    capacity_bytes: u64,
    p: u64, // target bytes for T1
    seq: u64,
    // LRU order per list: (seq, id); lowest seq = least recently used.
    t1: BTreeSet<(u64, u64)>,
    t2: BTreeSet<(u64, u64)>,
    resident: HashMap<u64, (List, u64, u64)>, // id -> (list, seq, size)
    t1_bytes: u64,
    t2_bytes: u64,
    b1: Ghost,
    b2: Ghost,
}

impl Arc {
    pub fn new(capacity_bytes: u64) -> Self {
        Arc {
            capacity_bytes,
            p: 0,
            seq: 0,
            t1: BTreeSet::new(),
            t2: BTreeSet::new(),
            resident: HashMap::new(),
            t1_bytes: 0,
            t2_bytes: 0,
            b1: Ghost::default(),
            b2: Ghost::default(),
        }
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn insert_t2(&mut self, id: u64, size: u64) {
        let s = self.next_seq();
        self.t2.insert((s, id));
        self.resident.insert(id, (List::T2, s, size));
        self.t2_bytes += size;
    }

    fn trim_ghosts(&mut self) {
        // L1 = T1 + B1 is bounded by the cache size; the whole directory by
        // twice the cache size.
        self.b1.trim_to(self.capacity_bytes.saturating_sub(self.t1_bytes));
        let total_budget = (2 * self.capacity_bytes)
            .saturating_sub(self.t1_bytes + self.t2_bytes + self.b1.bytes);
        self.b2.trim_to(total_budget);
    }
}

impl EvictionPolicy for Arc {
    fn name(&self) -> &str {
        "arc"
    }

    fn on_hit(&mut self, _now: u64, id: u64, size: u64) {
        if let Some(&(list, old_seq, old_size)) = self.resident.get(&id) {
            match list {
                List::T1 => {
                    self.t1.remove(&(old_seq, id));
                    self.t1_bytes -= old_size;
                }
                List::T2 => {
                    self.t2.remove(&(old_seq, id));
                    self.t2_bytes -= old_size;
                }
            }
            self.insert_t2(id, size);
        }
    }

    fn on_insert(&mut self, _now: u64, id: u64, size: u64) {
        if self.b1.remove(id).is_some() {
            // Recency ghost hit: grow the T1 target.
            let delta = if self.b1.bytes >= self.b2.bytes {
                size
            } else {
                (self.b2.bytes / self.b1.bytes.max(1)).max(1) * size
            };
            self.p = (self.p + delta).min(self.capacity_bytes);
            self.insert_t2(id, size);
        } else if self.b2.remove(id).is_some() {
            // Frequency ghost hit: shrink the T1 target.
            let delta = if self.b2.bytes >= self.b1.bytes {
                size
            } else {
                (self.b1.bytes / self.b2.bytes.max(1)).max(1) * size
            };
            self.p = self.p.saturating_sub(delta);
            self.insert_t2(id, size);
        } else {
            let s = self.next_seq();
            self.t1.insert((s, id));
            self.resident.insert(id, (List::T1, s, size));
            self.t1_bytes += size;
        }
        self.trim_ghosts();
    }

    fn evict_victim(&mut self, _now: u64) -> u64 {
        let from_t1 = !self.t1.is_empty() && (self.t1_bytes > self.p || self.t2.is_empty());
        let (key, list) = if from_t1 {
            (*self.t1.iter().next().expect("t1 nonempty"), List::T1)
        } else {
            (*self.t2.iter().next().expect("evict on empty cache"), List::T2)
        };
        let id = key.1;
        let (_, _, size) = self.resident.remove(&id).expect("resident entry");
        match list {
            List::T1 => {
                self.t1.remove(&key);
                self.t1_bytes -= size;
                self.b1.push(id, size);
            }
            List::T2 => {
                self.t2.remove(&key);
                self.t2_bytes -= size;
                self.b2.push(id, size);
            }
        }
        self.trim_ghosts();
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{simulate, CacheConfig};
    use crate::policies::PolicyName;
    use crate::trace::{parse_trace_str, synth_zipf, SizeDist};

    #[test]
    fn second_access_promotes_to_t2() {
        let mut p = Arc::new(4);
        p.on_insert(0, 1, 1);
        p.on_hit(1, 1, 1);
        assert_eq!(p.resident[&1].0, List::T2);
        assert_eq!(p.t1_bytes, 0);
        assert_eq!(p.t2_bytes, 1);
    }

    #[test]
    fn b1_ghost_hit_grows_p_and_lands_in_t2() {
        let mut p = Arc::new(4);
        p.on_insert(0, 1, 1);
        assert_eq!(p.evict_victim(1), 1); // T1 LRU -> B1
        assert_eq!(p.b1.bytes, 1);
        p.on_insert(2, 1, 1);
        assert_eq!(p.resident[&1].0, List::T2);
        assert!(p.p >= 1);
    }

    #[test]
    fn scan_does_not_flush_t2() {
        // Make {1,2} frequent, then scan 10..=15 through a cap-4 cache.
        let src = "0,1,1\n1,2,1\n2,1,1\n3,2,1\n4,10,1\n5,11,1\n6,12,1\n7,13,1\n8,14,1\n9,15,1\n10,1,1\n11,2,1";
        let trace = parse_trace_str(src).unwrap();
        let mut arc = Arc::new(4);
        let ra = simulate(&trace, &mut arc, &CacheConfig::new(4)).unwrap();
        let rl = super::super::tests::run(PolicyName::Lru, &trace, 4);
        // LRU loses 1 and 2 to the scan; ARC keeps them in T2.
        assert_eq!(ra.object_misses, 8);
        assert_eq!(rl.object_misses, 10);
    }

    #[test]
    fn directory_bounded_on_long_trace() {
        let trace = synth_zipf(20_000, 500, 0.8, SizeDist::Uniform(1, 16), 7).unwrap();
        let stats = crate::trace::compute_stats(&trace).unwrap();
        let cap = (stats.footprint_bytes / 10).max(1);
        let mut p = Arc::new(cap);
        simulate(&trace, &mut p, &CacheConfig::new(cap)).unwrap();
        assert!(p.t1_bytes + p.b1.bytes <= cap);
        assert!(p.t1_bytes + p.t2_bytes + p.b1.bytes + p.b2.bytes <= 2 * cap);
    }
}
