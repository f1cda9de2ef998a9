//! S3-FIFO: a small probationary FIFO in front of a main FIFO, plus a ghost
//! queue of recently evicted probationary ids. Objects hit at least once in
//! the small queue are promoted to main; ghost-hits insert directly to main.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::cache::EvictionPolicy;

const FREQ_CAP: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Queue {
    Small,
    Main,
}

#[derive(Debug)]
pub struct S3Fifo {
    capacity_bytes: u64,
    small_target: u64,
    small: VecDeque<u64>,
    main: VecDeque<u64>,
    small_bytes: u64,
    main_bytes: u64,
    // id -> (queue, size, freq) for resident objects
    resident: HashMap<u64, (Queue, u64, u8)>,
    ghost: VecDeque<(u64, u64)>, // (id, size), oldest first
    ghost_set: HashSet<u64>,
    ghost_bytes: u64,
}

impl S3Fifo {
    pub fn new(capacity_bytes: u64, small_frac: f64) -> Self {
        S3Fifo {
            capacity_bytes,
            small_target: (capacity_bytes as f64 * small_frac) as u64,
            small: VecDeque::new(),
            main: VecDeque::new(),
            small_bytes: 0,
            main_bytes: 0,
            resident: HashMap::new(),
            ghost: VecDeque::new(),
            ghost_set: HashSet::new(),
            ghost_bytes: 0,
        }
    }

    fn push_ghost(&mut self, id: u64, size: u64) {
        if self.ghost_set.insert(id) {
            self.ghost.push_back((id, size));
            self.ghost_bytes += size;
        }
        // The ghost remembers roughly one main-queue's worth of bytes.
        let budget = self.capacity_bytes.saturating_sub(self.small_target).max(1);
        while self.ghost_bytes > budget {
            let (old, sz) = self.ghost.pop_front().expect("ghost accounting");
            self.ghost_set.remove(&old);
            self.ghost_bytes -= sz;
        }
    }

    /// Pop from the small queue: promote if touched, else evict to ghost.
    fn evict_small(&mut self) -> Option<u64> {
        while let Some(id) = self.small.pop_front() {
            let (_, size, freq) = self.resident[&id];
            self.small_bytes -= size;
            if freq > 0 {
                self.resident.insert(id, (Queue::Main, size, 0));
                self.main.push_back(id);
                self.main_bytes += size;
            } else {
                self.resident.remove(&id);
                self.push_ghost(id, size);
                return Some(id);
            }
        }
        None
    }

    /// Pop from the main queue: reinsert with decayed freq if touched.
    fn evict_main(&mut self) -> Option<u64> {
        while let Some(id) = self.main.pop_front() {
            let (_, size, freq) = self.resident[&id];
            if freq > 0 {
                self.resident.insert(id, (Queue::Main, size, freq - 1));
                self.main.push_back(id);
            } else {
                self.main_bytes -= size;
                self.resident.remove(&id);
                return Some(id);
            }
        }
        None
    }
}

impl EvictionPolicy for S3Fifo {
    fn name(&self) -> &str {
        "s3fifo"
    }

    fn on_hit(&mut self, _now: u64, id: u64, size: u64) {
        if let Some(&(queue, old_size, freq)) = self.resident.get(&id) {
            match queue {
                Queue::Small => self.small_bytes = self.small_bytes + size - old_size,
                Queue::Main => self.main_bytes = self.main_bytes + size - old_size,
            }
            self.resident.insert(id, (queue, size, freq.saturating_add(1).min(FREQ_CAP)));
        }
    }

    fn on_insert(&mut self, _now: u64, id: u64, size: u64) {
        if self.ghost_set.remove(&id) {
            if let Some(pos) = self.ghost.iter().position(|&(g, _)| g == id) {
                let (_, sz) = self.ghost.remove(pos).unwrap();
                self.ghost_bytes -= sz;
            }
            self.resident.insert(id, (Queue::Main, size, 0));
            self.main.push_back(id);
            self.main_bytes += size;
        } else {
            self.resident.insert(id, (Queue::Small, size, 0));
            self.small.push_back(id);
            self.small_bytes += size;
        }
    }

    fn evict_victim(&mut self, _now: u64) -> u64 {
        if self.small_bytes >= self.small_target && !self.small.is_empty() {
            if let Some(v) = self.evict_small() {
                return v;
            }
        }
        if let Some(v) = self.evict_main() {
            return v;
        }
        self.evict_small().expect("evict on empty cache")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{simulate, CacheConfig};
    use crate::trace::parse_trace_str;

    #[test]
    fn one_hit_wonders_do_not_pollute_main() {
        // Hot pair {1,2} touched repeatedly; singles 10..13 stream past.
        let src = "0,1,1\n1,2,1\n2,1,1\n3,2,1\n4,10,1\n5,11,1\n6,1,1\n7,2,1\n8,12,1\n9,13,1\n10,1,1\n11,2,1";
        let trace = parse_trace_str(src).unwrap();
        let mut p = S3Fifo::new(4, 0.25);
        let r = simulate(&trace, &mut p, &CacheConfig::new(4)).unwrap();
        // Hot objects are promoted to main and never evicted by the stream.
        assert_eq!(r.object_misses, 6); // 1,2,10,11,12,13 once each
    }

    #[test]
    fn ghost_hit_inserts_to_main() {
        let mut p = S3Fifo::new(10, 0.2);
        p.on_insert(0, 1, 2);
        // Evict 1 from small (freq 0) -> becomes a ghost.
        assert_eq!(p.evict_victim(1), 1);
        assert!(p.ghost_set.contains(&1));
        p.on_insert(2, 1, 2);
        assert_eq!(p.resident[&1].0, Queue::Main);
        assert!(!p.ghost_set.contains(&1));
    }

    #[test]
    fn touched_small_object_is_promoted_not_evicted() {
        let mut q = S3Fifo::new(10, 0.2);
        q.on_insert(0, 7, 2);
        q.on_hit(1, 7, 2);
        q.on_insert(2, 8, 2);
        // Small is over target; 7 (touched) is promoted to main, and the
        // next small candidate 8 (freq 0) becomes the victim.
        assert_eq!(q.evict_victim(3), 8);
        assert_eq!(q.resident[&7].0, Queue::Main);
    }
}
