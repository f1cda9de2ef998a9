//! FIFO, LRU, LFU, MRU, and FIFO-Reinsertion.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::cache::EvictionPolicy;

#[derive(Debug, Default)]
pub struct Fifo {
    queue: VecDeque<u64>,
}

impl Fifo {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EvictionPolicy for Fifo {
    fn name(&self) -> &str {
        "fifo"
    }

    fn on_hit(&mut self, _now: u64, _id: u64, _size: u64) {}

    fn on_insert(&mut self, _now: u64, id: u64, _size: u64) {
        self.queue.push_back(id);
    }

    fn evict_victim(&mut self, _now: u64) -> u64 {
        self.queue.pop_front().expect("evict on empty cache")
    }
}

// Keyed eviction order: (key, insert_time, object_id).
type OrderKey = (u64, u64, u64);

#[derive(Debug, Default)]
pub struct Lru {
    order: BTreeSet<OrderKey>,
    meta: HashMap<u64, (u64, u64)>, // id -> (last_access, insert_time)
}

impl Lru {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EvictionPolicy for Lru {
    fn name(&self) -> &str {
        "lru"
    }

    fn on_hit(&mut self, now: u64, id: u64, _size: u64) {
        if let Some(&(last, ins)) = self.meta.get(&id) {
            self.order.remove(&(last, ins, id));
            self.order.insert((now, ins, id));
            self.meta.insert(id, (now, ins));
        }
    }

    fn on_insert(&mut self, now: u64, id: u64, _size: u64) {
        self.meta.insert(id, (now, now));
        self.order.insert((now, now, id));
    }

    fn evict_victim(&mut self, _now: u64) -> u64 {
        let key = *self.order.iter().next().expect("evict on empty cache");
        self.order.remove(&key);
        self.meta.remove(&key.2);
        key.2
    }
}

#[derive(Debug, Default)]
pub struct Lfu {
    order: BTreeSet<OrderKey>,
    meta: HashMap<u64, (u64, u64)>, // id -> (count, insert_time)
}

impl Lfu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EvictionPolicy for Lfu {
    fn name(&self) -> &str {
        "lfu"
    }

    fn on_hit(&mut self, _now: u64, id: u64, _size: u64) {
        if let Some(&(count, ins)) = self.meta.get(&id) {
            self.order.remove(&(count, ins, id));
            self.order.insert((count + 1, ins, id));
            self.meta.insert(id, (count + 1, ins));
        }
    }

    fn on_insert(&mut self, now: u64, id: u64, _size: u64) {
        self.meta.insert(id, (1, now));
        self.order.insert((1, now, id));
    }

    fn evict_victim(&mut self, _now: u64) -> u64 {
        let key = *self.order.iter().next().expect("evict on empty cache");
        self.order.remove(&key);
        self.meta.remove(&key.2);
        key.2
    }
}

#[derive(Debug, Default)]
pub struct Mru {
    order: BTreeSet<OrderKey>,
    meta: HashMap<u64, (u64, u64)>, // id -> (last_access, insert_time)
}

impl Mru {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EvictionPolicy for Mru {
    fn name(&self) -> &str {
        "mru"
    }

    fn on_hit(&mut self, now: u64, id: u64, _size: u64) {
        if let Some(&(last, ins)) = self.meta.get(&id) {
            self.order.remove(&(last, ins, id));
            self.order.insert((now, ins, id));
            self.meta.insert(id, (now, ins));
        }
    }

    fn on_insert(&mut self, now: u64, id: u64, _size: u64) {
        self.meta.insert(id, (now, now));
        self.order.insert((now, now, id));
    }

    fn evict_victim(&mut self, _now: u64) -> u64 {
        // Victim has the highest last-access time; the global tie-break
        // (lowest insert_time, then id) applies within that time.
        let &(t, _, _) = self.order.iter().next_back().expect("evict on empty cache");
        let key = *self
            .order
            .range((t, 0, 0)..)
            .next()
            .expect("range nonempty");
        self.order.remove(&key);
        self.meta.remove(&key.2);
        key.2
    }
}

/// FIFO with a second chance: a visited object is reinserted at the tail
/// instead of being evicted. With all visited bits clear it degenerates to
/// plain FIFO.
#[derive(Debug, Default)]
pub struct FifoReinsertion {
    queue: VecDeque<u64>,
    visited: HashMap<u64, bool>,
}

impl FifoReinsertion {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EvictionPolicy for FifoReinsertion {
    fn name(&self) -> &str {
        "fifo-re"
    }

    fn on_hit(&mut self, _now: u64, id: u64, _size: u64) {
        if let Some(v) = self.visited.get_mut(&id) {
            *v = true;
        }
    }

    fn on_insert(&mut self, _now: u64, id: u64, _size: u64) {
        self.queue.push_back(id);
        self.visited.insert(id, false);
    }

    fn evict_victim(&mut self, _now: u64) -> u64 {
        loop {
            let id = self.queue.pop_front().expect("evict on empty cache");
            if self.visited.get(&id).copied().unwrap_or(false) {
                self.visited.insert(id, false);
                self.queue.push_back(id);
            } else {
                self.visited.remove(&id);
                return id;
            }
        }
    }
}
