//! Greedy-Dual-Size-Frequency: priority = L + count / size, where L is an
//! inflation clock set to the priority of each evicted victim. Small and
//! frequently used objects are retained; long-idle objects age out as L
//! rises past them.

use std::collections::{BTreeMap, HashMap};

use crate::cache::EvictionPolicy;
use crate::util::OrdF64;

#[derive(Debug, Default)]
pub struct Gdsf {
    l: f64,
    order: BTreeMap<(OrdF64, u64, u64), u64>, // (priority, insert_time, id) -> id
    meta: HashMap<u64, (OrdF64, u64, u64, u64)>, // id -> (priority, insert_time, count, size)
}

impl Gdsf {
    pub fn new() -> Self {
        Self::default()
    }

    fn rekey(&mut self, id: u64, insert_time: u64, count: u64, size: u64) {
        let pri = OrdF64(self.l + count as f64 / size as f64);
        self.order.insert((pri, insert_time, id), id);
        self.meta.insert(id, (pri, insert_time, count, size));
    }
}

impl EvictionPolicy for Gdsf {
    fn name(&self) -> &str {
        "gdsf"
    }

    fn on_hit(&mut self, _now: u64, id: u64, size: u64) {
        if let Some(&(pri, ins, count, _)) = self.meta.get(&id) {
            self.order.remove(&(pri, ins, id));
            self.rekey(id, ins, count + 1, size);
        }
    }

    fn on_insert(&mut self, now: u64, id: u64, size: u64) {
        self.rekey(id, now, 1, size);
    }

    fn evict_victim(&mut self, _now: u64) -> u64 {
        let (&key, &id) = self.order.iter().next().expect("evict on empty cache");
        self.order.remove(&key);
        self.meta.remove(&id);
        self.l = key.0 .0;
        id
    }
}
