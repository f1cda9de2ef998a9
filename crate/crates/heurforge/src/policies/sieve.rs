//! SIEVE: FIFO order with a moving hand that clears visited bits and evicts
//! the first unvisited object, scanning from tail (oldest) toward head.

use std::collections::HashMap;

use crate::cache::EvictionPolicy;

#[derive(Debug, Clone, Copy)]
struct Node {
    // `prev` points toward the head (newer), `next` toward the tail (older).
    prev: Option<u64>,
    next: Option<u64>,
    visited: bool,
}

#[derive(Debug, Default)]
pub struct Sieve {
    nodes: HashMap<u64, Node>,
    head: Option<u64>,
    tail: Option<u64>,
    hand: Option<u64>,
}

impl Sieve {
    pub fn new() -> Self {
        Self::default()
    }

    fn unlink(&mut self, id: u64) {
        let node = self.nodes.remove(&id).expect("unlink unknown id");
        match node.prev {
            Some(p) => self.nodes.get_mut(&p).unwrap().next = node.next,
            None => self.head = node.next,
        }
        match node.next {
            Some(n) => self.nodes.get_mut(&n).unwrap().prev = node.prev,
            None => self.tail = node.prev,
        }
    }
}

impl EvictionPolicy for Sieve {
    fn name(&self) -> &str {
        "sieve"
    }

    fn on_hit(&mut self, _now: u64, id: u64, _size: u64) {
        if let Some(n) = self.nodes.get_mut(&id) {
            n.visited = true;
        }
    }

    fn on_insert(&mut self, _now: u64, id: u64, _size: u64) {
        let node = Node {
            prev: None,
            next: self.head,
            visited: false,
        };
        if let Some(h) = self.head {
            self.nodes.get_mut(&h).unwrap().prev = Some(id);
        }
        self.head = Some(id);
        if self.tail.is_none() {
            self.tail = Some(id);
        }
        self.nodes.insert(id, node);
    }

    fn evict_victim(&mut self, _now: u64) -> u64 {
        let mut cursor = self.hand.or(self.tail).expect("evict on empty cache");
        loop {
            let node = self.nodes[&cursor];
            if node.visited {
                self.nodes.get_mut(&cursor).unwrap().visited = false;
                // Move toward the head; wrap to the tail when exhausted.
                cursor = match node.prev {
                    Some(p) => p,
                    None => self.tail.expect("nonempty"),
                };
            } else {
                self.hand = node.prev;
                self.unlink(cursor);
                return cursor;
            }
        }
    }
}
