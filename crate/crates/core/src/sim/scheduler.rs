//! Discrete-event queue owning the simulation clock.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Entry<E> {
    at: f64,
    round: u64,
    priority: u64,
    seq: u64,
    event: E,
}

impl<E> Entry<E> {
    fn key(&self) -> (f64, u64, u64, u64) {
        (self.at, self.round, self.priority, self.seq)
    }
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    /// Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)).then(b.2.cmp(&a.2)).then(b.3.cmp(&a.3))
    }
}

/// Delivers events in (time, round, seeded priority) order.
pub struct Scheduler<E> {
    heap: BinaryHeap<Entry<E>>,
    rng: ChaCha20Rng,
    seq: u64,
    now: f64,
}

impl<E> Scheduler<E> {
    pub fn new(seed: u64) -> Self {
        Self { heap: BinaryHeap::new(), rng: ChaCha20Rng::seed_from_u64(seed), seq: 0, now: 0.0 }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Moves the clock forward; never backwards.
    pub fn advance_to(&mut self, t: f64) {
        self.now = self.now.max(t);
    }

    pub fn schedule(&mut self, at: f64, round: u64, event: E) {
        let priority = self.rng.next_u64();
        self.seq += 1;
        self.heap.push(Entry { at: at.max(self.now), round, priority, seq: self.seq, event });
    }

    pub fn pop(&mut self) -> Option<(f64, E)> {
        let e = self.heap.pop()?;
        self.now = e.at;
        Some((e.at, e.event))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_order_then_seeded_ties() {
        let run = |seed| {
            let mut s = Scheduler::new(seed);
            for i in 0..20 {
                s.schedule(if i % 2 == 0 { 1.0 } else { 0.5 }, 0, i);
            }
            let mut out = Vec::new();
            let mut last = 0.0;
            while let Some((t, e)) = s.pop() {
                assert!(t >= last);
                last = t;
                out.push(e);
            }
            out
        };
        let a = run(1);
        assert_eq!(a, run(1));
        assert!(a[..10].iter().all(|e| e % 2 == 1));
        assert_ne!(a, run(2));
    }

    #[test]
    fn clock_never_rewinds() {
        let mut s = Scheduler::new(0);
        s.schedule(5.0, 0, ());
        s.pop();
        s.schedule(1.0, 0, ());
        assert_eq!(s.pop().unwrap().0, 5.0);
    }
}
