use rand::Rng;

use crate::score::Finger;

/// One stored step. `next_features` is `None` for the terminal transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub features: Vec<f64>,
    pub action: Finger,
    pub reward: f64,
    pub next_features: Option<Vec<f64>>,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.next_features.is_none()
    }
}

/// Fixed-capacity FIFO replay memory backed by a ring.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T = Transition> {
    capacity: usize,
    items: Vec<T>,
    // next slot to overwrite once full
    cursor: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.cursor] = item;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Uniform draws with replacement. Empty when the buffer is empty.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<&T> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..k)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect()
    }

    /// Contents from oldest to newest.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.items[split..].iter().chain(self.items[..split].iter())
    }
}
