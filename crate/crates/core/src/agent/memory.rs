use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::env::SpectrumWaterfall;

/// `(S_n, a_n, r_n, S_{n+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Arc<SpectrumWaterfall>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Arc<SpectrumWaterfall>,
}

/// `(S_n, c_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleLabelPair {
    pub state: Arc<SpectrumWaterfall>,
    pub label: Vec<f64>,
}

/// Bounded first-in-first-out memory with uniform minibatch sampling.
#[derive(Debug, Clone)]
pub struct ReplayMemory<T> {
    capacity: usize,
    items: VecDeque<T>,
}

impl<T> ReplayMemory<T> {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay memory capacity must be positive");
        ReplayMemory {
            capacity,
            items: VecDeque::with_capacity(capacity),
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

    /// Appends `item`, evicting the oldest entry when full.
    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.items.get(i)
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `batch` distinct positions drawn uniformly, or fewer if the memory is smaller.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        let n = batch.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), n).into_vec()
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&T> {
        self.sample_indices(batch, rng)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampling_is_without_replacement() {
        let mut m = ReplayMemory::new(50);
        for i in 0..50 {
            m.push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut s: Vec<i32> = m.sample(20, &mut rng).into_iter().copied().collect();
            s.sort();
            s.dedup();
            assert_eq!(s.len(), 20);
        }
        assert_eq!(m.sample(80, &mut rng).len(), 50);
    }

    #[test]
    fn sampling_covers_uniformly() {
        let mut m = ReplayMemory::new(10);
        for i in 0..10usize {
            m.push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 10];
        let draws = 10_000;
        for _ in 0..draws {
            for &i in m.sample(3, &mut rng) {
                counts[i] += 1;
            }
        }
        let expected = draws as f64 * 0.3;
        for c in counts {
            assert!(
                (c as f64 - expected).abs() < 4.0 * expected.sqrt(),
                "{counts:?}"
            );
        }
    }

    proptest! {
        #[test]
        fn fifo_keeps_last_capacity_items(cap in 1usize..40, n in 0usize..200) {
            let mut m = ReplayMemory::new(cap);
            for i in 0..n {
                m.push(i);
                prop_assert!(m.len() <= cap);
            }
            let kept: Vec<usize> = m.iter().copied().collect();
            let expected: Vec<usize> = (n.saturating_sub(cap)..n).collect();
            prop_assert_eq!(kept, expected);
        }
    }
}
