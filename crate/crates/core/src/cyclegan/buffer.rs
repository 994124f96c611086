use rand::Rng;
use serde::{Deserialize, Serialize};

/// Pool of past generator outputs shown to the discriminator.
///
/// Until full, every fake is stored and passed through. Once full, each fake
/// is swapped with a random stored one with probability `swap_prob` (the
/// stored one is returned), otherwise it is passed through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    swap_prob: f64,
    items: Vec<Vec<T>>,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        Self::with_swap_prob(capacity, 0.5)
    }

    pub fn with_swap_prob(capacity: usize, swap_prob: f64) -> Self {
        ReplayBuffer {
            capacity,
            swap_prob,
            items: Vec::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Returns one fake per input fake, possibly drawn from history.
    pub fn query<R: Rng>(&mut self, fakes: Vec<Vec<T>>, rng: &mut R) -> Vec<Vec<T>> {
        if self.capacity == 0 {
            return fakes;
        }
        fakes
            .into_iter()
            .map(|fake| {
                if self.items.len() < self.capacity {
                    self.items.push(fake.clone());
                    fake
                } else if rng.random::<f64>() < self.swap_prob {
                    let idx = rng.random_range(0..self.items.len());
                    std::mem::replace(&mut self.items[idx], fake)
                } else {
                    fake
                }
            })
            .collect()
    }
}
