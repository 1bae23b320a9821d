//! Deterministic random streams.
//!
//! Every Monte-Carlo task draws from its own ChaCha stream derived from a
//! master seed and a task index, so results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Vector;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A child seed: the first word of stream `index`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, index).next_u64()
}

pub fn std_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn std_normal_vec(rng: &mut Rng, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| std_normal(rng))
}
