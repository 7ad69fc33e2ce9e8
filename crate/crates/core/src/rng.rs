//! Seeded, splittable randomness.
//!
//! Every stochastic routine takes a 64-bit seed. Independent work items
//! (Monte Carlo trials, optimizer restarts, random matrices in a batch) draw
//! from ChaCha substreams selected by their index, so results do not depend on
//! how the work is scheduled across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

pub type StreamRng = ChaCha12Rng;

/// Generator for substream `index` of `seed`.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Multinomial draw of `trials` items over `probs` by sequential conditional
/// binomials. `probs` must be non-negative and sum to one (within rounding).
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, trials: u64, probs: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = trials;
    let mut mass_left = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = remaining;
            break;
        }
        let q = if mass_left > 0.0 {
            (p / mass_left).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = if q >= 1.0 {
            remaining
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining, q)
                .expect("binomial parameters are in range")
                .sample(rng)
        };
        counts[i] = k;
        remaining -= k;
        mass_left -= p;
    }
    counts
}
