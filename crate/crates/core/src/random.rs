//! Counter-based random fields.
//!
//! Node `i` of field `stream` under `seed` reads the ChaCha8 keystream at
//! word position `2i`, so values do not depend on evaluation order or on the
//! number of threads.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CHUNK: usize = 4096;

fn to_unit(bits: u64) -> f64 {
    // 53 random bits onto [-1, 1)
    (bits >> 11) as f64 * (2.0 / (1u64 << 53) as f64) - 1.0
}

fn rng_at(seed: u64, stream: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(2 * index as u128);
    rng
}

/// Uniform `[-1, 1)` value of node `index`.
pub fn uniform_at(seed: u64, stream: u64, index: usize) -> f64 {
    to_unit(rng_at(seed, stream, index).next_u64())
}

/// Values of nodes `0..len`.
pub fn uniform_field(seed: u64, stream: u64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    crate::par::for_each_chunk(&mut out, CHUNK, |c, chunk| {
        let mut rng = rng_at(seed, stream, c * CHUNK);
        for v in chunk.iter_mut() {
            *v = to_unit(rng.next_u64());
        }
    });
    out
}
