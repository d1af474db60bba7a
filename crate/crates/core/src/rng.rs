//! Counter-based random substreams.
//!
//! Every random draw in a run comes from a ChaCha8 stream keyed by
//! `(seed, phase, generation, index)`. There is no mutable generator state to
//! carry between generations, so resuming or evaluating in parallel cannot
//! perturb the sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Phase {
    Init = 1,
    Assemble = 2,
    Evaluate = 3,
    Evolve = 4,
}

pub fn substream(seed: u64, phase: Phase, generation: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, phase as u64, generation, index]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Hex rendering of the generator position: master seed then next generation.
pub fn state_hex(seed: u64, generation: u64) -> String {
    let mut bytes = seed.to_be_bytes().to_vec();
    bytes.extend_from_slice(&generation.to_be_bytes());
    hex::encode(bytes)
}

pub fn parse_state_hex(text: &str) -> Option<(u64, u64)> {
    let bytes = hex::decode(text).ok()?;
    if bytes.len() != 16 {
        return None;
    }
    let seed = u64::from_be_bytes(bytes[..8].try_into().ok()?);
    let generation = u64::from_be_bytes(bytes[8..].try_into().ok()?);
    Some((seed, generation))
}
