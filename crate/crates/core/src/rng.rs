//! Keyed random substreams.
//!
//! Every random quantity in a run is drawn from its own ChaCha8 stream whose
//! key is built from the run seed and the coordinates of the draw (step,
//! node pair, slot, ...). Results therefore never depend on the order in
//! which quantities are sampled, and any single draw can be reproduced in
//! isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep substreams of different purposes disjoint even when
/// their coordinates coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Gain = 1,
    DeepFade = 2,
    Noise = 3,
    Topology = 4,
    Initial = 5,
}

/// Returns the stream for `(seed, domain, a, b, c)`.
pub fn substream(seed: u64, domain: Domain, a: u64, b: u64, c: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&a.to_le_bytes());
    key[16..24].copy_from_slice(&b.to_le_bytes());
    key[24..32].copy_from_slice(&c.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(domain as u64);
    rng
}
