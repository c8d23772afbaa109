//! Seeded generators.
//!
//! Every random draw in the crate comes from a ChaCha8 generator seeded with
//! `seed_from_u64(seed)` and switched to a fixed stream per consumer, so the
//! consumers never share state and a run is reproducible from its seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    ModelInit = 1,
    NegativeSampling = 2,
    TargetSelection = 3,
    ItemSelection = 4,
    SynthSchedule = 5,
    SynthChains = 6,
    SynthBase = 7,
}

pub fn seeded(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Independent generator for one member of a family (e.g. one synthetic user).
pub fn seeded_member(seed: u64, stream: Stream, member: u64) -> ChaCha8Rng {
    let mixed = seed ^ member.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    seeded(mixed, stream)
}
