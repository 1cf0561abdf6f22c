//! Seeded random substreams.
//!
//! Every random decision in a run derives from one run seed. Each consumer
//! (splitting, pairing, initialization, batching, ...) draws from its own named
//! ChaCha stream so adding draws in one component never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const SPLIT: &str = "split";
pub const PAIRING: &str = "pairing";
pub const INIT: &str = "init";
pub const BATCHING: &str = "batching";

/// FNV-1a, stable across platforms and releases.
fn stream_id(name: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Random stream `name` of the run seeded by `seed`.
pub fn substream(seed: u64, name: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    rng
}
