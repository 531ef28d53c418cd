//! Seed derivation. Every random stream in the simulator is keyed by a tuple
//! of integers so that results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

/// Stream domains keep independent uses of the same run seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Data = 1,
    Partition = 2,
    Training = 3,
    VoteNoise = 4,
    Sampling = 5,
    UpdateNoise = 6,
    Projection = 7,
    Init = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a run seed, stream tag and index tuple into a 64-bit seed.
pub fn derive_seed(run_seed: u64, stream: Stream, keys: &[u64]) -> u64 {
    let mut h = splitmix64(run_seed ^ splitmix64(stream as u64));
    for &k in keys {
        h = splitmix64(h ^ splitmix64(k.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    h
}

pub fn stream_rng(run_seed: u64, stream: Stream, keys: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(run_seed, stream, keys))
}
