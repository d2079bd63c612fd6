//! Named random streams derived from a single 64-bit seed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Purpose labels; each maps to a distinct ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    SbsPositions,
    AvPositions,
    Tasks,
    Machines,
    FadingDl,
    FadingUl,
    Execution,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::SbsPositions => 1,
            Stream::AvPositions => 2,
            Stream::Tasks => 3,
            Stream::Machines => 4,
            Stream::FadingDl => 5,
            Stream::FadingUl => 6,
            Stream::Execution => 7,
        }
    }
}

pub fn stream(seed: u64, purpose: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(purpose.id());
    rng
}

/// Seed of the `index`-th run of a sweep rooted at `base`.
pub fn run_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
