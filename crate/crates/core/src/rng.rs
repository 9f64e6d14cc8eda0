//! Counter-based random streams.
//!
//! Every random decision in a training run is drawn from a stream that is a
//! pure function of `(seed, epoch, index, purpose)`. Nothing holds a shared
//! generator, so results do not depend on how work is scheduled across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes under the same
/// `(seed, epoch, index)` yield unrelated streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Crop,
    Flip,
    RandAugment,
    Erasing,
    Mix,
    DropPath,
    Dropout,
    Sampler,
    LrNoise,
    Init,
    Data,
    /// Free-form tag for tests and tools.
    Custom(u32),
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Crop => 1,
            Purpose::Flip => 2,
            Purpose::RandAugment => 3,
            Purpose::Erasing => 4,
            Purpose::Mix => 5,
            Purpose::DropPath => 6,
            Purpose::Dropout => 7,
            Purpose::Sampler => 8,
            Purpose::LrNoise => 9,
            Purpose::Init => 10,
            Purpose::Data => 11,
            Purpose::Custom(c) => 0x1_0000_0000 | c as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngKey {
    pub seed: u64,
    pub epoch: u64,
    pub index: u64,
    pub purpose: Purpose,
    /// Sub-stream, e.g. the repeat number under repeated augmentation.
    pub lane: u64,
}

impl RngKey {
    pub fn new(seed: u64, epoch: u64, index: u64, purpose: Purpose) -> Self {
        RngKey { seed, epoch, index, purpose, lane: 0 }
    }

    pub fn with_lane(mut self, lane: u64) -> Self {
        self.lane = lane;
        self
    }

    pub fn with_purpose(mut self, purpose: Purpose) -> Self {
        self.purpose = purpose;
        self
    }

    pub fn stream(&self) -> RngStream {
        RngStream::new(*self)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic generator derived from an [`RngKey`].
///
/// The key is absorbed word by word into a 256-bit ChaCha seed; ChaCha
/// itself is a counter-mode cipher so the draw sequence is fully determined
/// by the key.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: RngKey,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(key: RngKey) -> Self {
        let words = [key.seed, key.epoch, key.index, key.purpose.code(), key.lane];
        let mut seed = [0u8; 32];
        for (lane, chunk) in seed.chunks_mut(8).enumerate() {
            let mut acc = 0x6a09_e667_f3bc_c908u64 ^ (lane as u64).wrapping_mul(0xa076_1d64_78bd_642f);
            for w in words {
                acc = splitmix64(acc ^ w);
            }
            chunk.copy_from_slice(&acc.to_le_bytes());
        }
        RngStream { key, inner: ChaCha8Rng::from_seed(seed) }
    }

    pub fn key(&self) -> RngKey {
        self.key
    }
}

impl rand::RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
