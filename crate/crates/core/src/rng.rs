//! Counter-based random streams addressed by `(seed, index)`.
//!
//! Every path in a Monte Carlo batch owns one stream index, so results do not
//! depend on which worker generated which path. Normals come from the
//! ziggurat sampler in `rand_distr` on top of ChaCha8.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

/// Sub-stream tags. Brownian and fractional parts of one path never share draws.
pub const SUBSTREAM_BROWNIAN: u64 = 1;
pub const SUBSTREAM_FRACTIONAL: u64 = 2;

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    /// Disjoint child stream identified by `tag`.
    pub fn substream(&self, tag: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D))),
            index: self.index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }

    pub fn normals(&self, count: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..count)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
