//! Reproducible random streams.
//!
//! Every random draw comes from a ChaCha8 generator keyed by the master seed
//! (expanded with `SeedableRng::seed_from_u64`) and positioned on a 64-bit
//! stream id. Stream ids are derived by folding `(tag, index)` pairs through
//! SplitMix64, so an experiment's stream depends only on where it sits in the
//! plan and never on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const TAG_CALIBRATION: u64 = 0x6361_6c69;
pub const TAG_BENCH: u64 = 0x6265_6e63;
pub const TAG_FCM_INIT: u64 = 0x6663_6d69;
pub const TAG_SIMULATE: u64 = 0x7369_6d75;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Address of one random stream: master seed plus derived stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSeed {
    pub master: u64,
    pub stream: u64,
}

impl StreamSeed {
    pub fn new(master: u64) -> Self {
        Self { master, stream: 0 }
    }

    pub fn child(self, tag: u64, index: u64) -> Self {
        let stream = splitmix64(splitmix64(self.stream ^ tag).wrapping_add(index));
        Self { master: self.master, stream }
    }

    pub fn path(self, tag: u64, indices: &[u64]) -> Self {
        indices.iter().fold(self.child(tag, indices.len() as u64), |s, &i| s.child(tag, i))
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

impl From<u64> for StreamSeed {
    fn from(master: u64) -> Self {
        StreamSeed::new(master)
    }
}
