//! Per-purpose random streams derived from one master seed.
//!
//! Every consumer of randomness asks for a stream by purpose plus a small
//! coordinate (epoch, step, sample, ...). Streams for different purposes never
//! share state, so switching one stochastic feature off leaves the draws of
//! all the others unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 2019;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Init,
    Noise,
    Dropout,
    Data,
    Shuffle,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 0x494e_4954,
            Purpose::Noise => 0x4e4f_4953,
            Purpose::Dropout => 0x4452_4f50,
            Purpose::Data => 0x4441_5441,
            Purpose::Shuffle => 0x5348_5546,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    master: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStreams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Independent generator for `purpose` at the given coordinate.
    pub fn stream(&self, purpose: Purpose, coord: &[u64]) -> StreamRng {
        let mut h = splitmix64(self.master ^ splitmix64(purpose.tag()));
        for &c in coord {
            h = splitmix64(h ^ splitmix64(c.wrapping_add(0x632b_e59b_d9b4_e019)));
        }
        let mut seed = [0u8; 32];
        let mut x = h;
        for chunk in seed.chunks_exact_mut(8) {
            x = splitmix64(x);
            chunk.copy_from_slice(&x.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

impl Default for RngStreams {
    fn default() -> Self {
        Self::new(DEFAULT_SEED)
    }
}
