//! Seeded, splittable random streams.
//!
//! Every random decision draws from a ChaCha8 stream keyed by the run seed and
//! a purpose label, so adding a new consumer never perturbs existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Seed {
    pub fn value(self) -> u64 {
        self.0
    }

    /// Child seed for a labelled sub-task.
    pub fn derive(self, label: &str) -> Seed {
        Seed(splitmix64(self.0 ^ fnv1a(label)))
    }

    pub fn derive_indexed(self, label: &str, index: u64) -> Seed {
        Seed(splitmix64(self.derive(label).0 ^ splitmix64(index)))
    }

    pub fn stream(self, label: &str) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.derive(label).0;
        for chunk in key.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}
