//! Counter-based random streams.
//!
//! A stream is addressed by a root seed plus a derivation path of indices
//! (replicate, study, arm, ...). The path is hashed into a 64-bit key which
//! seeds a ChaCha8 generator, so the uniforms for a given address never
//! depend on the order in which work units are scheduled.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Arm tag used in derivation paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Control = 0,
    Treatment = 1,
}

/// Well-known first path components, so that independent consumers of the
/// same root seed never collide.
pub mod domain {
    pub const DATA: u64 = 1;
    pub const POOL: u64 = 2;
    pub const SCENARIO: u64 = 3;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    seed: u64,
    path: Vec<u64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, path: Vec::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Stream one level deeper in the derivation tree.
    pub fn child(&self, index: u64) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(index);
        Self { seed: self.seed, path }
    }

    pub fn key(&self) -> u64 {
        let mut h = splitmix64(self.seed);
        for (depth, &idx) in self.path.iter().enumerate() {
            h = splitmix64(h ^ splitmix64(idx.wrapping_add((depth as u64 + 1).wrapping_mul(GOLDEN))));
        }
        h
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key())
    }

    /// First uniform of this stream, in the open interval (0, 1).
    pub fn uniform(&self) -> f64 {
        self.rng().sample(Open01)
    }
}
