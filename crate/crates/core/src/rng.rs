//! Seed derivation. Every random draw in the crate comes from a stream named
//! by a root seed plus a path of labels and indices, so results never depend
//! on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// A node in the seed derivation tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seed(u64);

impl Seed {
    pub const fn new(value: u64) -> Self {
        Seed(value)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Child stream named by a label.
    pub fn derive(self, label: &str) -> Seed {
        Seed(splitmix(self.0 ^ splitmix(fnv1a(label))))
    }

    /// Child stream named by an index.
    pub fn index(self, i: u64) -> Seed {
        Seed(splitmix(self.0.wrapping_add(splitmix(i ^ GOLDEN))))
    }

    pub fn rng(self) -> Rng {
        Rng::seed_from_u64(self.0)
    }
}

/// Stream used for candidate `candidate` at planning step `step` of the
/// episode seeded by `episode`. Plain stochastic policy execution uses
/// candidate 0, which makes a single-candidate planner reproduce it exactly.
pub fn candidate_stream(episode: Seed, step: usize, candidate: usize) -> Rng {
    episode
        .derive("candidate")
        .index(step as u64)
        .index(candidate as u64)
        .rng()
}

/// Stream for the initial state and wrapper noise of an episode.
pub fn reset_stream(episode: Seed) -> Rng {
    episode.derive("reset").rng()
}
