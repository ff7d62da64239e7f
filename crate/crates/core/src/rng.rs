//! Deterministic seeding. Every random draw in a run descends from one
//! 64-bit master seed through a replica index and a named substream, so
//! components can be varied independently under common random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Named random substreams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Substream {
    Streets,
    Devices,
    Knights,
    Targets,
    Speeds,
    TimersInfection,
    TimersPatch,
    Thinning,
    Replicas,
    Routes,
}

impl Substream {
    fn code(self) -> u64 {
        match self {
            Substream::Streets => 1,
            Substream::Devices => 2,
            Substream::Knights => 3,
            Substream::Targets => 4,
            Substream::Speeds => 5,
            Substream::TimersInfection => 6,
            Substream::TimersPatch => 7,
            Substream::Thinning => 8,
            Substream::Replicas => 9,
            Substream::Routes => 10,
        }
    }
}

/// SplitMix64 finaliser; a bijective mixer on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn combine(a: u64, b: u64) -> u64 {
    mix64(a ^ mix64(b))
}

/// Seed material for one replica (and one rooting attempt within it).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplicaSeed(u64);

impl ReplicaSeed {
    pub fn new(master_seed: u64, replica: u64, attempt: u64) -> Self {
        ReplicaSeed(combine(combine(master_seed, replica), attempt))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn stream(self, substream: Substream) -> SimRng {
        let mut rng = SimRng::seed_from_u64(self.0);
        rng.set_stream(substream.code());
        rng
    }

    /// A stream keyed additionally by an item index (e.g. one device), so
    /// the draws for item `k` do not depend on how many items precede it.
    pub fn keyed(self, substream: Substream, key: u64) -> SimRng {
        let mut rng = SimRng::seed_from_u64(combine(self.0, key));
        rng.set_stream(substream.code());
        rng
    }
}
