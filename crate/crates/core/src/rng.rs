//! Seedable, splittable randomness. Every stochastic step of a trial draws
//! from its own ChaCha stream keyed by `(seed, trial, purpose)`, so trials
//! can run in any order or in parallel and still reproduce exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a substream is used for within one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Topology,
    Fading { frame: u8 },
    Estimation { frame: u8 },
    Contention { frame: u8 },
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Topology => 0,
            Purpose::Fading { frame } => 0x10 | u64::from(frame),
            Purpose::Estimation { frame } => 0x20 | u64::from(frame),
            Purpose::Contention { frame } => 0x30 | u64::from(frame),
        }
    }
}

/// Independent generator for one purpose of one trial.
pub fn substream(seed: u64, trial: u64, purpose: Purpose) -> SimRng {
    assert!(trial < (1 << 56), "trial id too large for stream derivation");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((trial << 8) | purpose.code());
    rng
}
