//! Seeded random streams.
//!
//! Every run seed fans out into independent ChaCha streams, one per
//! (robot, purpose) pair, so turning one consumer on or off never shifts the
//! draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Field = 0,
    Locations = 1,
    Planning = 2,
    CostRealization = 3,
    Resampling = 4,
    Measurement = 5,
}

const PURPOSES: u64 = 8;

/// Seed of run `index` in a batch starting at `base_seed`.
pub fn run_seed(base_seed: u64, index: u64) -> u64 {
    base_seed.wrapping_add(index)
}

/// Stream shared by the whole mission (field and location pool draws).
pub fn mission_stream(seed: u64, purpose: Purpose) -> SimRng {
    stream(seed, 0, purpose)
}

/// Stream owned by one robot.
pub fn robot_stream(seed: u64, robot: usize, purpose: Purpose) -> SimRng {
    stream(seed, robot as u64 + 1, purpose)
}

fn stream(seed: u64, owner: u64, purpose: Purpose) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(owner * PURPOSES + purpose as u64);
    rng
}
