//! Labeled random streams.
//!
//! One master seed spawns an independent ChaCha8 stream for every
//! (replication, week, policy, purpose) label, so the draws a policy sees
//! never depend on which other policies ran or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{PolicyId, Week};

/// What a stream is consumed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Allocate = 1,
    Reward = 2,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` derived from the master seed. Replication 0
/// uses the master seed itself.
pub fn replication_seed(master: u64, index: u64) -> u64 {
    if index == 0 {
        master
    } else {
        mix64(master ^ mix64(index))
    }
}

/// Returns the stream for one (week, policy, purpose) label under `seed`.
pub fn stream(seed: u64, week: Week, policy: PolicyId, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label = (u64::from(week.get()) << 16)
        | ((policy.position() as u64 + 1) << 8)
        | purpose as u64;
    rng.set_stream(label);
    rng
}
