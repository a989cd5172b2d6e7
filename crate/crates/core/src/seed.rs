//! Counter-based seed derivation so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `hash(master, point, frame)`.
pub fn frame_seed(master: u64, point: u64, frame: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ point) ^ frame.rotate_left(32))
}

pub fn frame_rng(master: u64, point: u64, frame: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(frame_seed(master, point, frame))
}
