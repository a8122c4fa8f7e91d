//! Seed derivation. Every session draws from its own stream keyed by
//! `(experiment seed, user id, session index)`, so a single session can be
//! replayed without re-running the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SessionRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `hash64(seed, user, session) = sm(sm(sm(seed) ^ user) ^ session)` with
/// `sm` the splitmix64 finaliser.
pub fn hash64(seed: u64, user: u64, session: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ user) ^ session)
}

pub fn session_rng(seed: u64, user: u32, session_index: usize) -> SessionRng {
    ChaCha8Rng::seed_from_u64(hash64(seed, u64::from(user), session_index as u64))
}
