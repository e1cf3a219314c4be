//! Deterministic stream derivation: every randomized routine derives its
//! generator from a master seed and a tuple of context words, so results
//! never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 step, the usual seed-expansion permutation.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 256-bit ChaCha seed from a master seed and context words.
pub fn derive_seed(master: u64, parts: &[u64]) -> [u8; 32] {
    let mut state = master ^ 0xA076_1D64_78BD_642F;
    let mut acc = splitmix64(&mut state);
    for (i, &p) in parts.iter().enumerate() {
        state ^= p.rotate_left((i as u32 % 63) + 1);
        acc ^= splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    let mut s = acc;
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    seed
}

/// Deterministic generator for the given context.
pub fn derive_rng(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master, parts))
}

/// Stable 64-bit key for an f64 parameter (distinguishes 0.0 from -0.0,
/// which is fine for seeding purposes).
pub fn f64_key(v: f64) -> u64 {
    v.to_bits()
}
