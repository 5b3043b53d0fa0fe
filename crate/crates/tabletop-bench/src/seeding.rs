//! Stable per-trial RNG derivation.
//!
//! Every random stream in an experiment is derived from the master seed plus
//! a path of integer components (object, pose, method, purpose tag). Streams
//! are independent of trial execution order, so parallel runs reproduce
//! serial runs bit for bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keeping unrelated streams apart even when their ids collide.
pub mod tag {
    pub const OBJECT_NOISE: u64 = 1;
    pub const DATASET: u64 = 2;
    pub const FIT_PRIOR: u64 = 3;
    pub const FIT_PREDICTED: u64 = 4;
    pub const PLACEMENT: u64 = 5;
    pub const TRIAL: u64 = 6;
    pub const LAST_INCH_DATASET: u64 = 7;
    pub const LAST_INCH_FIT: u64 = 8;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A 64-bit stream id for the given derivation path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = splitmix(master ^ 0xA076_1D64_78BD_642F);
    for &component in path {
        state = splitmix(state ^ splitmix(component.wrapping_add(0x1357_9BDF_2468_ACE0)));
    }
    state
}

/// A dedicated RNG for the given derivation path.
pub fn derive_rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = derive_seed(master, path);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = splitmix(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
