//! Feedforward networks, dropout and first-order optimizers.

pub mod activation;
pub mod dropout;
pub mod net;
pub mod optim;

pub use activation::{log_softmax, sigmoid, softmax, Activation};
pub use dropout::{Dropout, DropoutMask, MaskBatch};
pub use net::{clip_grad_norm, FeedforwardNet, NetSpec, Trace};
pub use optim::{OptimizerKind, OptimizerState};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG used everywhere randomness is needed.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a base seed and a label.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
