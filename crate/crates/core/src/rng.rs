//! Named, seedable random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from
//! `(seed, purpose, owner, counter)`. Adding a consumer never perturbs the
//! draws of another, and a stream can be recreated from the event log alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    BaseOrder,
    PromptDraw,
    SideFlip,
    SlotToken,
    GroundTruth,
    Rater,
    Schedule,
}

impl Purpose {
    fn tag(self) -> &'static [u8] {
        match self {
            Purpose::BaseOrder => b"base-order",
            Purpose::PromptDraw => b"prompt-draw",
            Purpose::SideFlip => b"side-flip",
            Purpose::SlotToken => b"slot-token",
            Purpose::GroundTruth => b"ground-truth",
            Purpose::Rater => b"rater",
            Purpose::Schedule => b"schedule",
        }
    }
}

pub fn stream(seed: u64, purpose: Purpose, owner: &str, counter: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(purpose.tag());
    hasher.update([0u8]);
    hasher.update(owner.as_bytes());
    hasher.update([0u8]);
    hasher.update(counter.to_le_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Lowercase hex of `n_bytes` drawn from `rng`.
pub fn hex_token(rng: &mut impl rand::RngCore, n_bytes: usize) -> String {
    let mut buf = vec![0u8; n_bytes];
    rng.fill_bytes(&mut buf);
    hex::encode(buf)
}
