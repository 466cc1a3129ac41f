//! Content-derived randomness.
//!
//! Every stochastic choice draws from a generator seeded by
//! `hash(run_seed, content_id, choice_tag)`, so outputs do not depend on
//! scheduling, worker count, or input order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type ChoiceRng = ChaCha8Rng;

fn digest(run_seed: u64, content_id: &str, tag: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update((content_id.len() as u64).to_le_bytes());
    h.update(content_id.as_bytes());
    h.update(tag.as_bytes());
    h.finalize().into()
}

pub fn derive_rng(run_seed: u64, content_id: &str, tag: &str) -> ChoiceRng {
    ChaCha8Rng::from_seed(digest(run_seed, content_id, tag))
}

pub fn derive_seed(run_seed: u64, content_id: &str, tag: &str) -> u64 {
    let d = digest(run_seed, content_id, tag);
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// True with probability `p`; `p <= 0` never fires and `p >= 1` always does.
pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.gen::<f64>() < p
}
