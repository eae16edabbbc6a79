//! Deterministic randomness. Every sampling task draws from its own ChaCha
//! stream keyed by `(seed, label, index)`, so results do not depend on
//! thread scheduling or on which other tasks ran.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::FieldElement as Fe;

pub fn task_rng(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    // labels longer than 24 bytes are truncated; the CLI uses short names
    for (k, b) in key[8..].iter_mut().zip(label.bytes()) {
        *k = b;
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// `count` rationals `p/q` in `[lo, hi)` with `q <= max_den`.
pub fn rational_points(rng: &mut impl Rng, count: usize, lo: &Fe, hi: &Fe, max_den: i64) -> Vec<Fe> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let q = rng.gen_range(2..=max_den);
        let p = rng.gen_range(0..q);
        let x = Fe::rational(p, q);
        if &x >= lo && &x < hi {
            out.push(x);
        }
    }
    out
}

/// `count` rationals in `[0, 1)`.
pub fn unit_points(rng: &mut impl Rng, count: usize, max_den: i64) -> Vec<Fe> {
    rational_points(rng, count, &Fe::zero(), &Fe::one(), max_den)
}
