//! Pinned, counter-based random streams.
//!
//! A stream is ChaCha8 keyed by the master seed (expanded with
//! `seed_from_u64`), with the ChaCha stream id set to the trial index and
//! the block counter set to `night << 32` words at the start of every night.
//! Every draw is therefore addressed by (seed, trial, night, offset), which
//! keeps traces reproducible across platforms and thread schedules.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Recorded in trace digests; bump when the draw procedure changes.
pub const PRNG_ID: &str = "chacha8/rand_chacha-0.9/v1";

pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        StreamRng { inner }
    }

    /// Jump to the block reserved for `night`.
    pub fn at_night(&mut self, night: u64) {
        self.inner.set_word_pos((night as u128) << 32);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `0..n` by rejection; `n > 0`.
    pub fn below_u64(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        // accept x < zone, where zone is the largest multiple of n that fits
        let zone = u64::MAX - (u64::MAX % n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % n;
            }
        }
    }

    /// Uniform in `0..n` for arbitrary-precision `n > 0`, by rejection on
    /// the bit length of `n`.
    pub fn below(&mut self, n: &BigUint) -> BigUint {
        assert!(!n.is_zero());
        if let Some(small) = n.to_u64() {
            return BigUint::from(self.below_u64(small));
        }
        let bits = n.bits();
        let words = bits.div_ceil(64) as usize;
        let top_bits = bits - 64 * (words as u64 - 1);
        let mask = if top_bits == 64 {
            u64::MAX
        } else {
            (1u64 << top_bits) - 1
        };
        loop {
            let mut digits = Vec::with_capacity(words * 2);
            for w in 0..words {
                let mut x = self.next_u64();
                if w == words - 1 {
                    x &= mask;
                }
                digits.push(x as u32);
                digits.push((x >> 32) as u32);
            }
            let candidate = BigUint::new(digits);
            if &candidate < n {
                return candidate;
            }
        }
    }

    /// True with probability exactly `num/den`.
    pub fn bernoulli_ratio(&mut self, num: &BigUint, den: &BigUint) -> bool {
        if num.is_zero() {
            return false;
        }
        if num >= den {
            return true;
        }
        match (num.to_u64(), den.to_u64()) {
            (Some(a), Some(b)) => self.below_u64(b) < a,
            _ => &self.below(den) < num,
        }
    }
}
