//! Which tagged bags leave a cell when `k` of its `v` bags are removed
//! uniformly at random.
//!
//! Tagged bags are decided one at a time: with `k'` removals still to place
//! among the `v'` bags not yet decided, the next tagged bag goes with
//! probability `k'/v'`. This reproduces the joint law of the tagged bags under
//! a uniform `k`-subset, so the number removed is hypergeometric `(v, t, k)`.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::rng::StreamRng;

pub fn sample_tagged(
    size: &BigUint,
    removed: &BigUint,
    tagged: usize,
    rng: &mut StreamRng,
) -> Vec<bool> {
    let mut left = removed.clone();
    let mut pool = size.clone();
    let mut out = Vec::with_capacity(tagged);
    for _ in 0..tagged {
        let hit = rng.bernoulli_ratio(&left, &pool);
        if hit {
            left -= 1u32;
        }
        pool -= 1u32;
        out.push(hit);
    }
    out
}

/// Exact probability of every tagged outcome produced by [`sample_tagged`].
pub fn tagged_law(size: &BigUint, removed: &BigUint, tagged: usize) -> Vec<(Vec<bool>, BigRational)> {
    let mut layer = vec![(Vec::new(), BigRational::one(), removed.clone(), size.clone())];
    for _ in 0..tagged {
        let mut next = Vec::with_capacity(layer.len() * 2);
        for (path, p, left, pool) in layer {
            let q_hit = if pool.is_zero() {
                BigRational::zero()
            } else {
                BigRational::new(left.clone().into(), pool.clone().into())
            };
            let q_miss = BigRational::one() - &q_hit;
            let rest = if pool.is_zero() { pool.clone() } else { &pool - 1u32 };
            if !q_hit.is_zero() {
                let mut hp = path.clone();
                hp.push(true);
                next.push((hp, &p * &q_hit, &left - 1u32, rest.clone()));
            }
            if !q_miss.is_zero() {
                let mut mp = path;
                mp.push(false);
                next.push((mp, p * q_miss, left, rest));
            }
        }
        layer = next;
    }
    layer.into_iter().map(|(path, p, _, _)| (path, p)).collect()
}

/// Law of the number of removed tagged bags implied by [`tagged_law`].
pub fn removed_count_law(size: &BigUint, removed: &BigUint, tagged: usize) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); tagged + 1];
    for (path, p) in tagged_law(size, removed, tagged) {
        out[path.iter().filter(|h| **h).count()] += p;
    }
    out
}
