//! Seeded corpora of quantum-generated boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boxes::SymBox;
use crate::error::Result;
use crate::numerics::{rat, Rational};

/// `count` mixtures of `Q(p)^{⊗n}` with `n ∈ 1..=max_n`, one to three
/// components, `p` a multiple of 1/100 in `[0.15, 0.85]` and weights
/// multiples of 1/60.
pub fn quantum_mixtures(seed: u64, count: usize, max_n: usize) -> Result<Vec<SymBox<Rational>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=max_n.max(1));
            let parts = rng.gen_range(1..=3);
            let mut cuts: Vec<i64> = (0..parts - 1).map(|_| rng.gen_range(0..=60)).collect();
            cuts.sort_unstable();
            let mut weights = Vec::with_capacity(parts);
            let mut prev = 0;
            for c in cuts.into_iter().chain([60]) {
                weights.push(rat(c - prev, 60));
                prev = c;
            }
            let comps = (0..parts)
                .map(|_| SymBox::iid(n, &rat(rng.gen_range(15..=85), 100)))
                .collect::<Result<Vec<_>>>()?;
            SymBox::mix(&comps, &weights)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_reproducible() {
        let a = quantum_mixtures(7, 20, 6).unwrap();
        assert_eq!(a, quantum_mixtures(7, 20, 6).unwrap());
        assert!(a.iter().all(|b| (1..=6).contains(&b.n())));
        assert_ne!(a, quantum_mixtures(8, 20, 6).unwrap());
    }
}
