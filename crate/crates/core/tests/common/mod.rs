#![allow(dead_code)]

use proptest::prelude::*;
use sapo_core::data::{generate_synthetic_hmm, Corpus, SyntheticConfig};
use sapo_core::{Lattice, TemplateSet};

/// Lattices with up to `max_len` positions and `max_k` tags. Scores are either
/// continuous or drawn from a handful of integers so that exact ties occur.
pub fn lattice(max_len: usize, max_k: usize) -> impl Strategy<Value = Lattice> {
    (1..=max_len, 1..=max_k, any::<bool>()).prop_flat_map(|(len, k, coarse)| {
        let score = if coarse {
            (-2i32..=2).prop_map(f64::from).boxed()
        } else {
            (-3.0..3.0f64).boxed()
        };
        (
            prop::collection::vec(score.clone(), len * k),
            prop::collection::vec(score, k * k),
        )
            .prop_map(move |(emit, trans)| Lattice::new(len, k, emit, trans))
    })
}

pub fn synthetic(count: usize, seed: u64, separability: f64, mean_length: f64) -> Corpus {
    generate_synthetic_hmm(&SyntheticConfig {
        tags: 3,
        vocab: 12,
        mean_length,
        count,
        seed,
        separability,
    })
    .unwrap()
}

pub fn templates() -> TemplateSet {
    TemplateSet::parse("U00:%x[0,0]\nU01:%x[-1,0]\nU02:%x[-1,0]/%x[0,0]\nB\n").unwrap()
}
