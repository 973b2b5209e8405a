//! Seeded HMM corpus generator.
//!
//! Word `w` belongs to tag `w mod K`. Emission rows mix a uniform distribution
//! over the tag's own words (weight `separability`) with a uniform distribution
//! over the whole vocabulary. Transitions are a random convex combination of
//! permutation matrices, so the chain is doubly stochastic and its stationary
//! tag distribution is uniform.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::conll::Corpus;
use crate::error::{Error, Result};
use crate::features::{Sequence, Tagset};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub tags: usize,
    pub vocab: usize,
    pub mean_length: f64,
    pub count: usize,
    pub seed: u64,
    pub separability: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            tags: 5,
            vocab: 50,
            mean_length: 10.0,
            count: 100,
            seed: 1,
            separability: 0.5,
        }
    }
}

/// Generator parameters (rows are probability distributions).
#[derive(Debug, Clone, PartialEq)]
pub struct HmmParams {
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub emission: Vec<Vec<f64>>,
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.tags < 2 {
            return fail(format!("need at least 2 tags, got {}", self.tags));
        }
        if self.vocab < self.tags {
            return fail(format!("vocabulary ({}) must be at least the tag count ({})", self.vocab, self.tags));
        }
        if !(self.mean_length >= 1.0 && self.mean_length.is_finite()) {
            return fail(format!("mean length must be >= 1, got {}", self.mean_length));
        }
        if !(0.0..=1.0).contains(&self.separability) {
            return fail(format!("separability must lie in [0, 1], got {}", self.separability));
        }
        if self.count == 0 {
            return fail("count must be positive".into());
        }
        Ok(())
    }

    fn params_with(&self, rng: &mut ChaCha8Rng) -> HmmParams {
        let k = self.tags;
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let mut transition = vec![vec![0.0; k]; k];
        for c in weights {
            let mut perm: Vec<usize> = (0..k).collect();
            perm.shuffle(rng);
            for (a, &b) in perm.iter().enumerate() {
                transition[a][b] += c / total;
            }
        }
        let emission = (0..k)
            .map(|tag| {
                let own = (0..self.vocab).filter(|w| w % k == tag).count() as f64;
                (0..self.vocab)
                    .map(|w| {
                        let mine = if w % k == tag { self.separability / own } else { 0.0 };
                        mine + (1.0 - self.separability) / self.vocab as f64
                    })
                    .collect()
            })
            .collect();
        HmmParams {
            initial: vec![1.0 / k as f64; k],
            transition,
            emission,
        }
    }

    /// The generator's parameters for this seed.
    pub fn params(&self) -> Result<HmmParams> {
        self.validate()?;
        Ok(self.params_with(&mut ChaCha8Rng::seed_from_u64(self.seed)))
    }
}

pub fn tag_name(k: usize) -> String {
    format!("T{k}")
}

pub fn word_name(w: usize) -> String {
    format!("w{w}")
}

/// Samples a corpus of `count` sequences. Lengths are geometric with mean
/// `mean_length`, clamped to `[1, 4 * mean_length]`.
pub fn generate_synthetic_hmm(cfg: &SyntheticConfig) -> Result<Corpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = cfg.params_with(&mut rng);
    let dist = |row: &[f64]| WeightedIndex::new(row).expect("valid distribution");
    let initial = dist(&params.initial);
    let transition: Vec<_> = params.transition.iter().map(|r| dist(r)).collect();
    let emission: Vec<_> = params.emission.iter().map(|r| dist(r)).collect();
    let stop = 1.0 / cfg.mean_length;
    let max_len = (4.0 * cfg.mean_length).floor().max(1.0) as usize;
    let tagset = Tagset::from_tags((0..cfg.tags).map(tag_name))?;
    let mut sequences = Vec::with_capacity(cfg.count);
    for _ in 0..cfg.count {
        let mut len = 1;
        while len < max_len && !rng.random_bool(stop) {
            len += 1;
        }
        let mut tokens = Vec::with_capacity(len);
        let mut gold = Vec::with_capacity(len);
        let mut tag = initial.sample(&mut rng);
        for t in 0..len {
            if t > 0 {
                tag = transition[tag].sample(&mut rng);
            }
            tokens.push(vec![word_name(emission[tag].sample(&mut rng))]);
            gold.push(tag);
        }
        sequences.push(Sequence::new(tokens, Some(gold))?);
    }
    Ok(Corpus {
        sequences,
        columns: 1,
        tagset,
        provenance: format!(
            "synthetic-hmm tags={} vocab={} mean_length={} count={} seed={} separability={}",
            cfg.tags, cfg.vocab, cfg.mean_length, cfg.count, cfg.seed, cfg.separability
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let cfg = SyntheticConfig {
            count: 10,
            seed: 7,
            ..Default::default()
        };
        assert_eq!(generate_synthetic_hmm(&cfg).unwrap(), generate_synthetic_hmm(&cfg).unwrap());
        let other = SyntheticConfig { seed: 8, ..cfg.clone() };
        assert_ne!(generate_synthetic_hmm(&cfg).unwrap(), generate_synthetic_hmm(&other).unwrap());
    }

    #[test]
    fn parameter_bounds() {
        let bad = [
            SyntheticConfig { tags: 1, ..Default::default() },
            SyntheticConfig { vocab: 3, ..Default::default() },
            SyntheticConfig { separability: 1.5, ..Default::default() },
            SyntheticConfig { mean_length: 0.5, ..Default::default() },
            SyntheticConfig { count: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(generate_synthetic_hmm(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn rows_are_distributions_and_doubly_stochastic() {
        let p = SyntheticConfig::default().params().unwrap();
        for row in p.transition.iter().chain(&p.emission) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for b in 0..p.transition.len() {
            let col: f64 = p.transition.iter().map(|r| r[b]).sum();
            assert!((col - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lengths_clamped() {
        let cfg = SyntheticConfig {
            mean_length: 3.0,
            count: 500,
            ..Default::default()
        };
        let c = generate_synthetic_hmm(&cfg).unwrap();
        assert!(c.sequences.iter().all(|s| (1..=12).contains(&s.len())));
        let mean = c.num_tokens() as f64 / c.len() as f64;
        assert!((mean - 3.0).abs() < 0.4, "mean length {mean}");
    }

    #[test]
    fn fully_separable_words_determine_tags() {
        let cfg = SyntheticConfig {
            tags: 2,
            vocab: 2,
            separability: 1.0,
            count: 50,
            ..Default::default()
        };
        let c = generate_synthetic_hmm(&cfg).unwrap();
        for s in &c.sequences {
            for (tok, &g) in s.tokens.iter().zip(s.gold.as_ref().unwrap()) {
                assert_eq!(tok[0], word_name(g));
            }
        }
    }
}
