//! Score lattices, Viterbi and the backward-Viterbi heuristic.
//!
//! Every routine that reports a path score accumulates it the same way,
//! `emit[0][y0]` followed by `+ (trans[y(t-1)][y(t)] + emit[t][y(t)])` for each
//! later position, so scores produced by different searches compare bit-for-bit.
//! Ties are broken toward the lexicographically smallest tag sequence.

use crate::features::{FeatureIndex, Instance};

/// Read access to a weight vector.
pub trait WeightLookup {
    fn weight(&self, id: usize) -> f64;
}

impl WeightLookup for [f64] {
    #[inline]
    fn weight(&self, id: usize) -> f64 {
        self[id]
    }
}

impl WeightLookup for Vec<f64> {
    #[inline]
    fn weight(&self, id: usize) -> f64 {
        self[id]
    }
}

/// Emission scores (`len × tags`) and transition scores (`tags × tags`) for
/// one sequence under fixed weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    len: usize,
    tags: usize,
    emit: Vec<f64>,
    trans: Vec<f64>,
}

impl Lattice {
    /// Panics if the shapes are inconsistent or `len`/`tags` is zero.
    pub fn new(len: usize, tags: usize, emit: Vec<f64>, trans: Vec<f64>) -> Self {
        assert!(len >= 1 && tags >= 1, "empty lattice");
        assert_eq!(emit.len(), len * tags, "emission shape");
        assert_eq!(trans.len(), tags * tags, "transition shape");
        Self { len, tags, emit, trans }
    }

    pub fn from_rows(emit: &[Vec<f64>], trans: &[Vec<f64>]) -> Self {
        let tags = trans.len();
        Self::new(
            emit.len(),
            tags,
            emit.iter().flatten().copied().collect(),
            trans.iter().flatten().copied().collect(),
        )
    }

    pub fn from_instance<W: WeightLookup + ?Sized>(index: &FeatureIndex, inst: &Instance, weights: &W) -> Self {
        let k = index.num_tags();
        let mut emit = vec![0.0; inst.len() * k];
        for (t, row) in inst.obs.iter().enumerate() {
            let out = &mut emit[t * k..(t + 1) * k];
            for &(attr, v) in row {
                let base = index.emission_id(attr, 0);
                for (tag, slot) in out.iter_mut().enumerate() {
                    *slot += v * weights.weight(base + tag);
                }
            }
        }
        let mut trans = vec![0.0; k * k];
        if index.transitions() {
            for a in 0..k {
                for b in 0..k {
                    trans[a * k + b] = weights.weight(index.transition_id(a, b).unwrap());
                }
            }
        }
        Self::new(inst.len(), k, emit, trans)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_tags(&self) -> usize {
        self.tags
    }

    #[inline]
    pub fn emit(&self, t: usize, k: usize) -> f64 {
        self.emit[t * self.tags + k]
    }

    #[inline]
    pub fn trans(&self, prev: usize, cur: usize) -> f64 {
        self.trans[prev * self.tags + cur]
    }

    /// Score increment for moving to `cur` at position `t ≥ 1`.
    #[inline]
    pub fn step(&self, t: usize, prev: usize, cur: usize) -> f64 {
        self.trans(prev, cur) + self.emit(t, cur)
    }

    /// Canonical score of a full tagging.
    pub fn path_score(&self, y: &[usize]) -> f64 {
        assert_eq!(y.len(), self.len);
        let mut s = self.emit(0, y[0]);
        for t in 1..self.len {
            s += self.step(t, y[t - 1], y[t]);
        }
        s
    }

    /// Number of taggings, saturating at `u128::MAX`.
    pub fn num_paths(&self) -> u128 {
        (self.tags as u128).checked_pow(self.len as u32).unwrap_or(u128::MAX)
    }

    pub fn is_finite(&self) -> bool {
        self.emit.iter().chain(&self.trans).all(|x| x.is_finite())
    }
}

/// Maximum-score tagging and its score.
pub fn viterbi(l: &Lattice) -> (Vec<usize>, f64) {
    let (n, k) = (l.len(), l.num_tags());
    let mut delta: Vec<f64> = (0..k).map(|j| l.emit(0, j)).collect();
    // rank[j]: lexicographic rank of the best prefix ending in j.
    let mut rank: Vec<usize> = (0..k).collect();
    let mut back = vec![0usize; n * k];
    let mut next = vec![0.0; k];
    let mut order: Vec<usize> = (0..k).collect();
    for t in 1..n {
        for cur in 0..k {
            let mut best = 0;
            let mut best_score = delta[0] + l.step(t, 0, cur);
            for prev in 1..k {
                let s = delta[prev] + l.step(t, prev, cur);
                if s > best_score || (s == best_score && rank[prev] < rank[best]) {
                    best = prev;
                    best_score = s;
                }
            }
            next[cur] = best_score;
            back[t * k + cur] = best;
        }
        std::mem::swap(&mut delta, &mut next);
        order.sort_by_key(|&j| (rank[back[t * k + j]], j));
        let mut new_rank = vec![0; k];
        for (r, &j) in order.iter().enumerate() {
            new_rank[j] = r;
        }
        rank = new_rank;
    }
    let mut last = 0;
    for j in 1..k {
        if delta[j] > delta[last] || (delta[j] == delta[last] && rank[j] < rank[last]) {
            last = j;
        }
    }
    let score = delta[last];
    let mut path = vec![0; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = back[t * k + path[t]];
    }
    (path, score)
}

/// Best suffix-completion scores: `h[t][k]` is the best score obtainable from
/// positions `t+1..` given tag `k` at `t`, excluding `emit[t][k]` itself.
pub fn backward_viterbi(l: &Lattice) -> Vec<Vec<f64>> {
    let (n, k) = (l.len(), l.num_tags());
    let mut h = vec![vec![0.0; k]; n];
    for t in (0..n - 1).rev() {
        for a in 0..k {
            let mut best = f64::NEG_INFINITY;
            for b in 0..k {
                best = best.max(l.step(t + 1, a, b) + h[t + 1][b]);
            }
            h[t][a] = best;
        }
    }
    h
}
