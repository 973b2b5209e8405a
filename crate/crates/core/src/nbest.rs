//! Top-n search over a lattice: exact A*, pruned beam search and brute-force
//! enumeration.
//!
//! All three return candidates ordered by score (descending), ties broken by the
//! lexicographically smaller tag sequence.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::lattice::{backward_viterbi, Lattice};

/// Largest lattice [`enumerate_all`] accepts, in number of taggings.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct NBestEntry {
    pub tags: Vec<usize>,
    pub score: f64,
    /// Probability within the list; `0.0` until normalized by
    /// [`crate::inference::topn_distribution`].
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NBestList {
    pub entries: Vec<NBestEntry>,
    pub n_requested: usize,
    /// Fewer than `n_requested` taggings exist.
    pub exhausted: bool,
}

impl NBestList {
    fn new(mut entries: Vec<NBestEntry>, n: usize, total: u128) -> Self {
        entries.sort_by(|a, b| rank_order(&a.tags, a.score, &b.tags, b.score));
        entries.truncate(n);
        Self {
            entries,
            n_requested: n,
            exhausted: total < n as u128,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.score)
    }
}

/// Global candidate order: higher score first, then lexicographically smaller.
pub fn rank_order(a: &[usize], sa: f64, b: &[usize], sb: f64) -> Ordering {
    sb.partial_cmp(&sa).unwrap_or(Ordering::Equal).then_with(|| a.cmp(b))
}

struct Hypothesis {
    priority: f64,
    prefix_score: f64,
    tags: Vec<usize>,
}

impl PartialEq for Hypothesis {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Hypothesis {}

impl PartialOrd for Hypothesis {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Hypothesis {
    // Max-heap: larger priority pops first, then the lexicographically smaller
    // prefix (a prefix sorts before its extensions).
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .partial_cmp(&other.priority)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.tags.cmp(&self.tags))
    }
}

/// Exact top-n taggings by forward A* with the backward-Viterbi heuristic.
pub fn astar_nbest(l: &Lattice, n: usize) -> NBestList {
    assert!(n >= 1, "n must be positive");
    debug_assert!(l.is_finite());
    let (len, k) = (l.len(), l.num_tags());
    let h = backward_viterbi(l);
    let mut agenda = BinaryHeap::new();
    for tag in 0..k {
        let g = l.emit(0, tag);
        agenda.push(Hypothesis {
            priority: g + h[0][tag],
            prefix_score: g,
            tags: vec![tag],
        });
    }
    let mut out = Vec::with_capacity(n.min(1024));
    while let Some(hyp) = agenda.pop() {
        let t = hyp.tags.len();
        if t == len {
            out.push(NBestEntry {
                tags: hyp.tags,
                score: hyp.prefix_score,
                prob: 0.0,
            });
            if out.len() == n {
                break;
            }
            continue;
        }
        let last = hyp.tags[t - 1];
        for tag in 0..k {
            let g = hyp.prefix_score + l.step(t, last, tag);
            let mut tags = Vec::with_capacity(len);
            tags.extend_from_slice(&hyp.tags);
            tags.push(tag);
            agenda.push(Hypothesis {
                priority: g + h[t][tag],
                prefix_score: g,
                tags,
            });
        }
    }
    NBestList {
        entries: out,
        n_requested: n,
        exhausted: l.num_paths() < n as u128,
    }
}

/// Beam nodes of every position, stored column-wise.
#[derive(Default)]
struct Arena {
    score: Vec<f64>,
    tag: Vec<usize>,
    /// Index of the parent node; unused at the first position.
    parent: Vec<usize>,
}

impl Arena {
    fn push(&mut self, score: f64, tag: usize, parent: usize) {
        self.score.push(score);
        self.tag.push(tag);
        self.parent.push(parent);
    }

    fn len(&self) -> usize {
        self.score.len()
    }

    fn clear(&mut self) {
        self.score.clear();
        self.tag.clear();
        self.parent.clear();
    }

    /// Lexicographic order of the prefixes ending at nodes `a` and `b`, which
    /// must sit at the same position `t`.
    fn lex_cmp(&self, mut a: usize, mut b: usize, mut t: usize) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        // walk up to the first position where the prefixes differ
        while t > 0 && self.parent[a] != self.parent[b] {
            a = self.parent[a];
            b = self.parent[b];
            t -= 1;
        }
        self.tag[a].cmp(&self.tag[b])
    }

    /// Global order of nodes `a` and `b` at position `t`.
    fn rank(&self, a: usize, b: usize, t: usize) -> Ordering {
        self.score[b]
            .partial_cmp(&self.score[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| self.lex_cmp(a, b, t))
    }
}

/// Approximate top-n taggings by left-to-right beam search keeping at most
/// `beam` partial hypotheses per position.
///
/// Hypotheses that end in the same tag compete for at most `n` slots: one with
/// `n` better same-tag rivals cannot reach the final list, so it is dropped
/// before the beam is cut. Score ties are broken by comparing prefixes, as in
/// the global order, so a beam that never binds returns exactly the
/// [`astar_nbest`] list.
pub fn beam_nbest(l: &Lattice, n: usize, beam: usize) -> NBestList {
    BeamSearch::default().run(l, n, beam)
}

/// Reusable buffers for [`beam_nbest`]; running many searches through one
/// value avoids reallocating them per lattice.
#[derive(Default)]
pub struct BeamSearch {
    arena: Arena,
    groups: Vec<(usize, usize, usize)>,
    next_groups: Vec<(usize, usize, usize)>,
    head_pos: Vec<usize>,
    head_score: Vec<f64>,
    steps: Vec<f64>,
    last: Vec<usize>,
}

impl BeamSearch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Same as [`beam_nbest`].
    pub fn run(&mut self, l: &Lattice, n: usize, beam: usize) -> NBestList {
        assert!(n >= 1, "n must be positive");
        assert!(beam >= 1, "beam must be positive");
        debug_assert!(l.is_finite());
        let (len, k) = (l.len(), l.num_tags());
        let Self {
            arena,
            groups,
            next_groups,
            head_pos,
            head_score,
            steps,
            last,
        } = self;
        arena.clear();
        for tag in 0..k {
            arena.push(l.emit(0, tag), tag, 0);
        }
        let mut lo = 0;
        let mut hi = k;
        // (tag, start, end) of each same-tag run of the previous position, best first
        groups.clear();
        groups.extend((0..k).map(|tag| (tag, tag, tag + 1)));
        next_groups.clear();
        head_pos.resize(k, 0);
        head_score.resize(k, 0.0);
        steps.resize(k, 0.0);
        for t in 0..len {
            if t > 0 {
                for tag in 0..k {
                    // merge the groups' best-first lists, n times taking the best
                    // head; an exhausted group's head scores -inf
                    let g_count = groups.len();
                    for (g, &(ptag, from, _)) in groups.iter().enumerate() {
                        let step = l.step(t, ptag, tag);
                        steps[g] = step;
                        head_pos[g] = from;
                        head_score[g] = arena.score[from] + step;
                    }
                    let start = arena.len();
                    for _ in 0..n {
                        let mut g = usize::MAX;
                        let mut best = f64::NEG_INFINITY;
                        for (h, &score) in head_score[..g_count].iter().enumerate() {
                            if score > best
                                || score == best
                                    && g != usize::MAX
                                    && arena.lex_cmp(head_pos[h], head_pos[g], t - 1).is_lt()
                            {
                                g = h;
                                best = score;
                            }
                        }
                        if g == usize::MAX {
                            break;
                        }
                        let p = head_pos[g];
                        arena.push(best, tag, p);
                        head_pos[g] = p + 1;
                        head_score[g] = if p + 1 < groups[g].2 {
                            arena.score[p + 1] + steps[g]
                        } else {
                            f64::NEG_INFINITY
                        };
                    }
                    if arena.len() > start {
                        next_groups.push((tag, start, arena.len()));
                    }
                }
                lo = hi;
                hi = arena.len();
                std::mem::swap(groups, next_groups);
                next_groups.clear();
            }
            if hi - lo > beam {
                cut(arena, lo, beam, t);
                hi = arena.len();
                groups.clear();
                let mut start = lo;
                for p in lo + 1..=hi {
                    if p == hi || arena.tag[p] != arena.tag[start] {
                        groups.push((arena.tag[start], start, p));
                        start = p;
                    }
                }
            }
        }
        last.clear();
        last.extend(lo..hi);
        let rank = |&a: &usize, &b: &usize| arena.rank(a, b, len - 1);
        if last.len() > n {
            last.select_nth_unstable_by(n - 1, rank);
            last.truncate(n);
        }
        last.sort_unstable_by(rank);
        let entries = last
            .iter()
            .map(|&i| {
                let mut tags = vec![0; len];
                let mut j = i;
                for s in (0..len).rev() {
                    tags[s] = arena.tag[j];
                    j = arena.parent[j];
                }
                NBestEntry {
                    tags,
                    score: arena.score[i],
                    prob: 0.0,
                }
            })
            .collect();
        NBestList {
            entries,
            n_requested: n,
            exhausted: l.num_paths() < n as u128,
        }
    }
}

/// Keeps the best `beam` nodes from `lo` on, regrouped by tag, best first.
fn cut(arena: &mut Arena, lo: usize, beam: usize, t: usize) {
    let mut keep: Vec<usize> = (lo..arena.len()).collect();
    keep.select_nth_unstable_by(beam - 1, |&a, &b| arena.rank(a, b, t));
    keep.truncate(beam);
    keep.sort_unstable_by(|&a, &b| arena.tag[a].cmp(&arena.tag[b]).then_with(|| arena.rank(a, b, t)));
    let kept: Vec<(f64, usize, usize)> = keep
        .iter()
        .map(|&i| (arena.score[i], arena.tag[i], arena.parent[i]))
        .collect();
    arena.score.truncate(lo);
    arena.tag.truncate(lo);
    arena.parent.truncate(lo);
    for (score, tag, parent) in kept {
        arena.push(score, tag, parent);
    }
}

/// Every tagging with its score, in the global order. Test oracle; refuses
/// lattices with more than [`ENUMERATION_LIMIT`] taggings.
pub fn enumerate_all(l: &Lattice) -> Result<NBestList> {
    let total = l.num_paths();
    if total > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            paths: total,
            limit: ENUMERATION_LIMIT,
        });
    }
    let (len, k) = (l.len(), l.num_tags());
    let mut entries = Vec::with_capacity(total as usize);
    let mut y = vec![0usize; len];
    loop {
        entries.push(NBestEntry {
            tags: y.clone(),
            score: l.path_score(&y),
            prob: 0.0,
        });
        // odometer, last position fastest
        let mut t = len;
        loop {
            if t == 0 {
                return Ok(NBestList::new(entries, total as usize, total));
            }
            t -= 1;
            y[t] += 1;
            if y[t] < k {
                break;
            }
            y[t] = 0;
        }
    }
}
