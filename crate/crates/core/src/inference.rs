//! Exact and top-n probabilistic inference.
//!
//! The CRF gradient and the top-n update term are both built from per-position
//! "mass": how much probability each candidate distribution puts on tag `k` at
//! position `t` (and on each tag pair), minus the gold indicator. Turning that
//! mass into feature space gives `E[F] - F(x, y*)` for the exact distribution and
//! `Σ_k P_k F(x, y_k) - F(x, y*)` for the top-n distribution.

use std::io::Write;

use crate::error::{Error, Result};
use crate::features::{FeatureIndex, Instance, SparseVector};
use crate::lattice::{Lattice, WeightLookup};
use crate::model::Model;
use crate::nbest::{astar_nbest, beam_nbest, NBestList};

/// `log Σ exp(x)`; `-inf` for an empty input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    lse(&xs)
}

fn lse(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log-partition function and posterior marginals of one lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub log_z: f64,
    len: usize,
    tags: usize,
    node: Vec<f64>,
    edge: Vec<f64>,
}

impl Marginals {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// P(y_t = k | x).
    pub fn node(&self, t: usize, k: usize) -> f64 {
        self.node[t * self.tags + k]
    }

    /// P(y_{t-1} = a, y_t = b | x), for `1 <= t < len`.
    pub fn edge(&self, t: usize, a: usize, b: usize) -> f64 {
        self.edge[((t - 1) * self.tags + a) * self.tags + b]
    }
}

/// Forward-backward in log space.
pub fn forward_backward(l: &Lattice) -> Marginals {
    let (n, k) = (l.len(), l.num_tags());
    let mut alpha = vec![0.0; n * k];
    let mut beta = vec![0.0; n * k];
    let mut buf = vec![0.0; k];
    for j in 0..k {
        alpha[j] = l.emit(0, j);
    }
    for t in 1..n {
        for b in 0..k {
            for a in 0..k {
                buf[a] = alpha[(t - 1) * k + a] + l.trans(a, b);
            }
            alpha[t * k + b] = lse(&buf) + l.emit(t, b);
        }
    }
    for t in (0..n - 1).rev() {
        for a in 0..k {
            for b in 0..k {
                buf[b] = l.step(t + 1, a, b) + beta[(t + 1) * k + b];
            }
            beta[t * k + a] = lse(&buf);
        }
    }
    let log_z = lse(&alpha[(n - 1) * k..]);
    let node = alpha
        .iter()
        .zip(&beta)
        .map(|(a, b)| (a + b - log_z).exp())
        .collect();
    let mut edge = vec![0.0; (n - 1) * k * k];
    for t in 1..n {
        for a in 0..k {
            for b in 0..k {
                edge[((t - 1) * k + a) * k + b] =
                    (alpha[(t - 1) * k + a] + l.step(t, a, b) + beta[t * k + b] - log_z).exp();
            }
        }
    }
    Marginals {
        log_z,
        len: n,
        tags: k,
        node,
        edge,
    }
}

/// log P(y | x, w) under the full (all taggings) normalizer.
pub fn sequence_log_prob(l: &Lattice, y: &[usize]) -> f64 {
    (l.path_score(y) - forward_backward(l).log_z).min(0.0)
}

/// Fills `prob` with the log-linear distribution over the listed candidates.
pub fn topn_distribution(mut nb: NBestList) -> NBestList {
    assert!(!nb.is_empty(), "empty n-best list");
    let top = nb.scores().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = nb.scores().map(|s| (s - top).exp()).sum();
    for e in &mut nb.entries {
        e.prob = (e.score - top).exp() / total;
    }
    nb
}

/// Per-position tag mass and per-transition pair mass (summed over positions).
#[derive(Debug, Clone, PartialEq)]
pub struct TagMass {
    len: usize,
    tags: usize,
    node: Vec<f64>,
    pairs: Vec<f64>,
}

impl TagMass {
    pub fn zeros(len: usize, tags: usize) -> Self {
        Self {
            len,
            tags,
            node: vec![0.0; len * tags],
            pairs: vec![0.0; tags * tags],
        }
    }

    /// Adds `weight` times the indicator of tagging `y`.
    pub fn add_path(&mut self, y: &[usize], weight: f64) {
        let k = self.tags;
        for (t, &tag) in y.iter().enumerate() {
            self.node[t * k + tag] += weight;
            if t > 0 {
                self.pairs[y[t - 1] * k + tag] += weight;
            }
        }
    }

    pub fn add_marginals(&mut self, m: &Marginals) {
        let k = self.tags;
        for (slot, p) in self.node.iter_mut().zip(&m.node) {
            *slot += p;
        }
        for t in 1..self.len {
            for ab in 0..k * k {
                self.pairs[ab] += m.edge[(t - 1) * k * k + ab];
            }
        }
    }

    /// Calls `f(feature id, value)` for every nonzero feature-space entry; ids
    /// may repeat across positions.
    pub fn for_each_feature(&self, index: &FeatureIndex, inst: &Instance, mut f: impl FnMut(usize, f64)) {
        let k = self.tags;
        for (t, row) in inst.obs.iter().enumerate() {
            let mass = &self.node[t * k..(t + 1) * k];
            for (tag, &m) in mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                for &(attr, v) in row {
                    f(index.emission_id(attr, tag), m * v);
                }
            }
        }
        if index.transitions() {
            for a in 0..k {
                for b in 0..k {
                    let m = self.pairs[a * k + b];
                    if m != 0.0 {
                        f(index.transition_id(a, b).unwrap(), m);
                    }
                }
            }
        }
    }

    pub fn to_sparse(&self, index: &FeatureIndex, inst: &Instance) -> SparseVector {
        let mut pairs = Vec::new();
        self.for_each_feature(index, inst, |id, v| pairs.push((id, v)));
        SparseVector::from_pairs(pairs)
    }
}

/// Mass of the exact distribution minus the gold tagging.
pub fn crf_mass(l: &Lattice, gold: &[usize]) -> (TagMass, f64) {
    let m = forward_backward(l);
    let mut mass = TagMass::zeros(l.len(), l.num_tags());
    mass.add_marginals(&m);
    mass.add_path(gold, -1.0);
    (mass, m.log_z)
}

/// Mass of the normalized candidate list minus the gold tagging.
pub fn topn_mass(nb: &NBestList, gold: &[usize], tags: usize) -> TagMass {
    let mut mass = TagMass::zeros(gold.len(), tags);
    for e in &nb.entries {
        mass.add_path(&e.tags, e.prob);
    }
    mass.add_path(gold, -1.0);
    mass
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    CrfGradient,
    SapoTerm,
}

/// Per-sample update direction: `sparse + decay * w`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateTerm {
    pub sparse: SparseVector,
    /// `λ / |S|`, the coefficient of `w` (∇R(w) = w).
    pub decay: f64,
    pub kind: UpdateKind,
}

impl UpdateTerm {
    /// Full coordinate `id` of the update direction.
    pub fn coordinate<W: WeightLookup + ?Sized>(&self, id: usize, weights: &W) -> f64 {
        self.sparse.get(id) + self.decay * weights.weight(id)
    }
}

/// Top-n search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Search {
    AStar,
    Beam(usize),
}

impl Search {
    pub fn run(self, l: &Lattice, n: usize) -> NBestList {
        match self {
            Search::AStar => astar_nbest(l, n),
            Search::Beam(width) => beam_nbest(l, n, width),
        }
    }
}

fn decay_coefficient(l2: f64, train_size: usize) -> f64 {
    if l2 == 0.0 {
        0.0
    } else {
        l2 / train_size as f64
    }
}

/// Stochastic gradient of the per-sample regularized negative log-likelihood:
/// `E[F] - F(x, y*) + (λ/|S|) w`.
pub fn crf_stochastic_gradient(m: &Model, inst: &Instance, l2: f64, train_size: usize) -> Result<UpdateTerm> {
    let gold = inst.gold(0)?;
    let l = m.lattice(inst);
    let (mass, _) = crf_mass(&l, gold);
    Ok(UpdateTerm {
        sparse: mass.to_sparse(&m.index, inst),
        decay: decay_coefficient(l2, train_size),
        kind: UpdateKind::CrfGradient,
    })
}

/// Top-n update term: `Σ_k P_k F(x, y_k) - F(x, y*) + (λ/|S|) w`, where the
/// candidates are exactly the search output.
pub fn sapo_update_term(
    m: &Model,
    inst: &Instance,
    n: usize,
    l2: f64,
    train_size: usize,
    search: Search,
) -> Result<UpdateTerm> {
    let gold = inst.gold(0)?;
    let l = m.lattice(inst);
    let nb = topn_distribution(search.run(&l, n));
    Ok(UpdateTerm {
        sparse: topn_mass(&nb, gold, m.num_tags()).to_sparse(&m.index, inst),
        decay: decay_coefficient(l2, train_size),
        kind: UpdateKind::SapoTerm,
    })
}

/// f(w) = -Σ log P(y*|x, w) + λ ½‖w‖².
pub fn objective_value(m: &Model, data: &[Instance], l2: f64) -> Result<f64> {
    objective_with(&m.index, &m.weights, data, l2)
}

pub(crate) fn objective_with(index: &FeatureIndex, weights: &[f64], data: &[Instance], l2: f64) -> Result<f64> {
    let mut nll = 0.0;
    for (i, inst) in data.iter().enumerate() {
        let gold = inst.gold(i)?;
        let l = Lattice::from_instance(index, inst, weights);
        nll -= sequence_log_prob(&l, gold);
    }
    let reg = if l2 == 0.0 {
        0.0
    } else {
        0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
    };
    Ok(nll + reg)
}

/// Gap between the exact gradient and the top-n update term for one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaReport {
    pub n: usize,
    pub l2_norm: f64,
    pub linf_norm: f64,
    /// 1 - Z_n / Z.
    pub tail_mass: f64,
}

/// δ = ∇f_z(w) - s_z(w) for each `n` in `n_list`, using exact A* candidates.
///
/// The decay parts of both terms are identical and cancel, so δ is evaluated on
/// the coordinates touched by either sparse part.
pub fn delta_diagnostic(
    m: &Model,
    inst: &Instance,
    n_list: &[usize],
    l2: f64,
    train_size: usize,
) -> Result<Vec<DeltaReport>> {
    let gold = inst.gold(0)?;
    if n_list.contains(&0) {
        return Err(Error::Config("n must be positive".into()));
    }
    let l = m.lattice(inst);
    let exact = crf_stochastic_gradient(m, inst, l2, train_size)?;
    let log_z = forward_backward(&l).log_z;
    let Some(&max_n) = n_list.iter().max() else {
        return Ok(Vec::new());
    };
    // One search; every shorter list is a prefix of the longest one.
    let full = astar_nbest(&l, max_n);
    let top = full.entries.first().map(|e| e.score).unwrap_or(0.0);
    let mut prefix_sums = Vec::with_capacity(full.len());
    let mut acc = 0.0;
    for e in &full.entries {
        acc += (e.score - top).exp();
        prefix_sums.push(acc);
    }
    let mut reports = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut nb = full.clone();
        nb.entries.truncate(n);
        nb.n_requested = n;
        let kept = nb.len();
        let nb = topn_distribution(nb);
        let approx = topn_mass(&nb, gold, m.num_tags()).to_sparse(&m.index, inst);
        let delta = exact.sparse.add_scaled(&approx, -1.0);
        let l2_norm = delta.norm_sq().sqrt();
        let linf_norm = delta.entries().iter().map(|&(_, v)| v.abs()).fold(0.0, f64::max);
        let log_zn = top + prefix_sums[kept - 1].ln();
        let tail_mass = if kept as u128 == l.num_paths() {
            0.0
        } else {
            (1.0 - (log_zn - log_z).exp()).clamp(0.0, 1.0)
        };
        reports.push(DeltaReport {
            n,
            l2_norm,
            linf_norm,
            tail_mass,
        });
    }
    Ok(reports)
}

/// Writes delta reports averaged over a probed sample set: one row per `n`
/// (in the order of the first sample), then a `mean` row over all of them.
pub fn write_delta_csv<W: Write>(per_sample: &[Vec<DeltaReport>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "l2_delta", "linf_delta", "tail_mass"])?;
    let Some(first) = per_sample.first() else {
        w.flush()?;
        return Ok(());
    };
    let count = per_sample.len() as f64;
    let mut rows = Vec::with_capacity(first.len());
    for (j, r) in first.iter().enumerate() {
        let mean = |f: fn(&DeltaReport) -> f64| per_sample.iter().map(|s| f(&s[j])).sum::<f64>() / count;
        let row = [mean(|d| d.l2_norm), mean(|d| d.linf_norm), mean(|d| d.tail_mass)];
        w.write_record([r.n.to_string(), row[0].to_string(), row[1].to_string(), row[2].to_string()])?;
        rows.push(row);
    }
    let m = rows.len() as f64;
    let col = |i: usize| rows.iter().map(|r| r[i]).sum::<f64>() / m;
    w.write_record(["mean".to_string(), col(0).to_string(), col(1).to_string(), col(2).to_string()])?;
    w.flush()?;
    Ok(())
}
