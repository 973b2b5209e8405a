//! Sequences, tagsets, the feature index and sparse feature vectors.
//!
//! Feature layout: when transitions are enabled, ids `0..K*K` are the tag-pair
//! indicators (`prev * K + cur`). Emission features follow, one block of `K`
//! ids per observation attribute: `base + attr * K + tag`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::template::TemplateSet;

/// One sample: observation tokens (each a row of string columns) and optional
/// gold tag ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub tokens: Vec<Vec<String>>,
    pub gold: Option<Vec<usize>>,
}

impl Sequence {
    pub fn new(tokens: Vec<Vec<String>>, gold: Option<Vec<usize>>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        if let Some(g) = &gold {
            if g.len() != tokens.len() {
                return Err(Error::LengthMismatch {
                    what: "gold",
                    expected: tokens.len(),
                    got: g.len(),
                });
            }
        }
        Ok(Self { tokens, gold })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Ordered, bijective tag alphabet.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tagset {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl Tagset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tags<I, S>(tags: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = Self::new();
        for t in tags {
            let t = t.into();
            if set.get(&t).is_some() {
                return Err(Error::Config(format!("duplicate tag `{t}`")));
            }
            set.intern(&t);
        }
        Ok(set)
    }

    /// Id of `tag`, adding it at the end if new.
    pub fn intern(&mut self, tag: &str) -> usize {
        if let Some(&id) = self.index.get(tag) {
            return id;
        }
        let id = self.tags.len();
        self.tags.push(tag.to_string());
        self.index.insert(tag.to_string(), id);
        id
    }

    pub fn get(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn id(&self, tag: &str) -> Result<usize> {
        self.get(tag).ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }

    pub fn name(&self, id: usize) -> &str {
        &self.tags[id]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// Sparse real vector over feature ids: ids strictly increasing, no zeros.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Canonicalizes arbitrary `(id, value)` pairs: sorts by id, sums duplicates,
    /// drops zeros.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|&(id, _)| id);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (id, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == id => last.1 += v,
                _ => entries.push((id, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, id: usize) -> f64 {
        self.entries
            .binary_search_by_key(&id, |&(i, _)| i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries.iter().map(|&(id, v)| v * weights[id]).sum()
    }

    pub fn dot_sparse(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    /// `self + scale * other`, canonicalized.
    pub fn add_scaled(&self, other: &SparseVector, scale: f64) -> SparseVector {
        let mut pairs = self.entries.clone();
        pairs.extend(other.entries.iter().map(|&(id, v)| (id, scale * v)));
        SparseVector::from_pairs(pairs)
    }
}

/// Per-position observation attributes of one sequence, resolved against a
/// frozen index: `obs[t]` lists `(attr id, value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub obs: Vec<Vec<(u32, f64)>>,
    pub gold: Option<Vec<usize>>,
}

impl Instance {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn gold(&self, sample: usize) -> Result<&[usize]> {
        self.gold.as_deref().ok_or(Error::MissingGold(sample))
    }
}

/// Observation-attribute dictionary plus the derived feature-id layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureIndex {
    num_tags: usize,
    transitions: bool,
    attrs: HashMap<String, u32>,
    names: Vec<String>,
}

impl FeatureIndex {
    /// Empty index; attributes are added with [`FeatureIndex::scan`] or
    /// [`FeatureIndex::insert`].
    pub fn new(num_tags: usize, transitions: bool) -> Self {
        Self {
            num_tags,
            transitions,
            attrs: HashMap::new(),
            names: Vec::new(),
        }
    }

    /// Builds an index from a training scan. Attribute ids follow first
    /// occurrence (sequence order, then position, then template order).
    pub fn build(templates: &TemplateSet, num_tags: usize, data: &[Sequence]) -> Result<Self> {
        let mut index = Self::new(num_tags, templates.transitions);
        for seq in data {
            index.scan(templates, seq)?;
        }
        Ok(index)
    }

    /// Adds the attributes of `seq` and returns its instance.
    pub fn scan(&mut self, templates: &TemplateSet, seq: &Sequence) -> Result<Instance> {
        let mut key = String::new();
        let mut obs = Vec::with_capacity(seq.len());
        for t in 0..seq.len() {
            let mut row = Vec::with_capacity(templates.templates.len());
            for tpl in &templates.templates {
                if let Some(v) = tpl.expand(&seq.tokens, t, &mut key)? {
                    row.push((self.insert(&key), v));
                }
            }
            obs.push(row);
        }
        Ok(Instance {
            obs,
            gold: seq.gold.clone(),
        })
    }

    pub fn insert(&mut self, key: &str) -> u32 {
        if let Some(&id) = self.attrs.get(key) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(key.to_string());
        self.attrs.insert(key.to_string(), id);
        id
    }

    /// Resolves a sequence against the frozen index; unseen attributes are dropped.
    pub fn encode(&self, templates: &TemplateSet, seq: &Sequence) -> Result<Instance> {
        let mut key = String::new();
        let mut obs = Vec::with_capacity(seq.len());
        for t in 0..seq.len() {
            let mut row = Vec::with_capacity(templates.templates.len());
            for tpl in &templates.templates {
                if let Some(v) = tpl.expand(&seq.tokens, t, &mut key)? {
                    if let Some(&id) = self.attrs.get(key.as_str()) {
                        row.push((id, v));
                    }
                }
            }
            obs.push(row);
        }
        if let Some(g) = &seq.gold {
            if let Some(&bad) = g.iter().find(|&&k| k >= self.num_tags) {
                return Err(Error::UnknownTag(format!("#{bad}")));
            }
        }
        Ok(Instance {
            obs,
            gold: seq.gold.clone(),
        })
    }

    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    pub fn transitions(&self) -> bool {
        self.transitions
    }

    pub fn num_attrs(&self) -> usize {
        self.names.len()
    }

    pub fn attr_name(&self, attr: u32) -> &str {
        &self.names[attr as usize]
    }

    pub fn attr_id(&self, key: &str) -> Option<u32> {
        self.attrs.get(key).copied()
    }

    fn emission_base(&self) -> usize {
        if self.transitions {
            self.num_tags * self.num_tags
        } else {
            0
        }
    }

    /// Total number of features (length of the weight vector).
    pub fn num_features(&self) -> usize {
        self.emission_base() + self.names.len() * self.num_tags
    }

    pub fn emission_id(&self, attr: u32, tag: usize) -> usize {
        self.emission_base() + attr as usize * self.num_tags + tag
    }

    pub fn transition_id(&self, prev: usize, cur: usize) -> Option<usize> {
        self.transitions.then(|| prev * self.num_tags + cur)
    }

    /// Inverse of the id layout.
    pub fn describe(&self, id: usize) -> FeatureKey {
        let base = self.emission_base();
        if id < base {
            FeatureKey::Transition {
                prev: id / self.num_tags,
                cur: id % self.num_tags,
            }
        } else {
            let e = id - base;
            FeatureKey::Emission {
                attr: (e / self.num_tags) as u32,
                tag: e % self.num_tags,
            }
        }
    }

    fn check_tags(&self, inst: &Instance, y: &[usize]) -> Result<()> {
        if y.len() != inst.len() {
            return Err(Error::LengthMismatch {
                what: "tag sequence",
                expected: inst.len(),
                got: y.len(),
            });
        }
        if let Some(&bad) = y.iter().find(|&&k| k >= self.num_tags) {
            return Err(Error::UnknownTag(format!("#{bad}")));
        }
        Ok(())
    }

    /// Global feature vector F(x, y): emission features at every position plus
    /// transition features for every adjacent pair.
    pub fn extract(&self, inst: &Instance, y: &[usize]) -> Result<SparseVector> {
        self.check_tags(inst, y)?;
        let mut pairs = Vec::new();
        for (t, row) in inst.obs.iter().enumerate() {
            pairs.extend(row.iter().map(|&(a, v)| (self.emission_id(a, y[t]), v)));
            if t > 0 {
                if let Some(id) = self.transition_id(y[t - 1], y[t]) {
                    pairs.push((id, 1.0));
                }
            }
        }
        Ok(SparseVector::from_pairs(pairs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKey {
    Transition { prev: usize, cur: usize },
    Emission { attr: u32, tag: usize },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(words: &[&str], gold: Option<Vec<usize>>) -> Sequence {
        Sequence::new(words.iter().map(|w| vec![w.to_string()]).collect(), gold).unwrap()
    }

    #[test]
    fn sequence_invariants() {
        assert!(matches!(Sequence::new(vec![], None), Err(Error::EmptySequence)));
        assert!(Sequence::new(vec![vec!["a".into()]], Some(vec![0, 1])).is_err());
    }

    #[test]
    fn tagset_is_bijective_and_ordered() {
        let mut ts = Tagset::from_tags(["DT", "NN"]).unwrap();
        assert_eq!(ts.intern("VB"), 2);
        assert_eq!(ts.intern("DT"), 0);
        assert_eq!(ts.name(1), "NN");
        assert!(Tagset::from_tags(["A", "A"]).is_err());
        assert!(ts.id("XX").is_err());
    }

    #[test]
    fn sparse_vector_canonical() {
        let v = SparseVector::from_pairs(vec![(3, 1.0), (1, 2.0), (3, -1.0), (1, 0.5)]);
        assert_eq!(v.entries(), &[(1, 2.5)]);
        let w = SparseVector::from_pairs(vec![(1, 2.0), (4, 1.0)]);
        assert_eq!(v.dot_sparse(&w), 5.0);
        assert_eq!(w.norm_sq(), 5.0);
        assert_eq!(v.add_scaled(&w, -1.0).entries(), &[(1, 0.5), (4, -1.0)]);
    }

    #[test]
    fn single_token_has_no_transition() {
        let tpl = TemplateSet::parse("U00:%x[0,0]\nB").unwrap();
        let s = seq(&["dog"], Some(vec![1]));
        let idx = FeatureIndex::build(&tpl, 2, std::slice::from_ref(&s)).unwrap();
        let inst = idx.encode(&tpl, &s).unwrap();
        let f = idx.extract(&inst, &[1]).unwrap();
        assert_eq!(f.len(), 1);
        assert!(matches!(idx.describe(f.entries()[0].0), FeatureKey::Emission { tag: 1, .. }));
    }

    #[test]
    fn repeated_token_accumulates() {
        let tpl = TemplateSet::parse("U00:%x[0,0]").unwrap();
        let s = seq(&["a", "a"], None);
        let idx = FeatureIndex::build(&tpl, 2, std::slice::from_ref(&s)).unwrap();
        let inst = idx.encode(&tpl, &s).unwrap();
        let f = idx.extract(&inst, &[0, 0]).unwrap();
        assert_eq!(f.entries(), &[(0, 2.0)]);
    }

    #[test]
    fn extraction_errors() {
        let tpl = TemplateSet::parse("U00:%x[0,0]").unwrap();
        let s = seq(&["a", "b"], None);
        let idx = FeatureIndex::build(&tpl, 2, std::slice::from_ref(&s)).unwrap();
        let inst = idx.encode(&tpl, &s).unwrap();
        assert!(matches!(idx.extract(&inst, &[0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(idx.extract(&inst, &[0, 5]), Err(Error::UnknownTag(_))));
    }

    #[test]
    fn unseen_features_are_dropped() {
        let tpl = TemplateSet::parse("U00:%x[0,0]").unwrap();
        let idx = FeatureIndex::build(&tpl, 2, &[seq(&["a"], None)]).unwrap();
        let inst = idx.encode(&tpl, &seq(&["a", "zzz"], None)).unwrap();
        assert_eq!(inst.obs[1], vec![]);
        assert_eq!(idx.num_features(), 2);
    }

    #[test]
    fn id_layout_round_trips() {
        let tpl = TemplateSet::parse("U00:%x[0,0]\nB").unwrap();
        let idx = FeatureIndex::build(&tpl, 3, &[seq(&["a", "b"], None)]).unwrap();
        assert_eq!(idx.num_features(), 9 + 2 * 3);
        for id in 0..idx.num_features() {
            let back = match idx.describe(id) {
                FeatureKey::Transition { prev, cur } => idx.transition_id(prev, cur).unwrap(),
                FeatureKey::Emission { attr, tag } => idx.emission_id(attr, tag),
            };
            assert_eq!(back, id);
        }
    }
}
