use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::features::{FeatureIndex, Instance, Sequence, SparseVector, Tagset};
use crate::lattice::{viterbi, Lattice};
use crate::template::TemplateSet;

/// A linear-chain model: tagset, templates, feature index and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub tagset: Tagset,
    pub templates: TemplateSet,
    pub index: FeatureIndex,
    pub weights: Vec<f64>,
    /// Number of observation columns expected in input tokens.
    pub columns: usize,
    /// Free-form metadata (training configuration snapshot and the like).
    pub meta: BTreeMap<String, String>,
}

impl Model {
    /// Scans `data` to build the feature index and returns a zero-weight model
    /// together with the encoded training instances.
    pub fn from_training(
        templates: TemplateSet,
        tagset: Tagset,
        columns: usize,
        data: &[Sequence],
    ) -> Result<(Self, Vec<Instance>)> {
        templates.check_columns(columns)?;
        let mut index = FeatureIndex::new(tagset.len(), templates.transitions);
        let mut instances = Vec::with_capacity(data.len());
        for (i, seq) in data.iter().enumerate() {
            check_columns(seq, columns)?;
            let gold = seq.gold.as_ref().ok_or(Error::MissingGold(i))?;
            if let Some(&bad) = gold.iter().find(|&&k| k >= tagset.len()) {
                return Err(Error::UnknownTag(format!("#{bad}")));
            }
            instances.push(index.scan(&templates, seq)?);
        }
        let weights = vec![0.0; index.num_features()];
        let model = Self {
            tagset,
            templates,
            index,
            weights,
            columns,
            meta: BTreeMap::new(),
        };
        Ok((model, instances))
    }

    pub fn num_tags(&self) -> usize {
        self.tagset.len()
    }

    pub fn encode(&self, seq: &Sequence) -> Result<Instance> {
        check_columns(seq, self.columns)?;
        self.index.encode(&self.templates, seq)
    }

    pub fn extract(&self, seq: &Sequence, y: &[usize]) -> Result<SparseVector> {
        self.index.extract(&self.encode(seq)?, y)
    }

    /// Linear score w·F(x, y).
    pub fn score(&self, seq: &Sequence, y: &[usize]) -> Result<f64> {
        Ok(self.extract(seq, y)?.dot(&self.weights))
    }

    pub fn lattice(&self, inst: &Instance) -> Lattice {
        Lattice::from_instance(&self.index, inst, &self.weights)
    }

    pub fn build_lattice(&self, seq: &Sequence) -> Result<Lattice> {
        Ok(self.lattice(&self.encode(seq)?))
    }

    /// Best-scoring tagging.
    pub fn decode(&self, seq: &Sequence) -> Result<Vec<usize>> {
        Ok(viterbi(&self.build_lattice(seq)?).0)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }
}

fn check_columns(seq: &Sequence, columns: usize) -> Result<()> {
    match seq.tokens.iter().find(|t| t.len() != columns) {
        Some(t) => Err(Error::LengthMismatch {
            what: "token columns",
            expected: columns,
            got: t.len(),
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Model, Sequence) {
        let tpl = TemplateSet::parse("U00:%x[0,0]\nU01:%x[-1,0]/%x[0,0]\nB").unwrap();
        let tags = Tagset::from_tags(["A", "B"]).unwrap();
        let s = Sequence::new(
            ["x", "y", "x"].iter().map(|w| vec![w.to_string()]).collect(),
            Some(vec![0, 1, 0]),
        )
        .unwrap();
        let (m, _) = Model::from_training(tpl, tags, 1, std::slice::from_ref(&s)).unwrap();
        (m, s)
    }

    #[test]
    fn zero_weights_score_zero() {
        let (m, s) = toy();
        assert_eq!(m.score(&s, &[1, 1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn single_fired_feature() {
        let (mut m, _) = toy();
        let s = Sequence::new(vec![vec!["y".into()]], None).unwrap();
        let f = m.extract(&s, &[1]).unwrap();
        // U01:_B-1_/y never occurred in training
        assert_eq!(f.len(), 1);
        let id = m.index.emission_id(m.index.attr_id("U00:y").unwrap(), 1);
        m.weights[id] = 1.5;
        assert_eq!(m.score(&s, &[1]).unwrap(), 1.5);
    }

    #[test]
    fn column_mismatch_rejected() {
        let (m, _) = toy();
        let s = Sequence::new(vec![vec!["a".into(), "b".into()]], None).unwrap();
        assert!(m.encode(&s).is_err());
    }

    #[test]
    fn training_requires_gold() {
        let tpl = TemplateSet::parse("U00:%x[0,0]").unwrap();
        let s = Sequence::new(vec![vec!["a".into()]], None).unwrap();
        assert!(matches!(
            Model::from_training(tpl, Tagset::from_tags(["A"]).unwrap(), 1, &[s]),
            Err(Error::MissingGold(0))
        ));
    }
}
