//! Online trainers sharing one epoch loop: SAPO, CRF-SGD, structured
//! perceptron, MIRA and n-best MIRA.

mod config;
mod curve;
mod weights;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{Algorithm, Schedule, TrainConfig, DEFAULT_BEAM};
pub use curve::{EpochRecord, TrainCurve};
pub use weights::{Averager, WeightStore};

use crate::data::Corpus;
use crate::error::{Error, Result};
use crate::eval::{evaluate, w_complexity};
use crate::features::{FeatureIndex, Instance, Sequence, SparseVector};
use crate::inference::{crf_mass, objective_with, topn_distribution, topn_mass, Search, TagMass};
use crate::lattice::{viterbi, Lattice};
use crate::model::Model;
use crate::nbest::{astar_nbest, BeamSearch};
use crate::template::TemplateSet;

const FINITE_CHECK_EVERY: u64 = 1000;

/// Encoded held-out sequences with their gold tags as strings.
#[derive(Debug, Clone)]
pub struct HeldOut {
    instances: Vec<Instance>,
    gold: Vec<Vec<String>>,
}

impl HeldOut {
    /// Encodes `corpus` against the frozen feature index of `model`. Gold tags
    /// may include tags the model has never seen.
    pub fn new(model: &Model, corpus: &Corpus) -> Result<Self> {
        let gold = corpus.gold_tags()?;
        let instances = corpus
            .sequences
            .iter()
            .map(|s| {
                model.encode(&Sequence {
                    tokens: s.tokens.clone(),
                    gold: None,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { instances, gold })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Online training state. [`Trainer::run_epoch`] drives a full epoch; tests
/// can also call [`Trainer::epoch_order`] and [`Trainer::step`] directly to
/// observe the weight trajectory.
pub struct Trainer {
    model: Model,
    data: Vec<Instance>,
    cfg: TrainConfig,
    store: WeightStore,
    averager: Option<Averager>,
    rng: ChaCha8Rng,
    beam: BeamSearch,
    epoch: usize,
    updates: u64,
    mistakes: u64,
}

impl Trainer {
    /// `model` supplies the feature index and initial weights; `data` must be
    /// encoded against it and carry gold tags.
    pub fn new(model: Model, data: Vec<Instance>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate(data.len())?;
        for (i, inst) in data.iter().enumerate() {
            inst.gold(i)?;
        }
        let store = WeightStore::new(model.weights.clone());
        let averager = cfg.averaged.then(|| Averager::new(store.len()));
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            model,
            data,
            cfg,
            store,
            averager,
            beam: BeamSearch::new(),
            epoch: 0,
            updates: 0,
            mistakes: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn data(&self) -> &[Instance] {
        &self.data
    }

    pub fn index(&self) -> &FeatureIndex {
        &self.model.index
    }

    /// Completed epochs.
    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// Samples whose 1-best output differed from gold (perceptron and MIRA).
    pub fn mistakes(&self) -> u64 {
        self.mistakes
    }

    /// Current (non-averaged) weights.
    pub fn weights(&self) -> Vec<f64> {
        self.store.to_vec()
    }

    pub fn store(&self) -> &WeightStore {
        &self.store
    }

    /// Weights the model would be saved with: the running average for averaged
    /// variants, the current weights otherwise.
    pub fn effective_weights(&self) -> Vec<f64> {
        let w = self.store.to_vec();
        match &self.averager {
            Some(a) => a.average(&w),
            None => w,
        }
    }

    /// Draws the visiting order for the next epoch.
    pub fn epoch_order(&mut self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        order.shuffle(&mut self.rng);
        order
    }

    fn learning_rate(&self) -> f64 {
        self.cfg.schedule.rate_at(self.cfg.learning_rate, self.epoch + 1)
    }

    /// One per-sample update on training sample `i`, under the learning rate of
    /// the epoch in progress.
    pub fn step(&mut self, i: usize) -> Result<()> {
        let gamma = self.learning_rate();
        let Self {
            model,
            data,
            cfg,
            store,
            averager,
            mistakes,
            beam,
            ..
        } = self;
        let mut search = |l: &Lattice, n: usize| match cfg.search {
            Search::AStar => astar_nbest(l, n),
            Search::Beam(width) => beam.run(l, n, width),
        };
        let index = &model.index;
        let inst = &data[i];
        let gold = inst.gold(i)?;
        let tags = index.num_tags();
        let lattice = Lattice::from_instance(index, inst, &*store);
        if !lattice.is_finite() {
            return Err(Error::NonFinite {
                epoch: self.epoch + 1,
                sample: i,
            });
        }
        let mut apply = |mass: &TagMass, factor: f64| {
            mass.for_each_feature(index, inst, |id, v| {
                let d = factor * v;
                store.add(id, d);
                if let Some(a) = averager.as_mut() {
                    a.add(id, d);
                }
            })
        };
        match cfg.algorithm {
            Algorithm::Sapo => {
                let nb = topn_distribution(search(&lattice, cfg.n));
                apply(&topn_mass(&nb, gold, tags), -gamma);
                store.scale_by(decay_factor(gamma, cfg.l2, data.len()));
            }
            Algorithm::CrfSgd => {
                let (mass, _) = crf_mass(&lattice, gold);
                apply(&mass, -gamma);
                store.scale_by(decay_factor(gamma, cfg.l2, data.len()));
            }
            Algorithm::Perceptron => {
                let (best, _) = viterbi(&lattice);
                if best != gold {
                    *mistakes += 1;
                    let mut mass = TagMass::zeros(inst.len(), tags);
                    mass.add_path(&best, 1.0);
                    mass.add_path(gold, -1.0);
                    apply(&mass, -1.0);
                }
            }
            Algorithm::Mira => {
                let (best, _) = viterbi(&lattice);
                if best != gold {
                    *mistakes += 1;
                    let df = delta_features(index, inst, gold, &best, tags);
                    let norm = df.norm_sq();
                    if norm > 0.0 {
                        let alpha = ((hamming(gold, &best) - store.dot(&df)) / norm).max(0.0).min(cfg.mira_c);
                        add_scaled(store, averager, &df, alpha);
                    }
                }
            }
            Algorithm::MiraNbest => {
                let nb = search(&lattice, cfg.n);
                if nb.entries.first().is_some_and(|e| e.tags != gold) {
                    *mistakes += 1;
                }
                let constraints: Vec<(SparseVector, f64)> = nb
                    .entries
                    .iter()
                    .filter(|e| e.tags != gold)
                    .map(|e| (delta_features(index, inst, gold, &e.tags, tags), hamming(gold, &e.tags)))
                    .collect();
                let alphas = hildreth(&constraints, store, cfg.mira_c);
                for ((df, _), alpha) in constraints.iter().zip(alphas) {
                    if alpha != 0.0 {
                        add_scaled(store, averager, df, alpha);
                    }
                }
            }
        }
        if let Some(a) = averager.as_mut() {
            a.tick();
        }
        self.updates += 1;
        if self.updates.is_multiple_of(FINITE_CHECK_EVERY) && !self.store.is_finite() {
            return Err(Error::NonFinite {
                epoch: self.epoch + 1,
                sample: i,
            });
        }
        Ok(())
    }

    /// Runs one epoch and records objective, w-complexity and (when due) the
    /// held-out metric, all measured on the effective weights.
    pub fn run_epoch(&mut self, heldout: Option<&HeldOut>) -> Result<EpochRecord> {
        let order = self.epoch_order();
        let start = Instant::now();
        for &i in &order {
            self.step(i)?;
        }
        let seconds = start.elapsed().as_secs_f64();
        if !self.store.is_finite() {
            return Err(Error::NonFinite {
                epoch: self.epoch + 1,
                sample: order.last().copied().unwrap_or(0),
            });
        }
        self.epoch += 1;
        let weights = self.effective_weights();
        let objective = objective_with(&self.model.index, &weights, &self.data, self.cfg.l2)?;
        let due = self.epoch.is_multiple_of(self.cfg.eval_every) || self.epoch == self.cfg.epochs;
        let heldout_metric = match heldout {
            Some(h) if due && !h.is_empty() => Some(self.heldout_score(h, &weights)?),
            _ => None,
        };
        Ok(EpochRecord {
            epoch: self.epoch,
            objective,
            heldout_metric,
            w_complexity: w_complexity(&weights),
            seconds,
        })
    }

    fn heldout_score(&self, h: &HeldOut, weights: &[f64]) -> Result<f64> {
        let pred: Vec<Vec<&str>> = h
            .instances
            .iter()
            .map(|inst| {
                let (y, _) = viterbi(&Lattice::from_instance(&self.model.index, inst, weights));
                y.into_iter().map(|k| self.model.tagset.name(k)).collect()
            })
            .collect();
        Ok(evaluate(self.cfg.metric, &h.gold, &pred)?.value)
    }

    /// Runs the remaining configured epochs.
    pub fn run(&mut self, heldout: Option<&HeldOut>) -> Result<TrainCurve> {
        let mut curve = TrainCurve::default();
        while self.epoch < self.cfg.epochs {
            curve.records.push(self.run_epoch(heldout)?);
        }
        Ok(curve)
    }

    /// Token accuracy of Viterbi decoding on the training data under `weights`.
    pub fn training_accuracy(&self, weights: &[f64]) -> f64 {
        let (mut correct, mut total) = (0usize, 0usize);
        for inst in &self.data {
            let (y, _) = viterbi(&Lattice::from_instance(&self.model.index, inst, weights));
            let gold = inst.gold.as_deref().unwrap_or_default();
            correct += y.iter().zip(gold).filter(|(a, b)| a == b).count();
            total += y.len();
        }
        correct as f64 / total.max(1) as f64
    }

    /// The trained model, carrying the effective weights, a configuration
    /// snapshot and the final training accuracy in its metadata.
    pub fn into_model(self) -> Model {
        let weights = self.effective_weights();
        let accuracy = self.training_accuracy(&weights);
        let cfg = &self.cfg;
        let mut model = self.model;
        model.weights = weights;
        let meta = [
            ("algorithm", cfg.algorithm.to_string()),
            ("averaged", cfg.averaged.to_string()),
            ("epochs", self.epoch.to_string()),
            ("seed", cfg.seed.to_string()),
            ("train_accuracy", accuracy.to_string()),
        ];
        model.meta.extend(meta.map(|(k, v)| (k.to_string(), v)));
        if cfg.algorithm.uses_n() {
            model.meta.insert("n".into(), cfg.n.to_string());
            model.meta.insert("search".into(), search_name(cfg));
        }
        if cfg.algorithm.uses_learning_rate() {
            model.meta.insert("learning_rate".into(), cfg.learning_rate.to_string());
            model.meta.insert("schedule".into(), cfg.schedule.to_string());
            model.meta.insert("l2".into(), cfg.l2.to_string());
        }
        if cfg.algorithm.is_mira() {
            model.meta.insert("mira_c".into(), cfg.mira_c.to_string());
        }
        model
    }
}

fn search_name(cfg: &TrainConfig) -> String {
    match cfg.search {
        Search::AStar => "astar".into(),
        Search::Beam(b) => format!("beam:{b}"),
    }
}

fn decay_factor(gamma: f64, l2: f64, train_size: usize) -> f64 {
    if l2 == 0.0 {
        1.0
    } else {
        1.0 - gamma * l2 / train_size as f64
    }
}

fn hamming(a: &[usize], b: &[usize]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as f64
}

/// F(x, y*) - F(x, y).
fn delta_features(index: &FeatureIndex, inst: &Instance, gold: &[usize], y: &[usize], tags: usize) -> SparseVector {
    let mut mass = TagMass::zeros(inst.len(), tags);
    mass.add_path(gold, 1.0);
    mass.add_path(y, -1.0);
    mass.to_sparse(index, inst)
}

fn add_scaled(store: &mut WeightStore, averager: &mut Option<Averager>, v: &SparseVector, alpha: f64) {
    for &(id, x) in v.entries() {
        let d = alpha * x;
        store.add(id, d);
        if let Some(a) = averager.as_mut() {
            a.add(id, d);
        }
    }
}

const HILDRETH_PASSES: usize = 100;
const HILDRETH_TOL: f64 = 1e-8;

/// Dual coordinate ascent for `min ½‖Δw‖²` subject to
/// `(w + Δw)·ΔF_k ≥ loss_k` with each dual in `[0, c]`; returns the duals, so
/// `Δw = Σ α_k ΔF_k`.
///
/// The first pass always takes each coordinate step; later passes only take
/// steps larger than the tolerance and stop once a pass takes none.
pub fn hildreth(constraints: &[(SparseVector, f64)], w: &WeightStore, c: f64) -> Vec<f64> {
    let m = constraints.len();
    let base: Vec<f64> = constraints.iter().map(|(df, _)| w.dot(df)).collect();
    let gram: Vec<Vec<f64>> = constraints
        .iter()
        .map(|(a, _)| constraints.iter().map(|(b, _)| a.dot_sparse(b)).collect())
        .collect();
    let mut alpha = vec![0.0; m];
    for pass in 0..HILDRETH_PASSES {
        let mut changed = false;
        for k in 0..m {
            if gram[k][k] <= 0.0 {
                continue;
            }
            let margin = base[k] + (0..m).map(|j| alpha[j] * gram[j][k]).sum::<f64>();
            let next = (alpha[k] + (constraints[k].1 - margin) / gram[k][k]).max(0.0).min(c);
            let diff = (next - alpha[k]).abs();
            if pass == 0 || diff > HILDRETH_TOL {
                changed |= diff > HILDRETH_TOL;
                alpha[k] = next;
            }
        }
        if !changed {
            break;
        }
    }
    alpha
}

/// Builds a model from `train` and runs `cfg.epochs` epochs.
pub fn train(
    templates: TemplateSet,
    train: &Corpus,
    heldout: Option<&Corpus>,
    cfg: &TrainConfig,
) -> Result<(Model, TrainCurve)> {
    cfg.validate(train.len())?;
    let (model, data) = Model::from_training(templates, train.tagset.clone(), train.columns, &train.sequences)?;
    let heldout = heldout.map(|h| HeldOut::new(&model, h)).transpose()?;
    let mut trainer = Trainer::new(model, data, cfg.clone())?;
    let curve = trainer.run(heldout.as_ref())?;
    Ok((trainer.into_model(), curve))
}

fn train_as(
    algorithm: Algorithm,
    averaged: bool,
    templates: TemplateSet,
    data: &Corpus,
    heldout: Option<&Corpus>,
    cfg: &TrainConfig,
) -> Result<(Model, TrainCurve)> {
    let cfg = TrainConfig {
        algorithm,
        averaged,
        ..cfg.clone()
    };
    train(templates, data, heldout, &cfg)
}

pub fn train_sapo(
    templates: TemplateSet,
    data: &Corpus,
    heldout: Option<&Corpus>,
    cfg: &TrainConfig,
) -> Result<(Model, TrainCurve)> {
    train_as(Algorithm::Sapo, false, templates, data, heldout, cfg)
}

pub fn train_crf_sgd(
    templates: TemplateSet,
    data: &Corpus,
    heldout: Option<&Corpus>,
    cfg: &TrainConfig,
) -> Result<(Model, TrainCurve)> {
    train_as(Algorithm::CrfSgd, false, templates, data, heldout, cfg)
}

pub fn train_perceptron(
    templates: TemplateSet,
    data: &Corpus,
    heldout: Option<&Corpus>,
    cfg: &TrainConfig,
    averaged: bool,
) -> Result<(Model, TrainCurve)> {
    train_as(Algorithm::Perceptron, averaged, templates, data, heldout, cfg)
}

pub fn train_mira(
    templates: TemplateSet,
    data: &Corpus,
    heldout: Option<&Corpus>,
    cfg: &TrainConfig,
    averaged: bool,
) -> Result<(Model, TrainCurve)> {
    train_as(Algorithm::Mira, averaged, templates, data, heldout, cfg)
}

pub fn train_mira_nbest(
    templates: TemplateSet,
    data: &Corpus,
    heldout: Option<&Corpus>,
    cfg: &TrainConfig,
    averaged: bool,
) -> Result<(Model, TrainCurve)> {
    train_as(Algorithm::MiraNbest, averaged, templates, data, heldout, cfg)
}
