use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::Metric;
use crate::inference::Search;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Sapo,
    CrfSgd,
    Perceptron,
    Mira,
    MiraNbest,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Sapo,
        Algorithm::CrfSgd,
        Algorithm::Perceptron,
        Algorithm::Mira,
        Algorithm::MiraNbest,
    ];

    /// Uses the candidate count `n`.
    pub fn uses_n(self) -> bool {
        matches!(self, Algorithm::Sapo | Algorithm::MiraNbest)
    }

    /// Uses the learning rate, its schedule and the L2 strength.
    pub fn uses_learning_rate(self) -> bool {
        matches!(self, Algorithm::Sapo | Algorithm::CrfSgd)
    }

    pub fn supports_averaging(self) -> bool {
        matches!(self, Algorithm::Perceptron | Algorithm::Mira | Algorithm::MiraNbest)
    }

    pub fn is_mira(self) -> bool {
        matches!(self, Algorithm::Mira | Algorithm::MiraNbest)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Sapo => "sapo",
            Algorithm::CrfSgd => "crf-sgd",
            Algorithm::Perceptron => "perc",
            Algorithm::Mira => "mira",
            Algorithm::MiraNbest => "mira-nbest",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Learning rate as a function of the (1-based) epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Fixed,
    /// `γ · rate^(epoch - 1)`.
    ExponentialDecay(f64),
}

impl Schedule {
    pub fn rate_at(self, base: f64, epoch: usize) -> f64 {
        match self {
            Schedule::Fixed => base,
            Schedule::ExponentialDecay(r) => base * r.powi(epoch.saturating_sub(1) as i32),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Fixed => f.write_str("fixed"),
            Schedule::ExponentialDecay(r) => write!(f, "exp-decay:{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub averaged: bool,
    pub n: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
    pub search: Search,
    pub schedule: Schedule,
    /// Upper bound on each MIRA step size; `f64::INFINITY` for none.
    pub mira_c: f64,
    /// Held-out evaluation every this many epochs (and after the last one).
    pub eval_every: usize,
    pub metric: Metric,
}

pub const DEFAULT_BEAM: usize = 50;

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Sapo,
            averaged: false,
            n: 5,
            learning_rate: 0.05,
            l2: 1.0,
            epochs: 20,
            seed: 1,
            search: Search::AStar,
            schedule: Schedule::Fixed,
            mira_c: f64::INFINITY,
            eval_every: 1,
            metric: Metric::Accuracy,
        }
    }
}

impl TrainConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    /// Checks every field against `train_size` training sequences.
    pub fn validate(&self, train_size: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if train_size == 0 {
            return bad("training set is empty".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.eval_every == 0 {
            return bad("eval-every must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be non-negative, got {}", self.l2));
        }
        if !(self.mira_c > 0.0) {
            return bad(format!("MIRA clip must be positive, got {}", self.mira_c));
        }
        if let Schedule::ExponentialDecay(r) = self.schedule {
            if !(r > 0.0 && r <= 1.0) {
                return bad(format!("decay rate must lie in (0, 1], got {r}"));
            }
        }
        if let Search::Beam(0) = self.search {
            return bad("beam width must be at least 1".into());
        }
        if self.averaged && !self.algorithm.supports_averaging() {
            return bad(format!("averaging is not available for {}", self.algorithm));
        }
        if self.algorithm.uses_learning_rate() {
            // the largest rate is the first one under either schedule
            let shrink = self.learning_rate * self.l2 / train_size as f64;
            if shrink >= 1.0 {
                return bad(format!(
                    "learning rate × l2 / |S| = {shrink} makes the decay factor non-positive"
                ));
            }
        }
        Ok(())
    }
}
