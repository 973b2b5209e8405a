//! Linear-chain structured classification with search-based probabilistic
//! online learning.
//!
//! The trainer draws one labeled sequence at a time, searches the top-n
//! taggings under the current weights, turns their scores into a distribution
//! and moves the weights toward the gold tagging and away from the candidates
//! in proportion to their probability. With `n = 1` this is the structured
//! perceptron; with every tagging in the list it is stochastic gradient descent
//! on a CRF. CRF-SGD, perceptron and MIRA trainers are included as baselines.
//!
//! ```
//! use sapo_core::data::{generate_synthetic_hmm, SyntheticConfig};
//! use sapo_core::template::TemplateSet;
//! use sapo_core::train::{train, Algorithm, TrainConfig};
//!
//! let corpus = generate_synthetic_hmm(&SyntheticConfig { count: 20, ..Default::default() })?;
//! let templates = TemplateSet::parse("U00:%x[0,0]\nB\n")?;
//! let cfg = TrainConfig { epochs: 2, ..TrainConfig::new(Algorithm::Sapo) };
//! let (model, curve) = train(templates, &corpus, None, &cfg)?;
//! assert_eq!(curve.len(), 2);
//! let tags = model.decode(&corpus.sequences[0])?;
//! assert_eq!(tags.len(), corpus.sequences[0].len());
//! # Ok::<(), sapo_core::Error>(())
//! ```

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod inference;
pub mod lattice;
pub mod model;
pub mod nbest;
pub mod template;
pub mod train;

pub use error::{Error, Result};
pub use features::{FeatureIndex, Instance, Sequence, SparseVector, Tagset};
pub use lattice::{viterbi, Lattice};
pub use model::Model;
pub use nbest::{astar_nbest, beam_nbest, enumerate_all, NBestEntry, NBestList};
pub use template::TemplateSet;
