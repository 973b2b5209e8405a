//! Corpus reading/writing, synthetic data and model persistence.

pub mod conll;
pub mod model_file;
pub mod synthetic;

pub use conll::{read_conll, read_conll_path, write_conll, write_corpus, Corpus};
pub use model_file::{load_model, read_model, save_model, write_model, FORMAT_VERSION};
pub use synthetic::{generate_synthetic_hmm, HmmParams, SyntheticConfig};
