//! Pool-based active learning for single- and multi-label text classification.
//!
//! The crate is organised around three exchangeable components:
//!
//! - [`classification`]: trainable text classifiers exposing class
//!   probabilities, dense embeddings and loss gradients through one contract.
//! - [`strategies`]: query strategies selecting the next batch of unlabeled
//!   documents (uncertainty, embedding, gradient and coreset families).
//! - [`stopping`]: criteria deciding when further labeling stops paying off.
//!
//! [`learner::ActiveLearner`] ties them together into the
//! query → label → retrain → stop loop with resumable on-disk sessions.
//!
//! ```
//! use al_core::strategies::uncertainty_scores;
//! use al_core::strategies::UncertaintyMode;
//! use ndarray::array;
//!
//! let probs = array![[0.9, 0.1], [0.6, 0.4]];
//! let scores = uncertainty_scores(probs.view(), UncertaintyMode::Margin, false).unwrap();
//! assert!(scores[1] > scores[0]);
//! ```

pub mod classification;
pub mod corpus;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod rng;
pub mod stopping;
pub mod strategies;

pub use error::{Error, Result};
pub use rng::Rng;

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
