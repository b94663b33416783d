//! Short-text classification toolkit for identifying tweets from accounts
//! impacted by community violence, with a lexical (dialect) bias audit.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! - [`corpus`]: ingest and filter labeled tweet collections and
//!   dialect-scored reference corpora.
//! - [`preprocess`]: Twitter-aware tokenization and normalization.
//! - [`featurize`]: tf-idf, binary occurrence, bigrams, POS proportions,
//!   hashtag and emoji counts, emotion proportions.
//! - [`models`]: naive Bayes, logistic regression, random forest and a small
//!   gradient-boosted trees model sharing one artifact format.
//! - [`evaluate`]: tweet-level, user-level and out-of-network split
//!   protocols with precision/recall reporting.
//! - [`baselines`]: user-mention and aggression/loss word-list rules.
//! - [`biasaudit`]: reference-corpus frequency table, bucketed importance
//!   series and the rank-trend summary.
//! - [`cli`]: the on-disk, manifest-tracked subcommand pipeline.

pub mod baselines;
pub mod biasaudit;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod featurize;
pub mod matrix;
pub mod models;
pub mod preprocess;
pub mod synth;

pub use error::{Error, Result};
