//! Binary classifiers with a shared train / predict / importances contract.
//!
//! A trained model is a [`ModelArtifact`]: the learned parameters together
//! with the column names and the configuration (including the seed) used to
//! train it. Artifacts serialize to self-describing JSON and reload
//! bit-exactly.

pub mod forest;
pub mod gbt;
pub mod logistic;
pub mod naive_bayes;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::write_atomic;
use crate::matrix::SparseMatrix;
use crate::{Error, Result};

pub use forest::{ForestParams, RandomForest};
pub use gbt::{Gbt, GbtParams};
pub use logistic::{Logistic, LogisticParams};
pub use naive_bayes::{NaiveBayes, NbParams};

/// Scores above this are positive; ties go negative.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NaiveBayes,
    Logistic,
    RandomForest,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::NaiveBayes,
        ModelKind::Logistic,
        ModelKind::RandomForest,
        ModelKind::Gbt,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::Logistic => "logistic",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Gbt => "gbt",
        }
    }

    /// Display name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "Naive Bayes",
            ModelKind::Logistic => "Binary Log. Reg.",
            ModelKind::RandomForest => "Random Forest",
            ModelKind::Gbt => "Gradient Boosted Trees",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::invalid("model kind", s.to_string()))
    }
}

/// Hyperparameters for every kind; only the selected kind's block is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub rng_seed: u64,
    #[serde(default)]
    pub naive_bayes: NbParams,
    #[serde(default)]
    pub logistic: LogisticParams,
    #[serde(default)]
    pub random_forest: ForestParams,
    #[serde(default)]
    pub gbt: GbtParams,
}

impl TrainConfig {
    pub fn new(kind: ModelKind, rng_seed: u64) -> Self {
        TrainConfig {
            kind,
            rng_seed,
            naive_bayes: NbParams::default(),
            logistic: LogisticParams::default(),
            random_forest: ForestParams::default(),
            gbt: GbtParams::default(),
        }
    }

    /// The hyperparameter block for the selected kind, as JSON.
    pub fn active_params(&self) -> serde_json::Value {
        match self.kind {
            ModelKind::NaiveBayes => serde_json::to_value(self.naive_bayes),
            ModelKind::Logistic => serde_json::to_value(self.logistic),
            ModelKind::RandomForest => serde_json::to_value(self.random_forest),
            ModelKind::Gbt => serde_json::to_value(self.gbt),
        }
        .expect("parameter blocks serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    NaiveBayes(NaiveBayes),
    Logistic(Logistic),
    RandomForest(RandomForest),
    Gbt(Gbt),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub kind: ModelKind,
    pub train_config: TrainConfig,
    pub feature_names: Vec<String>,
    pub parameters: ModelParams,
}

const ARTIFACT_FORMAT: &str = "lexaudit-model/1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub score: f64,
    pub positive: bool,
}

impl Prediction {
    pub fn from_score(score: f64) -> Self {
        Prediction {
            score,
            positive: score > DECISION_THRESHOLD,
        }
    }
}

fn check_shape(x: &SparseMatrix, y: &[bool], feature_names: &[String]) -> Result<()> {
    if x.n_cols() != feature_names.len() {
        return Err(Error::DimensionMismatch {
            expected: feature_names.len(),
            actual: x.n_cols(),
        });
    }
    if x.n_rows() != y.len() {
        return Err(Error::invalid(
            "labels",
            format!("{} labels for {} rows", y.len(), x.n_rows()),
        ));
    }
    Ok(())
}

/// Trains the model selected by `config.kind`.
pub fn train(x: &SparseMatrix, y: &[bool], feature_names: &[String], config: &TrainConfig) -> Result<ModelArtifact> {
    check_shape(x, y, feature_names)?;
    let parameters = match config.kind {
        ModelKind::NaiveBayes => ModelParams::NaiveBayes(NaiveBayes::fit(x, y, &config.naive_bayes)?),
        ModelKind::Logistic => {
            if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
                return Err(Error::SingleClass);
            }
            ModelParams::Logistic(Logistic::fit(x, y, &config.logistic)?)
        }
        ModelKind::RandomForest => {
            ModelParams::RandomForest(RandomForest::fit(x, y, &config.random_forest, config.rng_seed)?)
        }
        ModelKind::Gbt => ModelParams::Gbt(Gbt::fit(x, y, &config.gbt)?),
    };
    Ok(ModelArtifact {
        format: ARTIFACT_FORMAT.to_string(),
        kind: config.kind,
        train_config: *config,
        feature_names: feature_names.to_vec(),
        parameters,
    })
}

pub fn train_nb(x: &SparseMatrix, y: &[bool], feature_names: &[String], alpha: f64) -> Result<ModelArtifact> {
    let mut c = TrainConfig::new(ModelKind::NaiveBayes, 0);
    c.naive_bayes.alpha = alpha;
    train(x, y, feature_names, &c)
}

pub fn train_logistic(
    x: &SparseMatrix,
    y: &[bool],
    feature_names: &[String],
    params: LogisticParams,
) -> Result<ModelArtifact> {
    let mut c = TrainConfig::new(ModelKind::Logistic, 0);
    c.logistic = params;
    train(x, y, feature_names, &c)
}

pub fn train_rf(
    x: &SparseMatrix,
    y: &[bool],
    feature_names: &[String],
    params: ForestParams,
    rng_seed: u64,
) -> Result<ModelArtifact> {
    let mut c = TrainConfig::new(ModelKind::RandomForest, rng_seed);
    c.random_forest = params;
    train(x, y, feature_names, &c)
}

impl ModelArtifact {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn score_row(&self, row: &[(u32, f64)]) -> f64 {
        match &self.parameters {
            ModelParams::NaiveBayes(m) => m.posterior(row)[1],
            ModelParams::Logistic(m) => m.score(row),
            ModelParams::RandomForest(m) => m.score(row),
            ModelParams::Gbt(m) => m.score(row),
        }
    }

    pub fn predict(&self, x: &SparseMatrix) -> Result<Vec<Prediction>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.n_cols(),
            });
        }
        Ok(x.rows()
            .iter()
            .map(|r| Prediction::from_score(self.score_row(r)))
            .collect())
    }

    /// Raw per-column importance weights, in column order.
    pub fn raw_importances(&self) -> Vec<f64> {
        match &self.parameters {
            ModelParams::NaiveBayes(m) => m.importances(),
            ModelParams::Logistic(m) => m.weights.iter().map(|w| w.abs()).collect(),
            ModelParams::RandomForest(m) => m.importances.clone(),
            ModelParams::Gbt(m) => m.importances.clone(),
        }
    }

    /// `(feature name, weight)` sorted by descending weight, ties by name.
    pub fn importances(&self) -> Vec<(String, f64)> {
        rank_features(&self.feature_names, &self.raw_importances())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: ModelArtifact = serde_json::from_str(&text)?;
        if m.format != ARTIFACT_FORMAT {
            return Err(Error::invalid("model file", format!("unknown format {:?}", m.format)));
        }
        Ok(m)
    }
}

pub fn rank_features(names: &[String], weights: &[f64]) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = names.iter().cloned().zip(weights.iter().copied()).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}
