//! Split protocols and precision/recall reporting.
//!
//! Three protocols are supported:
//!
//! * **Tweet level**: stratified k-fold over shuffled tweets. Authors are
//!   shared between train and test.
//! * **User level**: leave one positive account out. Each fold tests on one
//!   account's tweets plus a fresh random fraction of the negatives.
//! * **Out of network**: positive accounts are split into two communities;
//!   each fold trains on one community and tests on the other.
//!
//! Any [`FoldClassifier`] can be evaluated against a plan; trained models
//! and the rule baselines share the same machinery.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledCorpus};
use crate::featurize::{self, FeatureConfig};
use crate::models::{self, TrainConfig};
use crate::preprocess::TokenizedTweet;
use crate::{Error, Result};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_NEG_TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    TweetLevel,
    UserLevel,
    OutOfNetwork,
}

impl SplitMethod {
    pub const ALL: [SplitMethod; 3] = [
        SplitMethod::TweetLevel,
        SplitMethod::UserLevel,
        SplitMethod::OutOfNetwork,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SplitMethod::TweetLevel => "tweet_level",
            SplitMethod::UserLevel => "user_level",
            SplitMethod::OutOfNetwork => "out_of_network",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            SplitMethod::TweetLevel => "Tweet Level",
            SplitMethod::UserLevel => "User Level",
            SplitMethod::OutOfNetwork => "Out-of-Network User Level",
        }
    }
}

impl fmt::Display for SplitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SplitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitMethod::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::invalid("split method", s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// A realized train/test assignment. Ids within each side keep corpus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub method: SplitMethod,
    pub folds: Vec<Fold>,
    pub rng_seed: u64,
    /// Zero for tweet-level plans, where negatives are stratified instead.
    pub neg_test_fraction: f64,
}

impl SplitPlan {
    /// Checks that every id belongs to the corpus, that train and test are
    /// disjoint, and for grouped methods that no positive group crosses the
    /// train/test boundary.
    pub fn validate(&self, corpus: &LabeledCorpus) -> Result<()> {
        for (f, fold) in self.folds.iter().enumerate() {
            let fail = |msg: String| Error::Fold {
                fold: f,
                source: Box::new(Error::invalid("split plan", msg)),
            };
            let train: BTreeSet<&str> = fold.train.iter().map(String::as_str).collect();
            if train.len() != fold.train.len() {
                return Err(fail("duplicate id in train".into()));
            }
            let mut test_seen = BTreeSet::new();
            for id in fold.train.iter().chain(&fold.test) {
                if corpus.get(id).is_none() {
                    return Err(fail(format!("unknown tweet id {id:?}")));
                }
            }
            for id in &fold.test {
                if train.contains(id.as_str()) || !test_seen.insert(id.as_str()) {
                    return Err(fail(format!("id {id:?} is in train and test or repeated")));
                }
            }
            if self.method != SplitMethod::TweetLevel {
                let positive_groups = |ids: &[String]| -> BTreeSet<String> {
                    ids.iter()
                        .filter(|id| corpus.label_of(id) == Some(Label::Positive))
                        .filter_map(|id| corpus.group_of(id).map(str::to_string))
                        .collect()
                };
                let shared: Vec<String> = positive_groups(&fold.train)
                    .intersection(&positive_groups(&fold.test))
                    .cloned()
                    .collect();
                if !shared.is_empty() {
                    return Err(fail(format!("positive groups in train and test: {shared:?}")));
                }
            }
        }
        Ok(())
    }
}

fn ids_by_label(corpus: &LabeledCorpus) -> (Vec<&str>, Vec<&str>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for r in corpus.records() {
        match r.label {
            Label::Positive => pos.push(r.tweet.id.as_str()),
            Label::Negative => neg.push(r.tweet.id.as_str()),
        }
    }
    (pos, neg)
}

/// Restores corpus order on a set of ids.
fn in_corpus_order(corpus: &LabeledCorpus, ids: &BTreeSet<&str>) -> Vec<String> {
    corpus
        .records()
        .iter()
        .map(|r| r.tweet.id.as_str())
        .filter(|id| ids.contains(id))
        .map(str::to_string)
        .collect()
}

/// Stratified k-fold. Each class is shuffled independently and dealt round
/// robin into folds, so per-class test counts differ by at most one across
/// folds. Negatives start dealing where positives stopped, which keeps total
/// fold sizes balanced too.
pub fn plan_tweet_level(corpus: &LabeledCorpus, k: usize, rng_seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::invalid("k", format!("{k} (must be at least 2)")));
    }
    let (mut pos, mut neg) = ids_by_label(corpus);
    for (name, class) in [("positive", &pos), ("negative", &neg)] {
        if class.len() < k {
            return Err(Error::invalid(
                "split plan",
                format!("{name} class has {} tweets, fewer than k = {k}", class.len()),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut test_sets: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); k];
    for (i, id) in pos.iter().enumerate() {
        test_sets[i % k].insert(id);
    }
    let offset = pos.len();
    for (i, id) in neg.iter().enumerate() {
        test_sets[(i + offset) % k].insert(id);
    }
    let all: BTreeSet<&str> = pos.iter().chain(&neg).copied().collect();
    let folds = test_sets
        .iter()
        .map(|test| Fold {
            train: in_corpus_order(corpus, &all.difference(test).copied().collect()),
            test: in_corpus_order(corpus, test),
        })
        .collect();
    Ok(SplitPlan {
        method: SplitMethod::TweetLevel,
        folds,
        rng_seed,
        neg_test_fraction: 0.0,
    })
}

/// Positive tweets grouped by group key, with every group checked to be
/// single-label.
fn positive_groups(corpus: &LabeledCorpus) -> Result<BTreeMap<&str, Vec<&str>>> {
    let mut labels: BTreeMap<&str, BTreeSet<Label>> = BTreeMap::new();
    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in corpus.records() {
        labels.entry(r.group.as_str()).or_default().insert(r.label);
        if r.label == Label::Positive {
            groups.entry(r.group.as_str()).or_default().push(r.tweet.id.as_str());
        }
    }
    if let Some((g, _)) = labels.iter().find(|(_, l)| l.len() > 1) {
        return Err(Error::invalid(
            "split plan",
            format!("group {g:?} holds both positive and negative tweets"),
        ));
    }
    Ok(groups)
}

fn negative_test_size(n_neg: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(
            "neg_test_fraction",
            format!("{fraction} (must be in (0, 1))"),
        ));
    }
    if n_neg < 2 {
        return Err(Error::invalid("split plan", "need at least 2 negative tweets"));
    }
    Ok(((fraction * n_neg as f64).round() as usize).clamp(1, n_neg - 1))
}

/// Builds one fold per entry of `test_positive_sets`; each fold draws its
/// own negative test sample from the shared stream.
fn grouped_folds(
    corpus: &LabeledCorpus,
    test_positive_sets: Vec<(BTreeSet<&str>, BTreeSet<&str>)>,
    neg: &[&str],
    neg_test_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Fold>> {
    let m = negative_test_size(neg.len(), neg_test_fraction)?;
    let mut folds = Vec::with_capacity(test_positive_sets.len());
    for (train_pos, test_pos) in test_positive_sets {
        let picked: BTreeSet<usize> = index::sample(rng, neg.len(), m).into_iter().collect();
        let mut test = test_pos;
        let mut train = train_pos;
        for (i, id) in neg.iter().enumerate() {
            if picked.contains(&i) {
                test.insert(id);
            } else {
                train.insert(id);
            }
        }
        folds.push(Fold {
            train: in_corpus_order(corpus, &train),
            test: in_corpus_order(corpus, &test),
        });
    }
    Ok(folds)
}

/// Leave-one-positive-group-out, in sorted group order.
pub fn plan_user_level(corpus: &LabeledCorpus, neg_test_fraction: f64, rng_seed: u64) -> Result<SplitPlan> {
    let groups = positive_groups(corpus)?;
    if groups.len() < 2 {
        return Err(Error::invalid(
            "split plan",
            format!(
                "user-level splits need at least 2 positive groups, found {}",
                groups.len()
            ),
        ));
    }
    let (_, neg) = ids_by_label(corpus);
    let sets = groups
        .keys()
        .map(|held_out| {
            let mut train = BTreeSet::new();
            let mut test = BTreeSet::new();
            for (g, ids) in &groups {
                let side = if g == held_out { &mut test } else { &mut train };
                side.extend(ids.iter().copied());
            }
            (train, test)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(SplitPlan {
        method: SplitMethod::UserLevel,
        folds: grouped_folds(corpus, sets, &neg, neg_test_fraction, &mut rng)?,
        rng_seed,
        neg_test_fraction,
    })
}

/// Two folds: fold 0 trains on the first community (sorted by id) and tests
/// on the second, fold 1 the reverse. Every positive group must be mapped.
pub fn plan_out_of_network(
    corpus: &LabeledCorpus,
    community_of: &BTreeMap<String, String>,
    neg_test_fraction: f64,
    rng_seed: u64,
) -> Result<SplitPlan> {
    let groups = positive_groups(corpus)?;
    let mut members: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (g, ids) in &groups {
        let c = community_of
            .get(*g)
            .ok_or_else(|| Error::invalid("community map", format!("no community for group {g:?}")))?;
        members.entry(c.as_str()).or_default().extend(ids.iter().copied());
    }
    if members.len() != 2 {
        return Err(Error::invalid(
            "split plan",
            format!(
                "out-of-network splits need exactly 2 communities, found {}: {:?}",
                members.len(),
                members.keys().collect::<Vec<_>>()
            ),
        ));
    }
    let sides: Vec<BTreeSet<&str>> = members.into_values().collect();
    let sets = vec![
        (sides[0].clone(), sides[1].clone()),
        (sides[1].clone(), sides[0].clone()),
    ];
    let (_, neg) = ids_by_label(corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(SplitPlan {
        method: SplitMethod::OutOfNetwork,
        folds: grouped_folds(corpus, sets, &neg, neg_test_fraction, &mut rng)?,
        rng_seed,
        neg_test_fraction,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn from_predictions(predicted: &[bool], actual: &[bool]) -> Self {
        assert_eq!(predicted.len(), actual.len(), "prediction/label length mismatch");
        let mut c = Confusion::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    /// `tp / (tp + fp)`, undefined when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `tp / (tp + fn)`, undefined when there are no actual positives.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub confusion: Confusion,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Model or baseline display name.
    pub subject: String,
    pub method: SplitMethod,
    pub folds: Vec<FoldResult>,
    /// Unweighted mean over folds with defined precision.
    pub precision: Option<f64>,
    /// Unweighted mean over folds with defined recall.
    pub recall: Option<f64>,
    pub undefined_precision_folds: usize,
    pub undefined_recall_folds: usize,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut undefined = 0;
    for v in values {
        match v {
            Some(v) => {
                sum += v;
                n += 1;
            }
            None => undefined += 1,
        }
    }
    ((n > 0).then(|| sum / n as f64), undefined)
}

impl EvalReport {
    pub fn from_folds(subject: impl Into<String>, method: SplitMethod, folds: Vec<FoldResult>) -> Self {
        let (precision, undefined_precision_folds) = mean_defined(folds.iter().map(|f| f.precision));
        let (recall, undefined_recall_folds) = mean_defined(folds.iter().map(|f| f.recall));
        EvalReport {
            subject: subject.into(),
            method,
            folds,
            precision,
            recall,
            undefined_precision_folds,
            undefined_recall_folds,
        }
    }

    /// Harmonic mean of the averaged precision and recall; an undefined
    /// average counts as 0.
    pub fn f1(&self) -> f64 {
        let p = self.precision.unwrap_or(0.0);
        let r = self.recall.unwrap_or(0.0);
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Confusion counts summed over folds.
    pub fn pooled(&self) -> Confusion {
        self.folds.iter().fold(Confusion::default(), |mut a, f| {
            a.tp += f.confusion.tp;
            a.fp += f.confusion.fp;
            a.tn += f.confusion.tn;
            a.fn_ += f.confusion.fn_;
            a
        })
    }
}

/// Anything that can be trained on one side of a fold and label the other.
pub trait FoldClassifier: Sync {
    fn name(&self) -> String;

    /// Returns one prediction per test tweet, in order.
    fn fit_predict(
        &self,
        train: &[TokenizedTweet],
        train_labels: &[bool],
        test: &[TokenizedTweet],
    ) -> Result<Vec<bool>>;
}

/// Fits a feature space on the training side only, trains a model, and
/// predicts the test side.
pub struct ModelSubject {
    pub train_config: TrainConfig,
    pub feature_config: FeatureConfig,
}

impl FoldClassifier for ModelSubject {
    fn name(&self) -> String {
        self.train_config.kind.display_name().to_string()
    }

    fn fit_predict(
        &self,
        train: &[TokenizedTweet],
        train_labels: &[bool],
        test: &[TokenizedTweet],
    ) -> Result<Vec<bool>> {
        let space = featurize::fit(train, &self.feature_config)?;
        let x_train = space.transform_all(train);
        let model = models::train(&x_train, train_labels, space.feature_names(), &self.train_config)?;
        let x_test = space.transform_all(test);
        Ok(model.predict(&x_test)?.into_iter().map(|p| p.positive).collect())
    }
}

/// Evaluates `subject` on every fold of `plan`. `tokenized[i]` must be the
/// preprocessed form of `corpus.records()[i]`. Folds run concurrently and
/// are reported in plan order.
pub fn run_eval(
    corpus: &LabeledCorpus,
    tokenized: &[TokenizedTweet],
    plan: &SplitPlan,
    subject: &dyn FoldClassifier,
) -> Result<EvalReport> {
    if tokenized.len() != corpus.len() {
        return Err(Error::invalid(
            "tokenized corpus",
            format!("{} tokenized tweets for {} records", tokenized.len(), corpus.len()),
        ));
    }
    plan.validate(corpus)?;
    let position: HashMap<&str, usize> = corpus
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.tweet.id.as_str(), i))
        .collect();
    let gather = |ids: &[String]| -> (Vec<TokenizedTweet>, Vec<bool>) {
        ids.iter()
            .map(|id| {
                let i = position[id.as_str()];
                (tokenized[i].clone(), corpus.records()[i].label.is_positive())
            })
            .unzip()
    };

    let folds = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let (train, train_y) = gather(&fold.train);
            let (test, test_y) = gather(&fold.test);
            let predicted = subject.fit_predict(&train, &train_y, &test).map_err(|e| Error::Fold {
                fold: f,
                source: Box::new(e),
            })?;
            if predicted.len() != test.len() {
                return Err(Error::Fold {
                    fold: f,
                    source: Box::new(Error::invalid(
                        "predictions",
                        format!("{} predictions for {} test tweets", predicted.len(), test.len()),
                    )),
                });
            }
            let confusion = Confusion::from_predictions(&predicted, &test_y);
            Ok(FoldResult {
                fold: f,
                n_train: train.len(),
                n_test: test.len(),
                confusion,
                precision: confusion.precision(),
                recall: confusion.recall(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_folds(subject.name(), plan.method, folds))
}

/// Convenience wrapper evaluating one model configuration.
pub fn run_model_eval(
    corpus: &LabeledCorpus,
    tokenized: &[TokenizedTweet],
    plan: &SplitPlan,
    train_config: &TrainConfig,
    feature_config: &FeatureConfig,
) -> Result<EvalReport> {
    let subject = ModelSubject {
        train_config: *train_config,
        feature_config: feature_config.clone(),
    };
    run_eval(corpus, tokenized, plan, &subject)
}

/// Evaluates each candidate configuration on the same plan and returns the
/// index of the one with the highest F1 (earliest wins ties) with all
/// reports. No grid is built in; callers supply the candidates.
pub fn grid_search(
    corpus: &LabeledCorpus,
    tokenized: &[TokenizedTweet],
    plan: &SplitPlan,
    candidates: &[TrainConfig],
    feature_config: &FeatureConfig,
) -> Result<(usize, Vec<EvalReport>)> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list".into()));
    }
    let reports = candidates
        .iter()
        .map(|c| run_model_eval(corpus, tokenized, plan, c, feature_config))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.f1() > reports[best].f1() {
            best = i;
        }
    }
    Ok((best, reports))
}

fn percent(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.1}%", 100.0 * v),
        None => "undefined".to_string(),
    }
}

/// Human-readable table with one block per split method, in the order the
/// reports are given.
pub fn render_table(reports: &[EvalReport]) -> String {
    let header = ["Split Method", "Model Type", "Precision", "Recall"];
    let mut rows: Vec<[String; 4]> = Vec::new();
    let mut last: Option<SplitMethod> = None;
    for r in reports {
        let method = if last == Some(r.method) {
            String::new()
        } else {
            r.method.display_name().to_string()
        };
        last = Some(r.method);
        rows.push([method, r.subject.clone(), percent(r.precision), percent(r.recall)]);
    }
    let mut width = header.map(|h| h.chars().count());
    for row in &rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: [&str; 4]| -> String {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(width).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - cell.chars().count();
            if i >= 2 {
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            } else {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 6));
    out.push('\n');
    for row in &rows {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
    }
    let notes: Vec<String> = reports
        .iter()
        .filter(|r| r.undefined_precision_folds > 0)
        .map(|r| {
            format!(
                "note: {} / {}: precision undefined in {} of {} folds (excluded from the mean)\n",
                r.method.display_name(),
                r.subject,
                r.undefined_precision_folds,
                r.folds.len()
            )
        })
        .collect();
    if !notes.is_empty() {
        out.push('\n');
        notes.iter().for_each(|n| out.push_str(n));
    }
    out
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// Machine-readable rows: one per fold plus a `mean` row per report.
/// Undefined metrics are empty cells.
pub fn render_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("split_method,model_type,fold,n_train,n_test,tp,fp,tn,fn,precision,recall\n");
    for r in reports {
        for f in &r.folds {
            let c = f.confusion;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.method.id(),
                r.subject,
                f.fold,
                f.n_train,
                f.n_test,
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                opt_cell(f.precision),
                opt_cell(f.recall)
            );
        }
        let c = r.pooled();
        let _ = writeln!(
            out,
            "{},{},mean,,,{},{},{},{},{},{}",
            r.method.id(),
            r.subject,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            opt_cell(r.precision),
            opt_cell(r.recall)
        );
    }
    out
}
