//! Subcommand bodies. Each reads its inputs from the config or the output
//! directory, verifies upstream lineage, writes artifacts atomically and
//! finishes by writing its manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExternalInput, RunConfig};
use super::manifest::{check_lineage, Manifest};
use crate::baselines::{AnnotationBaseline, MentionBaseline};
use crate::biasaudit::{self, FrequencyTable};
use crate::corpus::{
    self, filter_bounding_box, filter_language_and_retweets, ingest_corpus, threshold_dialect, write_atomic,
    BoundingBox, DialectCorpus, LabeledCorpus, RecordFormat,
};
use crate::evaluate::{self, EvalReport, SplitMethod, SplitPlan};
use crate::featurize::{self, FeatureSpace, LabeledMatrix};
use crate::models::{self, ModelArtifact, ModelKind, TrainConfig};
use crate::preprocess::TokenizedTweet;
use crate::synth::{self, SynthConfig};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const FEATURE_SPACE_FILE: &str = "feature_space.json";
pub const MATRIX_FILE: &str = "features.matrix";
pub const MODEL_FILE: &str = "model.json";
pub const SPLITS_FILE: &str = "splits.json";
pub const EVAL_TXT: &str = "eval_report.txt";
pub const EVAL_CSV: &str = "eval_report.csv";
pub const EVAL_JSON: &str = "eval_report.json";
pub const BASELINE_TXT: &str = "baseline_report.txt";
pub const BASELINE_CSV: &str = "baseline_report.csv";
pub const BASELINE_JSON: &str = "baseline_report.json";
pub const AUDIT_CSV: &str = "audit_buckets.csv";
pub const AUDIT_SVG: &str = "audit.svg";
pub const AUDIT_SUMMARY: &str = "audit_summary.txt";
pub const FREQ_TABLE_CSV: &str = "frequency_table.csv";
pub const REPORT_TXT: &str = "report.txt";

const ALL_EXTERNALS: [ExternalInput; 7] = [
    ExternalInput::Corpus,
    ExternalInput::Stopwords,
    ExternalInput::EmotionLexicon,
    ExternalInput::EmojiList,
    ExternalInput::AnnotationLexicon,
    ExternalInput::DialectCorpus,
    ExternalInput::Communities,
];

/// Shared state for one invocation.
pub struct Ctx {
    pub cfg: RunConfig,
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&cfg.out_dir)
            .with_context(|| format!("cannot create output directory {}", cfg.out_dir.display()))?;
        Ok(Ctx { cfg })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn manifest(&self, command: &str, externals: &[ExternalInput]) -> anyhow::Result<Manifest> {
        let mut m = Manifest::new(command, &self.cfg.config_sha256, self.cfg.seed);
        for (key, path) in self.cfg.external_inputs(externals) {
            m.add_input(&key, &path)?;
        }
        Ok(m)
    }

    fn require(&self, name: &str, producer: &str) -> anyhow::Result<()> {
        let externals: BTreeMap<String, PathBuf> = self.cfg.external_inputs(&ALL_EXTERNALS).into_iter().collect();
        check_lineage(&self.cfg.out_dir, name, producer, &externals, &self.cfg.config_sha256)
    }

    fn write(&self, name: &str, text: &str) -> anyhow::Result<()> {
        write_atomic(&self.out(name), text.as_bytes())?;
        Ok(())
    }

    fn load_corpus(&self) -> anyhow::Result<LabeledCorpus> {
        self.require(CORPUS_FILE, "ingest")?;
        Ok(ingest_corpus(&self.out(CORPUS_FILE), RecordFormat::Jsonl)?)
    }

    fn tokenize(&self, corpus: &LabeledCorpus) -> anyhow::Result<Vec<TokenizedTweet>> {
        let pre = self.cfg.preprocessor()?;
        Ok(corpus.records().par_iter().map(|r| pre.preprocess(&r.tweet)).collect())
    }

    fn plans(&self, corpus: &LabeledCorpus, methods: &[SplitMethod]) -> anyhow::Result<Vec<SplitPlan>> {
        let (seed, split) = (self.cfg.seed, &self.cfg.split);
        methods
            .iter()
            .map(|m| {
                let plan = match m {
                    SplitMethod::TweetLevel => evaluate::plan_tweet_level(corpus, split.k, seed)?,
                    SplitMethod::UserLevel => evaluate::plan_user_level(corpus, split.neg_test_fraction, seed)?,
                    SplitMethod::OutOfNetwork => {
                        let Some(map) = self.cfg.communities()? else {
                            bail!("the out_of_network split needs [paths] communities in the config");
                        };
                        evaluate::plan_out_of_network(corpus, &map, split.neg_test_fraction, seed)?
                    }
                };
                Ok(plan)
            })
            .collect()
    }
}

fn json_pretty<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn ingest(ctx: &Ctx) -> anyhow::Result<()> {
    let cfg = &ctx.cfg;
    let mut corpus = ingest_corpus(&cfg.paths.corpus, RecordFormat::Jsonl)?;
    let n_raw = corpus.len();
    if let Some(lang) = &cfg.filters.lang {
        corpus = filter_language_and_retweets(&corpus, lang);
    }
    if let Some([a, b, c, d]) = cfg.filters.bounding_box {
        corpus = filter_bounding_box(&corpus, &BoundingBox::new(a, b, c, d)?)?;
    }
    if corpus.is_empty() {
        bail!("filters removed every tweet from {}", cfg.paths.corpus.display());
    }
    corpus.persist(&ctx.out(CORPUS_FILE))?;
    log::info!(
        "ingested {} of {n_raw} tweets ({} positive, {} groups)",
        corpus.len(),
        corpus.count(corpus::Label::Positive),
        corpus.groups().len()
    );
    let mut m = ctx.manifest("ingest", &[ExternalInput::Corpus])?;
    m.settings = serde_json::json!({
        "lang": cfg.filters.lang,
        "bounding_box": cfg.filters.bounding_box,
    });
    m.add_output(&cfg.out_dir, CORPUS_FILE)?;
    m.save(&cfg.out_dir)
}

const FEATURE_EXTERNALS: [ExternalInput; 3] = [
    ExternalInput::Stopwords,
    ExternalInput::EmojiList,
    ExternalInput::EmotionLexicon,
];

pub fn featurize(ctx: &Ctx) -> anyhow::Result<()> {
    let cfg = &ctx.cfg;
    let corpus = ctx.load_corpus()?;
    let tokenized = ctx.tokenize(&corpus)?;
    let space = featurize::fit(&tokenized, &cfg.feature_config()?)?;
    let matrix = LabeledMatrix {
        feature_names: space.feature_names().to_vec(),
        ids: corpus.records().iter().map(|r| r.tweet.id.clone()).collect(),
        labels: corpus.records().iter().map(|r| r.label).collect(),
        matrix: space.transform_all(&tokenized),
    };
    space.save(&ctx.out(FEATURE_SPACE_FILE))?;
    matrix.save(&ctx.out(MATRIX_FILE))?;
    log::info!("{} tweets x {} features", matrix.ids.len(), matrix.feature_names.len());
    let mut m = ctx.manifest("featurize", &FEATURE_EXTERNALS)?;
    m.add_artifact_input(&cfg.out_dir, CORPUS_FILE, "ingest")?;
    m.settings = serde_json::json!({ "min_df": cfg.features.min_df, "blocks": cfg.features.blocks });
    m.add_output(&cfg.out_dir, FEATURE_SPACE_FILE)?;
    m.add_output(&cfg.out_dir, MATRIX_FILE)?;
    m.save(&cfg.out_dir)
}

pub fn train(ctx: &Ctx, kind: Option<ModelKind>) -> anyhow::Result<()> {
    let cfg = &ctx.cfg;
    ctx.require(MATRIX_FILE, "featurize")?;
    check_feature_artifacts(&cfg.out_dir)?;
    let data = LabeledMatrix::load(&ctx.out(MATRIX_FILE))?;
    let tc = cfg.train_config(kind.unwrap_or(cfg.model.kind));
    let y: Vec<bool> = data.labels.iter().map(|l| l.is_positive()).collect();
    let model = models::train(&data.matrix, &y, &data.feature_names, &tc)?;
    if let models::ModelParams::Logistic(l) = &model.parameters {
        if !l.converged {
            log::warn!(
                "logistic regression stopped at max_iter = {} without converging (loss {:.6})",
                l.iterations,
                l.final_loss
            );
        }
    }
    model.save(&ctx.out(MODEL_FILE))?;
    log::info!("trained {} on {} tweets", tc.kind.display_name(), y.len());
    let mut m = ctx.manifest("train", &[])?;
    m.add_artifact_input(&cfg.out_dir, MATRIX_FILE, "featurize")?;
    m.settings = serde_json::to_value(tc)?;
    m.add_output(&cfg.out_dir, MODEL_FILE)?;
    m.save(&cfg.out_dir)
}

/// Resolves `--model`; the default location must have been written by `train`.
fn model_input(ctx: &Ctx, path: Option<&Path>, m: &mut Manifest) -> anyhow::Result<ModelArtifact> {
    match path {
        Some(p) => {
            if !p.is_file() {
                bail!("model file {} does not exist", p.display());
            }
            m.add_input(&p.to_string_lossy(), p)?;
            ModelArtifact::load(p).with_context(|| format!("cannot load model {}", p.display()))
        }
        None => {
            let p = ctx.out(MODEL_FILE);
            if !p.is_file() {
                bail!(
                    "model file {} does not exist; run `train` first or pass --model",
                    p.display()
                );
            }
            ctx.require(MODEL_FILE, "train")?;
            m.add_artifact_input(&ctx.cfg.out_dir, MODEL_FILE, "train")?;
            Ok(ModelArtifact::load(&p)?)
        }
    }
}

/// Cross-validated model reports in method-major order.
pub struct Evaluation {
    pub reports: Vec<EvalReport>,
    pub table: String,
}

/// Runs the configured models (or the `--model` file's configuration) over
/// every configured split.
pub fn evaluate(ctx: &Ctx, model: Option<&Path>) -> anyhow::Result<Evaluation> {
    let cfg = &ctx.cfg;
    let mut m = ctx.manifest(
        "evaluate",
        &[&FEATURE_EXTERNALS[..], &[ExternalInput::Communities]].concat(),
    )?;
    let configs: Vec<TrainConfig> = match model {
        Some(_) => vec![model_input(ctx, model, &mut m)?.train_config],
        None => cfg.evaluate.models.iter().map(|&k| cfg.train_config(k)).collect(),
    };
    if configs.is_empty() {
        bail!("[evaluate] models is empty and no --model was given");
    }
    let corpus = ctx.load_corpus()?;
    m.add_artifact_input(&cfg.out_dir, CORPUS_FILE, "ingest")?;
    let tokenized = ctx.tokenize(&corpus)?;
    let feature_config = cfg.feature_config()?;
    let plans = ctx.plans(&corpus, &cfg.evaluate.methods)?;
    let mut reports = Vec::new();
    for plan in &plans {
        for tc in &configs {
            log::info!("evaluating {} / {}", plan.method.display_name(), tc.kind.display_name());
            reports.push(evaluate::run_model_eval(
                &corpus,
                &tokenized,
                plan,
                tc,
                &feature_config,
            )?);
        }
    }
    let table = evaluate::render_table(&reports);
    ctx.write(SPLITS_FILE, &json_pretty(&plans)?)?;
    ctx.write(EVAL_TXT, &table)?;
    ctx.write(EVAL_CSV, &evaluate::render_csv(&reports))?;
    ctx.write(EVAL_JSON, &json_pretty(&reports)?)?;
    m.settings = serde_json::json!({
        "methods": cfg.evaluate.methods,
        "split": { "k": cfg.split.k, "neg_test_fraction": cfg.split.neg_test_fraction },
        "models": configs,
    });
    for f in [SPLITS_FILE, EVAL_TXT, EVAL_CSV, EVAL_JSON] {
        m.add_output(&cfg.out_dir, f)?;
    }
    m.save(&cfg.out_dir)?;
    Ok(Evaluation { reports, table })
}

/// Scores both rule baselines on the same split plans as `evaluate`.
pub fn baseline(ctx: &Ctx) -> anyhow::Result<Evaluation> {
    let cfg = &ctx.cfg;
    if cfg.baseline.seeds.is_empty() {
        bail!("[baseline] seeds must list the seed screen names for the mention baseline");
    }
    let corpus = ctx.load_corpus()?;
    let tokenized = ctx.tokenize(&corpus)?;
    let mention = MentionBaseline::new(cfg.baseline.seeds.clone(), cfg.baseline.mention_mode)?;
    let annotation = AnnotationBaseline(cfg.annotation_lexicon()?);
    let plans = ctx.plans(&corpus, &cfg.evaluate.methods)?;
    let mut reports = Vec::new();
    for plan in &plans {
        reports.push(evaluate::run_eval(&corpus, &tokenized, plan, &mention)?);
        reports.push(evaluate::run_eval(&corpus, &tokenized, plan, &annotation)?);
    }
    let table = evaluate::render_table(&reports);
    ctx.write(BASELINE_TXT, &table)?;
    ctx.write(BASELINE_CSV, &evaluate::render_csv(&reports))?;
    ctx.write(BASELINE_JSON, &json_pretty(&reports)?)?;
    let mut m = ctx.manifest(
        "baseline",
        &[
            ExternalInput::Stopwords,
            ExternalInput::EmojiList,
            ExternalInput::AnnotationLexicon,
            ExternalInput::Communities,
        ],
    )?;
    m.add_artifact_input(&cfg.out_dir, CORPUS_FILE, "ingest")?;
    m.settings = serde_json::json!({
        "methods": cfg.evaluate.methods,
        "split": { "k": cfg.split.k, "neg_test_fraction": cfg.split.neg_test_fraction },
        "seeds": cfg.baseline.seeds,
        "mention_mode": cfg.baseline.mention_mode,
    });
    for f in [BASELINE_TXT, BASELINE_CSV, BASELINE_JSON] {
        m.add_output(&cfg.out_dir, f)?;
    }
    m.save(&cfg.out_dir)?;
    Ok(Evaluation { reports, table })
}

fn frequency_csv(table: &FrequencyTable) -> String {
    let mut out = String::from("rank,token,raw_count,scaled_freq\n");
    for (i, ((tok, raw), (_, scaled))) in table.ranked.iter().zip(table.entries()).enumerate() {
        let _ = writeln!(out, "{},{tok},{raw},{scaled:?}", i + 1);
    }
    out
}

/// Audits a frozen model against the dialect reference corpus.
pub fn audit(ctx: &Ctx, model: Option<&Path>, tau: Option<f64>) -> anyhow::Result<String> {
    let cfg = &ctx.cfg;
    let a = &cfg.audit;
    let Some(dialect_path) = &cfg.paths.dialect_corpus else {
        bail!("audit needs [paths] dialect_corpus in the config");
    };
    let mut m = ctx.manifest(
        "audit",
        &[
            ExternalInput::Stopwords,
            ExternalInput::EmojiList,
            ExternalInput::DialectCorpus,
        ],
    )?;
    let artifact = model_input(ctx, model, &mut m)?;
    let tau = tau.unwrap_or(a.tau);
    let texts = threshold_dialect(&DialectCorpus::load(dialect_path)?, tau)?;
    if texts.is_empty() {
        bail!(
            "no reference tweets in {} have a posterior above tau = {tau}",
            dialect_path.display()
        );
    }
    let table = biasaudit::build_frequency_table(&texts, &cfg.preprocessor()?, a.top_k, a.scaling)?;
    let ranked = artifact.importances();
    let series = biasaudit::bucket_importances(&ranked, &table, a.n_features, a.bucket_size)?;
    let report = biasaudit::report_audit(&series, &ranked, a.top_n);
    let summary = format!(
        "Model: {}\nReference tweets above tau = {tau}: {}\nFrequency table: {} tokens (vocabulary {})\n\n{}",
        artifact.kind.display_name(),
        texts.len(),
        table.len(),
        table.vocab_size,
        report.summary
    );
    ctx.write(AUDIT_CSV, &report.csv)?;
    ctx.write(AUDIT_SVG, &report.svg)?;
    ctx.write(AUDIT_SUMMARY, &summary)?;
    ctx.write(FREQ_TABLE_CSV, &frequency_csv(&table))?;
    m.settings = serde_json::json!({
        "tau": tau,
        "top_k": a.top_k,
        "n_features": a.n_features,
        "bucket_size": a.bucket_size,
        "scaling": a.scaling,
        "top_n": a.top_n,
    });
    for f in [AUDIT_CSV, AUDIT_SVG, AUDIT_SUMMARY, FREQ_TABLE_CSV] {
        m.add_output(&cfg.out_dir, f)?;
    }
    m.save(&cfg.out_dir)?;
    Ok(summary)
}

/// Runs every stage in order and writes a combined report with models and
/// baselines side by side for each split method.
pub fn pipeline(ctx: &Ctx) -> anyhow::Result<String> {
    ingest(ctx)?;
    featurize(ctx)?;
    train(ctx, None)?;
    let models = evaluate(ctx, None)?;
    let baselines = baseline(ctx)?;
    let audit_summary = if ctx.cfg.paths.dialect_corpus.is_some() {
        Some(audit(ctx, None, None)?)
    } else {
        log::warn!("no dialect_corpus configured; skipping the audit");
        None
    };
    let mut combined = Vec::new();
    for method in &ctx.cfg.evaluate.methods {
        let same = |r: &&EvalReport| r.method == *method;
        combined.extend(models.reports.iter().filter(same).cloned());
        combined.extend(baselines.reports.iter().filter(same).cloned());
    }
    let mut report = String::from("Classification results\n\n");
    report.push_str(&evaluate::render_table(&combined));
    if let Some(s) = audit_summary {
        report.push_str("\nLexical bias audit\n\n");
        report.push_str(&s);
    }
    ctx.write(REPORT_TXT, &report)?;
    let mut m = ctx.manifest("pipeline", &[])?;
    for (f, producer) in [(EVAL_JSON, "evaluate"), (BASELINE_JSON, "baseline")] {
        m.add_artifact_input(&ctx.cfg.out_dir, f, producer)?;
    }
    if ctx.out(AUDIT_SUMMARY).is_file() && ctx.cfg.paths.dialect_corpus.is_some() {
        m.add_artifact_input(&ctx.cfg.out_dir, AUDIT_SUMMARY, "audit")?;
    }
    m.add_output(&ctx.cfg.out_dir, REPORT_TXT)?;
    m.save(&ctx.cfg.out_dir)?;
    Ok(report)
}

/// Writes a synthetic corpus, a dialect reference corpus and the community
/// map to `out_dir`.
pub fn generate(
    out_dir: &Path,
    n: usize,
    positive_fraction: Option<f64>,
    n_dialect: usize,
    seed: u64,
) -> anyhow::Result<Vec<String>> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut sc = SynthConfig::new(n, seed);
    if let Some(p) = positive_fraction {
        if !(0.0 < p && p < 1.0) {
            bail!("--positive-fraction must be strictly between 0 and 1, got {p}");
        }
        sc.positive_fraction = p;
    }
    let s = synth::generate(&sc);
    s.corpus.persist(&out_dir.join("tweets.jsonl"))?;
    synth::generate_dialect(n_dialect, seed).persist(&out_dir.join("dialect.jsonl"))?;
    let communities = toml::to_string(&s.community_of)?;
    write_atomic(&out_dir.join("communities.toml"), communities.as_bytes())?;
    Ok(s.seeds)
}

/// Loads a saved feature space and confirms it matches the saved matrix.
pub fn check_feature_artifacts(out_dir: &Path) -> anyhow::Result<()> {
    let space = FeatureSpace::load(&out_dir.join(FEATURE_SPACE_FILE))?;
    let matrix = LabeledMatrix::load(&out_dir.join(MATRIX_FILE))?;
    if space.feature_names() != matrix.feature_names.as_slice() {
        bail!("{FEATURE_SPACE_FILE} and {MATRIX_FILE} disagree on feature columns; rerun `featurize`");
    }
    Ok(())
}
