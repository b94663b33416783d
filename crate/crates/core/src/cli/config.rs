//! Run configuration, read from a TOML file. Relative paths resolve against
//! the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::baselines::{AnnotationLexicon, MentionMode};
use crate::biasaudit::{self, FrequencyScaling};
use crate::corpus::BoundingBox;
use crate::evaluate::{self, SplitMethod};
use crate::featurize::{BlockSet, EmotionLexicon, FeatureConfig};
use crate::models::{ForestParams, GbtParams, LogisticParams, ModelKind, NbParams, TrainConfig};
use crate::preprocess::{EmojiList, Preprocessor, Stopwords};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub stopwords: PathBuf,
    pub emotion_lexicon: PathBuf,
    pub emoji_list: Option<PathBuf>,
    pub annotation_lexicon: Option<PathBuf>,
    pub dialect_corpus: Option<PathBuf>,
    /// TOML table of positive group key to community id.
    pub communities: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filters {
    pub lang: Option<String>,
    /// `[lat_min, lat_max, lon_min, lon_max]`
    pub bounding_box: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSection {
    pub min_df: usize,
    pub blocks: BlockSet,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            min_df: 1,
            blocks: BlockSet::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub k: usize,
    pub neg_test_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            k: evaluate::DEFAULT_K,
            neg_test_fraction: evaluate::DEFAULT_NEG_TEST_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Kind trained by `train`.
    pub kind: ModelKind,
    pub naive_bayes: NbParams,
    pub logistic: LogisticParams,
    pub random_forest: ForestParams,
    pub gbt: GbtParams,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: ModelKind::Logistic,
            naive_bayes: NbParams::default(),
            logistic: LogisticParams::default(),
            random_forest: ForestParams::default(),
            gbt: GbtParams::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    pub methods: Vec<SplitMethod>,
    pub models: Vec<ModelKind>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            methods: SplitMethod::ALL.to_vec(),
            models: vec![ModelKind::NaiveBayes, ModelKind::Logistic, ModelKind::RandomForest],
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub seeds: Vec<String>,
    pub mention_mode: MentionMode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSection {
    pub tau: f64,
    pub top_k: usize,
    pub n_features: usize,
    pub bucket_size: usize,
    pub scaling: FrequencyScaling,
    pub top_n: usize,
}

impl Default for AuditSection {
    fn default() -> Self {
        AuditSection {
            tau: 0.8,
            top_k: biasaudit::DEFAULT_TOP_K,
            n_features: biasaudit::DEFAULT_N_FEATURES,
            bucket_size: biasaudit::DEFAULT_BUCKET_SIZE,
            scaling: FrequencyScaling::RetainedK,
            top_n: 20,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    paths: Paths,
    #[serde(default)]
    filters: Filters,
    #[serde(default)]
    features: FeatureSection,
    #[serde(default)]
    split: SplitSection,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    evaluate: EvaluateSection,
    #[serde(default)]
    baseline: BaselineSection,
    #[serde(default)]
    audit: AuditSection,
}

/// A validated configuration with paths resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Paths exactly as written in the file, used as stable manifest keys.
    pub paths_as_written: Paths,
    pub paths: Paths,
    pub filters: Filters,
    pub features: FeatureSection,
    pub split: SplitSection,
    pub model: ModelSection,
    pub evaluate: EvaluateSection,
    pub baseline: BaselineSection,
    pub audit: AuditSection,
    /// SHA-256 of the config file bytes.
    pub config_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Reads and validates a config file. `seed` and `out` override the file.
    pub fn load(path: &Path, seed: Option<u64>, out: Option<&Path>) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        let text = std::str::from_utf8(&bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
        let raw: RawConfig = toml::from_str(text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));

        let Some(seed) = seed.or(raw.seed) else {
            bail!(
                "{}: `seed` is required (set it in the file or pass --seed)",
                path.display()
            );
        };
        let out_dir = match (out, &raw.out_dir) {
            (Some(o), _) => o.to_path_buf(),
            (None, Some(o)) => resolve(base, o),
            (None, None) => bail!(
                "{}: `out_dir` is required (set it in the file or pass --out)",
                path.display()
            ),
        };
        let p = &raw.paths;
        let paths = Paths {
            corpus: resolve(base, &p.corpus),
            stopwords: resolve(base, &p.stopwords),
            emotion_lexicon: resolve(base, &p.emotion_lexicon),
            emoji_list: p.emoji_list.as_deref().map(|x| resolve(base, x)),
            annotation_lexicon: p.annotation_lexicon.as_deref().map(|x| resolve(base, x)),
            dialect_corpus: p.dialect_corpus.as_deref().map(|x| resolve(base, x)),
            communities: p.communities.as_deref().map(|x| resolve(base, x)),
        };
        let required = [
            Some(&paths.corpus),
            Some(&paths.stopwords),
            Some(&paths.emotion_lexicon),
        ];
        let optional = [
            paths.emoji_list.as_ref(),
            paths.annotation_lexicon.as_ref(),
            paths.dialect_corpus.as_ref(),
            paths.communities.as_ref(),
        ];
        for f in required.into_iter().chain(optional).flatten() {
            if !f.is_file() {
                bail!("{}: referenced file {} does not exist", path.display(), f.display());
            }
        }
        if let Some([a, b, c, d]) = raw.filters.bounding_box {
            BoundingBox::new(a, b, c, d)?;
        }
        if raw.evaluate.methods.is_empty() {
            bail!("{}: [evaluate] methods is empty", path.display());
        }
        Ok(RunConfig {
            seed,
            out_dir,
            paths_as_written: raw.paths.clone(),
            paths,
            filters: raw.filters,
            features: raw.features,
            split: raw.split,
            model: raw.model,
            evaluate: raw.evaluate,
            baseline: raw.baseline,
            audit: raw.audit,
            config_sha256: sha256_hex(&bytes),
        })
    }

    pub fn train_config(&self, kind: ModelKind) -> TrainConfig {
        TrainConfig {
            kind,
            rng_seed: self.seed,
            naive_bayes: self.model.naive_bayes,
            logistic: self.model.logistic,
            random_forest: self.model.random_forest,
            gbt: self.model.gbt,
        }
    }

    pub fn emoji_list(&self) -> anyhow::Result<EmojiList> {
        Ok(match &self.paths.emoji_list {
            Some(p) => EmojiList::load(p)?,
            None => EmojiList::default_top10(),
        })
    }

    pub fn preprocessor(&self) -> anyhow::Result<Preprocessor> {
        Ok(Preprocessor::new(
            Stopwords::load(&self.paths.stopwords)?,
            self.emoji_list()?,
        ))
    }

    pub fn feature_config(&self) -> anyhow::Result<FeatureConfig> {
        let mut c = FeatureConfig::new(self.emoji_list()?, EmotionLexicon::load(&self.paths.emotion_lexicon)?);
        c.min_df = self.features.min_df;
        c.blocks = self.features.blocks;
        Ok(c)
    }

    pub fn annotation_lexicon(&self) -> anyhow::Result<AnnotationLexicon> {
        Ok(match &self.paths.annotation_lexicon {
            Some(p) => AnnotationLexicon::load(p)?,
            None => AnnotationLexicon::default_lists(),
        })
    }

    pub fn communities(&self) -> anyhow::Result<Option<BTreeMap<String, String>>> {
        let Some(p) = &self.paths.communities else {
            return Ok(None);
        };
        let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
        let map: BTreeMap<String, String> = toml::from_str(&text)
            .with_context(|| format!("{}: expected `group = \"community\"` lines", p.display()))?;
        Ok(Some(map))
    }

    /// External input files as `(manifest key, resolved path)`.
    pub fn external_inputs(&self, which: &[ExternalInput]) -> Vec<(String, PathBuf)> {
        let w = &self.paths_as_written;
        let r = &self.paths;
        let key = |p: &Path| p.to_string_lossy().into_owned();
        which
            .iter()
            .filter_map(|i| match i {
                ExternalInput::Corpus => Some((key(&w.corpus), r.corpus.clone())),
                ExternalInput::Stopwords => Some((key(&w.stopwords), r.stopwords.clone())),
                ExternalInput::EmotionLexicon => Some((key(&w.emotion_lexicon), r.emotion_lexicon.clone())),
                ExternalInput::EmojiList => w.emoji_list.as_deref().map(key).zip(r.emoji_list.clone()),
                ExternalInput::AnnotationLexicon => w
                    .annotation_lexicon
                    .as_deref()
                    .map(key)
                    .zip(r.annotation_lexicon.clone()),
                ExternalInput::DialectCorpus => w.dialect_corpus.as_deref().map(key).zip(r.dialect_corpus.clone()),
                ExternalInput::Communities => w.communities.as_deref().map(key).zip(r.communities.clone()),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ExternalInput {
    Corpus,
    Stopwords,
    EmotionLexicon,
    EmojiList,
    AnnotationLexicon,
    DialectCorpus,
    Communities,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn base_files(dir: &Path) {
        write(dir, "c.jsonl", "");
        write(dir, "s.txt", "the\n");
        write(dir, "e.txt", "");
    }

    const PATHS: &str = "[paths]\ncorpus = \"c.jsonl\"\nstopwords = \"s.txt\"\nemotion_lexicon = \"e.txt\"\n";

    #[test]
    fn resolves_relative_paths_and_defaults() {
        let d = tempfile::tempdir().unwrap();
        base_files(d.path());
        let cfg = write(d.path(), "run.toml", &format!("seed = 3\nout_dir = \"out\"\n{PATHS}"));
        let c = RunConfig::load(&cfg, None, None).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.out_dir, d.path().join("out"));
        assert_eq!(c.paths.corpus, d.path().join("c.jsonl"));
        assert_eq!(c.split.k, 5);
        assert_eq!(c.audit.n_features, 7500);
        assert_eq!(c.model.logistic, LogisticParams::default());
        let o = RunConfig::load(&cfg, Some(9), Some(Path::new("/tmp/x"))).unwrap();
        assert_eq!((o.seed, o.out_dir.as_path()), (9, Path::new("/tmp/x")));
    }

    #[test]
    fn shipped_example_loads_with_documented_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("config/example.toml");
        let c = RunConfig::load(&path, None, None).unwrap();
        assert_eq!(c.model.logistic, LogisticParams::default());
        assert_eq!(c.model.random_forest, ForestParams::default());
        assert_eq!(c.model.gbt, GbtParams::default());
        assert_eq!(c.model.naive_bayes, NbParams::default());
        assert_eq!(c.features.blocks, BlockSet::default());
        assert_eq!(c.evaluate.methods, SplitMethod::ALL.to_vec());
        assert_eq!((c.audit.top_k, c.audit.n_features, c.audit.bucket_size), (10_000, 7_500, 150));
        assert!(c.communities().unwrap().is_some());
    }

    #[test]
    fn seed_is_mandatory() {
        let d = tempfile::tempdir().unwrap();
        base_files(d.path());
        let cfg = write(d.path(), "run.toml", &format!("out_dir = \"out\"\n{PATHS}"));
        let err = RunConfig::load(&cfg, None, None).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
        assert!(RunConfig::load(&cfg, Some(1), None).is_ok());
    }

    #[test]
    fn missing_file_and_unknown_keys() {
        let d = tempfile::tempdir().unwrap();
        base_files(d.path());
        let cfg = write(
            d.path(),
            "run.toml",
            &format!("seed = 1\nout_dir = \"o\"\n{PATHS}dialect_corpus = \"nope.jsonl\"\n"),
        );
        let err = RunConfig::load(&cfg, None, None).unwrap_err();
        assert!(err.to_string().contains("nope.jsonl"), "{err}");
        let cfg = write(
            d.path(),
            "bad.toml",
            &format!("seed = 1\nout_dir = \"o\"\ncolour = 2\n{PATHS}"),
        );
        assert!(RunConfig::load(&cfg, None, None).is_err());
    }
}
