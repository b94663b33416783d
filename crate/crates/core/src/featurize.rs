//! Feature extraction.
//!
//! A [`FeatureSpace`] is fitted on training tweets only and then maps any
//! tweet to a sparse row made of these blocks, in column order:
//!
//! | block      | columns               | value                                   |
//! |------------|-----------------------|-----------------------------------------|
//! | tf-idf     | `tfidf:<token>`       | `count · idf`, L2-normalized per tweet   |
//! | binary     | `bin:<token>`         | 1 if present                            |
//! | bigrams    | `bigram:<a> <b>`      | adjacent-pair count                     |
//! | POS        | `pos:<tag>`           | fraction of tokens with the tag         |
//! | hashtags   | `hashtag_count`       | hashtags in the raw text                |
//! | emoji      | `emoji:<seq>`         | occurrences of each listed emoji        |
//! | emotion    | `emotion:<name>`      | fraction of tokens carrying the emotion |
//!
//! `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, where `N` is the number of
//! training tweets and `df(t)` the number containing `t`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_atomic, Label};
use crate::matrix::{SparseMatrix, SparseRow};
use crate::preprocess::{EmojiList, TokenizedTweet};
use crate::{Error, Result};

pub const TFIDF_PREFIX: &str = "tfidf:";
pub const BINARY_PREFIX: &str = "bin:";
pub const BIGRAM_PREFIX: &str = "bigram:";
pub const POS_PREFIX: &str = "pos:";
pub const HASHTAG_FEATURE: &str = "hashtag_count";
pub const EMOJI_PREFIX: &str = "emoji:";
pub const EMOTION_PREFIX: &str = "emotion:";

/// The token behind a single-word (tf-idf or binary occurrence) column name.
pub fn single_word(feature_name: &str) -> Option<&str> {
    feature_name
        .strip_prefix(TFIDF_PREFIX)
        .or_else(|| feature_name.strip_prefix(BINARY_PREFIX))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Anticipation,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Surprise,
    Trust,
}

impl Emotion {
    pub const ALL: [Emotion; 8] = [
        Emotion::Anger,
        Emotion::Anticipation,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Joy,
        Emotion::Sadness,
        Emotion::Surprise,
        Emotion::Trust,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Anticipation => "anticipation",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
            Emotion::Trust => "trust",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::invalid("emotion", s.to_string()))
    }
}

/// Word → emotion set, stored as a bitmask over [`Emotion::ALL`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionLexicon {
    words: BTreeMap<String, u8>,
}

impl EmotionLexicon {
    /// Parses `word<TAB>emotion<TAB>{0,1}` rows. Rows for the polarity
    /// columns (`positive`, `negative`) are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut words: BTreeMap<String, u8> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::invalid("emotion lexicon", format!("line {}: {line:?}", i + 1));
            let mut parts = line.split('\t');
            let (Some(word), Some(emotion), Some(flag), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            let flag = match flag.trim() {
                "0" => false,
                "1" => true,
                _ => return Err(bad()),
            };
            let emotion = emotion.trim();
            if emotion == "positive" || emotion == "negative" {
                continue;
            }
            let e: Emotion = emotion.parse().map_err(|_| bad())?;
            let entry = words.entry(word.trim().to_lowercase()).or_default();
            if flag {
                *entry |= e.bit();
            }
        }
        words.retain(|_, m| *m != 0);
        Ok(EmotionLexicon { words })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EmotionLexicon::parse(&text)
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Emotion)>) -> Self {
        let mut words: BTreeMap<String, u8> = BTreeMap::new();
        for (w, e) in pairs {
            *words.entry(w.to_lowercase()).or_default() |= e.bit();
        }
        EmotionLexicon { words }
    }

    pub fn emotions(&self, word: &str) -> Vec<Emotion> {
        let mask = self.words.get(word).copied().unwrap_or(0);
        Emotion::ALL.into_iter().filter(|e| mask & e.bit() != 0).collect()
    }

    fn has(&self, word: &str, e: Emotion) -> bool {
        self.words.get(word).is_some_and(|m| m & e.bit() != 0)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Assigns one tag per token; tags are indices into [`PosTagger::tagset`].
pub trait PosTagger: Send + Sync {
    fn tagset(&self) -> Vec<String>;
    fn tag(&self, tokens: &[String]) -> Vec<usize>;
}

/// Closed-class word lists plus suffix rules, defaulting to noun.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleTagger;

impl RuleTagger {
    pub const TAGS: [&'static str; 8] = [
        "noun",
        "verb",
        "adjective",
        "adverb",
        "pronoun",
        "determiner",
        "preposition",
        "conjunction",
    ];
    const NOUN: usize = 0;
    const VERB: usize = 1;
    const ADJECTIVE: usize = 2;
    const ADVERB: usize = 3;
    const PRONOUN: usize = 4;
    const DETERMINER: usize = 5;
    const PREPOSITION: usize = 6;
    const CONJUNCTION: usize = 7;

    const PRONOUNS: &'static [&'static str] = &[
        "i",
        "me",
        "my",
        "mine",
        "myself",
        "you",
        "your",
        "yours",
        "yourself",
        "u",
        "ur",
        "ya",
        "yall",
        "y'all",
        "he",
        "him",
        "his",
        "himself",
        "she",
        "her",
        "hers",
        "herself",
        "it",
        "its",
        "itself",
        "we",
        "us",
        "our",
        "ours",
        "they",
        "them",
        "their",
        "theirs",
        "dem",
        "who",
        "whom",
        "whose",
        "somebody",
        "someone",
        "everybody",
        "everyone",
        "nobody",
    ];
    const DETERMINERS: &'static [&'static str] = &[
        "the", "a", "an", "this", "that", "these", "those", "every", "each", "some", "any", "no", "all", "both",
        "either", "neither", "another", "dat", "da",
    ];
    const PREPOSITIONS: &'static [&'static str] = &[
        "in", "on", "at", "to", "from", "with", "without", "of", "for", "by", "about", "into", "onto", "over", "under",
        "after", "before", "between", "through", "during", "against", "above", "below", "around", "behind", "near",
        "upon", "within", "across", "toward", "towards", "off", "till", "until", "wit",
    ];
    const CONJUNCTIONS: &'static [&'static str] = &[
        "and", "or", "but", "nor", "so", "yet", "because", "cause", "cuz", "although", "though", "while", "if",
        "unless", "whether", "since", "n",
    ];
    const VERBS: &'static [&'static str] = &[
        "is", "are", "was", "were", "be", "been", "am", "have", "has", "had", "do", "does", "did", "go", "goes",
        "went", "get", "gets", "got", "make", "made", "know", "knew", "say", "said", "see", "saw", "come", "came",
        "take", "took", "want", "need", "feel", "felt", "think", "thought", "tell", "told", "let", "keep", "kept",
        "run", "ran", "can", "could", "will", "would", "should", "must", "may", "might", "finna", "tryna", "gon",
        "gonna", "wanna", "gotta", "aint", "ain't",
    ];

    fn lexical(token: &str) -> Option<usize> {
        let lists: [(&[&str], usize); 5] = [
            (Self::PRONOUNS, Self::PRONOUN),
            (Self::DETERMINERS, Self::DETERMINER),
            (Self::PREPOSITIONS, Self::PREPOSITION),
            (Self::CONJUNCTIONS, Self::CONJUNCTION),
            (Self::VERBS, Self::VERB),
        ];
        lists
            .iter()
            .find(|(words, _)| words.contains(&token))
            .map(|&(_, tag)| tag)
    }

    fn suffix(token: &str) -> Option<usize> {
        let n = token.chars().count();
        if n >= 4 && token.ends_with("ly") {
            Some(Self::ADVERB)
        } else if (n >= 5 && token.ends_with("ing")) || (n >= 4 && token.ends_with("ed")) {
            Some(Self::VERB)
        } else if (n >= 5 && token.ends_with("ous")) || (n >= 5 && token.ends_with("ful")) {
            Some(Self::ADJECTIVE)
        } else {
            None
        }
    }
}

impl PosTagger for RuleTagger {
    fn tagset(&self) -> Vec<String> {
        Self::TAGS.iter().map(|s| s.to_string()).collect()
    }

    fn tag(&self, tokens: &[String]) -> Vec<usize> {
        let mut tags = Vec::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            let t = tok.as_str();
            let tag = Self::lexical(t).or_else(|| Self::suffix(t)).unwrap_or_else(|| {
                // third-person -s form right after a pronoun
                let after_pronoun = i > 0 && tags[i - 1] == Self::PRONOUN;
                let s_form = t.len() > 2 && t.ends_with('s') && !t.ends_with("ss");
                if after_pronoun && s_form {
                    Self::VERB
                } else {
                    Self::NOUN
                }
            });
            tags.push(tag);
        }
        tags
    }
}

/// Which blocks to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlockSet {
    pub tfidf: bool,
    pub binary: bool,
    pub bigrams: bool,
    pub pos: bool,
    pub hashtags: bool,
    pub emoji: bool,
    pub emotion: bool,
}

impl Default for BlockSet {
    fn default() -> Self {
        BlockSet {
            tfidf: true,
            binary: true,
            bigrams: true,
            pos: true,
            hashtags: true,
            emoji: true,
            emotion: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// Tokens and bigrams seen in fewer training tweets are dropped.
    pub min_df: usize,
    pub blocks: BlockSet,
    pub emoji: EmojiList,
    pub lexicon: EmotionLexicon,
}

impl FeatureConfig {
    pub fn new(emoji: EmojiList, lexicon: EmotionLexicon) -> Self {
        FeatureConfig {
            min_df: 1,
            blocks: BlockSet::default(),
            emoji,
            lexicon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Layout {
    tfidf: usize,
    binary: usize,
    bigram: usize,
    pos: usize,
    hashtag: usize,
    emoji: usize,
    emotion: usize,
    width: usize,
}

/// A fitted feature space. Immutable once built; transforming never
/// changes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    vocab: BTreeMap<String, u32>,
    /// Keyed by `"<a> <b>"`; tokens never contain whitespace.
    bigram_vocab: BTreeMap<String, u32>,
    idf: Vec<f64>,
    pos_tagset: Vec<String>,
    emotion_lexicon: EmotionLexicon,
    emoji_list: EmojiList,
    blocks: BlockSet,
    n_train: usize,
    layout: Layout,
    feature_names: Vec<String>,
}

/// One tweet's realized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub id: String,
    pub values: SparseRow,
}

pub fn fit(train: &[TokenizedTweet], config: &FeatureConfig) -> Result<FeatureSpace> {
    fit_with_tagger(train, config, &RuleTagger)
}

pub fn fit_with_tagger(
    train: &[TokenizedTweet],
    config: &FeatureConfig,
    tagger: &dyn PosTagger,
) -> Result<FeatureSpace> {
    if train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let min_df = config.min_df.max(1);

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    let mut bigram_df: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for t in train {
        let uniq: BTreeSet<&str> = t.tokens.iter().map(String::as_str).collect();
        for tok in uniq {
            *df.entry(tok).or_default() += 1;
        }
        let pairs: BTreeSet<(&str, &str)> = t.tokens.windows(2).map(|w| (w[0].as_str(), w[1].as_str())).collect();
        for p in pairs {
            *bigram_df.entry(p).or_default() += 1;
        }
    }

    let n = train.len() as f64;
    let mut vocab = BTreeMap::new();
    let mut idf = Vec::new();
    if config.blocks.tfidf || config.blocks.binary {
        for (tok, d) in df.iter().filter(|(_, &d)| d >= min_df) {
            vocab.insert(tok.to_string(), idf.len() as u32);
            idf.push(((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0);
        }
    }
    let mut bigram_vocab = BTreeMap::new();
    if config.blocks.bigrams {
        for ((a, b), _) in bigram_df.iter().filter(|(_, &d)| d >= min_df) {
            let j = bigram_vocab.len() as u32;
            bigram_vocab.insert(format!("{a} {b}"), j);
        }
    }

    let pos_tagset = if config.blocks.pos { tagger.tagset() } else { Vec::new() };
    let v = vocab.len();
    let b = &config.blocks;
    let width_of = |on: bool, w: usize| if on { w } else { 0 };
    let mut layout = Layout {
        tfidf: 0,
        binary: 0,
        bigram: 0,
        pos: 0,
        hashtag: 0,
        emoji: 0,
        emotion: 0,
        width: 0,
    };
    let mut off = 0;
    for (slot, w) in [
        (&mut layout.tfidf, width_of(b.tfidf, v)),
        (&mut layout.binary, width_of(b.binary, v)),
        (&mut layout.bigram, bigram_vocab.len()),
        (&mut layout.pos, pos_tagset.len()),
        (&mut layout.hashtag, width_of(b.hashtags, 1)),
        (&mut layout.emoji, width_of(b.emoji, config.emoji.entries().len())),
        (&mut layout.emotion, width_of(b.emotion, Emotion::ALL.len())),
    ] {
        *slot = off;
        off += w;
    }
    layout.width = off;

    let mut feature_names = Vec::with_capacity(off);
    if b.tfidf {
        feature_names.extend(vocab.keys().map(|t| format!("{TFIDF_PREFIX}{t}")));
    }
    if b.binary {
        feature_names.extend(vocab.keys().map(|t| format!("{BINARY_PREFIX}{t}")));
    }
    feature_names.extend(bigram_vocab.keys().map(|k| format!("{BIGRAM_PREFIX}{k}")));
    feature_names.extend(pos_tagset.iter().map(|t| format!("{POS_PREFIX}{t}")));
    if b.hashtags {
        feature_names.push(HASHTAG_FEATURE.to_string());
    }
    if b.emoji {
        feature_names.extend(config.emoji.entries().iter().map(|e| format!("{EMOJI_PREFIX}{e}")));
    }
    if b.emotion {
        feature_names.extend(Emotion::ALL.iter().map(|e| format!("{EMOTION_PREFIX}{}", e.name())));
    }
    debug_assert_eq!(feature_names.len(), layout.width);
    let unique: HashSet<&String> = feature_names.iter().collect();
    if unique.len() != feature_names.len() {
        return Err(Error::invalid("feature space", "duplicate feature names"));
    }

    Ok(FeatureSpace {
        vocab,
        bigram_vocab,
        idf,
        pos_tagset,
        emotion_lexicon: config.lexicon.clone(),
        emoji_list: config.emoji.clone(),
        blocks: config.blocks,
        n_train: train.len(),
        layout,
        feature_names,
    })
}

impl FeatureSpace {
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.layout.width
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn vocab(&self) -> impl Iterator<Item = &str> {
        self.vocab.keys().map(String::as_str)
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.vocab.get(token).map(|&j| self.idf[j as usize])
    }

    pub fn pos_tagset(&self) -> &[String] {
        &self.pos_tagset
    }

    pub fn emoji_list(&self) -> &EmojiList {
        &self.emoji_list
    }

    pub fn transform(&self, tweet: &TokenizedTweet) -> FeatureVector {
        self.transform_with_tagger(tweet, &RuleTagger)
    }

    /// Transforms with a caller-supplied tagger, which must use the tagset
    /// the space was fitted with.
    pub fn transform_with_tagger(&self, tweet: &TokenizedTweet, tagger: &dyn PosTagger) -> FeatureVector {
        let l = &self.layout;
        let b = &self.blocks;
        let tokens = &tweet.tokens;
        let len = tokens.len() as f64;
        let mut values: SparseRow = Vec::new();

        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for t in tokens {
            if let Some(&j) = self.vocab.get(t) {
                *counts.entry(j).or_default() += 1;
            }
        }
        if b.tfidf {
            let raw: Vec<(u32, f64)> = counts
                .iter()
                .map(|(&j, &c)| (j, c as f64 * self.idf[j as usize]))
                .collect();
            let norm = raw.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                values.extend(raw.into_iter().map(|(j, v)| ((l.tfidf + j as usize) as u32, v / norm)));
            }
        }
        if b.binary {
            values.extend(counts.keys().map(|&j| ((l.binary + j as usize) as u32, 1.0)));
        }
        if b.bigrams {
            let mut bc: BTreeMap<u32, u32> = BTreeMap::new();
            let mut key = String::new();
            for w in tokens.windows(2) {
                key.clear();
                key.push_str(&w[0]);
                key.push(' ');
                key.push_str(&w[1]);
                if let Some(&j) = self.bigram_vocab.get(&key) {
                    *bc.entry(j).or_default() += 1;
                }
            }
            values.extend(bc.into_iter().map(|(j, c)| ((l.bigram + j as usize) as u32, c as f64)));
        }
        if b.pos && !tokens.is_empty() {
            debug_assert_eq!(tagger.tagset(), self.pos_tagset);
            let mut tc = vec![0u32; self.pos_tagset.len()];
            for tag in tagger.tag(tokens) {
                tc[tag] += 1;
            }
            for (k, c) in tc.into_iter().enumerate() {
                if c > 0 {
                    values.push(((l.pos + k) as u32, c as f64 / len));
                }
            }
        }
        if b.hashtags && tweet.hashtag_count > 0 {
            values.push((l.hashtag as u32, tweet.hashtag_count as f64));
        }
        if b.emoji {
            for (k, e) in self.emoji_list.entries().iter().enumerate() {
                if let Some(&c) = tweet.emoji_counts.get(e) {
                    if c > 0 {
                        values.push(((l.emoji + k) as u32, c as f64));
                    }
                }
            }
        }
        if b.emotion && !tokens.is_empty() {
            for (k, e) in Emotion::ALL.into_iter().enumerate() {
                let hits = tokens.iter().filter(|t| self.emotion_lexicon.has(t, e)).count();
                if hits > 0 {
                    values.push(((l.emotion + k) as u32, hits as f64 / len));
                }
            }
        }
        FeatureVector {
            id: tweet.id.clone(),
            values,
        }
    }

    /// Transforms many tweets in parallel; row order follows the input.
    pub fn transform_all(&self, tweets: &[TokenizedTweet]) -> SparseMatrix {
        let rows: Vec<SparseRow> = tweets.par_iter().map(|t| self.transform(t).values).collect();
        SparseMatrix::from_rows(self.n_features(), rows).expect("transform emits sorted in-range columns")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// A feature matrix with row ids, labels and column names, as persisted to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub feature_names: Vec<String>,
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub matrix: SparseMatrix,
}

const MATRIX_MAGIC: &str = "#lexaudit-matrix v1";

impl LabeledMatrix {
    /// Writes a header of column names and row ids/labels, then
    /// `row,col,value` triplets.
    pub fn save(&self, path: &Path) -> Result<()> {
        let m = &self.matrix;
        let mut out = String::new();
        let _ = writeln!(out, "{MATRIX_MAGIC} rows={} cols={}", m.n_rows(), m.n_cols());
        for (j, name) in self.feature_names.iter().enumerate() {
            let _ = writeln!(out, "#col\t{j}\t{name}");
        }
        for (i, (id, label)) in self.ids.iter().zip(&self.labels).enumerate() {
            let _ = writeln!(out, "#row\t{i}\t{id}\t{label}");
        }
        out.push_str("row,col,value\n");
        for (i, row) in m.rows().iter().enumerate() {
            for &(j, v) in row {
                let _ = writeln!(out, "{i},{j},{v:?}");
            }
        }
        write_atomic(path, out.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |line: usize, message: &str| Error::Record {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        let dims = header
            .strip_prefix(MATRIX_MAGIC)
            .ok_or_else(|| bad(1, "not a feature matrix file"))?;
        let mut n_rows = None;
        let mut n_cols = None;
        for kv in dims.split_whitespace() {
            match kv.split_once('=') {
                Some(("rows", v)) => n_rows = v.parse::<usize>().ok(),
                Some(("cols", v)) => n_cols = v.parse::<usize>().ok(),
                _ => {}
            }
        }
        let (n_rows, n_cols) = n_rows.zip(n_cols).ok_or_else(|| bad(1, "missing rows/cols"))?;

        let mut feature_names = Vec::with_capacity(n_cols);
        let mut ids = Vec::with_capacity(n_rows);
        let mut labels = Vec::with_capacity(n_rows);
        let mut rows: Vec<SparseRow> = vec![Vec::new(); n_rows];
        let mut in_body = false;
        for (i, line) in lines {
            let ln = i + 1;
            if in_body {
                let mut p = line.splitn(3, ',');
                let (Some(r), Some(c), Some(v)) = (p.next(), p.next(), p.next()) else {
                    return Err(bad(ln, "expected row,col,value"));
                };
                let r: usize = r.parse().map_err(|_| bad(ln, "bad row"))?;
                let c: u32 = c.parse().map_err(|_| bad(ln, "bad col"))?;
                let v: f64 = v.parse().map_err(|_| bad(ln, "bad value"))?;
                rows.get_mut(r).ok_or_else(|| bad(ln, "row out of range"))?.push((c, v));
            } else if let Some(rest) = line.strip_prefix("#col\t") {
                let (_, name) = rest.split_once('\t').ok_or_else(|| bad(ln, "bad column line"))?;
                feature_names.push(name.to_string());
            } else if let Some(rest) = line.strip_prefix("#row\t") {
                let parts: Vec<&str> = rest.split('\t').collect();
                if parts.len() != 3 {
                    return Err(bad(ln, "bad row line"));
                }
                ids.push(parts[1].to_string());
                labels.push(parts[2].parse().map_err(|_| bad(ln, "bad label"))?);
            } else if line == "row,col,value" {
                in_body = true;
            } else {
                return Err(bad(ln, "unexpected line"));
            }
        }
        if feature_names.len() != n_cols || ids.len() != n_rows {
            return Err(bad(1, "header counts do not match contents"));
        }
        let matrix = SparseMatrix::from_rows(n_cols, rows)?;
        Ok(LabeledMatrix {
            feature_names,
            ids,
            labels,
            matrix,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::EmojiList;

    fn tt(id: &str, toks: &str) -> TokenizedTweet {
        TokenizedTweet {
            id: id.into(),
            tokens: toks.split_whitespace().map(String::from).collect(),
            hashtag_count: 0,
            emoji_counts: BTreeMap::new(),
            raw_text: toks.into(),
        }
    }

    fn config() -> FeatureConfig {
        FeatureConfig::new(
            EmojiList::default_top10(),
            EmotionLexicon::from_pairs([("happy", Emotion::Joy)]),
        )
    }

    fn col(space: &FeatureSpace, name: &str) -> usize {
        space.feature_names().iter().position(|n| n == name).unwrap()
    }

    fn value(space: &FeatureSpace, v: &FeatureVector, name: &str) -> f64 {
        let c = col(space, name) as u32;
        v.values.iter().find(|(j, _)| *j == c).map_or(0.0, |(_, x)| *x)
    }

    #[test]
    fn idf_two_docs() {
        let s = fit(&[tt("1", "a b"), tt("2", "b c")], &config()).unwrap();
        assert_eq!(s.idf("b"), Some(1.0));
        let expect_a = (3.0f64 / 2.0).ln() + 1.0;
        assert!((s.idf("a").unwrap() - expect_a).abs() < 1e-15);
        assert_eq!(s.idf("zzz"), None);
        assert_eq!(s.vocab().collect::<Vec<_>>(), ["a", "b", "c"]);
    }

    #[test]
    fn single_doc_idf_all_one() {
        let s = fit(&[tt("1", "x y z x")], &config()).unwrap();
        for t in ["x", "y", "z"] {
            assert_eq!(s.idf(t), Some(1.0));
        }
    }

    #[test]
    fn empty_training_set_rejected() {
        assert!(matches!(fit(&[], &config()), Err(Error::Empty(_))));
    }

    #[test]
    fn emotion_proportion() {
        let s = fit(&[tt("1", "happy happy day")], &config()).unwrap();
        let v = s.transform(&tt("1", "happy happy day"));
        assert!((value(&s, &v, "emotion:joy") - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(value(&s, &v, "emotion:anger"), 0.0);
    }

    #[test]
    fn no_emoji_gives_zero_block() {
        let s = fit(&[tt("1", "a b")], &config()).unwrap();
        let v = s.transform(&tt("2", "a"));
        for e in EmojiList::default_top10().entries() {
            assert_eq!(value(&s, &v, &format!("emoji:{e}")), 0.0);
        }
    }

    #[test]
    fn oov_tweet() {
        let s = fit(&[tt("1", "a b")], &config()).unwrap();
        let v = s.transform(&tt("2", "happy quickly"));
        assert!(v
            .values
            .iter()
            .all(|(j, _)| !s.feature_names()[*j as usize].starts_with(TFIDF_PREFIX)));
        assert_eq!(value(&s, &v, "emotion:joy"), 0.5);
        assert_eq!(value(&s, &v, "pos:adverb"), 0.5);
        assert_eq!(value(&s, &v, "pos:noun"), 0.5);
    }

    #[test]
    fn zero_token_tweet_is_all_zero() {
        let s = fit(&[tt("1", "a b")], &config()).unwrap();
        assert!(s.transform(&tt("2", "")).values.is_empty());
    }

    #[test]
    fn emoji_and_hashtag_columns() {
        let s = fit(&[tt("1", "a")], &config()).unwrap();
        let mut t = tt("2", "a");
        t.hashtag_count = 2;
        t.emoji_counts.insert("😂".into(), 3);
        let v = s.transform(&t);
        assert_eq!(value(&s, &v, HASHTAG_FEATURE), 2.0);
        assert_eq!(value(&s, &v, "emoji:😂"), 3.0);
    }

    #[test]
    fn bigram_counts() {
        let s = fit(&[tt("1", "a b a b"), tt("2", "b c")], &config()).unwrap();
        let v = s.transform(&tt("3", "a b a b c"));
        assert_eq!(value(&s, &v, "bigram:a b"), 2.0);
        assert_eq!(value(&s, &v, "bigram:b a"), 1.0);
        assert_eq!(value(&s, &v, "bigram:b c"), 1.0);
        assert_eq!(value(&s, &v, "bin:a"), 1.0);
    }

    #[test]
    fn min_df_prunes() {
        let mut c = config();
        c.min_df = 2;
        let s = fit(&[tt("1", "a b"), tt("2", "b c")], &c).unwrap();
        assert_eq!(s.vocab().collect::<Vec<_>>(), ["b"]);
    }

    #[test]
    fn pos_rules() {
        let tags = RuleTagger.tag(&["she".into(), "runs".into(), "quickly".into()]);
        let names: Vec<_> = tags.iter().map(|&t| RuleTagger::TAGS[t]).collect();
        assert_eq!(names, ["pronoun", "verb", "adverb"]);
        assert!(RuleTagger.tag(&[]).is_empty());
        assert_eq!(RuleTagger.tag(&["xyzzy".into()]), [0]);
        let t = |w: &str| RuleTagger::TAGS[RuleTagger.tag(&[w.to_string()])[0]];
        assert_eq!(t("walked"), "verb");
        assert_eq!(t("crying"), "verb");
        assert_eq!(t("famous"), "adjective");
        assert_eq!(t("grateful"), "adjective");
        assert_eq!(t("fly"), "noun");
        assert_eq!(t("with"), "preposition");
        assert_eq!(t("the"), "determiner");
        assert_eq!(t("because"), "conjunction");
    }

    #[test]
    fn lexicon_parsing() {
        let lex = EmotionLexicon::parse(
            "abandon\tfear\t1\nabandon\tnegative\t1\nabandon\tjoy\t0\nabandon\tsadness\t1\nzeal\ttrust\t0\n",
        )
        .unwrap();
        assert_eq!(lex.emotions("abandon"), [Emotion::Fear, Emotion::Sadness]);
        assert!(lex.emotions("zeal").is_empty());
        assert_eq!(lex.len(), 1);
        assert!(EmotionLexicon::parse("word\tjoy\n").is_err());
        assert!(EmotionLexicon::parse("word\thappiness\t1\n").is_err());
    }

    #[test]
    fn disabled_blocks_have_no_columns() {
        let mut c = config();
        c.blocks = BlockSet {
            tfidf: true,
            ..BlockSet {
                tfidf: false,
                binary: false,
                bigrams: false,
                pos: false,
                hashtags: false,
                emoji: false,
                emotion: false,
            }
        };
        let s = fit(&[tt("1", "a b")], &c).unwrap();
        assert_eq!(s.feature_names(), ["tfidf:a", "tfidf:b"]);
    }

    #[test]
    fn matrix_file_round_trip() {
        let s = fit(&[tt("1", "a b"), tt("2", "b c")], &config()).unwrap();
        let tweets = [tt("1", "a b"), tt("2", "b c happy")];
        let m = LabeledMatrix {
            feature_names: s.feature_names().to_vec(),
            ids: vec!["1".into(), "2".into()],
            labels: vec![Label::Positive, Label::Negative],
            matrix: s.transform_all(&tweets),
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        m.save(&p).unwrap();
        assert_eq!(LabeledMatrix::load(&p).unwrap(), m);
    }

    #[test]
    fn space_round_trip() {
        let s = fit(&[tt("1", "a b"), tt("2", "b c")], &config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        s.save(&p).unwrap();
        assert_eq!(FeatureSpace::load(&p).unwrap(), s);
    }
}
