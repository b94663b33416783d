//! Labeled tweet collections, dialect-scored reference corpora, and the
//! data-construction rules applied to them (geo box, language, retweets,
//! network expansion, dialect threshold).
//!
//! Records are stored one JSON object per line. Tweet records carry the
//! fields `id, author_id, screen_name, text, created_at, mentions,
//! is_retweet, followers_count, lang_tag, lat, lon, label, group`; dialect
//! records carry `text, posterior`.
//!
//! Positive sets are not built uniformly. A seed account contributes its
//! whole wall: tweets it authored, retweeted, or was mentioned in. An
//! account found by [`expand_network`] contributes only tweets it authored.
//! Assemble the positive records that way before ingestion;
//! [`filter_language_and_retweets`] drops every retweet and is meant for
//! the random negative stream.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Group key shared by every negative-class tweet.
pub const RANDOM_GROUP: &str = "random";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(Label::Positive),
            "negative" => Ok(Label::Negative),
            other => Err(Error::invalid("label", format!("unknown label token {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tweet {
    pub id: String,
    pub author_id: String,
    pub screen_name: String,
    pub text: String,
    pub created_at: DateTime<Utc>,
    pub mentions: Vec<String>,
    pub is_retweet: bool,
    pub followers_count: u64,
    pub lang_tag: Option<String>,
    pub geo: Option<GeoPoint>,
}

impl Tweet {
    /// Checks the per-tweet invariants (nonempty id and text, coordinates in range).
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.text.is_empty() {
            return Err(format!("tweet {}: empty text", self.id));
        }
        if let Some(g) = self.geo {
            if !(-90.0..=90.0).contains(&g.lat) || !(-180.0..=180.0).contains(&g.lon) {
                return Err(format!(
                    "tweet {}: coordinates ({}, {}) out of range",
                    self.id, g.lat, g.lon
                ));
            }
        }
        Ok(())
    }
}

/// One tweet with its class label and grouping key.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTweet {
    pub tweet: Tweet,
    pub label: Label,
    pub group: String,
}

/// Flat on-disk form of a labeled tweet.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TweetRecord {
    id: String,
    author_id: String,
    screen_name: String,
    text: String,
    created_at: String,
    #[serde(default)]
    mentions: Vec<String>,
    #[serde(default)]
    is_retweet: bool,
    #[serde(default)]
    followers_count: u64,
    #[serde(default)]
    lang_tag: Option<String>,
    #[serde(default)]
    lat: Option<f64>,
    #[serde(default)]
    lon: Option<f64>,
    label: String,
    group: String,
}

impl TweetRecord {
    fn from_labeled(t: &LabeledTweet) -> Self {
        let tw = &t.tweet;
        TweetRecord {
            id: tw.id.clone(),
            author_id: tw.author_id.clone(),
            screen_name: tw.screen_name.clone(),
            text: tw.text.clone(),
            created_at: tw.created_at.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            mentions: tw.mentions.clone(),
            is_retweet: tw.is_retweet,
            followers_count: tw.followers_count,
            lang_tag: tw.lang_tag.clone(),
            lat: tw.geo.map(|g| g.lat),
            lon: tw.geo.map(|g| g.lon),
            label: t.label.as_str().to_string(),
            group: t.group.clone(),
        }
    }

    fn into_labeled(self) -> std::result::Result<LabeledTweet, String> {
        let created_at = DateTime::parse_from_rfc3339(&self.created_at)
            .map_err(|e| format!("bad created_at {:?}: {e}", self.created_at))?
            .with_timezone(&Utc);
        let geo = match (self.lat, self.lon) {
            (Some(lat), Some(lon)) => Some(GeoPoint { lat, lon }),
            (None, None) => None,
            _ => return Err("lat and lon must be given together".into()),
        };
        let label: Label = self.label.parse().map_err(|e: Error| e.to_string())?;
        if self.group.is_empty() {
            return Err("empty group key".into());
        }
        let tweet = Tweet {
            id: self.id,
            author_id: self.author_id,
            screen_name: self.screen_name,
            text: self.text,
            created_at,
            mentions: self.mentions,
            is_retweet: self.is_retweet,
            followers_count: self.followers_count,
            lang_tag: self.lang_tag,
            geo,
        };
        tweet.validate()?;
        Ok(LabeledTweet {
            tweet,
            label,
            group: self.group,
        })
    }
}

/// Supported on-disk record formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordFormat {
    #[default]
    Jsonl,
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" | "json-lines" => Ok(RecordFormat::Jsonl),
            other => Err(Error::invalid("record format", other.to_string())),
        }
    }
}

/// A validated collection of labeled tweets. Ids are unique; each tweet has
/// exactly one label and one group key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCorpus {
    records: Vec<LabeledTweet>,
    index: HashMap<String, usize>,
}

impl LabeledCorpus {
    pub fn new(records: Vec<LabeledTweet>) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            r.tweet.validate().map_err(|m| Error::invalid("tweet", m))?;
            if index.insert(r.tweet.id.clone(), i).is_some() {
                return Err(Error::invalid("corpus", format!("duplicate id {}", r.tweet.id)));
            }
        }
        Ok(LabeledCorpus { records, index })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[LabeledTweet] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&LabeledTweet> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn label_of(&self, id: &str) -> Option<Label> {
        self.get(id).map(|r| r.label)
    }

    pub fn group_of(&self, id: &str) -> Option<&str> {
        self.get(id).map(|r| r.group.as_str())
    }

    pub fn groups(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.group.as_str()).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    /// Keeps records matching `keep`, preserving order, labels and groups.
    pub fn retain(&self, mut keep: impl FnMut(&LabeledTweet) -> bool) -> LabeledCorpus {
        let records: Vec<_> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        let index = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.tweet.id.clone(), i))
            .collect();
        LabeledCorpus { records, index }
    }

    /// Writes the corpus as JSON lines, atomically (temp file then rename).
    pub fn persist(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(&TweetRecord::from_labeled(r))?);
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }
}

pub fn ingest_corpus(path: &Path, format: RecordFormat) -> Result<LabeledCorpus> {
    match format {
        RecordFormat::Jsonl => ingest_jsonl(path),
    }
}

fn ingest_jsonl(path: &Path) -> Result<LabeledCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec_err = |message: String| Error::Record {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let rec: TweetRecord = serde_json::from_str(&line).map_err(|e| rec_err(e.to_string()))?;
        let labeled = rec.into_labeled().map_err(rec_err)?;
        if let Some(first) = seen.insert(labeled.tweet.id.clone(), lineno) {
            return Err(rec_err(format!(
                "duplicate id {:?} (first seen on line {first})",
                labeled.tweet.id
            )));
        }
        records.push(labeled);
    }
    if records.is_empty() {
        return Err(Error::Empty(format!("corpus {}", path.display())));
    }
    LabeledCorpus::new(records)
}

/// Closed latitude/longitude rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self> {
        if !(lat_min < lat_max && lon_min < lon_max) {
            return Err(Error::invalid(
                "bounding box",
                format!("inverted box lat [{lat_min}, {lat_max}] lon [{lon_min}, {lon_max}]"),
            ));
        }
        Ok(BoundingBox {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        })
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.lat_min..=self.lat_max).contains(&p.lat) && (self.lon_min..=self.lon_max).contains(&p.lon)
    }
}

/// Keeps geotagged tweets inside `bbox`; tweets without coordinates are dropped.
pub fn filter_bounding_box(corpus: &LabeledCorpus, bbox: &BoundingBox) -> Result<LabeledCorpus> {
    // re-check: the fields are public and may have been set directly
    BoundingBox::new(bbox.lat_min, bbox.lat_max, bbox.lon_min, bbox.lon_max)?;
    Ok(corpus.retain(|r| r.tweet.geo.is_some_and(|g| bbox.contains(g))))
}

/// Keeps original (non-retweet) tweets tagged with language `lang`.
pub fn filter_language_and_retweets(corpus: &LabeledCorpus, lang: &str) -> LabeledCorpus {
    let out = corpus.retain(|r| !r.tweet.is_retweet && r.tweet.lang_tag.as_deref() == Some(lang));
    if out.is_empty() && !corpus.is_empty() {
        log::warn!("language/retweet filter removed all {} tweets", corpus.len());
    }
    out
}

/// Picks the `k` accounts that most often appear on the seeds' wall.
///
/// An account appears in a wall tweet when it authored it or is mentioned in
/// it; each tweet counts once per account. Seeds themselves are never
/// returned. Accounts with more than `follower_cap` followers are skipped
/// unless they authored a wall tweet mentioning a seed. An account's follower
/// count is the largest `followers_count` over the wall tweets it authored;
/// accounts that only appear as mentions have no known count and stay
/// eligible. Names are compared case-insensitively and returned lowercase.
/// Ties are broken by name.
pub fn expand_network(seed_screennames: &[String], wall: &[Tweet], k: usize, follower_cap: u64) -> Result<Vec<String>> {
    if wall.is_empty() {
        return Err(Error::Empty("wall".into()));
    }
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    let seeds: HashSet<String> = seed_screennames.iter().map(|s| normalize_handle(s)).collect();

    let mut appearances: BTreeMap<String, usize> = BTreeMap::new();
    let mut followers: HashMap<String, u64> = HashMap::new();
    let mut mentions_seed: HashSet<String> = HashSet::new();

    for t in wall {
        let author = normalize_handle(&t.screen_name);
        let mentioned: BTreeSet<String> = t.mentions.iter().map(|m| normalize_handle(m)).collect();

        let mut present: BTreeSet<&str> = mentioned.iter().map(String::as_str).collect();
        present.insert(author.as_str());
        for name in present {
            if !name.is_empty() && !seeds.contains(name) {
                *appearances.entry(name.to_string()).or_default() += 1;
            }
        }

        let f = followers.entry(author.clone()).or_default();
        *f = (*f).max(t.followers_count);
        if mentioned.iter().any(|m| seeds.contains(m)) {
            mentions_seed.insert(author);
        }
    }

    let mut eligible: Vec<(String, usize)> = appearances
        .into_iter()
        .filter(|(name, _)| mentions_seed.contains(name) || followers.get(name).is_none_or(|&f| f <= follower_cap))
        .collect();
    eligible.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if eligible.len() < k {
        log::warn!("only {} eligible accounts for k = {k}", eligible.len());
    }
    Ok(eligible.into_iter().take(k).map(|(n, _)| n).collect())
}

fn normalize_handle(s: &str) -> String {
    s.trim_start_matches('@').to_lowercase()
}

/// Reference tweets scored with a dialect posterior in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialectCorpus {
    pub tweets: Vec<DialectTweet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialectTweet {
    pub text: String,
    pub posterior: f64,
}

impl DialectCorpus {
    pub fn new(tweets: Vec<DialectTweet>) -> Result<Self> {
        if let Some(t) = tweets.iter().find(|t| !(0.0..=1.0).contains(&t.posterior)) {
            return Err(Error::invalid(
                "dialect posterior",
                format!("{} outside [0, 1]", t.posterior),
            ));
        }
        Ok(DialectCorpus { tweets })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut tweets = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec_err = |message: String| Error::Record {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let t: DialectTweet = serde_json::from_str(&line).map_err(|e| rec_err(e.to_string()))?;
            if !(0.0..=1.0).contains(&t.posterior) {
                return Err(rec_err(format!("posterior {} outside [0, 1]", t.posterior)));
            }
            tweets.push(t);
        }
        Ok(DialectCorpus { tweets })
    }

    pub fn persist(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for t in &self.tweets {
            out.push_str(&serde_json::to_string(t)?);
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }
}

/// Texts whose posterior is strictly greater than `tau`.
pub fn threshold_dialect(corpus: &DialectCorpus, tau: f64) -> Result<Vec<String>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid("tau", format!("{tau} outside [0, 1]")));
    }
    Ok(corpus
        .tweets
        .iter()
        .filter(|t| t.posterior > tau)
        .map(|t| t.text.clone())
        .collect())
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid("output path", path.display().to_string()))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let write = || -> std::io::Result<()> {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
