//! Twitter-aware preprocessing.
//!
//! The pipeline runs in a fixed order:
//!
//! 1. count hashtags and listed emoji on the raw text;
//! 2. collapse every `https://t.co/<id>` link to the bare prefix;
//! 3. tokenize and drop tokens starting with `@`;
//! 4. cap runs of a repeated character at three;
//! 5. downcase (runs are capped again, since downcasing can merge `Aaaa`);
//! 6. drop stopwords and pure-punctuation tokens.
//!
//! Hashtags keep their word as a token (`#BDK` becomes `bdk`).

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Tweet;
use crate::{Error, Result};

pub const SHORTENER_PREFIX: &str = "https://t.co/";
pub const DEFAULT_MAX_RUN: usize = 3;
pub const EMOJI_LIST_LEN: usize = 10;

static SHORT_URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"https://t\.co/[A-Za-z0-9]*").unwrap());

// Order matters: URLs, handles and hashtags before plain words.
static TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(concat!(
        r"(?P<url>https?://\S+)",
        r"|(?P<handle>@[\p{L}\p{N}_]+)",
        r"|(?P<hashtag>#[\p{L}\p{N}_]+(?:['’][\p{L}\p{N}_]+)*)",
        r"|(?P<word>[\p{L}\p{N}_\p{M}]+(?:['’\-][\p{L}\p{N}_\p{M}]+)*)",
        r"|(?P<other>\S)",
    ))
    .unwrap()
});

static HASHTAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|[^\p{L}\p{N}_&/#])#[\p{L}\p{N}_]+").unwrap());

/// Preprocessing output for one tweet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedTweet {
    pub id: String,
    pub tokens: Vec<String>,
    pub hashtag_count: u32,
    /// Counts for listed emoji that occur at least once.
    pub emoji_counts: BTreeMap<String, u32>,
    pub raw_text: String,
}

/// Ordered list of exactly ten emoji codepoint sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmojiList(Vec<String>);

impl EmojiList {
    pub fn new(entries: Vec<String>) -> Result<Self> {
        if entries.len() != EMOJI_LIST_LEN {
            return Err(Error::invalid(
                "emoji list",
                format!("expected {EMOJI_LIST_LEN} entries, got {}", entries.len()),
            ));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if e.is_empty() || !seen.insert(e.as_str()) {
                return Err(Error::invalid("emoji list", format!("empty or duplicate entry {e:?}")));
            }
        }
        Ok(EmojiList(entries))
    }

    /// Approximate top-ten list shipped as a default; replace via config.
    pub fn default_top10() -> Self {
        EmojiList(
            [
                "\u{1F602}",
                "\u{2764}",
                "\u{1F60D}",
                "\u{1F62D}",
                "\u{1F60A}",
                "\u{1F612}",
                "\u{1F495}",
                "\u{1F618}",
                "\u{1F629}",
                "\u{1F44C}",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        )
    }

    /// Parses one entry per line. An entry is either the literal sequence or
    /// space-separated `U+XXXX` codepoints. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for line in text.lines() {
            let line = strip_comment(line);
            if line.is_empty() {
                continue;
            }
            if line.starts_with("U+") || line.starts_with("u+") {
                let mut s = String::new();
                for cp in line.split_whitespace() {
                    let hex = cp.trim_start_matches(['U', 'u']).trim_start_matches('+');
                    let c = u32::from_str_radix(hex, 16)
                        .ok()
                        .and_then(char::from_u32)
                        .ok_or_else(|| Error::invalid("emoji list", format!("bad codepoint {cp}")))?;
                    s.push(c);
                }
                entries.push(s);
            } else {
                entries.push(line.to_string());
            }
        }
        EmojiList::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EmojiList::parse(&text)
    }

    pub fn entries(&self) -> &[String] {
        &self.0
    }
}

/// Stopword set loaded from a one-word-per-line file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(strip_comment)
                .filter(|l| !l.is_empty())
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Stopwords::parse(&text))
    }

    pub fn contains(&self, w: &str) -> bool {
        self.0.contains(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stopwords(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

fn strip_comment(line: &str) -> &str {
    // a lone "#" line is a comment; "#" never appears inside stopwords or emoji
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

/// Reduces every run of one character longer than `max_run` to `max_run`.
pub fn cap_char_runs(s: &str, max_run: usize) -> String {
    let max_run = max_run.max(1);
    let mut out = String::with_capacity(s.len());
    let mut prev: Option<char> = None;
    let mut run = 0usize;
    for c in s.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run <= max_run {
            out.push(c);
        }
    }
    out
}

/// True when every character is punctuation, a format control, or a
/// variation selector.
pub fn is_pure_punctuation(token: &str) -> bool {
    !token.is_empty()
        && token.chars().all(|c| {
            c.is_ascii_punctuation()
                || matches!(c, '\u{FE00}'..='\u{FE0F}' | '\u{200B}'..='\u{200F}' | '\u{2060}')
                || unicode_punct(c)
        })
}

fn unicode_punct(c: char) -> bool {
    static P: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[\p{P}\p{Cf}]$").unwrap());
    let mut buf = [0u8; 4];
    P.is_match(c.encode_utf8(&mut buf))
}

/// Count of hashtags (`#` followed by word characters, not inside a word or URL path).
pub fn count_hashtags(raw: &str) -> u32 {
    HASHTAG.find_iter(raw).count() as u32
}

/// Non-overlapping occurrences of each listed emoji that occurs at all.
pub fn count_emoji(raw: &str, emoji: &EmojiList) -> BTreeMap<String, u32> {
    emoji
        .entries()
        .iter()
        .filter_map(|e| {
            let n = raw.matches(e.as_str()).count() as u32;
            (n > 0).then(|| (e.clone(), n))
        })
        .collect()
}

/// Splits text into URL, handle, hashtag, word and single-symbol tokens.
/// Hashtags are returned without the leading `#`.
pub fn tokenize(text: &str) -> Vec<String> {
    TOKEN
        .captures_iter(text)
        .filter_map(|cap| {
            if let Some(h) = cap.name("hashtag") {
                Some(h.as_str()[1..].to_string())
            } else {
                cap.get(0).map(|m| m.as_str().to_string())
            }
        })
        // stray variation selectors / joiners left over from split emoji
        .filter(|t| !matches!(t.as_str(), "\u{FE0F}" | "\u{FE0E}" | "\u{200D}"))
        .collect()
}

/// Stateless preprocessing configuration shared by training, baselines and
/// the audit's reference-corpus pass.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    stopwords: Stopwords,
    emoji: EmojiList,
    max_run: usize,
}

impl Preprocessor {
    pub fn new(stopwords: Stopwords, emoji: EmojiList) -> Self {
        Preprocessor {
            stopwords,
            emoji,
            max_run: DEFAULT_MAX_RUN,
        }
    }

    pub fn with_max_run(mut self, max_run: usize) -> Self {
        self.max_run = max_run.max(1);
        self
    }

    pub fn emoji_list(&self) -> &EmojiList {
        &self.emoji
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }

    pub fn preprocess(&self, tweet: &Tweet) -> TokenizedTweet {
        self.preprocess_text(&tweet.id, &tweet.text)
    }

    pub fn preprocess_text(&self, id: &str, raw: &str) -> TokenizedTweet {
        let hashtag_count = count_hashtags(raw);
        let emoji_counts = count_emoji(raw, &self.emoji);
        TokenizedTweet {
            id: id.to_string(),
            tokens: self.tokens(raw),
            hashtag_count,
            emoji_counts,
            raw_text: raw.to_string(),
        }
    }

    /// Steps 2 through 6 of the pipeline.
    pub fn tokens(&self, raw: &str) -> Vec<String> {
        let stripped = SHORT_URL.replace_all(raw, SHORTENER_PREFIX);
        tokenize(&stripped)
            .into_iter()
            .filter(|t| !t.starts_with('@'))
            .map(|t| cap_char_runs(&t, self.max_run))
            .map(|t| cap_char_runs(&t.to_lowercase(), self.max_run))
            .filter(|t| !self.stopwords.contains(t) && !is_pure_punctuation(t))
            .collect()
    }
}
