//! Training-free rule baselines: seed-account mentions and the
//! aggression/loss word lists.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::evaluate::FoldClassifier;
use crate::preprocess::TokenizedTweet;
use crate::{Error, Result};

pub const AGGRESSION_WORDS: &[&str] = &[
    "angry", "opps", "opp", "fu", "fuck", "bitch", "smoke", "pipe", "glock", "play", "missin", "bang", "smack", "slap",
    "beat", "blood", "bust", "bussin", "heat", "BDK", "GDK", "snitch", "cappin", "killa", "kill", "hitta", "hittas",
    "shooter", "tf",
];

pub const LOSS_WORDS: &[&str] = &[
    "free", "rip", "longlive", "LL", "rest", "up", "restup", "crying", "cry", "fly", "flyhigh", "fallin", "bip", "day",
    "why", "funeral", "sleep", "miss", "king", "hurt", "gone", "cant", "believe", "death", "dead", "died", "lost",
    "killed", "grave", "damn", "soldier", "soldiers", "gang", "bro", "man", "hitta", "jail", "blood", "heaven", "home",
];

/// Aggression and loss word sets, stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationLexicon {
    aggression: BTreeSet<String>,
    loss: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Aggression,
    Loss,
}

impl AnnotationLexicon {
    pub fn new<A, L>(aggression: A, loss: L) -> Result<Self>
    where
        A: IntoIterator,
        A::Item: AsRef<str>,
        L: IntoIterator,
        L::Item: AsRef<str>,
    {
        let norm = |w: &str| w.trim().to_lowercase();
        let aggression: BTreeSet<String> = aggression.into_iter().map(|w| norm(w.as_ref())).collect();
        let loss: BTreeSet<String> = loss.into_iter().map(|w| norm(w.as_ref())).collect();
        for (name, set) in [("aggression", &aggression), ("loss", &loss)] {
            if set.is_empty() {
                return Err(Error::Empty(format!("{name} word list")));
            }
            if set.iter().any(|w| w.is_empty() || w.chars().any(char::is_whitespace)) {
                return Err(Error::invalid(
                    "annotation lexicon",
                    format!("{name} entries must be single words"),
                ));
            }
        }
        Ok(AnnotationLexicon { aggression, loss })
    }

    /// The shipped word lists, lowercased.
    pub fn default_lists() -> Self {
        AnnotationLexicon::new(AGGRESSION_WORDS, LOSS_WORDS).expect("built-in lists are valid")
    }

    /// Parses `[aggression]` / `[loss]` sections with one word per line.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut aggression = Vec::new();
        let mut loss = Vec::new();
        let mut current: Option<Category> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[aggression]" => current = Some(Category::Aggression),
                "[loss]" => current = Some(Category::Loss),
                _ if line.starts_with('[') => {
                    return Err(Error::invalid(
                        "annotation lexicon",
                        format!("line {}: unknown section {line}", i + 1),
                    ))
                }
                word => match current {
                    Some(Category::Aggression) => aggression.push(word.to_string()),
                    Some(Category::Loss) => loss.push(word.to_string()),
                    None => {
                        return Err(Error::invalid(
                            "annotation lexicon",
                            format!("line {}: word outside a section", i + 1),
                        ))
                    }
                },
            }
        }
        AnnotationLexicon::new(aggression, loss)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        AnnotationLexicon::parse(&text)
    }

    pub fn insert(&mut self, category: Category, word: &str) {
        let set = match category {
            Category::Aggression => &mut self.aggression,
            Category::Loss => &mut self.loss,
        };
        set.insert(word.trim().to_lowercase());
    }

    pub fn contains(&self, token: &str) -> bool {
        self.aggression.contains(token) || self.loss.contains(token)
    }

    pub fn aggression(&self) -> &BTreeSet<String> {
        &self.aggression
    }

    pub fn loss(&self) -> &BTreeSet<String> {
        &self.loss
    }
}

/// How the mention baseline looks for seed names.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionMode {
    /// `@name` handles in the raw text.
    #[default]
    Raw,
    /// Tokens equal to a bare seed name after preprocessing, which has
    /// already dropped handles.
    Preprocessed,
}

static HANDLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|[^A-Za-z0-9_@])@([A-Za-z0-9_]+)").unwrap());

fn normalize_seeds(seeds: &[String]) -> BTreeSet<String> {
    seeds
        .iter()
        .map(|s| s.trim().trim_start_matches('@').to_lowercase())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Lowercased handles mentioned in `raw`. A handle runs to the first
/// character outside `[A-Za-z0-9_]`.
pub fn raw_mentions(raw: &str) -> impl Iterator<Item = String> + '_ {
    HANDLE.captures_iter(raw).map(|c| c[1].to_lowercase())
}

/// Positive iff the tweet mentions any seed account.
pub fn user_mention_baseline(tweets: &[TokenizedTweet], seeds: &[String], mode: MentionMode) -> Vec<bool> {
    let seeds = normalize_seeds(seeds);
    tweets
        .iter()
        .map(|t| match mode {
            MentionMode::Raw => raw_mentions(&t.raw_text).any(|h| seeds.contains(&h)),
            MentionMode::Preprocessed => t.tokens.iter().any(|tok| seeds.contains(tok)),
        })
        .collect()
}

/// Positive iff any token exactly matches a lexicon word.
pub fn annotation_baseline(tweets: &[TokenizedTweet], lexicon: &AnnotationLexicon) -> Vec<bool> {
    tweets
        .iter()
        .map(|t| t.tokens.iter().any(|tok| lexicon.contains(&tok.to_lowercase())))
        .collect()
}

pub struct MentionBaseline {
    pub seeds: Vec<String>,
    pub mode: MentionMode,
}

impl MentionBaseline {
    pub fn new(seeds: Vec<String>, mode: MentionMode) -> Result<Self> {
        if normalize_seeds(&seeds).is_empty() {
            return Err(Error::Empty("seed screen-name list".into()));
        }
        Ok(MentionBaseline { seeds, mode })
    }
}

impl FoldClassifier for MentionBaseline {
    fn name(&self) -> String {
        "User Mention Baseline".into()
    }

    fn fit_predict(&self, _: &[TokenizedTweet], _: &[bool], test: &[TokenizedTweet]) -> Result<Vec<bool>> {
        Ok(user_mention_baseline(test, &self.seeds, self.mode))
    }
}

pub struct AnnotationBaseline(pub AnnotationLexicon);

impl FoldClassifier for AnnotationBaseline {
    fn name(&self) -> String {
        "Aggress/Loss Baseline".into()
    }

    fn fit_predict(&self, _: &[TokenizedTweet], _: &[bool], test: &[TokenizedTweet]) -> Result<Vec<bool>> {
        Ok(annotation_baseline(test, &self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tweet(raw: &str, tokens: &[&str]) -> TokenizedTweet {
        TokenizedTweet {
            id: raw.to_string(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            hashtag_count: 0,
            emoji_counts: Default::default(),
            raw_text: raw.to_string(),
        }
    }

    #[test]
    fn default_lists_are_lowercase_and_complete() {
        let lex = AnnotationLexicon::default_lists();
        assert_eq!(lex.aggression().len(), 29);
        // "hitta" and "blood" appear in both lists; each list has no repeats
        assert_eq!(lex.loss().len(), 40);
        assert!(lex.contains("bdk") && lex.contains("ll") && lex.contains("rip"));
        assert!(!lex.contains("BDK"));
    }

    #[test]
    fn shipped_file_matches_builtin_lists() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("config/annotation_lexicon.txt");
        assert_eq!(
            AnnotationLexicon::load(&path).unwrap(),
            AnnotationLexicon::default_lists()
        );
    }

    #[test]
    fn parse_errors() {
        assert!(AnnotationLexicon::parse("rip\n").is_err());
        assert!(AnnotationLexicon::parse("[aggression]\nkill\n").is_err());
        assert!(AnnotationLexicon::parse("[aggression]\nkill\n[other]\nx\n").is_err());
        let ok = AnnotationLexicon::parse("# c\n[aggression]\nKill\n\n[loss]\nrip # trailing\n").unwrap();
        assert!(ok.contains("kill") && ok.contains("rip"));
    }

    #[test]
    fn mention_boundaries() {
        let seeds = vec!["Seed_One".to_string()];
        let tweets = [
            tweet("love you @seed_one", &[]),
            tweet("@SEED_ONE!!", &[]),
            tweet("hey @seed_onex", &[]),
            tweet("mail seed_one@example.com", &[]),
            tweet("seed_one without at", &["seed_one"]),
        ];
        assert_eq!(
            user_mention_baseline(&tweets, &seeds, MentionMode::Raw),
            [true, true, false, false, false]
        );
        assert_eq!(
            user_mention_baseline(&tweets, &seeds, MentionMode::Preprocessed),
            [false, false, false, false, true]
        );
        assert!(MentionBaseline::new(vec![" @ ".into()], MentionMode::Raw).is_err());
    }

    #[test]
    fn annotation_exact_tokens() {
        let lex = AnnotationLexicon::default_lists();
        let tweets = [
            tweet("", &["rip", "bro"]),
            tweet("", &["hello", "world"]),
            tweet("", &["player"]),
        ];
        assert_eq!(annotation_baseline(&tweets, &lex), [true, false, false]);
    }

    proptest! {
        #[test]
        fn adding_a_word_never_removes_positives(
            docs in prop::collection::vec(prop::collection::vec("[a-z]{1,6}", 0..8), 1..30),
            extra in "[a-z]{1,6}",
        ) {
            let tweets: Vec<TokenizedTweet> = docs
                .iter()
                .map(|d| tweet("", &d.iter().map(String::as_str).collect::<Vec<_>>()))
                .collect();
            let base = AnnotationLexicon::default_lists();
            let mut bigger = base.clone();
            bigger.insert(Category::Loss, &extra);
            let before = annotation_baseline(&tweets, &base);
            let after = annotation_baseline(&tweets, &bigger);
            for (b, a) in before.iter().zip(&after) {
                prop_assert!(!b || *a);
            }
        }
    }
}
