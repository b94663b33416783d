//! Seeded synthetic corpora for tests, demos and fixtures.
//!
//! The labeled generator mimics the structure the split protocols probe.
//! Positive tweets come from two communities of accounts and mix three
//! kinds of signal. Personal tokens are used by one account only. Community
//! tokens are shared within a community. Shared dialect and grief tokens
//! are common to all positives and rare among negatives. Negative tweets
//! are general chatter that often contains the common words of the
//! aggression/loss lists. A small share of positive tweets mention their
//! community's seed account.
//!
//! The dialect reference generator emits texts whose posterior rises with
//! the share of dialect tokens they contain.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{DialectCorpus, DialectTweet, GeoPoint, Label, LabeledCorpus, LabeledTweet, Tweet, RANDOM_GROUP};

const GENERAL: &[&str] = &[
    "today", "people", "time", "work", "good", "new", "really", "going", "know", "think", "want", "need", "got", "see",
    "make", "back", "still", "right", "night", "school", "game", "music", "weather", "city", "train", "coffee", "food",
    "phone", "morning", "week", "weekend", "friends", "team", "love", "great", "happy", "thanks", "watch", "read",
    "show", "news", "traffic", "summer", "rain", "lunch", "store", "class", "movie", "party", "bus", "street", "park",
    "birthday", "family", "tonight", "tomorrow", "best", "year", "life", "way", "look", "come", "long", "little",
    "first", "last", "next", "big", "call", "let", "say", "feel", "never", "always", "everyone",
];

/// Aggression/loss list words that are also everyday English.
const COMMON_LEXICON: &[&str] = &[
    "day", "man", "home", "play", "miss", "rest", "free", "king", "lost", "believe", "cant", "fly", "beat", "heat",
    "damn", "sleep", "hurt", "gone", "smoke", "gang", "bro", "death", "dead",
];

const DIALECT: &[&str] = &[
    "finna", "tryna", "bruh", "lowkey", "deadass", "ong", "lil", "shawty", "rip", "thang", "nun", "ima", "gon", "yall",
    "longlive", "dat", "dis", "wit", "hella", "bout", "opps", "nem", "slide", "drill", "glock", "bdk", "hitta", "ion",
    "fr", "aint",
];

const SYLLABLES: &[&str] = &[
    "ka", "zo", "ri", "te", "mo", "lu", "va", "ne", "sho", "dre", "qua", "ty", "ba", "ki", "ro", "ze", "mi", "da",
    "jo", "re", "vo", "na", "shi", "tra",
];

const EMOJI_POS: &[&str] = &["\u{1F62D}", "\u{1F629}", "\u{1F4AF}", "\u{1F64F}"];
const EMOJI_NEG: &[&str] = &["\u{1F602}", "\u{1F60D}", "\u{1F60A}", "\u{2764}"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_tweets: usize,
    pub positive_fraction: f64,
    pub communities: Vec<String>,
    /// Accounts per community, the seed account included.
    pub accounts_per_community: usize,
    /// Share of positive non-seed tweets that mention the community seed.
    pub mention_rate: f64,
    pub rng_seed: u64,
}

impl SynthConfig {
    pub fn new(n_tweets: usize, rng_seed: u64) -> Self {
        SynthConfig {
            n_tweets,
            positive_fraction: 0.2,
            communities: vec!["north".into(), "south".into()],
            accounts_per_community: 6,
            mention_rate: 0.01,
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub corpus: LabeledCorpus,
    /// Positive group key to community id.
    pub community_of: BTreeMap<String, String>,
    /// Seed screen names, one per community.
    pub seeds: Vec<String>,
}

struct Account {
    name: String,
    community: usize,
    personal: Vec<String>,
}

fn pseudo_words(rng: &mut ChaCha8Rng, n: usize, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let parts = rng.random_range(2..=3);
        let w: String = (0..parts).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [&'a str]) -> &'a str {
    pool.choose(rng).unwrap()
}

/// Occasionally stretches a word's last letter or capitalizes it.
fn decorate(rng: &mut ChaCha8Rng, w: &str) -> String {
    let r: f64 = rng.random();
    if r < 0.05 {
        let last = w.chars().last().unwrap();
        let extra: String = std::iter::repeat_n(last, rng.random_range(2..6)).collect();
        format!("{w}{extra}")
    } else if r < 0.10 {
        w.to_uppercase()
    } else {
        w.to_string()
    }
}

fn chicago(rng: &mut ChaCha8Rng) -> GeoPoint {
    GeoPoint {
        lat: (rng.random_range(41.65..42.02f64) * 1e4).round() / 1e4,
        lon: (rng.random_range(-87.90..-87.53f64) * 1e4).round() / 1e4,
    }
}

/// Generates a labeled corpus. Positive tweets are dealt round robin to the
/// accounts, so each account gets an equal share (within one tweet).
pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    assert!(!cfg.communities.is_empty() && cfg.accounts_per_community >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut taken: BTreeSet<String> = GENERAL
        .iter()
        .chain(COMMON_LEXICON)
        .chain(DIALECT)
        .map(|s| s.to_string())
        .collect();

    let community_tokens: Vec<Vec<String>> = cfg
        .communities
        .iter()
        .map(|_| pseudo_words(&mut rng, 10, &mut taken))
        .collect();
    let mut accounts = Vec::new();
    for (c, name) in cfg.communities.iter().enumerate() {
        for a in 0..cfg.accounts_per_community {
            accounts.push(Account {
                name: format!("{name}_{a}"),
                community: c,
                personal: pseudo_words(&mut rng, 3, &mut taken),
            });
        }
    }
    let seeds: Vec<String> = cfg.communities.iter().map(|c| format!("{c}_0")).collect();

    let n_pos = (cfg.n_tweets as f64 * cfg.positive_fraction).round() as usize;
    let start = Utc.with_ymd_and_hms(2014, 1, 1, 0, 0, 0).unwrap();
    let mut records = Vec::with_capacity(cfg.n_tweets);
    for i in 0..cfg.n_tweets {
        let positive = i < n_pos;
        let mut words: Vec<String> = Vec::new();
        let mut mentions = Vec::new();
        let (screen_name, group, followers) = if positive {
            let acct = &accounts[i % accounts.len()];
            for _ in 0..rng.random_range(2..=4) {
                words.push(pick(&mut rng, GENERAL).to_string());
            }
            if rng.random_bool(0.9) {
                for _ in 0..rng.random_range(1..=3) {
                    words.push(pick(&mut rng, DIALECT).to_string());
                }
            }
            if rng.random_bool(0.6) {
                words.push(community_tokens[acct.community].choose(&mut rng).unwrap().clone());
            }
            if rng.random_bool(0.8) {
                words.push(acct.personal.choose(&mut rng).unwrap().clone());
            }
            if rng.random_bool(0.3) {
                words.push(pick(&mut rng, COMMON_LEXICON).to_string());
            }
            let seed = &seeds[acct.community];
            if acct.name != *seed && rng.random_bool(cfg.mention_rate) {
                words.insert(0, format!("@{seed}"));
                mentions.push(seed.clone());
            }
            if rng.random_bool(0.25) {
                words.push(pick(&mut rng, EMOJI_POS).to_string());
            }
            if rng.random_bool(0.15) {
                words.push(format!("#{}", acct.personal[0]));
            }
            (acct.name.clone(), acct.name.clone(), rng.random_range(50..2000u64))
        } else {
            for _ in 0..rng.random_range(4..=8) {
                words.push(pick(&mut rng, GENERAL).to_string());
            }
            if rng.random_bool(0.45) {
                words.push(pick(&mut rng, COMMON_LEXICON).to_string());
            }
            if rng.random_bool(0.08) {
                words.push(pick(&mut rng, DIALECT).to_string());
            }
            if rng.random_bool(0.1) {
                let h = format!("chi_user{}", rng.random_range(0..500));
                words.insert(0, format!("@{h}"));
                mentions.push(h);
            }
            if rng.random_bool(0.2) {
                words.push(pick(&mut rng, EMOJI_NEG).to_string());
            }
            if rng.random_bool(0.1) {
                words.push(format!("#{}", pick(&mut rng, GENERAL)));
            }
            let author = format!("chi_user{}", rng.random_range(0..500));
            (author, RANDOM_GROUP.to_string(), rng.random_range(10..20_000u64))
        };
        // keep the leading handle in place, shuffle the rest
        let body_start = usize::from(words.first().is_some_and(|w| w.starts_with('@')));
        let body = &mut words[body_start..];
        for j in (1..body.len()).rev() {
            body.swap(j, rng.random_range(0..=j));
        }
        let text = words
            .iter()
            .map(|w| {
                if w.starts_with(['@', '#']) {
                    w.clone()
                } else {
                    decorate(&mut rng, w)
                }
            })
            .collect::<Vec<_>>()
            .join(" ");
        let created_at = start + Duration::minutes(rng.random_range(0..60 * 24 * 365));
        records.push(LabeledTweet {
            tweet: Tweet {
                id: format!("t{i:05}"),
                author_id: format!("u_{screen_name}"),
                screen_name,
                text,
                created_at,
                mentions,
                is_retweet: false,
                followers_count: followers,
                lang_tag: Some("en".into()),
                geo: Some(chicago(&mut rng)),
            },
            label: Label::from_bool(positive),
            group,
        });
    }
    let community_of = accounts
        .iter()
        .map(|a| (a.name.clone(), cfg.communities[a.community].clone()))
        .collect();
    SynthCorpus {
        corpus: LabeledCorpus::new(records).expect("generated ids are unique"),
        community_of,
        seeds,
    }
}

/// A reference corpus whose posterior tracks its dialect-token share.
/// Dialect tokens follow a Zipf-like frequency profile so the head of the
/// frequency table is dominated by them.
pub fn generate_dialect(n: usize, rng_seed: u64) -> DialectCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let weights: Vec<f64> = (0..DIALECT.len()).map(|r| 1.0 / (r as f64 + 1.0)).collect();
    let total: f64 = weights.iter().sum();
    let zipf = |rng: &mut ChaCha8Rng| -> &'static str {
        let mut u = rng.random::<f64>() * total;
        for (w, tok) in weights.iter().zip(DIALECT) {
            if u < *w {
                return tok;
            }
            u -= w;
        }
        DIALECT[DIALECT.len() - 1]
    };
    let tweets = (0..n)
        .map(|_| {
            let share: f64 = rng.random();
            let len = rng.random_range(5..=10);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    if rng.random_bool(share) {
                        zipf(&mut rng)
                    } else {
                        pick(&mut rng, GENERAL)
                    }
                })
                .collect();
            let noise: f64 = rng.random_range(-0.1..0.1);
            DialectTweet {
                text: words.join(" "),
                posterior: ((share + noise).clamp(0.0, 1.0) * 1e4).round() / 1e4,
            }
        })
        .collect();
    DialectCorpus::new(tweets).expect("posteriors are clamped to [0, 1]")
}

/// The common words of the aggression/loss lists used by the generator.
pub fn common_lexicon_words() -> &'static [&'static str] {
    COMMON_LEXICON
}

/// The shared dialect tokens used by the generator, most frequent first.
pub fn dialect_words() -> &'static [&'static str] {
    DIALECT
}
