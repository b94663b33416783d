//! Lexical-bias audit.
//!
//! A reference corpus of dialect-heavy tweets is reduced to a table of its
//! `K` most frequent tokens, each scaled to a share of the retained counts.
//! A trained model's single-word features are then taken in importance
//! order, cut into consecutive buckets, and each bucket is scored by the
//! summed share of its words. If important features are also frequent
//! dialect tokens, early buckets score high and the series trends down.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::featurize::single_word;
use crate::preprocess::Preprocessor;
use crate::{Error, Result};

pub const DEFAULT_TOP_K: usize = 10_000;
pub const DEFAULT_N_FEATURES: usize = 7_500;
pub const DEFAULT_BUCKET_SIZE: usize = 150;

/// What the retained raw counts are divided by.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyScaling {
    /// Sum of the retained top-K counts; shares sum to 1.
    #[default]
    RetainedK,
    /// Sum of all token counts in the corpus; shares sum to at most 1.
    FullVocabulary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    /// Retained tokens by descending raw count, ties lexicographic.
    pub ranked: Vec<(String, u64)>,
    pub k: usize,
    /// Sum of raw counts over the retained tokens.
    pub total_raw: u64,
    pub vocab_size: usize,
    pub scaling: FrequencyScaling,
    scaled: BTreeMap<String, f64>,
}

impl FrequencyTable {
    pub fn scaled_freq(&self, token: &str) -> Option<f64> {
        self.scaled.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.ranked.iter().map(|(t, _)| (t.as_str(), self.scaled[t]))
    }
}

/// Counts tokens after the standard preprocessing and keeps the top `k`.
pub fn build_frequency_table(
    texts: &[String],
    preprocessor: &Preprocessor,
    k: usize,
    scaling: FrequencyScaling,
) -> Result<FrequencyTable> {
    if texts.is_empty() {
        return Err(Error::Empty("reference corpus".into()));
    }
    if k == 0 {
        return Err(Error::invalid("top_k", "must be at least 1"));
    }
    let counts: HashMap<String, u64> = texts
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<String, u64>, text| {
            for tok in preprocessor.tokens(text) {
                *acc.entry(tok).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (t, c) in b {
                *a.entry(t).or_default() += c;
            }
            a
        });
    if counts.is_empty() {
        return Err(Error::Empty("reference vocabulary".into()));
    }
    let vocab_size = counts.len();
    let all_raw: u64 = counts.values().sum();
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if k > ranked.len() {
        log::warn!(
            "top_k = {k} exceeds the reference vocabulary ({} tokens); keeping all",
            ranked.len()
        );
    }
    ranked.truncate(k);
    let total_raw: u64 = ranked.iter().map(|(_, c)| c).sum();
    let denom = match scaling {
        FrequencyScaling::RetainedK => total_raw,
        FrequencyScaling::FullVocabulary => all_raw,
    } as f64;
    let scaled = ranked.iter().map(|(t, c)| (t.clone(), *c as f64 / denom)).collect();
    Ok(FrequencyTable {
        ranked,
        k,
        total_raw,
        vocab_size,
        scaling,
        scaled,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub index: usize,
    /// 1-based inclusive rank range among the retained single-word features.
    pub start_rank: usize,
    pub end_rank: usize,
    pub scaled_freq_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSeries {
    pub bucket_size: usize,
    pub n_features_used: usize,
    pub buckets: Vec<Bucket>,
    /// Set when the last bucket holds fewer than `bucket_size` features.
    pub last_bucket_short: bool,
}

impl AuditSeries {
    pub fn values(&self) -> Vec<f64> {
        self.buckets.iter().map(|b| b.scaled_freq_sum).collect()
    }

    pub fn total(&self) -> f64 {
        self.buckets.iter().map(|b| b.scaled_freq_sum).sum()
    }
}

/// Words behind the single-word columns of `ranked`, in order. A word that
/// appears as both a tf-idf and a binary column keeps its first position.
pub fn single_word_features(ranked: &[(String, f64)]) -> Vec<(String, f64)> {
    let mut seen = std::collections::HashSet::new();
    ranked
        .iter()
        .filter_map(|(name, w)| single_word(name).map(|t| (t.to_string(), *w)))
        .filter(|(t, _)| seen.insert(t.clone()))
        .collect()
}

/// Buckets the top `n` single-word features of `ranked` (which must be in
/// non-increasing weight order) and sums each bucket's scaled frequencies.
/// Only the order of `ranked` matters, not the weight values.
pub fn bucket_importances(
    ranked: &[(String, f64)],
    table: &FrequencyTable,
    n: usize,
    bucket_size: usize,
) -> Result<AuditSeries> {
    if bucket_size == 0 {
        return Err(Error::invalid("bucket_size", "must be at least 1"));
    }
    if let Some(w) = ranked.windows(2).find(|w| w[1].1 > w[0].1) {
        return Err(Error::invalid(
            "ranked features",
            format!("not in descending weight order at {:?} -> {:?}", w[0].0, w[1].0),
        ));
    }
    let words = single_word_features(ranked);
    if words.is_empty() || n == 0 {
        return Err(Error::Empty("single-word feature list".into()));
    }
    let n_used = if n > words.len() {
        log::warn!(
            "n = {n} exceeds the {} single-word features; using all of them",
            words.len()
        );
        words.len()
    } else {
        n
    };
    let buckets = words[..n_used]
        .chunks(bucket_size)
        .enumerate()
        .map(|(i, chunk)| Bucket {
            index: i,
            start_rank: i * bucket_size + 1,
            end_rank: i * bucket_size + chunk.len(),
            scaled_freq_sum: chunk.iter().filter_map(|(t, _)| table.scaled_freq(t)).sum(),
        })
        .collect();
    Ok(AuditSeries {
        bucket_size,
        n_features_used: n_used,
        buckets,
        last_bucket_short: n_used % bucket_size != 0,
    })
}

/// Rank correlation between two equal-length samples, using average ranks
/// for ties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    /// Either sample has zero rank variance; `rho` is reported as 0.
    pub degenerate: bool,
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Spearman {
    assert_eq!(x.len(), y.len(), "spearman needs equal-length samples");
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if x.len() < 2 || sxx == 0.0 || syy == 0.0 {
        return Spearman {
            rho: 0.0,
            degenerate: true,
        };
    }
    Spearman {
        rho: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

/// Spearman correlation between bucket index and bucket value.
pub fn trend(series: &AuditSeries) -> Spearman {
    let idx: Vec<f64> = series.buckets.iter().map(|b| b.index as f64).collect();
    spearman(&idx, &series.values())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub summary: String,
    pub csv: String,
    pub svg: String,
    pub trend: Spearman,
}

pub fn render_csv(series: &AuditSeries) -> String {
    let mut out = String::from("bucket_index,start_rank,end_rank,scaled_freq_sum\n");
    for b in &series.buckets {
        let _ = writeln!(
            out,
            "{},{},{},{:?}",
            b.index, b.start_rank, b.end_rank, b.scaled_freq_sum
        );
    }
    out
}

/// Bar chart of the bucket series.
pub fn render_svg(series: &AuditSeries) -> String {
    let (w, h) = (720.0, 360.0);
    let (left, right, top, bottom) = (60.0, 20.0, 30.0, 50.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let max = series.values().into_iter().fold(0.0f64, f64::max);
    let ymax = if max > 0.0 { max } else { 1.0 };
    let n = series.buckets.len().max(1) as f64;
    let bar_w = plot_w / n;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="13">Scaled reference frequency per bucket of {} features</text>"#,
        w / 2.0,
        series.bucket_size
    );
    for (i, b) in series.buckets.iter().enumerate() {
        let bh = b.scaled_freq_sum / ymax * plot_h;
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a6fa5"><title>bucket {} (ranks {}-{}): {:.6}</title></rect>"##,
            left + i as f64 * bar_w + 0.5,
            top + plot_h - bh,
            (bar_w - 1.0).max(0.5),
            bh,
            b.index,
            b.start_rank,
            b.end_rank,
            b.scaled_freq_sum
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="black"/>"#,
        top + plot_h
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="{:.1}" text-anchor="end" dx="-4">0</text>"#,
        top + plot_h
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="{top}" text-anchor="end" dx="-4" dy="4">{ymax:.4}</text>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">bucket index (most important first)</text>"#,
        left + plot_w / 2.0,
        h - 15.0
    );
    s.push_str("</svg>\n");
    s
}

/// Summary text, bucket CSV and SVG for one audit. `top_features` is the
/// full importance ranking; the first `top_n` entries are listed.
pub fn report_audit(series: &AuditSeries, top_features: &[(String, f64)], top_n: usize) -> AuditReport {
    let t = trend(series);
    let mut s = String::new();
    let _ = writeln!(s, "Top {} features by importance", top_n.min(top_features.len()));
    for (i, (name, w)) in top_features.iter().take(top_n).enumerate() {
        let _ = writeln!(s, "{:>4}  {:<40}  {:.6}", i + 1, name, w);
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "Buckets: {} of size {} over {} single-word features{}",
        series.buckets.len(),
        series.bucket_size,
        series.n_features_used,
        if series.last_bucket_short {
            " (last bucket short)"
        } else {
            ""
        }
    );
    let _ = writeln!(s, "Total scaled frequency covered: {:.6}", series.total());
    let _ = writeln!(
        s,
        "Spearman(bucket index, scaled frequency) = {:.4}{}",
        t.rho,
        if t.degenerate {
            " (degenerate: zero rank variance)"
        } else {
            ""
        }
    );
    AuditReport {
        summary: s,
        csv: render_csv(series),
        svg: render_svg(series),
        trend: t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{EmojiList, Stopwords};
    use proptest::prelude::*;

    fn pre() -> Preprocessor {
        Preprocessor::new(Stopwords::parse(""), EmojiList::default_top10())
    }

    fn table_of(pairs: &[(&str, u64)]) -> FrequencyTable {
        let texts: Vec<String> = pairs.iter().map(|(t, c)| vec![*t; *c as usize].join(" ")).collect();
        build_frequency_table(&texts, &pre(), pairs.len(), FrequencyScaling::RetainedK).unwrap()
    }

    fn tfidf(words: &[&str]) -> Vec<(String, f64)> {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| (format!("tfidf:{w}"), (words.len() - i) as f64))
            .collect()
    }

    #[test]
    fn hand_counted_table() {
        let texts = vec!["a a b".to_string(), "a c".to_string()];
        let t = build_frequency_table(&texts, &pre(), 2, FrequencyScaling::RetainedK).unwrap();
        assert_eq!(t.ranked, vec![("a".to_string(), 3), ("b".to_string(), 1)]);
        assert_eq!(t.scaled_freq("a"), Some(0.75));
        assert_eq!(t.scaled_freq("b"), Some(0.25));
        assert_eq!(t.scaled_freq("c"), None);
        assert_eq!(t.total_raw, 4);

        let full = build_frequency_table(&texts, &pre(), 2, FrequencyScaling::FullVocabulary).unwrap();
        assert_eq!(full.scaled_freq("a"), Some(0.6));
    }

    #[test]
    fn k_beyond_vocabulary_keeps_all() {
        let texts = vec!["x y".to_string()];
        let t = build_frequency_table(&texts, &pre(), 50, FrequencyScaling::RetainedK).unwrap();
        assert_eq!(t.len(), 2);
        assert!(build_frequency_table(&[], &pre(), 5, FrequencyScaling::RetainedK).is_err());
        assert!(build_frequency_table(&["@only".to_string()], &pre(), 5, FrequencyScaling::RetainedK).is_err());
    }

    #[test]
    fn hand_bucketed_series() {
        let table = table_of(&[("w1", 2), ("w3", 1), ("zz", 7)]);
        // shares: w1 = 0.2, w3 = 0.1
        let ranked = tfidf(&["w1", "w2", "w3", "w4", "w5", "w6"]);
        let s = bucket_importances(&ranked, &table, 6, 3).unwrap();
        assert_eq!(s.buckets.len(), 2);
        assert!((s.buckets[0].scaled_freq_sum - 0.3).abs() < 1e-15);
        assert_eq!(s.buckets[1].scaled_freq_sum, 0.0);
        assert_eq!((s.buckets[1].start_rank, s.buckets[1].end_rank), (4, 6));
        assert!(!s.last_bucket_short);
    }

    #[test]
    fn non_word_columns_are_skipped_and_duplicates_collapse() {
        let table = table_of(&[("a", 1)]);
        let ranked: Vec<(String, f64)> = [
            ("pos:noun", 9.0),
            ("tfidf:a", 8.0),
            ("bin:a", 7.0),
            ("bigram:a b", 6.0),
            ("bin:b", 5.0),
        ]
        .iter()
        .map(|(n, w)| (n.to_string(), *w))
        .collect();
        let s = bucket_importances(&ranked, &table, 10, 1).unwrap();
        assert_eq!(s.n_features_used, 2);
        assert_eq!(s.values(), vec![1.0, 0.0]);
    }

    #[test]
    fn short_last_bucket_and_counts() {
        let table = table_of(&[("a", 1)]);
        let names: Vec<String> = (0..7500).map(|i| format!("w{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let ranked = tfidf(&refs);
        assert_eq!(
            bucket_importances(&ranked, &table, 7500, 150).unwrap().buckets.len(),
            50
        );
        let s = bucket_importances(&ranked, &table, 1000, 150).unwrap();
        assert_eq!(s.buckets.len(), 7);
        assert!(s.last_bucket_short);
        assert_eq!(s.buckets[6].end_rank, 1000);
    }

    #[test]
    fn unsorted_input_rejected() {
        let table = table_of(&[("a", 1)]);
        let ranked = vec![("tfidf:a".to_string(), 1.0), ("tfidf:b".to_string(), 2.0)];
        assert!(bucket_importances(&ranked, &table, 2, 1).is_err());
    }

    #[test]
    fn spearman_cases() {
        let idx = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(spearman(&idx, &[4.0, 3.0, 2.0, 1.0]).rho, -1.0);
        assert_eq!(spearman(&idx, &[1.0, 2.0, 3.0, 9.0]).rho, 1.0);
        let flat = spearman(&idx, &[0.5; 4]);
        assert!(flat.degenerate);
        assert_eq!(flat.rho, 0.0);
        // ties get average ranks: [1, 2.5, 2.5, 4]
        assert_eq!(average_ranks(&[1.0, 5.0, 5.0, 7.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn report_is_stable_text() {
        let table = table_of(&[("a", 3), ("b", 1)]);
        let ranked = tfidf(&["a", "c", "b", "d"]);
        let s = bucket_importances(&ranked, &table, 4, 2).unwrap();
        let r = report_audit(&s, &ranked, 3);
        assert_eq!(
            r.csv,
            "bucket_index,start_rank,end_rank,scaled_freq_sum\n0,1,2,0.75\n1,3,4,0.25\n"
        );
        assert!(r.summary.contains("Spearman(bucket index, scaled frequency) = -1.0000"));
        assert!(r.svg.starts_with("<svg") && r.svg.trim_end().ends_with("</svg>"));
        assert_eq!(r.svg.matches("<title>").count(), 2);
        assert_eq!(r, report_audit(&s, &ranked, 3));
    }

    proptest! {
        #[test]
        fn table_ignores_text_order(mut texts in prop::collection::vec("[a-e ]{1,12}", 1..20), k in 1usize..6) {
            prop_assume!(texts.iter().any(|t| !t.trim().is_empty()));
            let a = build_frequency_table(&texts, &pre(), k, FrequencyScaling::RetainedK).unwrap();
            texts.reverse();
            let b = build_frequency_table(&texts, &pre(), k, FrequencyScaling::RetainedK).unwrap();
            prop_assert_eq!(&a, &b);
            let total: f64 = a.entries().map(|(_, f)| f).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }

        #[test]
        fn buckets_bounded_and_scale_free(
            weights in prop::collection::vec(0.0f64..10.0, 1..60),
            scale in 0.01f64..100.0,
            size in 1usize..8,
        ) {
            let table = table_of(&[("w0", 5), ("w3", 2), ("w7", 1), ("w20", 4)]);
            let mut ranked: Vec<(String, f64)> =
                weights.iter().enumerate().map(|(i, w)| (format!("tfidf:w{i}"), *w)).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let scaled: Vec<(String, f64)> = ranked.iter().map(|(n, w)| (n.clone(), w * scale)).collect();
            let n = ranked.len();
            let a = bucket_importances(&ranked, &table, n, size).unwrap();
            let b = bucket_importances(&scaled, &table, n, size).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.total() <= 1.0 + 1e-9);
            prop_assert!(a.values().iter().all(|&v| v >= 0.0));
        }
    }
}
