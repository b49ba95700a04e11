//! Thinking-quality score `s_t`.
//!
//! ```text
//! q_t = l_s * p_r * p_a
//! s_t = (1 - w_d) * q_t + w_d * q_t * b_d
//! ```
//!
//! * `l_s`: piecewise-linear length score over the word count.
//! * `p_r`: redundancy penalty. Drops to `gamma_r` when the share of repeated
//!   distinct words exceeds `delta_r` or a filler phrase appears.
//! * `p_a`: answer-overlap penalty. Linear above the overlap gate `tau_a`.
//! * `b_d`: diversity bonus, one minus the mean cosine between neighbouring
//!   sentence embeddings, clipped to `[0, 1]`. Zero for fewer than two
//!   sentences.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::embed::{cosine, EmbedError, EmbeddingProvider};
use crate::textkit::{normalize, split_sentences, tokenize_words, SentenceSeq, TokenSeq};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThinkConfig {
    pub tau_min: u32,
    pub tau_lo: u32,
    pub tau_hi: u32,
    pub tau_max: u32,
    /// `delta_r`
    pub redundancy_threshold: f64,
    /// `gamma_r`
    pub redundancy_factor: f64,
    /// `tau_a`
    pub overlap_gate: f64,
    /// `w_d`
    pub diversity_weight: f64,
    pub filler_phrases: Vec<String>,
    /// Set to false to pin `p_a = 1` (ablation).
    pub overlap_penalty: bool,
}

impl Default for ThinkConfig {
    fn default() -> Self {
        Self {
            tau_min: 20,
            tau_lo: 40,
            tau_hi: 80,
            tau_max: 160,
            redundancy_threshold: 0.15,
            redundancy_factor: 0.5,
            overlap_gate: 0.3,
            diversity_weight: 0.3,
            filler_phrases: ["therefore", "however", "in conclusion", "overall", "in summary"]
                .into_iter()
                .map(String::from)
                .collect(),
            overlap_penalty: true,
        }
    }
}

impl ThinkConfig {
    /// Every violated invariant, as `field: message`.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.tau_min < self.tau_lo && self.tau_lo <= self.tau_hi && self.tau_hi < self.tau_max) {
            out.push(format!(
                "think.tau_*: need tau_min < tau_lo <= tau_hi < tau_max, got {}/{}/{}/{}",
                self.tau_min, self.tau_lo, self.tau_hi, self.tau_max
            ));
        }
        if !(self.redundancy_factor > 0.0 && self.redundancy_factor < 1.0) {
            out.push(format!("think.redundancy_factor: must be in (0, 1), got {}", self.redundancy_factor));
        }
        for (name, v) in [
            ("redundancy_threshold", self.redundancy_threshold),
            ("diversity_weight", self.diversity_weight),
        ] {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("think.{name}: must be in [0, 1], got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.overlap_gate) {
            out.push(format!("think.overlap_gate: must be in [0, 1), got {}", self.overlap_gate));
        }
        out
    }
}

/// All intermediate quantities of `s_t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThinkBreakdown {
    pub word_count: usize,
    pub l_s: f64,
    /// Share of distinct words that repeat, `d(T)`.
    pub redundancy_ratio: f64,
    pub p_r: f64,
    /// Share of answer words also present in the thinking text, `o(T, A)`.
    pub overlap_ratio: f64,
    pub p_a: f64,
    /// Unclipped diversity `rho`; 0 when fewer than two sentences.
    pub diversity: f64,
    pub b_d: f64,
    pub q_t: f64,
    pub s_t: f64,
}

pub fn length_score(word_count: usize, cfg: &ThinkConfig) -> f64 {
    let w = word_count as f64;
    let (min, lo, hi, max) = (
        f64::from(cfg.tau_min),
        f64::from(cfg.tau_lo),
        f64::from(cfg.tau_hi),
        f64::from(cfg.tau_max),
    );
    if w < min {
        0.0
    } else if w < lo {
        (w - min) / (lo - min)
    } else if w <= hi {
        1.0
    } else if w <= max {
        1.0 - (w - hi) / (max - hi)
    } else {
        0.0
    }
}

/// Returns `(d, p_r)`. `normalized_thinking` is searched for filler phrases
/// by plain substring match.
pub fn redundancy_penalty(tokens: &TokenSeq, normalized_thinking: &str, cfg: &ThinkConfig) -> (f64, f64) {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in tokens.iter() {
        *counts.entry(t).or_insert(0) += 1;
    }
    let d = if counts.is_empty() {
        0.0
    } else {
        counts.values().filter(|c| **c >= 2).count() as f64 / counts.len() as f64
    };
    let has_filler = cfg
        .filler_phrases
        .iter()
        .map(|z| normalize(z))
        .any(|z| !z.is_empty() && normalized_thinking.contains(z.as_str()));
    let p_r = if d > cfg.redundancy_threshold || has_filler {
        cfg.redundancy_factor
    } else {
        1.0
    };
    (d, p_r)
}

/// Returns `(o, p_a)` with both sides treated as word sets.
pub fn overlap_penalty(thinking: &TokenSeq, answer: &TokenSeq, cfg: &ThinkConfig) -> (f64, f64) {
    let answer_set: HashSet<&str> = answer.iter().collect();
    if answer_set.is_empty() {
        return (0.0, 1.0);
    }
    let thinking_set: HashSet<&str> = thinking.iter().collect();
    let o = answer_set.intersection(&thinking_set).count() as f64 / answer_set.len() as f64;
    if !cfg.overlap_penalty || o <= cfg.overlap_gate {
        return (o, 1.0);
    }
    (o, (1.0 - (o - cfg.overlap_gate) / (1.0 - cfg.overlap_gate)).clamp(0.0, 1.0))
}

/// Returns `(rho, b_d)`.
pub fn diversity_bonus(sentences: &SentenceSeq, provider: &EmbeddingProvider) -> Result<(f64, f64), EmbedError> {
    if sentences.len() < 2 {
        return Ok((0.0, 0.0));
    }
    let embeddings = sentences
        .sentences()
        .iter()
        .map(|s| provider.embed(normalize(s).as_str()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = 0.0;
    for pair in embeddings.windows(2) {
        total += cosine(&pair[0], &pair[1])?;
    }
    let rho = 1.0 - total / (embeddings.len() - 1) as f64;
    Ok((rho, rho.clamp(0.0, 1.0)))
}

/// Combines the sub-scores into `(q_t, s_t)`.
pub fn combine(l_s: f64, p_r: f64, p_a: f64, b_d: f64, diversity_weight: f64) -> (f64, f64) {
    let q_t = l_s * p_r * p_a;
    let s_t = (1.0 - diversity_weight) * q_t + diversity_weight * (q_t * b_d);
    (q_t, s_t)
}

pub fn thinking_quality(
    thinking: &str,
    answer: &str,
    provider: &EmbeddingProvider,
    cfg: &ThinkConfig,
) -> Result<ThinkBreakdown, EmbedError> {
    let norm_thinking = normalize(thinking);
    let tokens = tokenize_words(&norm_thinking);
    let answer_tokens = tokenize_words(&normalize(answer));

    let l_s = length_score(tokens.len(), cfg);
    let (redundancy_ratio, p_r) = redundancy_penalty(&tokens, norm_thinking.as_str(), cfg);
    let (overlap_ratio, p_a) = overlap_penalty(&tokens, &answer_tokens, cfg);
    let (diversity, b_d) = diversity_bonus(&split_sentences(thinking), provider)?;
    let (q_t, s_t) = combine(l_s, p_r, p_a, b_d, cfg.diversity_weight);

    Ok(ThinkBreakdown {
        word_count: tokens.len(),
        l_s,
        redundancy_ratio,
        p_r,
        overlap_ratio,
        p_a,
        diversity,
        b_d,
        q_t,
        s_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingVector;
    use crate::textkit::words;
    use proptest::prelude::*;

    fn hash() -> EmbeddingProvider {
        EmbeddingProvider::feature_hash(384).unwrap()
    }

    #[test]
    fn default_config_is_valid() {
        assert!(ThinkConfig::default().violations().is_empty());
        let bad = ThinkConfig {
            tau_lo: 10,
            redundancy_factor: 1.0,
            overlap_gate: 1.5,
            ..ThinkConfig::default()
        };
        assert_eq!(bad.violations().len(), 3);
    }

    #[test]
    fn length_score_table() {
        let cfg = ThinkConfig::default();
        let table = [(0, 0.0), (19, 0.0), (20, 0.0), (30, 0.5), (40, 1.0), (60, 1.0), (80, 1.0), (120, 0.5), (160, 0.0), (161, 0.0)];
        for (w, expected) in table {
            assert_eq!(length_score(w, &cfg), expected, "w = {w}");
        }
    }

    #[test]
    fn length_score_continuity_at_knots() {
        // Evaluate each branch formula on both sides of each knot.
        let cfg = ThinkConfig::default();
        for knot in [cfg.tau_min, cfg.tau_lo, cfg.tau_hi, cfg.tau_max] {
            let k = knot as usize;
            let left = length_score(k - 1, &cfg);
            let at = length_score(k, &cfg);
            let right = length_score(k + 1, &cfg);
            let step = 1.0 / 20.0;
            assert!((at - left).abs() <= step + 1e-12, "jump left of {knot}");
            assert!((right - at).abs() <= step + 1e-12, "jump right of {knot}");
        }
    }

    #[test]
    fn redundancy_examples() {
        let cfg = ThinkConfig::default();
        let toks = words("a b c a");
        let (d, p) = redundancy_penalty(&toks, "a b c a", &cfg);
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p, 0.5);
        let (d, p) = redundancy_penalty(&words("x y z"), "x y z", &cfg);
        assert_eq!((d, p), (0.0, 1.0));
        let text = normalize("Sand here. However, it is dry");
        let (d, p) = redundancy_penalty(&tokenize_words(&text), text.as_str(), &cfg);
        assert_eq!((d, p), (0.0, 0.5));
    }

    #[test]
    fn overlap_examples() {
        let cfg = ThinkConfig::default();
        let (o, p) = overlap_penalty(&words("near the airport"), &words("runway airport"), &cfg);
        assert_eq!(o, 0.5);
        assert!((p - (1.0 - 0.2 / 0.7)).abs() < 1e-15);
        assert!((p - 0.71429).abs() < 1e-5);
        let (o, p) = overlap_penalty(&words("runway airport"), &words("runway airport"), &cfg);
        assert_eq!((o, p), (1.0, 0.0));
        assert_eq!(overlap_penalty(&words("x"), &words(""), &cfg), (0.0, 1.0));
        let off = ThinkConfig { overlap_penalty: false, ..cfg };
        assert_eq!(overlap_penalty(&words("a"), &words("a"), &off), (1.0, 1.0));
    }

    #[test]
    fn overlap_at_gate_is_unpenalized() {
        let cfg = ThinkConfig::default();
        // 3 of 10 answer words appear: o = 0.3 exactly.
        let answer = words("a b c d e f g h i j");
        let (o, p) = overlap_penalty(&words("a b c"), &answer, &cfg);
        assert_eq!(o, 0.3);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn diversity_examples() {
        let p = hash();
        let same = split_sentences("sand and water. sand and water. sand and water.");
        let (rho, b) = diversity_bonus(&same, &p).unwrap();
        assert!(rho.abs() < 1e-12 && b.abs() < 1e-12);
        assert_eq!(diversity_bonus(&split_sentences("only one sentence"), &p).unwrap(), (0.0, 0.0));

        let sidecar = "a\t1,0\nb\t0,1\n";
        let table = EmbeddingProvider::read_sidecar(sidecar.as_bytes()).unwrap();
        let (rho, b) = diversity_bonus(&split_sentences("a. b. a."), &table).unwrap();
        assert_eq!((rho, b), (1.0, 1.0));
        assert!(diversity_bonus(&split_sentences("a. zzz."), &table).is_err());
    }

    #[test]
    fn diversity_clips_anticorrelated_sentences() {
        let mut table = HashMap::new();
        table.insert("up".to_string(), EmbeddingVector::normalized(vec![1.0, 0.0]));
        table.insert("down".to_string(), EmbeddingVector::normalized(vec![-1.0, 0.0]));
        let p = EmbeddingProvider::from_table(2, table).unwrap();
        let (rho, b) = diversity_bonus(&split_sentences("up. down."), &p).unwrap();
        assert_eq!((rho, b), (2.0, 1.0));
    }

    #[test]
    fn combine_examples() {
        let (q, s) = combine(1.0, 1.0, 1.0, 0.4, 0.3);
        assert_eq!(q, 1.0);
        assert!((s - 0.82).abs() < 1e-15);
        for b in [0.0, 0.5, 1.0] {
            assert_eq!(combine(0.0, 1.0, 1.0, b, 0.3).1, 0.0);
        }
    }

    #[test]
    fn sixty_unique_words_without_diversity() {
        // one sentence, so b_d = 0
        let text: Vec<String> = (0..60).map(|i| format!("w{i}")).collect();
        let b = thinking_quality(&text.join(" "), "beach", &hash(), &ThinkConfig::default()).unwrap();
        assert_eq!((b.l_s, b.p_r, b.p_a, b.b_d), (1.0, 1.0, 1.0, 0.0));
        assert!((b.s_t - 0.7).abs() < 1e-15);
    }

    #[test]
    fn empty_thinking_scores_zero() {
        let b = thinking_quality("", "beach", &hash(), &ThinkConfig::default()).unwrap();
        assert_eq!(b.s_t, 0.0);
        assert_eq!(b.word_count, 0);
    }

    proptest! {
        #[test]
        fn breakdown_invariants(words_in in proptest::collection::vec("[a-h]{1,3}|\\.|however", 0..120), answer in "[a-h ]{0,10}") {
            let text = words_in.join(" ");
            let cfg = ThinkConfig::default();
            let b = thinking_quality(&text, &answer, &hash(), &cfg).unwrap();
            prop_assert!((b.q_t - b.l_s * b.p_r * b.p_a).abs() <= 1e-12);
            prop_assert!((b.s_t - (0.7 * b.q_t + 0.3 * b.q_t * b.b_d)).abs() <= 1e-12);
            prop_assert!(b.s_t <= b.q_t + 1e-15);
            prop_assert!((0.0..=1.0).contains(&b.s_t));
            for v in [b.l_s, b.p_r, b.p_a, b.b_d, b.redundancy_ratio, b.overlap_ratio] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn s_t_monotone_in_each_factor(l in 0.0..=1.0f64, r in 0.0..=1.0f64, a in 0.0..=1.0f64, d in 0.0..=1.0f64, bump in 0.0..=0.5f64) {
            let base = combine(l, r, a, d, 0.3).1;
            let up = |x: f64| (x + bump).min(1.0);
            prop_assert!(combine(up(l), r, a, d, 0.3).1 >= base - 1e-15);
            prop_assert!(combine(l, up(r), a, d, 0.3).1 >= base - 1e-15);
            prop_assert!(combine(l, r, up(a), d, 0.3).1 >= base - 1e-15);
            prop_assert!(combine(l, r, a, up(d), 0.3).1 >= base - 1e-15);
            let (q, s) = combine(l, r, a, 1.0, 0.3);
            prop_assert!((q - s).abs() <= 1e-15);
        }
    }
}
