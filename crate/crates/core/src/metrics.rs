//! Caption and box metrics used by the answer rewards and the mining judges.
//!
//! All text metrics take already-tokenized input ([`TokenSeq`]). Empty-input
//! conventions: two empty sequences agree perfectly (score 1), one empty
//! side scores 0.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::textkit::{ngrams, TokenSeq};

/// Weights of BLEU-1..BLEU-4 in the geometric mean.
pub const BLEU_WEIGHTS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];

/// Floor applied to every n-gram precision before taking its logarithm.
pub const BLEU_SMOOTHING_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoxError {
    #[error("box coordinates must be finite, got {0:?}")]
    NonFinite([f64; 4]),
    #[error("box corners out of order (need x1 <= x2 and y1 <= y2), got {0:?}")]
    Inverted([f64; 4]),
    #[error("cannot parse box from {0:?}: expected four comma-separated numbers")]
    Parse(String),
}

/// Axis-aligned box `[x1, y1, x2, y2]` with `x1 <= x2` and `y1 <= y2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, BoxError> {
        let raw = [x1, y1, x2, y2];
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(BoxError::NonFinite(raw));
        }
        if x1 > x2 || y1 > y2 {
            return Err(BoxError::Inverted(raw));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Parses `"x1,y1,x2,y2"`. Whitespace is ignored, and one pair of
    /// surrounding brackets or parentheses is tolerated.
    pub fn parse(text: &str) -> Result<Self, BoxError> {
        let trimmed = text.trim();
        let inner = trimmed
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .or_else(|| trimmed.strip_prefix('(').and_then(|s| s.strip_suffix(')')))
            .unwrap_or(trimmed);
        let parts: Vec<f64> = inner
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| BoxError::Parse(text.to_owned()))?;
        match parts.as_slice() {
            [x1, y1, x2, y2] => Self::new(*x1, *y1, *x2, *y2),
            _ => Err(BoxError::Parse(text.to_owned())),
        }
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = BoxError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.coords()
    }
}

/// The four caption component scores.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CaptionScores {
    pub bleu: f64,
    pub rouge: f64,
    pub meteor: f64,
    pub embedding: f64,
}

fn counts<'a, I: IntoIterator<Item = &'a [String]>>(grams: I) -> HashMap<&'a [String], usize> {
    let mut map = HashMap::new();
    for g in grams {
        *map.entry(g).or_insert(0) += 1;
    }
    map
}

/// Clipped n-gram precision. When the prediction has no n-grams of this
/// order, the precision is 1 if the reference has none either and 0
/// otherwise.
fn modified_precision(pred: &TokenSeq, reference: &TokenSeq, n: usize) -> f64 {
    let pred_grams = ngrams(pred, n);
    let ref_grams = ngrams(reference, n);
    if pred_grams.is_empty() {
        return if ref_grams.is_empty() { 1.0 } else { 0.0 };
    }
    let ref_counts = counts(ref_grams);
    let clipped: usize = counts(pred_grams.iter().copied())
        .into_iter()
        .map(|(g, c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    clipped as f64 / pred_grams.len() as f64
}

/// Weighted geometric mean of BLEU-1..4 precisions.
///
/// `brevity_penalty` multiplies by `min(1, exp(1 - |ref|/|pred|))`.
///
/// # Panics
///
/// Panics if `reference` is empty.
pub fn bleu_aggregate(pred: &TokenSeq, reference: &TokenSeq, brevity_penalty: bool) -> f64 {
    assert!(!reference.is_empty(), "BLEU reference must be non-empty");
    if pred.is_empty() {
        return 0.0;
    }
    let log_mean: f64 = BLEU_WEIGHTS
        .iter()
        .enumerate()
        .map(|(i, w)| w * modified_precision(pred, reference, i + 1).max(BLEU_SMOOTHING_FLOOR).ln())
        .sum();
    let bp = if brevity_penalty {
        (1.0 - reference.len() as f64 / pred.len() as f64).exp().min(1.0)
    } else {
        1.0
    };
    (bp * log_mean.exp()).clamp(0.0, 1.0)
}

fn f_measure(overlap: usize, pred_len: usize, ref_len: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / pred_len as f64;
    let r = overlap as f64 / ref_len as f64;
    2.0 * p * r / (p + r)
}

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeScores {
    pub rouge1_f: f64,
    pub rouge_l_f: f64,
    /// Mean of the two F-scores.
    pub average: f64,
}

pub fn rouge_avg(pred: &TokenSeq, reference: &TokenSeq) -> RougeScores {
    let (r1, rl) = match (pred.is_empty(), reference.is_empty()) {
        (true, true) => (1.0, 1.0),
        (true, false) | (false, true) => (0.0, 0.0),
        (false, false) => {
            let ref_counts = counts(ngrams(reference, 1));
            let overlap: usize = counts(ngrams(pred, 1))
                .into_iter()
                .map(|(g, c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
            let lcs = lcs_len(pred.tokens(), reference.tokens());
            (
                f_measure(overlap, pred.len(), reference.len()),
                f_measure(lcs, pred.len(), reference.len()),
            )
        }
    };
    RougeScores {
        rouge1_f: r1,
        rouge_l_f: rl,
        average: (r1 + rl) / 2.0,
    }
}

/// Exact-match METEOR: recall-weighted harmonic mean (alpha = 0.9) times a
/// fragmentation penalty `0.5 * (chunks / matches)^3`.
///
/// Alignment is greedy: each prediction token takes the earliest unused
/// reference position holding the same word.
pub fn meteor_lite(pred: &TokenSeq, reference: &TokenSeq) -> f64 {
    let mut used = vec![false; reference.len()];
    let mut alignment: Vec<usize> = Vec::new();
    for word in pred.tokens() {
        let slot = reference
            .tokens()
            .iter()
            .enumerate()
            .position(|(j, r)| !used[j] && r == word);
        if let Some(j) = slot {
            used[j] = true;
            alignment.push(j);
        }
    }
    let matches = alignment.len();
    if matches == 0 {
        return 0.0;
    }
    let chunks = 1 + alignment.windows(2).filter(|w| w[1] != w[0] + 1).count();
    let p = matches as f64 / pred.len() as f64;
    let r = matches as f64 / reference.len() as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / matches as f64).powi(3);
    f_mean * (1.0 - penalty)
}

/// F1 over unique word sets.
pub fn word_set_f1(pred: &TokenSeq, reference: &TokenSeq) -> f64 {
    let p: HashSet<&str> = pred.iter().collect();
    let r: HashSet<&str> = reference.iter().collect();
    match (p.is_empty(), r.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => f_measure(p.intersection(&r).count(), p.len(), r.len()),
    }
}

/// Intersection over union. Two coincident zero-area boxes score 1; any
/// other zero-area union scores 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (inter / union).clamp(0.0, 1.0)
}
