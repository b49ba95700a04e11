//! Response parsing, task answer rewards, and the answer-modulated thinking
//! reward.
//!
//! ```text
//! gate = 1 / (1 + exp(-k (r_a - tau)))
//! r_t  = gate * r_a * s_t
//! r    = r_a + lambda * r_t        (0 when the response is malformed)
//! ```

use serde::{Deserialize, Serialize};

use crate::embed::{similarity_reward, EmbedError, EmbeddingProvider};
use crate::metrics::{bleu_aggregate, iou, meteor_lite, rouge_avg, BBox, BoxError, CaptionScores};
use crate::sample::{Reference, Sample, Task};
use crate::textkit::words;
use crate::thinkscore::{thinking_quality, ThinkBreakdown, ThinkConfig};

pub const ANSWER_OPEN: &str = "<answer>";
pub const ANSWER_CLOSE: &str = "</answer>";

#[derive(Debug, thiserror::Error)]
pub enum RewardError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("reference for a {task} sample is not usable: {reason}")]
    Reference { task: Task, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptionWeights {
    pub bleu: f64,
    pub rouge: f64,
    pub meteor: f64,
    pub embedding: f64,
}

impl Default for CaptionWeights {
    fn default() -> Self {
        Self {
            bleu: 0.15,
            rouge: 0.2,
            meteor: 0.3,
            embedding: 0.35,
        }
    }
}

impl CaptionWeights {
    pub fn sum(&self) -> f64 {
        self.bleu + self.rouge + self.meteor + self.embedding
    }

    pub fn combine(&self, s: &CaptionScores) -> f64 {
        self.bleu * s.bleu + self.rouge * s.rouge + self.meteor * s.meteor + self.embedding * s.embedding
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Gate sharpness `k`.
    pub gate_sharpness: f64,
    /// Gate threshold `tau`.
    pub gate_threshold: f64,
    /// Thinking weight `lambda`.
    pub think_weight: f64,
    pub caption_weights: CaptionWeights,
    /// Apply the BLEU brevity penalty in the caption reward.
    pub brevity_penalty: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            gate_sharpness: 12.0,
            gate_threshold: 0.5,
            think_weight: 0.3,
            caption_weights: CaptionWeights::default(),
            brevity_penalty: true,
        }
    }
}

impl RewardConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let w = &self.caption_weights;
        if (w.sum() - 1.0).abs() > 1e-12 {
            out.push(format!("reward.caption_weights: weights must sum to 1, got {}", w.sum()));
        }
        if [w.bleu, w.rouge, w.meteor, w.embedding].iter().any(|v| *v < 0.0) {
            out.push("reward.caption_weights: weights must be non-negative".into());
        }
        if !(self.gate_sharpness > 0.0) {
            out.push(format!("reward.gate_sharpness: must be positive, got {}", self.gate_sharpness));
        }
        if !(self.gate_threshold > 0.0 && self.gate_threshold < 1.0) {
            out.push(format!("reward.gate_threshold: must be in (0, 1), got {}", self.gate_threshold));
        }
        if !(self.think_weight >= 0.0) {
            out.push(format!("reward.think_weight: must be non-negative, got {}", self.think_weight));
        }
        out
    }
}

/// A model output split around the answer tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub raw: String,
    /// Trimmed text before the first `<answer>` (the whole text if there is
    /// none).
    pub thinking: String,
    /// Trimmed text between the tags; empty when no pair exists.
    pub answer: String,
    pub format_ok: bool,
}

/// Splits `raw` into thinking and answer. The format is valid when there is
/// exactly one `<answer>` and one `</answer>`, in that order, with only
/// whitespace after the close tag.
pub fn parse_response(raw: &str) -> ParsedResponse {
    let open = raw.find(ANSWER_OPEN);
    let thinking = match open {
        Some(i) => raw[..i].trim(),
        None => raw.trim(),
    };
    let mut answer = "";
    let mut format_ok = false;
    if let Some(i) = open {
        let body_start = i + ANSWER_OPEN.len();
        if let Some(rel) = raw[body_start..].find(ANSWER_CLOSE) {
            let close = body_start + rel;
            answer = raw[body_start..close].trim();
            let tail = &raw[close + ANSWER_CLOSE.len()..];
            format_ok = raw.matches(ANSWER_OPEN).count() == 1
                && raw.matches(ANSWER_CLOSE).count() == 1
                && tail.trim().is_empty();
        }
    }
    ParsedResponse {
        raw: raw.to_owned(),
        thinking: thinking.to_owned(),
        answer: answer.to_owned(),
        format_ok,
    }
}

/// `G(r_a) = 1 / (1 + exp(-k (r_a - tau)))`.
pub fn gate(r_a: f64, cfg: &RewardConfig) -> f64 {
    1.0 / (1.0 + (-cfg.gate_sharpness * (r_a - cfg.gate_threshold)).exp())
}

/// Returns `(gate, r_t)`.
pub fn amtr(r_a: f64, s_t: f64, cfg: &RewardConfig) -> (f64, f64) {
    let g = gate(r_a, cfg);
    (g, g * r_a * s_t)
}

/// Per-response scores. Everything is zero when `format_ok` is false.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub format_ok: bool,
    pub r_a: f64,
    #[serde(flatten)]
    pub think: ThinkBreakdown,
    pub gate: f64,
    pub r_t: f64,
    pub r_total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<CaptionScores>,
}

/// Bundles the provider and configs needed to score responses.
#[derive(Debug, Clone, Copy)]
pub struct Scorer<'a> {
    pub provider: &'a EmbeddingProvider,
    pub reward: &'a RewardConfig,
    pub think: &'a ThinkConfig,
}

impl<'a> Scorer<'a> {
    pub fn new(provider: &'a EmbeddingProvider, reward: &'a RewardConfig, think: &'a ThinkConfig) -> Self {
        Self { provider, reward, think }
    }

    pub fn caption_scores(&self, pred: &str, reference: &str) -> Result<CaptionScores, RewardError> {
        let (p, r) = (words(pred), words(reference));
        let bleu = if r.is_empty() {
            if p.is_empty() { 1.0 } else { 0.0 }
        } else {
            bleu_aggregate(&p, &r, self.reward.brevity_penalty)
        };
        Ok(CaptionScores {
            bleu,
            rouge: rouge_avg(&p, &r).average,
            meteor: if p.is_empty() && r.is_empty() { 1.0 } else { meteor_lite(&p, &r) },
            embedding: similarity_reward(self.provider, pred, reference)?,
        })
    }

    /// Task answer reward `r_a` in `[0, 1]`, plus the caption components for
    /// captioning. An unparseable grounding prediction scores 0.
    pub fn answer_reward(
        &self,
        task: Task,
        pred: &str,
        reference: &Reference,
    ) -> Result<(f64, Option<CaptionScores>), RewardError> {
        let text_ref = || match reference {
            Reference::Text(t) => Ok(t.as_str()),
            Reference::Box(_) => Err(RewardError::Reference {
                task,
                reason: "expected a text reference, got a box".into(),
            }),
        };
        match task {
            Task::SC | Task::VQA => Ok((similarity_reward(self.provider, pred, text_ref()?)?, None)),
            Task::VG => {
                let gold = reference.as_box().map_err(|e| RewardError::Reference {
                    task,
                    reason: e.to_string(),
                })?;
                Ok((grounding_reward(pred, &gold), None))
            }
            Task::IC => {
                let s = self.caption_scores(pred, text_ref()?)?;
                Ok((self.reward.caption_weights.combine(&s).clamp(0.0, 1.0), Some(s)))
            }
        }
    }

    pub fn total_reward(&self, sample: &Sample, raw: &str) -> Result<RewardBreakdown, RewardError> {
        let parsed = parse_response(raw);
        if !parsed.format_ok {
            return Ok(RewardBreakdown::default());
        }
        let (r_a, caption) = self.answer_reward(sample.task, &parsed.answer, &sample.reference)?;
        let think = thinking_quality(&parsed.thinking, &parsed.answer, self.provider, self.think)?;
        let (g, r_t) = amtr(r_a, think.s_t, self.reward);
        Ok(RewardBreakdown {
            format_ok: true,
            r_a,
            think,
            gate: g,
            r_t,
            r_total: r_a + self.reward.think_weight * r_t,
            caption,
        })
    }
}

fn grounding_reward(pred: &str, gold: &BBox) -> f64 {
    match BBox::parse(pred) {
        Ok(b) => iou(&b, gold),
        Err(e) => {
            log_box_failure(&e);
            0.0
        }
    }
}

fn log_box_failure(e: &BoxError) {
    log::warn!("grounding answer scored 0: {e}");
}
