//! Desk-scale A²GRPO run on a synthetic scene task.
//!
//! The "model" is a bigram softmax policy over a 32-symbol vocabulary with
//! a per-task bias standing in for the image (generation starts from
//! `<eos>`). Its initial logits mimic a fine-tuned model that answers
//! directly: `<answer> label </answer>` is by far the likeliest output and
//! free-text reasoning is rare. Training uses the real reward stack
//! (format gate, feature-hash similarity answer reward, thinking score with
//! toy-scaled length thresholds) and the real objective/gradient code, so
//! whether reasoning appears depends only on the thinking reward weight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::is_triggered;
use crate::embed::{EmbedError, EmbeddingProvider};
use crate::grpo::{advantages, answer_mask, objective_gradient, GrpoConfig, Rollout, RolloutGroup, SequencePolicy};
use crate::reward::{RewardConfig, RewardError, Scorer};
use crate::sample::{Reference, Sample, Task};
use crate::thinkscore::ThinkConfig;

#[derive(Debug, thiserror::Error)]
pub enum ToyError {
    #[error("parameter {index} became non-finite at iteration {iteration}")]
    Diverged { iteration: usize, index: usize },
    #[error("invalid toy configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Grpo(#[from] crate::grpo::GrpoError),
}

const LABELS: [&str; 4] = ["beach", "forest", "city", "farmland"];
/// Feature word and the index of its label in `LABELS`.
const FEATURES: [(&str, usize); 8] = [
    ("sand", 0),
    ("water", 0),
    ("tree", 1),
    ("canopy", 1),
    ("building", 2),
    ("road", 2),
    ("crop", 3),
    ("field", 3),
];
const THINKING: [&str; 16] = [
    "texture", "pattern", "region", "color", "shape", "edge", "surface", "dense", "bright", "green", "grey", "linear",
    "smooth", "scattered", "open", "visible",
];

/// Token table of the toy task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyVocab {
    symbols: Vec<String>,
    pub eos: u32,
    pub open: u32,
    pub close: u32,
    pub period: u32,
    pub labels: Vec<u32>,
    pub features: Vec<u32>,
    pub thinking: Vec<u32>,
}

impl Default for ToyVocab {
    fn default() -> Self {
        let mut symbols: Vec<String> = ["<eos>", "<answer>", "</answer>", "."].map(String::from).to_vec();
        let mut push = |s: &str| {
            symbols.push(s.to_owned());
            (symbols.len() - 1) as u32
        };
        let labels = LABELS.iter().map(|s| push(s)).collect();
        let features = FEATURES.iter().map(|(s, _)| push(s)).collect();
        let thinking = THINKING.iter().map(|s| push(s)).collect();
        Self {
            symbols,
            eos: 0,
            open: 1,
            close: 2,
            period: 3,
            labels,
            features,
            thinking,
        }
    }
}

impl ToyVocab {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, id: u32) -> &str {
        &self.symbols[id as usize]
    }

    pub fn id(&self, symbol: &str) -> Option<u32> {
        self.symbols.iter().position(|s| s == symbol).map(|i| i as u32)
    }

    pub fn render(&self, tokens: &[u32]) -> String {
        tokens.iter().map(|t| self.symbol(*t)).collect::<Vec<_>>().join(" ")
    }

    fn is_label(&self, t: u32) -> bool {
        self.labels.contains(&t)
    }

    /// Words the policy may use while reasoning: feature and thinking words.
    fn is_reasoning_word(&self, t: u32) -> bool {
        self.features.contains(&t) || self.thinking.contains(&t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyTask {
    pub features: Vec<String>,
    pub label: String,
    /// Index of the majority feature; the policy's context.
    pub context: usize,
}

/// Index of the most frequent known feature; ties go to the one seen first.
pub fn majority_feature(features: &[&str]) -> Option<usize> {
    let mut best: Option<(&str, usize)> = None;
    for f in features {
        let count = features.iter().filter(|g| *g == f).count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((f, count));
        }
    }
    let (feature, _) = best?;
    FEATURES.iter().position(|(name, _)| *name == feature)
}

/// Label of the most frequent feature; ties go to the feature seen first.
pub fn majority_label(features: &[&str]) -> Option<&'static str> {
    majority_feature(features).map(|i| LABELS[FEATURES[i].1])
}

pub fn sample_task(seed: u64) -> ToyTask {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x7a5c));
    let features: Vec<&str> = (0..3).map(|_| FEATURES[rng.gen_range(0..FEATURES.len())].0).collect();
    let context = majority_feature(&features).expect("three known features");
    ToyTask {
        features: features.into_iter().map(String::from).collect(),
        label: LABELS[FEATURES[context].1].to_owned(),
        context,
    }
}

fn mix(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// Initial logits. From the start token about 77% of responses open the
// answer at once; a reasoning word continues the chain about 60% of the
// time. Labels and stray tags are rare outside their slots.
const START_TO_ANSWER: f64 = 4.0;
const REASONING_TO_ANSWER: f64 = 2.5;
const REASONING_TO_LABEL: f64 = -5.0;
const ANSWER_TO_LABEL: f64 = 3.0;
const LABEL_TO_CLOSE: f64 = 3.5;
const OFF_FORMAT: f64 = -4.0;

/// Bigram softmax policy with a per-context label head:
/// `pi(next | prev, c) = softmax((theta[prev] + [prev = <answer>] psi[c]) / T)`.
///
/// The context `c` is the task's salient feature and stands in for the
/// image encoding. It only shapes the token that follows `<answer>`, so
/// answer knowledge cannot leak into the reasoning rows; `theta` carries
/// the response structure. Parameters are stored as one vector, `theta`
/// (n x n) followed by `psi` (contexts x n).
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    vocab: ToyVocab,
    n: usize,
    contexts: usize,
    params: Vec<f64>,
    pub temperature: f64,
}

impl ToyPolicy {
    pub fn new(vocab: ToyVocab, params: Vec<f64>, contexts: usize, temperature: f64) -> Self {
        let n = vocab.len();
        assert_eq!(params.len(), n * n + contexts * n, "parameter vector has the wrong length");
        Self {
            vocab,
            n,
            contexts,
            params,
            temperature,
        }
    }

    /// A model that answers directly and seldom reasons, with no
    /// preference between labels.
    pub fn answer_first(vocab: &ToyVocab, temperature: f64) -> Self {
        let n = vocab.len();
        let mut params = vec![0.0; n * n + FEATURES.len() * n];
        for prev in 0..n as u32 {
            let reasoning_context = prev == vocab.eos || prev == vocab.period || vocab.is_reasoning_word(prev);
            for next in 0..n as u32 {
                params[prev as usize * n + next as usize] = if reasoning_context {
                    match next {
                        t if t == vocab.open && prev == vocab.eos => START_TO_ANSWER,
                        t if t == vocab.open => REASONING_TO_ANSWER,
                        t if vocab.is_reasoning_word(t) || t == vocab.period => 0.0,
                        t if vocab.is_label(t) => REASONING_TO_LABEL,
                        _ => OFF_FORMAT,
                    }
                } else if prev == vocab.open {
                    if vocab.is_label(next) {
                        ANSWER_TO_LABEL
                    } else {
                        OFF_FORMAT
                    }
                } else if vocab.is_label(prev) {
                    if next == vocab.close {
                        LABEL_TO_CLOSE
                    } else {
                        OFF_FORMAT
                    }
                } else {
                    0.0
                };
            }
        }
        Self::new(vocab.clone(), params, FEATURES.len(), temperature)
    }

    pub fn vocab(&self) -> &ToyVocab {
        &self.vocab
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn scaled_row(&self, prev: u32, context: usize) -> Vec<f64> {
        let theta = &self.params[prev as usize * self.n..(prev as usize + 1) * self.n];
        if prev != self.vocab.open {
            return theta.iter().map(|a| a / self.temperature).collect();
        }
        let off = self.n * self.n + context * self.n;
        let psi = &self.params[off..off + self.n];
        theta.iter().zip(psi).map(|(a, b)| (a + b) / self.temperature).collect()
    }

    /// Next-token distribution after `prev` in `context`.
    pub fn probs(&self, prev: u32, context: usize) -> Vec<f64> {
        let scaled = self.scaled_row(prev, context);
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    fn log_prob(&self, prev: u32, next: u32, context: usize) -> f64 {
        let scaled = self.scaled_row(prev, context);
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scaled.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        scaled[next as usize] - lse
    }

    /// Samples until `</answer>` or `<eos>` is emitted, or `max_len` tokens.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, context: usize, max_len: usize) -> Vec<u32> {
        let stop = [self.vocab.close, self.vocab.eos];
        let mut out = Vec::new();
        let mut prev = self.vocab.eos;
        while out.len() < max_len {
            let probs = self.probs(prev, context);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut next = (self.n - 1) as u32;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    next = i as u32;
                    break;
                }
            }
            out.push(next);
            if stop.contains(&next) {
                break;
            }
            prev = next;
        }
        out
    }

    /// The policy restricted to one context, as seen by the objective.
    pub fn conditioned(&self, context: usize) -> Conditioned<'_> {
        assert!(context < self.contexts, "context {context} out of range");
        Conditioned { policy: self, context }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Conditioned<'a> {
    policy: &'a ToyPolicy,
    context: usize,
}

impl SequencePolicy for Conditioned<'_> {
    fn num_params(&self) -> usize {
        self.policy.params.len()
    }

    fn log_probs(&self, tokens: &[u32]) -> Vec<f64> {
        let mut prev = self.policy.vocab.eos;
        tokens
            .iter()
            .map(|t| {
                let lp = self.policy.log_prob(prev, *t, self.context);
                prev = *t;
                lp
            })
            .collect()
    }

    fn accumulate_grad(&self, tokens: &[u32], weights: &[f64], grad: &mut [f64]) {
        let p = self.policy;
        let psi = p.n * p.n + self.context * p.n;
        let mut prev = p.vocab.eos;
        for (t, w) in tokens.iter().zip(weights) {
            if *w != 0.0 {
                let theta = prev as usize * p.n;
                for (j, q) in p.probs(prev, self.context).iter().enumerate() {
                    let indicator = if j as u32 == *t { 1.0 } else { 0.0 };
                    let d = w * (indicator - q) / p.temperature;
                    grad[theta + j] += d;
                    if prev == p.vocab.open {
                        grad[psi + j] += d;
                    }
                }
            }
            prev = *t;
        }
    }
}

/// Which tokens carry the KL-to-reference term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KlMask {
    /// Answer span only.
    #[default]
    Answer,
    /// Every token (plain GRPO).
    All,
    /// No token.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub max_len: usize,
    /// Rollouts used by [`evaluate`].
    pub eval_rollouts: usize,
    /// Length-score knots `tau_min, tau_lo, tau_hi, tau_max` in words.
    pub think_lengths: [u32; 4],
    pub kl_mask: KlMask,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            learning_rate: 2.0,
            seed: 7,
            max_len: 24,
            eval_rollouts: 256,
            think_lengths: [2, 4, 8, 16],
            kl_mask: KlMask::Answer,
        }
    }
}

impl ToyConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.max_len < 4 {
            out.push(format!("toy.max_len: must be at least 4, got {}", self.max_len));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            out.push(format!("toy.learning_rate: must be finite and non-negative, got {}", self.learning_rate));
        }
        let [a, b, c, d] = self.think_lengths;
        if !(a < b && b <= c && c < d) {
            out.push(format!("toy.think_lengths: need strictly ordered knots, got {:?}", self.think_lengths));
        }
        out
    }
}

/// Everything one toy run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTrainConfig {
    pub toy: ToyConfig,
    pub grpo: GrpoConfig,
    pub reward: RewardConfig,
    pub think: ThinkConfig,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        Self::new(ToyConfig::default(), GrpoConfig::default(), RewardConfig::default(), ThinkConfig::default())
    }
}

impl ToyTrainConfig {
    /// Uses `think` with its length knots replaced by `toy.think_lengths`.
    pub fn new(toy: ToyConfig, grpo: GrpoConfig, reward: RewardConfig, think: ThinkConfig) -> Self {
        let [tau_min, tau_lo, tau_hi, tau_max] = toy.think_lengths;
        let think = ThinkConfig {
            tau_min,
            tau_lo,
            tau_hi,
            tau_max,
            ..think
        };
        Self { toy, grpo, reward, think }
    }

    pub fn with_think_weight(mut self, lambda: f64) -> Self {
        self.reward.think_weight = lambda;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.toy.seed = seed;
        self
    }

    fn validate(&self) -> Result<(), ToyError> {
        let mut v = self.toy.violations();
        v.extend(self.grpo.violations());
        v.extend(self.reward.violations());
        v.extend(self.think.violations());
        if v.is_empty() {
            Ok(())
        } else {
            Err(ToyError::Config(v.join("; ")))
        }
    }
}

/// A sampled group plus the per-response texts.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyGroup {
    pub group: RolloutGroup,
    pub texts: Vec<String>,
    pub truncated: Vec<bool>,
}

/// Samples `g` responses. `logp_old` equals `logp_current` at sampling
/// time; `logp_ref` comes from `reference`. Rewards are left at 0.
pub fn rollout(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    task: &ToyTask,
    g: usize,
    max_len: usize,
    include_tags: bool,
    seed: u64,
) -> ToyGroup {
    let vocab = policy.vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (current, frozen) = (policy.conditioned(task.context), reference.conditioned(task.context));
    let mut responses = Vec::with_capacity(g);
    let mut texts = Vec::with_capacity(g);
    let mut truncated = Vec::with_capacity(g);
    for _ in 0..g {
        let tokens = policy.sample(&mut rng, task.context, max_len);
        let logp = current.log_probs(&tokens);
        let last = *tokens.last().expect("max_len >= 1");
        truncated.push(tokens.len() == max_len && last != vocab.close && last != vocab.eos);
        texts.push(vocab.render(&tokens));
        responses.push(Rollout {
            answer_mask: answer_mask(&tokens, vocab.open, vocab.close, include_tags),
            logp_ref: frozen.log_probs(&tokens),
            logp_old: logp.clone(),
            logp_current: logp,
            tokens,
            reward: 0.0,
        });
    }
    ToyGroup {
        group: RolloutGroup { responses },
        texts,
        truncated,
    }
}

/// Tokens before the first `<answer>`; 0 when there is none.
pub fn pre_answer_len(tokens: &[u32], vocab: &ToyVocab) -> usize {
    tokens.iter().position(|t| *t == vocab.open).unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_think_len: f64,
    pub activation_rate: f64,
    pub mean_answer_reward: f64,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("iteration,mean_reward,mean_think_len,activation_rate,mean_answer_reward\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iteration, r.mean_reward, r.mean_think_len, r.activation_rate, r.mean_answer_reward
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<HistoryRow>,
    pub policy: ToyPolicy,
    pub reference: ToyPolicy,
}

fn task_sample(task: &ToyTask, id: usize) -> Sample {
    Sample {
        sample_id: format!("toy-{id}"),
        task: Task::SC,
        instruction: task.features.join(" "),
        reference: Reference::Text(task.label.clone()),
        image_id: String::new(),
    }
}

struct Scored {
    rewards: Vec<f64>,
    answer_rewards: Vec<f64>,
}

fn score(scorer: &Scorer<'_>, sample: &Sample, texts: &[String]) -> Result<Scored, ToyError> {
    let mut rewards = Vec::with_capacity(texts.len());
    let mut answer_rewards = Vec::with_capacity(texts.len());
    for t in texts {
        let b = scorer.total_reward(sample, t)?;
        rewards.push(b.r_total);
        answer_rewards.push(b.r_a);
    }
    Ok(Scored { rewards, answer_rewards })
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn toy_provider() -> EmbeddingProvider {
    EmbeddingProvider::feature_hash(crate::embed::DEFAULT_DIM).expect("positive dim")
}

/// Runs the A²GRPO loop: rollout, reward, advantages, gradient ascent.
pub fn train(cfg: &ToyTrainConfig) -> Result<TrainOutcome, ToyError> {
    cfg.validate()?;
    let vocab = ToyVocab::default();
    let provider = toy_provider();
    let scorer = Scorer::new(&provider, &cfg.reward, &cfg.think);
    let reference = ToyPolicy::answer_first(&vocab, cfg.grpo.temperature);
    let mut policy = reference.clone();
    let mut history = Vec::with_capacity(cfg.toy.iterations);

    for it in 0..cfg.toy.iterations {
        let task = sample_task(mix(cfg.toy.seed, 2 * it as u64));
        let sample = task_sample(&task, it);
        let mut tg = rollout(
            &policy,
            &reference,
            &task,
            cfg.grpo.group_size,
            cfg.toy.max_len,
            cfg.grpo.mask_includes_tags,
            mix(cfg.toy.seed, 2 * it as u64 + 1),
        );
        let scored = score(&scorer, &sample, &tg.texts)?;
        for (r, reward) in tg.group.responses.iter_mut().zip(&scored.rewards) {
            r.reward = *reward;
            match cfg.toy.kl_mask {
                KlMask::Answer => {}
                KlMask::All => r.answer_mask.iter_mut().for_each(|m| *m = 1),
                KlMask::None => r.answer_mask.iter_mut().for_each(|m| *m = 0),
            }
        }
        let adv = advantages(&scored.rewards, &cfg.grpo);
        for _ in 0..cfg.grpo.update_epochs {
            let grad = objective_gradient(&tg.group, &policy.conditioned(task.context), &adv, &cfg.grpo)?;
            for (p, g) in policy.params_mut().iter_mut().zip(&grad) {
                *p += cfg.toy.learning_rate * g;
            }
            if let Some(index) = policy.params().iter().position(|v| !v.is_finite()) {
                return Err(ToyError::Diverged { iteration: it, index });
            }
        }
        history.push(HistoryRow {
            iteration: it,
            mean_reward: mean(scored.rewards.iter().copied()),
            mean_think_len: mean(tg.group.responses.iter().map(|r| pre_answer_len(&r.tokens, &vocab) as f64)),
            activation_rate: mean(tg.texts.iter().map(|t| if is_triggered(t) { 1.0 } else { 0.0 })),
            mean_answer_reward: mean(scored.answer_rewards.iter().copied()),
        });
    }
    Ok(TrainOutcome {
        history,
        policy,
        reference,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub rollouts: usize,
    pub mean_think_len: f64,
    pub mean_answer_reward: f64,
    pub mean_reward: f64,
    pub activation_rate: f64,
    pub format_rate: f64,
}

/// Scores `cfg.toy.eval_rollouts` fresh samples of `policy`, one task each.
pub fn evaluate(policy: &ToyPolicy, cfg: &ToyTrainConfig, seed: u64) -> Result<EvalSummary, ToyError> {
    let vocab = ToyVocab::default();
    let provider = toy_provider();
    let scorer = Scorer::new(&provider, &cfg.reward, &cfg.think);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0xe7a1));
    let (mut think, mut ra, mut r, mut act, mut fmt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let n = cfg.toy.eval_rollouts;
    for i in 0..n {
        let task = sample_task(mix(seed, 0x10_0000 + i as u64));
        let tokens = policy.sample(&mut rng, task.context, cfg.toy.max_len);
        let text = vocab.render(&tokens);
        let b = scorer.total_reward(&task_sample(&task, i), &text)?;
        think += pre_answer_len(&tokens, &vocab) as f64;
        ra += b.r_a;
        r += b.r_total;
        act += if is_triggered(&text) { 1.0 } else { 0.0 };
        fmt += if b.format_ok { 1.0 } else { 0.0 };
    }
    let d = n.max(1) as f64;
    Ok(EvalSummary {
        rollouts: n,
        mean_think_len: think / d,
        mean_answer_reward: ra / d,
        mean_reward: r / d,
        activation_rate: act / d,
        format_rate: fmt / d,
    })
}

/// Largest total-variation distance between `policy` and `reference` over
/// the rows that generate answer tokens (after `<answer>` and after each
/// label), in every context.
pub fn answer_tv_distance(policy: &ToyPolicy, reference: &ToyPolicy) -> f64 {
    let vocab = policy.vocab();
    let rows: Vec<u32> = std::iter::once(vocab.open).chain(vocab.labels.iter().copied()).collect();
    let mut worst = 0.0f64;
    for c in 0..policy.contexts() {
        for row in &rows {
            let (p, q) = (policy.probs(*row, c), reference.probs(*row, c));
            worst = worst.max(0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>());
        }
    }
    worst
}
