//! Answer-anchored GRPO objective.
//!
//! ```text
//! J = 1/G sum_i 1/|o_i| sum_t [ min(phi A_i, clip(phi, 1-eps, 1+eps) A_i)
//!                               - beta m_it (phi_ref - ln phi_ref - 1) ]
//! phi     = pi_theta / pi_old   = exp(logp_current - logp_old)
//! phi_ref = pi_ref / pi_theta   = exp(logp_ref - logp_current)
//! ```
//!
//! The KL estimator only acts where the answer mask `m_it` is 1, so
//! reasoning tokens are free to drift from the reference policy.
//!
//! Gradients are taken with respect to `logp_current` first
//! ([`logp_gradient`]) and pushed through a [`SequencePolicy`] for parameter
//! gradients ([`objective_gradient`]).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrpoError {
    #[error("response {index}: {what} has length {got}, expected {expected}")]
    Length {
        index: usize,
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("response {index}: mask value {value} at token {token} is not 0 or 1")]
    Mask { index: usize, token: usize, value: u8 },
    #[error("response {index}: non-finite {what} at token {token}")]
    NonFinite {
        index: usize,
        what: &'static str,
        token: usize,
    },
    #[error("response {index} is empty")]
    EmptyResponse { index: usize },
    #[error("group is empty")]
    EmptyGroup,
    #[error("got {got} advantages for {expected} responses")]
    AdvantageCount { got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    /// Responses per prompt, `G`.
    pub group_size: usize,
    /// Clip range `epsilon`.
    pub clip_eps: f64,
    /// KL weight `beta`.
    pub kl_beta: f64,
    /// Added to the reward standard deviation before dividing.
    pub adv_eps: f64,
    /// Divide centred rewards by their standard deviation.
    pub normalize_std: bool,
    /// Sampling temperature.
    pub temperature: f64,
    /// The answer mask covers the `<answer>` and `</answer>` tokens too.
    pub mask_includes_tags: bool,
    /// Gradient steps per sampled group. 1 keeps `logp_old == logp_current`
    /// at the start of every step.
    pub update_epochs: usize,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            clip_eps: 0.2,
            kl_beta: 0.04,
            adv_eps: 1e-6,
            normalize_std: true,
            temperature: 0.9,
            mask_includes_tags: true,
            update_epochs: 1,
        }
    }
}

impl GrpoConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.group_size < 1 {
            out.push("grpo.group_size: must be at least 1".into());
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            out.push(format!("grpo.clip_eps: must be in (0, 1), got {}", self.clip_eps));
        }
        if !(self.kl_beta >= 0.0) {
            out.push(format!("grpo.kl_beta: must be non-negative, got {}", self.kl_beta));
        }
        if !(self.adv_eps > 0.0) {
            out.push(format!("grpo.adv_eps: must be positive, got {}", self.adv_eps));
        }
        if !(self.temperature > 0.0) {
            out.push(format!("grpo.temperature: must be positive, got {}", self.temperature));
        }
        if self.update_epochs < 1 {
            out.push("grpo.update_epochs: must be at least 1".into());
        }
        out
    }
}

/// One sampled response with per-token log-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub tokens: Vec<u32>,
    pub logp_current: Vec<f64>,
    pub logp_old: Vec<f64>,
    pub logp_ref: Vec<f64>,
    pub answer_mask: Vec<u8>,
    pub reward: f64,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// The `G` responses sampled for one prompt. Serialized as one JSON object
/// per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub responses: Vec<Rollout>,
}

impl RolloutGroup {
    pub fn validate(&self) -> Result<(), GrpoError> {
        if self.responses.is_empty() {
            return Err(GrpoError::EmptyGroup);
        }
        for (index, r) in self.responses.iter().enumerate() {
            let expected = r.tokens.len();
            if expected == 0 {
                return Err(GrpoError::EmptyResponse { index });
            }
            for (what, got) in [
                ("logp_current", r.logp_current.len()),
                ("logp_old", r.logp_old.len()),
                ("logp_ref", r.logp_ref.len()),
                ("answer_mask", r.answer_mask.len()),
            ] {
                if got != expected {
                    return Err(GrpoError::Length { index, what, got, expected });
                }
            }
            if let Some((token, value)) = r.answer_mask.iter().enumerate().find(|(_, m)| **m > 1) {
                return Err(GrpoError::Mask { index, token, value: *value });
            }
            for (what, xs) in [("logp_current", &r.logp_current), ("logp_old", &r.logp_old), ("logp_ref", &r.logp_ref)] {
                if let Some(token) = xs.iter().position(|v| !v.is_finite()) {
                    return Err(GrpoError::NonFinite { index, what, token });
                }
            }
            if !r.reward.is_finite() {
                return Err(GrpoError::NonFinite { index, what: "reward", token: 0 });
            }
        }
        Ok(())
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.responses.iter().map(|r| r.reward).collect()
    }
}

/// Group-relative advantages `(r_i - mean) / (std + adv_eps)` with the
/// population standard deviation. A group of identical rewards gets exact
/// zeros rather than rounding residue from the mean.
pub fn advantages(rewards: &[f64], cfg: &GrpoConfig) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    if rewards.iter().all(|r| *r == rewards[0]) {
        return vec![0.0; rewards.len()];
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    if !cfg.normalize_std {
        return rewards.iter().map(|r| r - mean).collect();
    }
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + cfg.adv_eps;
    rewards.iter().map(|r| (r - mean) / denom).collect()
}

/// Per-token ratios `(phi, phi_ref)` of one response.
pub fn per_token_ratios(r: &Rollout) -> (Vec<f64>, Vec<f64>) {
    let phi = r.logp_current.iter().zip(&r.logp_old).map(|(c, o)| (c - o).exp()).collect();
    let phi_ref = r.logp_ref.iter().zip(&r.logp_current).map(|(f, c)| (f - c).exp()).collect();
    (phi, phi_ref)
}

/// `phi_ref - ln phi_ref - 1` written in terms of `x = logp_ref - logp_current`.
pub fn kl_integrand(log_ratio: f64) -> f64 {
    // exp_m1 keeps precision near 0; the clamp only absorbs rounding.
    (log_ratio.exp_m1() - log_ratio).max(0.0)
}

/// Clipped surrogate `min(phi A, clip(phi) A)`.
pub fn clipped_surrogate(phi: f64, advantage: f64, eps: f64) -> f64 {
    (phi * advantage).min(phi.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// True where the clipped branch is selected and saturated, so the token
/// passes no gradient through `phi`.
pub fn clip_active(phi: f64, advantage: f64, eps: f64) -> bool {
    (advantage > 0.0 && phi > 1.0 + eps) || (advantage < 0.0 && phi < 1.0 - eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTerms {
    pub surrogate: Vec<f64>,
    pub kl: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub objective: f64,
    /// Per response: surrogate and masked KL integrand per token (the KL
    /// entry is 0 where the mask is 0).
    pub per_token: Vec<TokenTerms>,
}

fn check_advantages(group: &RolloutGroup, adv: &[f64]) -> Result<(), GrpoError> {
    group.validate()?;
    if adv.len() != group.responses.len() {
        return Err(GrpoError::AdvantageCount {
            got: adv.len(),
            expected: group.responses.len(),
        });
    }
    Ok(())
}

/// Evaluates `J`. Responses and tokens are folded in index order.
pub fn objective(group: &RolloutGroup, adv: &[f64], cfg: &GrpoConfig) -> Result<ObjectiveValue, GrpoError> {
    check_advantages(group, adv)?;
    let g = group.responses.len() as f64;
    let mut total = 0.0;
    let mut per_token = Vec::with_capacity(group.responses.len());
    for (r, &a) in group.responses.iter().zip(adv) {
        let mut surrogate = Vec::with_capacity(r.len());
        let mut kl = Vec::with_capacity(r.len());
        let mut sum = 0.0;
        for t in 0..r.len() {
            let phi = (r.logp_current[t] - r.logp_old[t]).exp();
            let s = clipped_surrogate(phi, a, cfg.clip_eps);
            let k = if r.answer_mask[t] == 1 {
                kl_integrand(r.logp_ref[t] - r.logp_current[t])
            } else {
                0.0
            };
            sum += s - cfg.kl_beta * k;
            surrogate.push(s);
            kl.push(k);
        }
        total += sum / r.len() as f64;
        per_token.push(TokenTerms { surrogate, kl });
    }
    Ok(ObjectiveValue {
        objective: total / g,
        per_token,
    })
}

/// `dJ / d logp_current[i][t]` for every token.
pub fn logp_gradient(group: &RolloutGroup, adv: &[f64], cfg: &GrpoConfig) -> Result<Vec<Vec<f64>>, GrpoError> {
    check_advantages(group, adv)?;
    let g = group.responses.len() as f64;
    Ok(group
        .responses
        .iter()
        .zip(adv)
        .map(|(r, &a)| {
            let scale = 1.0 / (g * r.len() as f64);
            (0..r.len())
                .map(|t| {
                    let phi = (r.logp_current[t] - r.logp_old[t]).exp();
                    let surrogate = if clip_active(phi, a, cfg.clip_eps) { 0.0 } else { a * phi };
                    let kl = if r.answer_mask[t] == 1 {
                        // d/dlc of -beta (e^{lr-lc} - (lr-lc) - 1)
                        cfg.kl_beta * ((r.logp_ref[t] - r.logp_current[t]).exp() - 1.0)
                    } else {
                        0.0
                    };
                    scale * (surrogate + kl)
                })
                .collect()
        })
        .collect())
}

/// A policy whose per-token log-probabilities have closed-form parameter
/// gradients.
pub trait SequencePolicy {
    fn num_params(&self) -> usize;

    /// Log-probability of each token of `tokens` given its prefix.
    fn log_probs(&self, tokens: &[u32]) -> Vec<f64>;

    /// `grad += sum_t weights[t] * d log_probs(tokens)[t] / d params`.
    fn accumulate_grad(&self, tokens: &[u32], weights: &[f64], grad: &mut [f64]);
}

/// Replaces every `logp_current` with the policy's current values.
pub fn refresh_current<P: SequencePolicy + ?Sized>(group: &mut RolloutGroup, policy: &P) {
    for r in &mut group.responses {
        r.logp_current = policy.log_probs(&r.tokens);
    }
}

/// Exact gradient of `J` with respect to the policy parameters. The group's
/// `logp_current` is recomputed from `policy` first.
pub fn objective_gradient<P: SequencePolicy + ?Sized>(
    group: &RolloutGroup,
    policy: &P,
    adv: &[f64],
    cfg: &GrpoConfig,
) -> Result<Vec<f64>, GrpoError> {
    let mut fresh = group.clone();
    refresh_current(&mut fresh, policy);
    let per_token = logp_gradient(&fresh, adv, cfg)?;
    let mut grad = vec![0.0; policy.num_params()];
    for (r, w) in fresh.responses.iter().zip(&per_token) {
        policy.accumulate_grad(&r.tokens, w, &mut grad);
    }
    Ok(grad)
}

/// Answer mask from tag positions: 1 from the first `open` token through the
/// matching `close` (tags included or not per `include_tags`). An open tag
/// with no close masks through the end. No open tag gives all zeros.
pub fn answer_mask(tokens: &[u32], open: u32, close: u32, include_tags: bool) -> Vec<u8> {
    let mut mask = vec![0u8; tokens.len()];
    let Some(start) = tokens.iter().position(|t| *t == open) else {
        return mask;
    };
    let end = tokens[start + 1..]
        .iter()
        .position(|t| *t == close)
        .map(|p| start + 1 + p);
    let (lo, hi) = match (end, include_tags) {
        (Some(e), true) => (start, e + 1),
        (Some(e), false) => (start + 1, e),
        (None, true) => (start, tokens.len()),
        (None, false) => (start + 1, tokens.len()),
    };
    mask[lo..hi].iter_mut().for_each(|m| *m = 1);
    mask
}
