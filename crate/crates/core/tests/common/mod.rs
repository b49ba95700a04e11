//! Independent oracles and fixture generators shared by the integration
//! tests. Nothing here calls into the code under test except for plain data
//! types, so agreement between the two is meaningful.

#![allow(dead_code)]

use std::collections::HashMap;

use geozero_core::grpo::{GrpoConfig, RolloutGroup};
use geozero_core::metrics::BBox;
use geozero_core::mining::{ManifestRecord, PredictionRecord};
use geozero_core::sample::{Reference, Task};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Map;

// ---------------------------------------------------------------- text

/// ASCII-only normalizer: drop punctuation, lowercase, collapse spaces.
/// Fixtures stay within ASCII, so the Unicode tables are not needed.
pub fn norm(raw: &str) -> String {
    const PUNCT: &str = "!\"#%&'()*,-./:;?@[\\]_{}<>";
    let kept: String = raw
        .chars()
        .filter(|c| !PUNCT.contains(*c))
        .map(|c| c.to_ascii_lowercase())
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn toks(raw: &str) -> Vec<String> {
    norm(raw).split_whitespace().map(str::to_owned).collect()
}

fn sentences(raw: &str) -> Vec<String> {
    let chars: Vec<char> = raw.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, c) in chars.iter().enumerate() {
        cur.push(*c);
        let terminal = matches!(c, '.' | '!' | '?');
        let boundary = i + 1 == chars.len() || chars[i + 1].is_whitespace();
        if terminal && boundary {
            out.push(cur.clone());
            cur.clear();
        }
    }
    out.push(cur);
    out.into_iter()
        .map(|s| s.trim().to_owned())
        .filter(|s| s.chars().any(|c| !matches!(c, '.' | '!' | '?') && !c.is_whitespace()))
        .collect()
}

fn fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 14695981039346656037;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(1099511628211);
    }
    h
}

/// Signed feature hashing of unigrams and bigrams, unit length; the empty
/// text maps to `e_0`.
pub fn hash_embed(text: &str, dim: usize) -> Vec<f64> {
    let t = toks(text);
    let mut feats: Vec<String> = t.clone();
    for i in 1..t.len() {
        feats.push(format!("{} {}", t[i - 1], t[i]));
    }
    let mut v = vec![0.0; dim];
    for f in feats {
        let h = fnv(f.as_bytes());
        v[(h % dim as u64) as usize] += if h >> 63 == 1 { -1.0 } else { 1.0 };
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v[0] = 1.0;
    } else {
        for x in &mut v {
            *x /= n;
        }
    }
    v
}

pub struct ThinkOracle {
    pub s_t: f64,
    pub l_s: f64,
    pub p_r: f64,
    pub p_a: f64,
    pub b_d: f64,
}

/// Straight-line thinking score with the default constants and a
/// 384-dimensional feature hash.
pub fn think_oracle(thinking: &str, answer: &str) -> ThinkOracle {
    let (t_min, t_lo, t_hi, t_max) = (20.0, 40.0, 80.0, 160.0);
    let (delta_r, gamma_r, tau_a, w_d) = (0.15, 0.5, 0.3, 0.3);
    let fillers = ["therefore", "however", "in conclusion", "overall", "in summary"];

    let t = toks(thinking);
    let n = t.len() as f64;
    let l_s = if n < t_min {
        0.0
    } else if n < t_lo {
        (n - t_min) / (t_lo - t_min)
    } else if n <= t_hi {
        1.0
    } else if n <= t_max {
        1.0 - (n - t_hi) / (t_max - t_hi)
    } else {
        0.0
    };

    let mut counts: HashMap<&str, u32> = HashMap::new();
    for w in &t {
        *counts.entry(w.as_str()).or_default() += 1;
    }
    let d = if counts.is_empty() {
        0.0
    } else {
        counts.values().filter(|c| **c > 1).count() as f64 / counts.len() as f64
    };
    let joined = norm(thinking);
    let filler = fillers.iter().any(|f| joined.contains(f));
    let p_r = if d > delta_r || filler { gamma_r } else { 1.0 };

    let a: Vec<String> = {
        let mut a = toks(answer);
        a.sort();
        a.dedup();
        a
    };
    let p_a = if a.is_empty() {
        1.0
    } else {
        let o = a.iter().filter(|w| t.contains(w)).count() as f64 / a.len() as f64;
        if o <= tau_a {
            1.0
        } else {
            (1.0 - (o - tau_a) / (1.0 - tau_a)).max(0.0)
        }
    };

    let sents = sentences(thinking);
    let b_d = if sents.len() < 2 {
        0.0
    } else {
        let e: Vec<Vec<f64>> = sents.iter().map(|s| hash_embed(s, 384)).collect();
        let mut c = 0.0;
        for k in 1..e.len() {
            let dot: f64 = e[k - 1].iter().zip(&e[k]).map(|(x, y)| x * y).sum();
            c += dot;
        }
        (1.0 - c / (e.len() - 1) as f64).clamp(0.0, 1.0)
    };

    let q = l_s * p_r * p_a;
    ThinkOracle {
        s_t: (1.0 - w_d) * q + w_d * q * b_d,
        l_s,
        p_r,
        p_a,
        b_d,
    }
}

const TEXT_WORDS: [&str; 24] = [
    "runway", "aircraft", "parked", "near", "the", "terminal", "river", "bends", "past", "farmland", "dense", "forest",
    "roads", "cross", "urban", "blocks", "harbor", "ships", "docked", "along", "pier", "green", "field", "tower",
];
const FILLERS: [&str; 5] = ["therefore", "however", "in conclusion", "overall", "in summary"];

/// Random thinking text of 0..=300 words with fillers, repeats, mixed case
/// and sentence punctuation.
pub fn random_thinking(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(0..=300);
    let vocab_size = rng.gen_range(1..=TEXT_WORDS.len());
    let mut out = String::new();
    for i in 0..n {
        if i > 0 {
            out.push(' ');
        }
        let word = if rng.gen_bool(0.02) {
            FILLERS.choose(rng).unwrap().to_string()
        } else if rng.gen_bool(0.3) {
            // fresh token so long texts are not all repeats
            format!("w{}", rng.gen_range(0..400))
        } else {
            TEXT_WORDS[rng.gen_range(0..vocab_size)].to_string()
        };
        out.push_str(&if rng.gen_bool(0.1) { word.to_uppercase() } else { word });
        match rng.gen_range(0..20) {
            0 | 1 => out.push('.'),
            2 => out.push('!'),
            3 => out.push('?'),
            4 => out.push(','),
            5 => out.push_str("..."),
            _ => {}
        }
    }
    out
}

pub fn random_answer(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(0..4);
    (0..n).map(|_| *TEXT_WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------- grpo

/// Unmasked GRPO objective evaluated directly from the definition.
pub fn grpo_unmasked(group: &RolloutGroup, adv: &[f64], cfg: &GrpoConfig) -> f64 {
    let mut j = 0.0;
    for (r, a) in group.responses.iter().zip(adv) {
        let mut s = 0.0;
        for t in 0..r.tokens.len() {
            let phi = (r.logp_current[t] - r.logp_old[t]).exp();
            let clipped = phi.max(1.0 - cfg.clip_eps).min(1.0 + cfg.clip_eps);
            let phi_ref = (r.logp_ref[t] - r.logp_current[t]).exp();
            s += f64::min(phi * a, clipped * a) - cfg.kl_beta * (phi_ref - phi_ref.ln() - 1.0);
        }
        j += s / r.tokens.len() as f64;
    }
    j / group.responses.len() as f64
}

// ---------------------------------------------------------------- mining

fn box_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let w = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let h = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = w * h;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn parse_box(s: &str) -> Option<[f64; 4]> {
    let v: Vec<f64> = s
        .trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(|x| x.trim().parse().ok())
        .collect::<Option<_>>()?;
    (v.len() == 4 && v[0] <= v[2] && v[1] <= v[3]).then(|| [v[0], v[1], v[2], v[3]])
}

/// Task-specific correctness from first principles.
pub fn oracle_judge(task: Task, pred: &str, reference: &str) -> bool {
    match task {
        Task::SC => norm(pred) == norm(reference),
        Task::VQA => {
            let (p, r) = (norm(pred), norm(reference));
            if p.is_empty() || r.is_empty() {
                p == r
            } else {
                p == r || p.contains(&r) || r.contains(&p)
            }
        }
        Task::VG => match (parse_box(pred), parse_box(reference)) {
            (Some(p), Some(r)) => box_iou(p, r) >= 0.5,
            _ => false,
        },
        Task::IC => {
            let mut p = toks(pred);
            let mut r = toks(reference);
            p.sort();
            p.dedup();
            r.sort();
            r.dedup();
            let f1 = if p.is_empty() && r.is_empty() {
                1.0
            } else if p.is_empty() || r.is_empty() {
                0.0
            } else {
                let common = p.iter().filter(|w| r.contains(w)).count() as f64;
                if common == 0.0 {
                    0.0
                } else {
                    let (pr, rc) = (common / p.len() as f64, common / r.len() as f64);
                    2.0 * pr * rc / (pr + rc)
                }
            };
            f1 >= 0.6
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixtureRecord {
    pub id: String,
    pub image: String,
    pub task: Task,
    pub instruction: String,
    pub reference: String,
    pub prediction: String,
    pub trials: Vec<String>,
}

impl FixtureRecord {
    pub fn to_prediction(&self) -> PredictionRecord {
        let reference = if self.task == Task::VG {
            Reference::Box(BBox::parse(&self.reference).expect("fixture boxes are valid"))
        } else {
            Reference::Text(self.reference.clone())
        };
        PredictionRecord {
            sample_id: self.id.clone(),
            image_id: self.image.clone(),
            task: self.task,
            instruction: self.instruction.clone(),
            reference,
            prediction: Some(self.prediction.clone()),
            trials: Some(self.trials.clone()),
            extra: Map::new(),
        }
    }

    pub fn to_manifest(&self) -> ManifestRecord {
        let mut rest = Map::new();
        rest.insert("sample_id".into(), self.id.clone().into());
        ManifestRecord {
            image_id: self.image.clone(),
            rest,
        }
    }
}

fn answer_pair(task: Task, rng: &mut ChaCha8Rng) -> (String, Vec<String>) {
    match task {
        Task::SC => {
            let labels = ["beach", "forest", "Dense Residential", "airport", "river"];
            let r = labels.choose(rng).unwrap().to_string();
            let alts = labels.iter().map(|s| s.to_string()).chain([r.to_uppercase() + "!"]).collect();
            (r, alts)
        }
        Task::VQA => {
            let answers = ["yes", "no", "3", "two ships", "left"];
            let r = answers.choose(rng).unwrap().to_string();
            let alts = answers
                .iter()
                .map(|s| s.to_string())
                .chain([format!("there are {r}"), String::new()])
                .collect();
            (r, alts)
        }
        Task::VG => {
            let x = rng.gen_range(0..50) as f64;
            let y = rng.gen_range(0..50) as f64;
            let r = format!("{x},{y},{},{}", x + 40.0, y + 30.0);
            let alts = (0..6)
                .map(|k| {
                    let dx = k as f64 * 8.0;
                    format!("{},{y},{},{}", x + dx, x + dx + 40.0, y + 30.0)
                })
                .chain(["garbage".to_owned()])
                .collect();
            (r, alts)
        }
        Task::IC => {
            let caps = [
                "many planes parked at the airport",
                "a river passes through green farmland",
                "several ships docked in the harbor",
                "dense houses along straight roads",
            ];
            let r = caps.choose(rng).unwrap().to_string();
            let alts = caps
                .iter()
                .map(|s| s.to_string())
                .chain(["planes parked at an airport".to_owned(), "ships in harbor".to_owned()])
                .collect();
            (r, alts)
        }
    }
}

/// `n` synthetic prediction records: shared images, duplicate
/// instructions, and a spread of partially correct trials.
pub fn mining_fixture(n: usize, seed: u64) -> Vec<FixtureRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = (n / 3).max(2);
    let questions = ["what is shown", "Where is the plane?", "describe the scene", "count the ships"];
    (0..n)
        .map(|i| {
            let task = Task::ALL[rng.gen_range(0..4)];
            let (reference, alts) = answer_pair(task, &mut rng);
            let pick = |rng: &mut ChaCha8Rng| {
                if rng.gen_bool(0.35) {
                    reference.clone()
                } else {
                    alts.choose(rng).unwrap().clone()
                }
            };
            let prediction = pick(&mut rng);
            let trials = (0..3).map(|_| pick(&mut rng)).collect();
            FixtureRecord {
                id: format!("s{:04}", rng.gen_range(0..10_000) * 1000 + i),
                image: format!("img{}", rng.gen_range(0..images)),
                task,
                instruction: questions.choose(&mut rng).unwrap().to_string(),
                reference,
                prediction,
                trials,
            }
        })
        .collect()
}

/// Brute force: judge all, keep the missed ones, score trials, sort per
/// task, deduplicate across tasks in task order, take `quota`, then drop
/// every raw record sharing an image with the pool.
pub fn mining_oracle(records: &[FixtureRecord], quota: usize) -> (Vec<String>, Vec<String>) {
    let mut candidates: Vec<(&FixtureRecord, f64)> = Vec::new();
    for r in records {
        if !oracle_judge(r.task, &r.prediction, &r.reference) {
            let hits = r.trials.iter().filter(|t| oracle_judge(r.task, t, &r.reference)).count();
            candidates.push((r, 1.0 - hits as f64 / r.trials.len() as f64));
        }
    }
    let mut seen: Vec<(String, String)> = Vec::new();
    let mut hard: Vec<&FixtureRecord> = Vec::new();
    for task in [Task::SC, Task::VG, Task::VQA, Task::IC] {
        let mut list: Vec<(&FixtureRecord, f64)> = candidates.iter().filter(|(r, _)| r.task == task).cloned().collect();
        list.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.id.cmp(&b.0.id)));
        let mut taken = 0;
        for (r, _) in list {
            if taken == quota {
                break;
            }
            let key = (r.image.clone(), norm(&r.instruction));
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
            hard.push(r);
            taken += 1;
        }
    }
    let instruct = records
        .iter()
        .filter(|r| !hard.iter().any(|h| h.image == r.image))
        .map(|r| r.id.clone())
        .collect();
    (hard.iter().map(|r| r.id.clone()).collect(), instruct)
}
