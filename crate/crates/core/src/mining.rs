//! Hard-sample mining over prediction files.
//!
//! Two filtering stages run on predictions produced elsewhere by a data
//! filtering model:
//!
//! 1. one prediction per sample; every sample judged incorrect becomes a
//!    candidate,
//! 2. three stochastic predictions per candidate; `difficulty = 1 - acc`.
//!
//! [`select_hard`] then ranks each task by difficulty (ties by ascending
//! `sample_id`), deduplicates on `(image_id, normalized instruction)` and
//! takes the same quota from every task. [`HardImages`] removes every raw
//! sample that shares an image with the hard pool.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::metrics::{iou, word_set_f1, BBox};
use crate::sample::{Reference, Task};
use crate::textkit::{normalize, tokenize_words};

pub const DEFAULT_TRIALS: usize = 3;
pub const GROUNDING_IOU_THRESHOLD: f64 = 0.5;
pub const CAPTION_F1_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MiningError {
    #[error("sample {sample_id}: missing `prediction`")]
    MissingPrediction { sample_id: String },
    #[error("sample {sample_id}: expected {expected} trials, got {got}")]
    TrialCount {
        sample_id: String,
        expected: usize,
        got: usize,
    },
    #[error("per-task quota must be at least 1")]
    ZeroQuota,
}

/// A sample joined with the filtering model's output(s). Unknown fields are
/// carried through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub image_id: String,
    pub task: Task,
    #[serde(default)]
    pub instruction: String,
    pub reference: Reference,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<Vec<String>>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningRecord {
    #[serde(flatten)]
    pub record: PredictionRecord,
    pub correct: Vec<bool>,
    pub acc: f64,
    pub difficulty: f64,
}

/// Task-specific correctness of one prediction. Never fails: unparseable
/// boxes count as incorrect.
pub fn judge(task: Task, pred: &str, reference: &Reference) -> bool {
    match task {
        Task::SC => normalize(pred) == normalize(&reference.as_text()),
        Task::VQA => {
            let p = normalize(pred);
            let r = normalize(&reference.as_text());
            if p.is_empty() || r.is_empty() {
                return p == r;
            }
            p == r || p.as_str().contains(r.as_str()) || r.as_str().contains(p.as_str())
        }
        Task::VG => match (BBox::parse(pred), reference.as_box()) {
            (Ok(p), Ok(r)) => iou(&p, &r) >= GROUNDING_IOU_THRESHOLD,
            (Err(e), _) | (_, Err(e)) => {
                log::warn!("grounding judged incorrect: {e}");
                false
            }
        },
        Task::IC => {
            let p = tokenize_words(&normalize(pred));
            let r = tokenize_words(&normalize(&reference.as_text()));
            word_set_f1(&p, &r) >= CAPTION_F1_THRESHOLD
        }
    }
}

/// Stage 1 verdict for one record: `Ok(true)` keeps it as a candidate.
pub fn is_candidate(rec: &PredictionRecord) -> Result<bool, MiningError> {
    let pred = rec.prediction.as_deref().ok_or_else(|| MiningError::MissingPrediction {
        sample_id: rec.sample_id.clone(),
    })?;
    Ok(!judge(rec.task, pred, &rec.reference))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FilterStats {
    pub seen: usize,
    pub kept: usize,
    pub rejected: usize,
}

/// Stage 1 over a stream, preserving order. Records that cannot be judged
/// are skipped and counted in `stats.rejected`.
pub fn stage1_filter<'a, I>(records: I, stats: &'a mut FilterStats) -> impl Iterator<Item = PredictionRecord> + 'a
where
    I: IntoIterator<Item = PredictionRecord>,
    I::IntoIter: 'a,
{
    records.into_iter().filter(move |rec| {
        stats.seen += 1;
        match is_candidate(rec) {
            Ok(keep) => {
                stats.kept += usize::from(keep);
                keep
            }
            Err(e) => {
                log::warn!("{e}");
                stats.rejected += 1;
                false
            }
        }
    })
}

/// Stage 2 scoring of one candidate.
pub fn score_trials(rec: PredictionRecord, expected_trials: usize) -> Result<MiningRecord, MiningError> {
    let trials = rec.trials.as_deref().unwrap_or(&[]);
    if trials.len() != expected_trials || expected_trials == 0 {
        return Err(MiningError::TrialCount {
            sample_id: rec.sample_id.clone(),
            expected: expected_trials,
            got: trials.len(),
        });
    }
    let correct: Vec<bool> = trials.iter().map(|t| judge(rec.task, t, &rec.reference)).collect();
    let acc = correct.iter().filter(|c| **c).count() as f64 / correct.len() as f64;
    Ok(MiningRecord {
        record: rec,
        correct,
        acc,
        difficulty: 1.0 - acc,
    })
}

fn dedup_key(rec: &PredictionRecord) -> (String, String) {
    (rec.image_id.clone(), normalize(&rec.instruction).into_string())
}

/// Orders by difficulty (descending), then `sample_id` (ascending).
pub fn rank_order(a: &MiningRecord, b: &MiningRecord) -> std::cmp::Ordering {
    b.difficulty
        .total_cmp(&a.difficulty)
        .then_with(|| a.record.sample_id.cmp(&b.record.sample_id))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSelection {
    pub available: usize,
    pub selected: usize,
    pub shortfall: usize,
    pub dedup_dropped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub quota: usize,
    pub per_task: BTreeMap<Task, TaskSelection>,
    pub total_selected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardSelection {
    /// Tasks in [`Task::ALL`] order, each in rank order.
    pub pool: Vec<MiningRecord>,
    pub report: SelectionReport,
}

/// Balanced, deduplicated top-`quota` per task. Duplicates are skipped and
/// the next-ranked record fills the slot. Deduplication spans the whole
/// pool, processed task by task.
pub fn select_hard(records: Vec<MiningRecord>, quota: usize) -> Result<HardSelection, MiningError> {
    if quota == 0 {
        return Err(MiningError::ZeroQuota);
    }
    let mut by_task: BTreeMap<Task, Vec<MiningRecord>> = BTreeMap::new();
    for r in records {
        by_task.entry(r.record.task).or_default().push(r);
    }
    let mut seen = HashSet::new();
    let mut pool = Vec::new();
    let mut report = SelectionReport {
        quota,
        ..Default::default()
    };
    for task in Task::ALL {
        let mut ranked = by_task.remove(&task).unwrap_or_default();
        ranked.sort_by(rank_order);
        let mut stats = TaskSelection {
            available: ranked.len(),
            ..Default::default()
        };
        for r in ranked {
            if stats.selected == quota {
                break;
            }
            if !seen.insert(dedup_key(&r.record)) {
                stats.dedup_dropped += 1;
                continue;
            }
            stats.selected += 1;
            pool.push(r);
        }
        stats.shortfall = quota - stats.selected;
        if stats.shortfall > 0 {
            log::warn!("task {task}: only {} of {quota} hard samples available", stats.selected);
        }
        report.total_selected += stats.selected;
        report.per_task.insert(task, stats);
    }
    Ok(HardSelection { pool, report })
}

/// Image ids used by the hard pool.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HardImages(HashSet<String>);

impl HardImages {
    pub fn from_ids<I: IntoIterator<Item = S>, S: Into<String>>(ids: I) -> Self {
        Self(ids.into_iter().map(Into::into).collect())
    }

    pub fn from_pool(pool: &[MiningRecord]) -> Self {
        Self::from_ids(pool.iter().map(|r| r.record.image_id.clone()))
    }

    pub fn contains(&self, image_id: &str) -> bool {
        self.0.contains(image_id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A raw manifest row; only `image_id` is interpreted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image_id: String,
    #[serde(flatten)]
    pub rest: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitReport {
    pub raw: usize,
    pub kept: usize,
    pub removed: usize,
}

/// Raw minus every record whose image appears in the hard pool.
pub fn split_instruct<I>(raw: I, hard: &HardImages) -> (Vec<ManifestRecord>, SplitReport)
where
    I: IntoIterator<Item = ManifestRecord>,
{
    let mut report = SplitReport::default();
    let kept: Vec<_> = raw
        .into_iter()
        .inspect(|_| report.raw += 1)
        .filter(|r| !hard.contains(&r.image_id))
        .collect();
    report.kept = kept.len();
    report.removed = report.raw - report.kept;
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(id: &str, image: &str, task: Task, reference: &str, pred: &str) -> PredictionRecord {
        PredictionRecord {
            sample_id: id.into(),
            image_id: image.into(),
            task,
            instruction: format!("question about {image}"),
            reference: reference.into(),
            prediction: Some(pred.into()),
            trials: None,
            extra: Map::new(),
        }
    }

    fn scored(id: &str, image: &str, instruction: &str, difficulty: f64) -> MiningRecord {
        let mut r = rec(id, image, Task::SC, "beach", "forest");
        r.instruction = instruction.into();
        MiningRecord {
            record: r,
            correct: vec![],
            acc: 1.0 - difficulty,
            difficulty,
        }
    }

    #[test]
    fn judge_examples() {
        assert!(judge(Task::SC, "Beach ", &"beach".into()));
        assert!(!judge(Task::SC, "beaches", &"beach".into()));
        assert!(judge(Task::VQA, "yes", &"yes, there are two".into()));
        assert!(judge(Task::VQA, "There are two", &"two".into()));
        assert!(!judge(Task::VQA, "no", &"yes".into()));
        assert!(!judge(Task::VQA, "", &"yes".into()));
        assert!(judge(Task::IC, "a beach with waves", &"a beach with waves".into()));
        assert!(!judge(Task::IC, "dense forest", &"a beach with waves".into()));
        assert!(!judge(Task::VG, "garbage", &"0,0,10,10".into()));
    }

    #[test]
    fn grounding_threshold_is_inclusive() {
        // [0,0,10,10] vs [0,0,10,x]: IoU = x/10
        let gold: Reference = "0,0,10,10".into();
        assert!(judge(Task::VG, "0,0,10,5", &gold));
        assert!(!judge(Task::VG, "0,0,10,4.9", &gold));
    }

    #[test]
    fn stage1_examples() {
        let mut stats = FilterStats::default();
        let all_right: Vec<_> = (0..100).map(|i| rec(&format!("s{i}"), "i", Task::SC, "beach", "beach")).collect();
        assert_eq!(stage1_filter(all_right, &mut stats).count(), 0);

        let mut stats = FilterStats::default();
        let all_wrong: Vec<_> = (0..100).map(|i| rec(&format!("s{i:03}"), "i", Task::SC, "beach", "lake")).collect();
        let ids: Vec<_> = stage1_filter(all_wrong.clone(), &mut stats).map(|r| r.sample_id).collect();
        assert_eq!(ids, all_wrong.iter().map(|r| r.sample_id.clone()).collect::<Vec<_>>());
        assert_eq!((stats.seen, stats.kept), (100, 100));

        let mut missing = rec("m", "i", Task::SC, "beach", "x");
        missing.prediction = None;
        let mut stats = FilterStats::default();
        assert_eq!(stage1_filter(vec![missing], &mut stats).count(), 0);
        assert_eq!(stats.rejected, 1);
    }

    #[test]
    fn stage2_examples() {
        let mut r = rec("s", "i", Task::SC, "beach", "x");
        r.trials = Some(vec!["lake".into(), "forest".into(), "beach".into()]);
        let m = score_trials(r.clone(), 3).unwrap();
        assert_eq!(m.correct, [false, false, true]);
        assert_eq!(m.difficulty, 1.0 - 1.0 / 3.0);

        r.trials = Some(vec!["beach".into(); 3]);
        assert_eq!(score_trials(r.clone(), 3).unwrap().difficulty, 0.0);
        r.trials = Some(vec!["lake".into(); 3]);
        assert_eq!(score_trials(r.clone(), 3).unwrap().difficulty, 1.0);
        r.trials = Some(vec!["lake".into(); 2]);
        assert!(matches!(score_trials(r, 3), Err(MiningError::TrialCount { got: 2, .. })));
    }

    #[test]
    fn select_top_by_difficulty_with_id_tiebreak() {
        let diffs = [0.0, 1.0, 2.0 / 3.0, 1.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 0.0, 1.0 / 3.0, 2.0 / 3.0];
        let recs: Vec<_> = diffs
            .iter()
            .enumerate()
            .map(|(i, d)| scored(&format!("r{i}"), &format!("img{i}"), "q", *d))
            .collect();
        let sel = select_hard(recs, 3).unwrap();
        let ids: Vec<_> = sel.pool.iter().map(|r| r.record.sample_id.as_str()).collect();
        assert_eq!(ids, ["r1", "r3", "r6"]);
        let sc = &sel.report.per_task[&Task::SC];
        assert_eq!((sc.available, sc.selected, sc.shortfall), (10, 3, 0));
        assert_eq!(sel.report.per_task[&Task::VG].shortfall, 3);
    }

    #[test]
    fn duplicate_is_dropped_and_next_promoted() {
        let recs = vec![
            scored("a", "img1", "What is it?", 1.0),
            scored("b", "img1", "what is it", 1.0),
            scored("c", "img2", "q", 2.0 / 3.0),
            scored("d", "img3", "q", 1.0 / 3.0),
        ];
        let sel = select_hard(recs, 3).unwrap();
        let ids: Vec<_> = sel.pool.iter().map(|r| r.record.sample_id.as_str()).collect();
        assert_eq!(ids, ["a", "c", "d"]);
        assert_eq!(sel.report.per_task[&Task::SC].dedup_dropped, 1);
    }

    #[test]
    fn quota_larger_than_pool() {
        let recs = vec![scored("a", "i", "q", 1.0)];
        let sel = select_hard(recs, 5).unwrap();
        assert_eq!(sel.pool.len(), 1);
        assert_eq!(sel.report.per_task[&Task::SC].shortfall, 4);
        assert!(select_hard(vec![], 0).is_err());
    }

    #[test]
    fn split_examples() {
        let raw: Vec<ManifestRecord> = (0..10)
            .map(|i| ManifestRecord {
                image_id: format!("img{i}"),
                rest: Map::new(),
            })
            .collect();
        let (kept, rep) = split_instruct(raw.clone(), &HardImages::default());
        assert_eq!(kept, raw);
        assert_eq!(rep.removed, 0);

        let hard = HardImages::from_ids(["img1", "img4", "img7"]);
        let (kept, rep) = split_instruct(raw.clone(), &hard);
        assert_eq!(kept.len(), 7);
        assert!(kept.iter().all(|r| !hard.contains(&r.image_id)));
        assert_eq!((rep.raw, rep.kept, rep.removed), (10, 7, 3));

        let everything = HardImages::from_ids(raw.iter().map(|r| r.image_id.clone()));
        assert!(split_instruct(raw, &everything).0.is_empty());
    }

    #[test]
    fn records_round_trip_with_extra_fields() {
        let line = r#"{"sample_id":"s1","image_id":"i","task":"VQA","reference":"yes","trials":["a","b","c"],"source":"rsvqa"}"#;
        let r: PredictionRecord = serde_json::from_str(line).unwrap();
        assert_eq!(r.extra["source"], "rsvqa");
        let back: Value = serde_json::to_value(&r).unwrap();
        assert_eq!(back["source"], "rsvqa");
        assert_eq!(back["trials"][2], "c");
    }
}
