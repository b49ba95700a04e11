//! Reasoning analytics over evaluation outputs: thinking activation rate and
//! accuracy binned by a reasoning metric.
//!
//! Bins are half-open `[lo, hi)` except the last, which is closed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed::{EmbedError, EmbeddingProvider};
use crate::reward::{parse_response, ANSWER_OPEN};
use crate::thinkscore::{thinking_quality, ThinkBreakdown, ThinkConfig};

pub const BINNING_RULE: &str = "half-open [lo, hi) bins; the last bin is closed [lo, hi]";

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("bin edges must be strictly increasing and at least two, got {0:?}")]
    Edges(Vec<f64>),
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("no values to take quantiles of")]
    NoValues,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sample_id: String,
    pub raw_output: String,
    /// Task metric in `[0, 1]`, e.g. IoU.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActivationRate {
    pub ratio: f64,
    pub triggered: usize,
    pub total: usize,
}

/// True if `raw` has the answer-open tag with non-blank text before it.
pub fn is_triggered(raw: &str) -> bool {
    raw.split_once(ANSWER_OPEN).is_some_and(|(before, _)| !before.trim().is_empty())
}

/// Share of outputs with text before `<answer>`. Outputs without the tag
/// count towards the total only.
pub fn thinking_activation_rate<'a, I: IntoIterator<Item = &'a str>>(outputs: I) -> ActivationRate {
    let mut rate = ActivationRate::default();
    for raw in outputs {
        rate.total += 1;
        rate.triggered += usize::from(is_triggered(raw));
    }
    if rate.total > 0 {
        rate.ratio = rate.triggered as f64 / rate.total as f64;
    }
    rate
}

/// Reasoning metrics available for binning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    WordCount,
    LengthScore,
    NonRedundancy,
    StructureScore,
    DiversityBonus,
    ThinkingScore,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::WordCount,
        Metric::LengthScore,
        Metric::NonRedundancy,
        Metric::StructureScore,
        Metric::DiversityBonus,
        Metric::ThinkingScore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::WordCount => "word_count",
            Metric::LengthScore => "length_score",
            Metric::NonRedundancy => "non_redundancy",
            Metric::StructureScore => "structure_score",
            Metric::DiversityBonus => "diversity_bonus",
            Metric::ThinkingScore => "thinking_score",
        }
    }

    pub fn from_name(name: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn value(self, b: &ThinkBreakdown) -> f64 {
        match self {
            Metric::WordCount => b.word_count as f64,
            Metric::LengthScore => b.l_s,
            Metric::NonRedundancy => 1.0 - b.redundancy_ratio,
            Metric::StructureScore => b.q_t,
            Metric::DiversityBonus => b.b_d,
            Metric::ThinkingScore => b.s_t,
        }
    }

    /// Natural value range used for fixed-width bins, given the observed
    /// maximum.
    pub fn range(self, observed_max: f64) -> (f64, f64) {
        match self {
            Metric::WordCount => (0.0, observed_max.max(1.0)),
            _ => (0.0, 1.0),
        }
    }
}

/// Thinking breakdown of an evaluation output, or `None` when the output
/// has no `<answer>` tag.
pub fn breakdown_of(raw: &str, provider: &EmbeddingProvider, cfg: &ThinkConfig) -> Result<Option<ThinkBreakdown>, EmbedError> {
    if !raw.contains(ANSWER_OPEN) {
        return Ok(None);
    }
    let parsed = parse_response(raw);
    thinking_quality(&parsed.thinking, &parsed.answer, provider, cfg).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub mean_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedTable {
    pub metric: String,
    pub rows: Vec<BinRow>,
    /// Points below the first or above the last edge.
    pub out_of_range: usize,
}

fn check_edges(edges: &[f64]) -> Result<(), AnalysisError> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
        return Err(AnalysisError::Edges(edges.to_vec()));
    }
    Ok(())
}

/// Index of the bin holding `v`, if any.
pub fn bin_index(edges: &[f64], v: f64) -> Option<usize> {
    let last = edges.len() - 1;
    if !(v >= edges[0] && v <= edges[last]) {
        return None;
    }
    if v == edges[last] {
        return Some(last - 1);
    }
    Some(edges.partition_point(|e| *e <= v) - 1)
}

/// Mean accuracy per bin for `(metric value, accuracy)` points.
pub fn binned_stats(metric: &str, points: &[(f64, f64)], edges: &[f64]) -> Result<BinnedTable, AnalysisError> {
    check_edges(edges)?;
    let n = edges.len() - 1;
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    let mut out_of_range = 0;
    for (v, acc) in points {
        match bin_index(edges, *v) {
            Some(i) => {
                sums[i] += acc;
                counts[i] += 1;
            }
            None => out_of_range += 1,
        }
    }
    let rows = (0..n)
        .map(|i| BinRow {
            bin_lo: edges[i],
            bin_hi: edges[i + 1],
            count: counts[i],
            mean_accuracy: (counts[i] > 0).then(|| sums[i] / counts[i] as f64),
        })
        .collect();
    Ok(BinnedTable {
        metric: metric.to_owned(),
        rows,
        out_of_range,
    })
}

/// `bins` equal-width bins over `[lo, hi]`; a degenerate range is widened to
/// `[lo, lo + 1]`.
pub fn fixed_edges(lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>, AnalysisError> {
    if bins == 0 {
        return Err(AnalysisError::ZeroBins);
    }
    let hi = if hi > lo { hi } else { lo + 1.0 };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    Ok(edges)
}

/// Edges at the `k / bins` quantiles (linear interpolation between order
/// statistics). Repeated edges are merged; if every value is equal this
/// falls back to [`fixed_edges`].
pub fn quantile_edges(values: &[f64], bins: usize) -> Result<Vec<f64>, AnalysisError> {
    if bins == 0 {
        return Err(AnalysisError::ZeroBins);
    }
    if values.is_empty() {
        return Err(AnalysisError::NoValues);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = (sorted.len() - 1) as f64;
    let mut edges: Vec<f64> = Vec::with_capacity(bins + 1);
    for k in 0..=bins {
        let h = last * k as f64 / bins as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        let q = sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]);
        if edges.last().is_none_or(|e| q > *e) {
            edges.push(q);
        }
    }
    if edges.len() < 2 {
        return fixed_edges(sorted[0], sorted[0], bins);
    }
    Ok(edges)
}

fn fmt_float(v: f64) -> String {
    format!("{v}")
}

pub fn table_csv(table: &BinnedTable) -> String {
    let mut out = String::from("bin_lo,bin_hi,count,mean_accuracy\n");
    for r in &table.rows {
        let mean = r.mean_accuracy.map(fmt_float).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", fmt_float(r.bin_lo), fmt_float(r.bin_hi), r.count, mean);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary<C: Serialize> {
    pub activation: ActivationRate,
    pub binning: &'static str,
    pub tables: Vec<TableEntry>,
    pub config: C,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableEntry {
    pub metric: String,
    pub file: String,
    pub records: usize,
    pub out_of_range: usize,
}

/// Writes `binned_<metric>.csv` per table and `summary.json` into `dir`.
/// Returns the written paths in order.
pub fn emit_report<C: Serialize>(
    dir: &Path,
    tables: &[BinnedTable],
    activation: ActivationRate,
    config: C,
) -> Result<Vec<PathBuf>, AnalysisError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| AnalysisError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for t in tables {
        let file = format!("binned_{}.csv", t.metric);
        let path = dir.join(&file);
        std::fs::write(&path, table_csv(t)).map_err(io(&path))?;
        entries.push(TableEntry {
            metric: t.metric.clone(),
            file,
            records: t.rows.iter().map(|r| r.count).sum(),
            out_of_range: t.out_of_range,
        });
        written.push(path);
    }
    let summary = ReportSummary {
        activation,
        binning: BINNING_RULE,
        tables: entries,
        config,
    };
    let path = dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    std::fs::write(&path, json).map_err(io(&path))?;
    written.push(path);
    Ok(written)
}
