//! Repository-wide configuration: one TOML file, defaults for every key,
//! `GEOZERO_` environment overrides and exhaustive validation.
//!
//! Environment overrides name a key path with `__` between segments, e.g.
//! `GEOZERO_GRPO__KL_BETA=0.1` or `GEOZERO_REWARD__CAPTION_WEIGHTS__BLEU=0.2`.
//! The value is parsed as a TOML literal and kept as a string if that fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed::{Backend, EmbedError, EmbeddingProvider, DEFAULT_DIM};
use crate::grpo::GrpoConfig;
use crate::reward::RewardConfig;
use crate::thinkscore::ThinkConfig;
use crate::toy::{ToyConfig, ToyTrainConfig};

pub const ENV_PREFIX: &str = "GEOZERO_";
const ENV_SEPARATOR: &str = "__";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

impl ConfigError {
    /// Every violation for `Invalid`, otherwise the single message.
    pub fn violations(&self) -> Vec<String> {
        match self {
            Self::Invalid(v) => v.clone(),
            other => vec![other.to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub backend: Backend,
    pub dim: usize,
    /// Sidecar table for the `file-lookup` backend.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self {
            backend: Backend::FeatureHash,
            dim: DEFAULT_DIM,
            path: None,
        }
    }
}

impl EmbeddingSettings {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dim == 0 {
            out.push("embedding.dim: must be positive".into());
        }
        if self.backend == Backend::FileLookup && self.path.is_none() {
            out.push("embedding.path: required by the file-lookup backend".into());
        }
        out
    }

    pub fn provider(&self) -> Result<EmbeddingProvider, EmbedError> {
        match (self.backend, &self.path) {
            (Backend::FileLookup, Some(path)) => {
                let p = EmbeddingProvider::from_sidecar(path)?;
                if p.dim() != self.dim {
                    return Err(EmbedError::DimMismatch {
                        left: self.dim,
                        right: p.dim(),
                    });
                }
                Ok(p)
            }
            _ => EmbeddingProvider::feature_hash(self.dim),
        }
    }
}

/// Per-dataset reinforcement fine-tuning settings. Informational only:
/// nothing in this crate reads them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RftPreset {
    pub task: String,
    pub epochs: u32,
    pub learning_rate: f64,
    pub global_batch_size: u32,
}

fn builtin_presets() -> BTreeMap<String, RftPreset> {
    let rows: [(&str, &str, u32, f64, u32); 17] = [
        ("ucm", "SC", 1, 5e-5, 144),
        ("aid", "SC", 1, 5e-5, 144),
        ("resisc45", "SC", 1, 1e-4, 144),
        ("eurosat", "SC", 1, 5e-5, 144),
        ("siri_whu", "SC", 1, 5e-5, 96),
        ("whu_rs19", "SC", 1, 5e-6, 96),
        ("rsvg", "VG", 1, 5e-5, 48),
        ("dior_rsvg", "VG", 1, 5e-6, 96),
        ("vrs_vg", "VG", 1, 5e-6, 144),
        ("rsvqa_hr_presence", "VQA", 1, 5e-6, 144),
        ("rsvqa_hr_compare", "VQA", 1, 5e-6, 144),
        ("ucm_captions", "IC", 1, 5e-6, 144),
        ("sydney_captions", "IC", 3, 5e-6, 48),
        ("nwpu_captions", "IC", 1, 5e-5, 96),
        ("rsicd", "IC", 1, 5e-5, 144),
        ("xlrs_bench", "benchmark", 1, 5e-6, 48),
        ("choice", "benchmark", 1, 5e-6, 48),
    ];
    rows.into_iter()
        .map(|(name, task, epochs, learning_rate, global_batch_size)| {
            (
                name.to_owned(),
                RftPreset {
                    task: task.to_owned(),
                    epochs,
                    learning_rate,
                    global_batch_size,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepoConfig {
    pub think: ThinkConfig,
    pub reward: RewardConfig,
    pub grpo: GrpoConfig,
    pub embedding: EmbeddingSettings,
    pub toy: ToyConfig,
    pub rft_presets: BTreeMap<String, RftPreset>,
}

impl Default for RepoConfig {
    fn default() -> Self {
        Self {
            think: ThinkConfig::default(),
            reward: RewardConfig::default(),
            grpo: GrpoConfig::default(),
            embedding: EmbeddingSettings::default(),
            toy: ToyConfig::default(),
            rft_presets: builtin_presets(),
        }
    }
}

/// Sections whose keys are free-form names rather than fields.
const OPEN_TABLES: [&str; 1] = ["rft_presets"];

/// Keys whose absence from the default tree does not make them unknown.
const OPTIONAL_KEYS: [&str; 1] = ["embedding.path"];

fn unknown_keys(value: &toml::Table, known: &toml::Table, path: &str, out: &mut Vec<String>) {
    for (key, v) in value {
        let full = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        let Some(k) = known.get(key) else {
            if !OPTIONAL_KEYS.contains(&full.as_str()) {
                out.push(format!("{full}: unknown key"));
            }
            continue;
        };
        let (toml::Value::Table(v), toml::Value::Table(k)) = (v, k) else {
            continue;
        };
        if OPEN_TABLES.contains(&full.as_str()) {
            // every entry is checked against the shape of a default entry
            if let Some(toml::Value::Table(shape)) = k.values().next() {
                for (name, entry) in v {
                    if let toml::Value::Table(e) = entry {
                        unknown_keys(e, shape, &format!("{full}.{name}"), out);
                    }
                }
            }
        } else {
            unknown_keys(v, k, &full, out);
        }
    }
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), String> {
    let (last, parents) = path.split_last().ok_or("empty key path")?;
    let mut cur = table;
    for seg in parents {
        let entry = cur.entry(seg.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| format!("{} is not a table", path.join(".")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn parse_env_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_owned())),
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}

impl RepoConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.think.violations();
        out.extend(self.reward.violations());
        out.extend(self.grpo.violations());
        out.extend(self.embedding.violations());
        out.extend(self.toy.violations());
        out
    }

    pub fn validate(self) -> Result<Self, ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    /// Parses TOML text, applies `overrides` (key path, raw value) and
    /// validates. Unknown keys and invariant violations are all reported.
    pub fn from_toml_with<I>(text: &str, overrides: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut problems = Vec::new();
        for (key, raw) in overrides {
            let path: Vec<String> = key.split('.').map(str::to_owned).collect();
            if let Err(e) = set_path(&mut table, &path, parse_env_value(&raw)) {
                problems.push(format!("{key}: {e}"));
            }
        }
        let known = toml::Table::try_from(Self::default()).expect("defaults serialize");
        unknown_keys(&table, &known, "", &mut problems);
        if !problems.is_empty() {
            return Err(ConfigError::Invalid(problems));
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Self::from_toml_with(text, std::iter::empty())
    }

    /// Loads `path` (or defaults when `None`) with `GEOZERO_` overrides from
    /// the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_owned(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_toml_with(&text, env_overrides(std::env::vars()))
    }

    pub fn dump(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn toy_train(&self) -> ToyTrainConfig {
        ToyTrainConfig::new(self.toy.clone(), self.grpo.clone(), self.reward.clone(), self.think.clone())
    }
}

/// Converts `GEOZERO_A__B=v` variables into `("a.b", "v")` pairs, sorted.
pub fn env_overrides<I: IntoIterator<Item = (String, String)>>(vars: I) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            Some((rest.to_ascii_lowercase().split(ENV_SEPARATOR).collect::<Vec<_>>().join("."), v))
        })
        .collect();
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RepoConfig::from_toml("").unwrap(), RepoConfig::default());
    }

    #[test]
    fn defaults_are_valid() {
        assert!(RepoConfig::default().violations().is_empty());
        assert_eq!(RepoConfig::default().rft_presets.len(), 17);
        assert_eq!(RepoConfig::default().grpo.clip_eps, 0.2);
    }

    #[test]
    fn partial_section_keeps_other_defaults() {
        let cfg = RepoConfig::from_toml("[grpo]\nkl_beta = 0.1\n").unwrap();
        assert_eq!(cfg.grpo.kl_beta, 0.1);
        assert_eq!(cfg.grpo.group_size, 8);
    }

    #[test]
    fn weight_sum_violation_is_named() {
        let err = RepoConfig::from_toml("[reward.caption_weights]\nembedding = 0.25\n").unwrap_err();
        let v = err.violations();
        assert!(v.iter().any(|m| m.contains("caption_weights") && m.contains("sum to 1")), "{v:?}");
    }

    #[test]
    fn every_violation_is_listed() {
        let err = RepoConfig::from_toml("[grpo]\nclip_eps = 2.0\ntemperature = 0.0\n[think]\ndiversity_weight = 3.0\n")
            .unwrap_err();
        assert_eq!(err.violations().len(), 3, "{:?}", err.violations());
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = RepoConfig::from_toml("foo = 1\n[grpo]\nbar = 2\n[reward.caption_weights]\nbaz = 0\n").unwrap_err();
        assert_eq!(
            err.violations(),
            vec!["foo: unknown key", "grpo.bar: unknown key", "reward.caption_weights.baz: unknown key"]
        );
    }

    #[test]
    fn preset_names_are_free_but_fields_are_checked() {
        let ok = "[rft_presets.mine]\ntask = \"SC\"\nepochs = 2\nlearning_rate = 1e-5\nglobal_batch_size = 8\n";
        let cfg = RepoConfig::from_toml(ok).unwrap();
        assert_eq!(cfg.rft_presets.len(), 1);
        let bad = "[rft_presets.mine]\ntask = \"SC\"\nepochs = 2\nlearning_rate = 1e-5\nglobal_batch_size = 8\nx = 1\n";
        assert!(RepoConfig::from_toml(bad).is_err());
    }

    #[test]
    fn embedding_path_is_optional() {
        let cfg = RepoConfig::from_toml("[embedding]\nbackend = \"file-lookup\"\ndim = 3\npath = \"e.tsv\"\n").unwrap();
        assert_eq!(cfg.embedding.path.as_deref(), Some(Path::new("e.tsv")));
        let err = RepoConfig::from_toml("[embedding]\nbackend = \"file-lookup\"\n").unwrap_err();
        assert!(err.to_string().contains("embedding.path"));
    }

    #[test]
    fn env_overrides_apply() {
        let vars = vec![
            ("GEOZERO_GRPO__KL_BETA".to_owned(), "0.5".to_owned()),
            ("GEOZERO_EMBEDDING__BACKEND".to_owned(), "feature-hash".to_owned()),
            ("HOME".to_owned(), "/root".to_owned()),
        ];
        let o = env_overrides(vars);
        assert_eq!(o.len(), 2);
        let cfg = RepoConfig::from_toml_with("[grpo]\nkl_beta = 0.2\n", o).unwrap();
        assert_eq!(cfg.grpo.kl_beta, 0.5);
    }

    #[test]
    fn dump_round_trips() {
        let mut cfg = RepoConfig::default();
        cfg.grpo.kl_beta = 0.123;
        cfg.toy.kl_mask = crate::toy::KlMask::None;
        cfg.embedding.path = Some("x.tsv".into());
        assert_eq!(RepoConfig::from_toml(&cfg.dump()).unwrap(), cfg);
        assert_eq!(RepoConfig::from_toml(&RepoConfig::default().dump()).unwrap(), RepoConfig::default());
    }

    #[test]
    fn toy_train_uses_toy_lengths() {
        let t = RepoConfig::default().toy_train();
        assert_eq!((t.think.tau_min, t.think.tau_max), (2, 16));
        assert_eq!(t.think.redundancy_threshold, 0.15);
    }
}
