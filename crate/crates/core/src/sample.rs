//! Task kinds and the sample record shared by scoring, mining and formatting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metrics::{BBox, BoxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    /// Scene classification.
    #[serde(alias = "sc", alias = "cls")]
    SC,
    /// Visual grounding.
    #[serde(alias = "vg", alias = "grounding")]
    VG,
    /// Visual question answering.
    #[serde(alias = "vqa")]
    VQA,
    /// Image captioning.
    #[serde(alias = "ic", alias = "caption")]
    IC,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::SC, Task::VG, Task::VQA, Task::IC];

    /// Descriptor token prepended to formatted instructions.
    pub fn descriptor(self) -> &'static str {
        match self {
            Task::SC => "[cls]",
            Task::VG => "[grounding]",
            Task::VQA => "[vqa]",
            Task::IC => "[caption]",
        }
    }

    pub fn from_descriptor(token: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.descriptor() == token)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::SC => "SC",
            Task::VG => "VG",
            Task::VQA => "VQA",
            Task::IC => "IC",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown task {0:?}")]
pub struct UnknownTask(pub String);

impl FromStr for Task {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sc" | "cls" => Ok(Task::SC),
            "vg" | "grounding" => Ok(Task::VG),
            "vqa" => Ok(Task::VQA),
            "ic" | "caption" => Ok(Task::IC),
            _ => Err(UnknownTask(s.to_owned())),
        }
    }
}

/// Reference answer: a box for grounding, free text otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reference {
    Box(BBox),
    Text(String),
}

impl Reference {
    /// Box view of the reference; text is parsed as `x1,y1,x2,y2`.
    pub fn as_box(&self) -> Result<BBox, BoxError> {
        match self {
            Reference::Box(b) => Ok(*b),
            Reference::Text(t) => BBox::parse(t),
        }
    }

    /// Text view; boxes render as `x1,y1,x2,y2`.
    pub fn as_text(&self) -> String {
        match self {
            Reference::Text(t) => t.clone(),
            Reference::Box(b) => {
                let [x1, y1, x2, y2] = b.coords();
                format!("{x1},{y1},{x2},{y2}")
            }
        }
    }
}

impl From<&str> for Reference {
    fn from(s: &str) -> Self {
        Reference::Text(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    pub task: Task,
    #[serde(default)]
    pub instruction: String,
    pub reference: Reference,
    #[serde(default)]
    pub image_id: String,
}
