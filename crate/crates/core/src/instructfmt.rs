//! Instruction formatting: task descriptors, textual hints, RL system
//! prompts and grounding coordinate frames.
//!
//! A formatted instruction always starts with the task descriptor
//! (`[cls]`, `[grounding]`, `[vqa]`, `[caption]`). Half of the time a hint
//! template drawn uniformly from the task's bank wraps the instruction; the
//! rest of the time the raw instruction follows the descriptor.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::{BBox, BoxError};
use crate::sample::{Sample, Task};

pub const MIN_HINTS_PER_TASK: usize = 20;
pub const HINT_PROBABILITY: f64 = 0.5;
pub const EXAMPLE_PROBABILITY: f64 = 0.5;
pub const SLOT: &str = "{}";
/// Marker line that opens the hypothetical example block of a Type2 prompt.
pub const EXAMPLE_MARKER: &str = "Example response:";

const BUILTIN_HINTS: [(Task, &str); 4] = [
    (Task::SC, include_str!("../data/hints/sc.txt")),
    (Task::VG, include_str!("../data/hints/vg.txt")),
    (Task::VQA, include_str!("../data/hints/vqa.txt")),
    (Task::IC, include_str!("../data/hints/ic.txt")),
];
const BUILTIN_SYSTEM: &str = include_str!("../data/prompts/system.txt");
const BUILTIN_EXAMPLES: &str = include_str!("../data/prompts/examples.txt");

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("no hints for task {0}")]
    UnknownTask(Task),
    #[error("task {task}: {count} hint templates, need at least {MIN_HINTS_PER_TASK}")]
    TooFewHints { task: Task, count: usize },
    #[error("task {task}, template {index}: expected exactly one `{{}}` slot")]
    Slot { task: Task, index: usize },
    #[error("no hypothetical example for task {0}")]
    MissingExample(Task),
    #[error("bad example line {line}: {reason}")]
    ExampleLine { line: usize, reason: String },
    #[error("image dimensions must be positive, got {width} x {height}")]
    ImageSize { width: f64, height: f64 },
    #[error(transparent)]
    Box(#[from] BoxError),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn read(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Hint templates per task, one `{}` slot each.
#[derive(Debug, Clone, PartialEq)]
pub struct HintBank {
    hints: BTreeMap<Task, Vec<String>>,
}

impl HintBank {
    pub fn new(hints: BTreeMap<Task, Vec<String>>) -> Result<Self, FormatError> {
        for (task, list) in &hints {
            if list.len() < MIN_HINTS_PER_TASK {
                return Err(FormatError::TooFewHints { task: *task, count: list.len() });
            }
            if let Some(index) = list.iter().position(|t| t.matches(SLOT).count() != 1) {
                return Err(FormatError::Slot { task: *task, index });
            }
        }
        Ok(Self { hints })
    }

    fn parse_lines(text: &str) -> Vec<String> {
        text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
    }

    pub fn builtin() -> Self {
        let hints = BUILTIN_HINTS.iter().map(|(t, text)| (*t, Self::parse_lines(text))).collect();
        Self::new(hints).expect("shipped hint banks are valid")
    }

    /// Loads `sc.txt`, `vg.txt`, `vqa.txt` and `ic.txt` from `dir`, one
    /// template per line. Missing files leave the task without hints.
    pub fn from_dir(dir: &Path) -> Result<Self, FormatError> {
        let mut hints = BTreeMap::new();
        for task in Task::ALL {
            let path = dir.join(format!("{}.txt", task.as_str().to_ascii_lowercase()));
            if path.exists() {
                hints.insert(task, Self::parse_lines(&read(&path)?));
            }
        }
        Self::new(hints)
    }

    pub fn templates(&self, task: Task) -> Result<&[String], FormatError> {
        self.hints.get(&task).map(Vec::as_slice).ok_or(FormatError::UnknownTask(task))
    }
}

/// Whether, and which, hint wraps the instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HintChoice {
    Raw,
    Hint(usize),
}

/// Coin flip with [`HINT_PROBABILITY`], then a uniform template index.
pub fn draw_hint<R: Rng + ?Sized>(rng: &mut R, bank_len: usize) -> HintChoice {
    if rng.gen_bool(HINT_PROBABILITY) {
        HintChoice::Hint(rng.gen_range(0..bank_len))
    } else {
        HintChoice::Raw
    }
}

/// Per-sample RNG derived from a run seed and the sample id, so the output
/// does not depend on record order.
pub fn sample_rng(seed: u64, sample_id: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in sample_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h.rotate_left(17))
}

pub fn format_with(sample: &Sample, bank: &HintBank, choice: HintChoice) -> Result<String, FormatError> {
    let templates = bank.templates(sample.task)?;
    let body = match choice {
        HintChoice::Raw => sample.instruction.trim().to_owned(),
        HintChoice::Hint(i) => templates[i % templates.len()].replacen(SLOT, sample.instruction.trim(), 1),
    };
    Ok(format!("{} {}", sample.task.descriptor(), body))
}

pub fn format_instruction(sample: &Sample, bank: &HintBank, seed: u64) -> Result<String, FormatError> {
    let n = bank.templates(sample.task)?.len();
    let choice = draw_hint(&mut sample_rng(seed, &sample.sample_id), n);
    format_with(sample, bank, choice)
}

/// Recovers the task from a formatted instruction's leading descriptor.
pub fn parse_descriptor(formatted: &str) -> Option<Task> {
    formatted.split_whitespace().next().and_then(Task::from_descriptor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptStyle {
    /// Instructions only.
    Type1,
    /// Instructions plus one hypothetical answer for the task.
    Type2,
}

pub fn draw_style<R: Rng + ?Sized>(rng: &mut R) -> PromptStyle {
    if rng.gen_bool(EXAMPLE_PROBABILITY) {
        PromptStyle::Type2
    } else {
        PromptStyle::Type1
    }
}

/// RL-stage system prompt templates.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemPrompts {
    base: String,
    examples: BTreeMap<Task, String>,
}

impl SystemPrompts {
    pub fn new(base: String, examples: BTreeMap<Task, String>) -> Self {
        Self {
            base: base.trim().to_owned(),
            examples,
        }
    }

    /// `examples` holds one `TASK<TAB>example` per line.
    pub fn parse(base: &str, examples: &str) -> Result<Self, FormatError> {
        let mut map = BTreeMap::new();
        for (i, line) in examples.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (task, text) = line.split_once('\t').ok_or_else(|| FormatError::ExampleLine {
                line: i + 1,
                reason: "missing tab".into(),
            })?;
            let task: Task = task.trim().parse().map_err(|e: crate::sample::UnknownTask| FormatError::ExampleLine {
                line: i + 1,
                reason: e.to_string(),
            })?;
            map.insert(task, text.trim().to_owned());
        }
        Ok(Self::new(base.to_owned(), map))
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_SYSTEM, BUILTIN_EXAMPLES).expect("shipped prompts are valid")
    }

    /// Loads `system.txt` and `examples.txt` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, FormatError> {
        Self::parse(&read(&dir.join("system.txt"))?, &read(&dir.join("examples.txt"))?)
    }

    pub fn render(&self, task: Task, style: PromptStyle) -> Result<String, FormatError> {
        match style {
            PromptStyle::Type1 => Ok(self.base.clone()),
            PromptStyle::Type2 => {
                let ex = self.examples.get(&task).ok_or(FormatError::MissingExample(task))?;
                Ok(format!("{}\n\n{EXAMPLE_MARKER}\n{ex}", self.base))
            }
        }
    }

    /// Seeded 50/50 choice between the two styles.
    pub fn attach(&self, sample: &Sample, seed: u64) -> Result<(PromptStyle, String), FormatError> {
        let mut rng = sample_rng(seed.rotate_left(32) ^ 0x5eed, &sample.sample_id);
        let style = draw_style(&mut rng);
        Ok((style, self.render(sample.task, style)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxFrame {
    PixelToPerMille,
    PerMilleToPixel,
}

/// Linear rescaling between pixel coordinates and the `[0, 1000]` frame.
pub fn convert_bbox(b: &BBox, width: f64, height: f64, mode: BoxFrame) -> Result<BBox, FormatError> {
    if !(width > 0.0 && height > 0.0) || !width.is_finite() || !height.is_finite() {
        return Err(FormatError::ImageSize { width, height });
    }
    let [x1, y1, x2, y2] = b.coords();
    // multiply before dividing so full-frame boxes map exactly
    let scale = |v: f64, extent: f64| match mode {
        BoxFrame::PixelToPerMille => v * 1000.0 / extent,
        BoxFrame::PerMilleToPixel => v * extent / 1000.0,
    };
    Ok(BBox::new(scale(x1, width), scale(y1, height), scale(x2, width), scale(y2, height))?)
}
