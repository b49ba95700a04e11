use std::io::BufRead;

use geozero_core::analysis::{self, ActivationRate, Metric, BINNING_RULE};
use geozero_core::config::ConfigError;
use geozero_core::grpo::{advantages, logp_gradient, objective, RolloutGroup};
use geozero_core::instructfmt::{format_instruction, HintBank, SystemPrompts};
use geozero_core::mining::{is_candidate, score_trials, select_hard, HardImages, ManifestRecord, MiningRecord, PredictionRecord};
use geozero_core::toy::{self, answer_tv_distance, evaluate, history_csv, ToyError};
use geozero_core::{RepoConfig, RewardBreakdown, Sample, Scorer};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::args::{AnalyzeArgs, Binning, Common, FormatArgs, Mine};
use crate::io::{parse, stream, to_line, LineReport, Output};
use crate::Failure;

/// What a command reports back for the run summary.
pub struct Outcome {
    pub lines: Option<LineReport>,
    pub details: Value,
}

impl Outcome {
    fn streamed(lines: LineReport, details: Value) -> Self {
        Self {
            lines: Some(lines),
            details,
        }
    }
}

pub fn load_config(common: &Common) -> Result<RepoConfig, Failure> {
    RepoConfig::load(common.config.as_deref()).map_err(|e| match e {
        ConfigError::Io { .. } => Failure::Runtime(e.to_string()),
        ConfigError::Parse(_) => Failure::Validation(e.to_string()),
        ConfigError::Invalid(v) => Failure::Validation(format!("invalid config:\n  {}", v.join("\n  "))),
    })
}

#[derive(Deserialize)]
struct ScoreInput {
    #[serde(flatten)]
    sample: Sample,
    response: String,
}

#[derive(Serialize)]
struct ScoreOutput<'a> {
    sample_id: &'a str,
    #[serde(flatten)]
    breakdown: RewardBreakdown,
}

pub fn score(cfg: &RepoConfig, input: &mut dyn BufRead, out: &mut Output) -> Result<Outcome, Failure> {
    let provider = cfg.embedding.provider().map_err(|e| Failure::Runtime(e.to_string()))?;
    let scorer = Scorer::new(&provider, &cfg.reward, &cfg.think);
    let (mut sum, mut format_ok) = (0.0, 0usize);
    let lines = stream(
        input,
        |line| {
            let rec: ScoreInput = parse(line)?;
            let b = scorer.total_reward(&rec.sample, &rec.response).map_err(|e| format!("{}: {e}", rec.sample.sample_id))?;
            let text = to_line(&ScoreOutput {
                sample_id: &rec.sample.sample_id,
                breakdown: b,
            })?;
            Ok((b, text))
        },
        |(b, text)| {
            sum += b.r_total;
            format_ok += usize::from(b.format_ok);
            out.write_line(&text)
        },
    )?;
    let mean = if lines.ok > 0 { sum / lines.ok as f64 } else { 0.0 };
    Ok(Outcome::streamed(lines, json!({ "format_ok": format_ok, "mean_r_total": mean })))
}

pub fn mine(cmd: &Mine, input: &mut dyn BufRead, out: &mut Output) -> Result<Outcome, Failure> {
    match cmd {
        Mine::Stage1 => {
            let mut kept = 0usize;
            let lines = stream(
                input,
                |line| {
                    let rec: PredictionRecord = parse(line)?;
                    match is_candidate(&rec).map_err(|e| e.to_string())? {
                        true => to_line(&rec).map(Some),
                        false => Ok(None),
                    }
                },
                |text| {
                    if let Some(text) = text {
                        kept += 1;
                        out.write_line(&text)?;
                    }
                    Ok(())
                },
            )?;
            Ok(Outcome::streamed(lines, json!({ "kept": kept, "dropped_correct": lines.ok - kept })))
        }
        Mine::Stage2 { trials } => {
            let lines = stream(
                input,
                |line| {
                    let rec: PredictionRecord = parse(line)?;
                    to_line(&score_trials(rec, *trials).map_err(|e| e.to_string())?)
                },
                |text| out.write_line(&text),
            )?;
            Ok(Outcome::streamed(lines, json!({ "trials": trials })))
        }
        Mine::Select { quota } => {
            let mut records = Vec::new();
            let lines = stream(input, parse::<MiningRecord>, |r| {
                records.push(r);
                Ok(())
            })?;
            let sel = select_hard(records, *quota).map_err(|e| Failure::Validation(e.to_string()))?;
            for r in &sel.pool {
                out.write_json(r)?;
            }
            Ok(Outcome::streamed(lines, json!(sel.report)))
        }
        Mine::Split { hard } => {
            let images = read_hard_images(hard)?;
            let (mut kept, mut removed) = (0usize, 0usize);
            let lines = stream(
                input,
                |line| {
                    let rec: ManifestRecord = parse(line)?;
                    match images.contains(&rec.image_id) {
                        true => Ok(None),
                        false => Ok(Some(line.to_owned())),
                    }
                },
                |row| {
                    match row {
                        Some(line) => {
                            kept += 1;
                            out.write_line(&line)?;
                        }
                        None => removed += 1,
                    }
                    Ok(())
                },
            )?;
            Ok(Outcome::streamed(
                lines,
                json!({ "hard_images": images.len(), "kept": kept, "removed": removed }),
            ))
        }
    }
}

#[derive(Deserialize)]
struct ImageRef {
    image_id: String,
}

fn read_hard_images(path: &std::path::Path) -> Result<HardImages, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let mut ids = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: ImageRef = parse(line).map_err(|e| Failure::Validation(format!("{} line {}: {e}", path.display(), i + 1)))?;
        ids.push(r.image_id);
    }
    Ok(HardImages::from_ids(ids))
}

pub fn format(args: &FormatArgs, seed: u64, input: &mut dyn BufRead, out: &mut Output) -> Result<Outcome, Failure> {
    let invalid = |e: geozero_core::instructfmt::FormatError| Failure::Validation(e.to_string());
    let bank = match &args.hints_dir {
        Some(dir) => HintBank::from_dir(dir).map_err(invalid)?,
        None => HintBank::builtin(),
    };
    let prompts = match &args.prompts_dir {
        Some(dir) => SystemPrompts::from_dir(dir).map_err(invalid)?,
        None => SystemPrompts::builtin(),
    };
    let lines = stream(
        input,
        |line| {
            let mut row: Map<String, Value> = parse(line)?;
            let sample: Sample = serde_json::from_value(Value::Object(row.clone())).map_err(|e| format!("invalid record: {e}"))?;
            let fail = |e: geozero_core::instructfmt::FormatError| format!("{}: {e}", sample.sample_id);
            let instruction = format_instruction(&sample, &bank, seed).map_err(fail)?;
            let (style, system) = prompts.attach(&sample, seed).map_err(fail)?;
            row.insert("raw_instruction".into(), Value::String(sample.instruction.clone()));
            row.insert("instruction".into(), Value::String(instruction));
            row.insert("prompt_style".into(), json!(style));
            row.insert("system_prompt".into(), Value::String(system));
            to_line(&row)
        },
        |text| out.write_line(&text),
    )?;
    Ok(Outcome::streamed(lines, json!({ "seed": seed })))
}

struct EvalPoint {
    triggered: bool,
    accuracy: f64,
    values: Option<Vec<f64>>,
}

pub fn analyze(cfg: &RepoConfig, args: &AnalyzeArgs, input: &mut dyn BufRead, out: &mut Output) -> Result<Outcome, Failure> {
    if args.bins == 0 {
        return Err(Failure::Validation("--bins must be at least 1".into()));
    }
    let metrics: Vec<Metric> = if args.metrics.is_empty() {
        Metric::ALL.to_vec()
    } else {
        args.metrics
            .iter()
            .map(|m| Metric::from_name(m).ok_or_else(|| Failure::Validation(format!("unknown metric `{m}`"))))
            .collect::<Result<_, _>>()?
    };
    let provider = cfg.embedding.provider().map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut activation = ActivationRate::default();
    let mut points: Vec<Vec<(f64, f64)>> = vec![Vec::new(); metrics.len()];
    let lines = stream(
        input,
        |line| {
            let rec: analysis::EvalRecord = parse(line)?;
            if !(0.0..=1.0).contains(&rec.accuracy) {
                return Err(format!("{}: accuracy {} outside [0, 1]", rec.sample_id, rec.accuracy));
            }
            let breakdown = analysis::breakdown_of(&rec.raw_output, &provider, &cfg.think).map_err(|e| format!("{}: {e}", rec.sample_id))?;
            Ok(EvalPoint {
                triggered: analysis::is_triggered(&rec.raw_output),
                accuracy: rec.accuracy,
                values: breakdown.map(|b| metrics.iter().map(|m| m.value(&b)).collect()),
            })
        },
        |p| {
            activation.total += 1;
            activation.triggered += usize::from(p.triggered);
            if let Some(values) = p.values {
                for (bucket, v) in points.iter_mut().zip(values) {
                    bucket.push((v, p.accuracy));
                }
            }
            Ok(())
        },
    )?;
    if activation.total > 0 {
        activation.ratio = activation.triggered as f64 / activation.total as f64;
    }

    let mut tables = Vec::new();
    for (metric, pts) in metrics.iter().zip(&points) {
        if pts.is_empty() {
            continue;
        }
        let values: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let edges = match args.binning {
            Binning::Quantile => analysis::quantile_edges(&values, args.bins),
            Binning::Fixed => {
                let (lo, hi) = metric.range(values.iter().copied().fold(f64::MIN, f64::max));
                analysis::fixed_edges(lo, hi, args.bins)
            }
        };
        let table = edges
            .and_then(|e| analysis::binned_stats(metric.name(), pts, &e))
            .map_err(|e| Failure::Runtime(e.to_string()))?;
        tables.push(table);
    }

    let settings = json!({
        "bins": args.bins,
        "binning": format!("{:?}", args.binning).to_lowercase(),
        "metrics": metrics.iter().map(|m| m.name()).collect::<Vec<_>>(),
    });
    if let Some(dir) = &args.out_dir {
        analysis::emit_report(dir, &tables, activation, &settings).map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    out.write_json(&json!({
        "activation": activation,
        "binning": BINNING_RULE,
        "settings": settings,
        "tables": tables,
    }))?;
    Ok(Outcome::streamed(lines, json!({ "activation": activation, "tables": tables.len() })))
}

pub fn train_toy(cfg: &RepoConfig, seed: Option<u64>, out: &mut Output) -> Result<Outcome, Failure> {
    let mut train_cfg = cfg.toy_train();
    if let Some(seed) = seed {
        train_cfg = train_cfg.with_seed(seed);
    }
    let fail = |e: ToyError| match e {
        ToyError::Config(_) => Failure::Validation(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    };
    let started = std::time::Instant::now();
    let run = toy::train(&train_cfg).map_err(fail)?;
    let elapsed = started.elapsed().as_secs_f64();
    out.write_str(&history_csv(&run.history))?;
    let eval_seed = train_cfg.toy.seed;
    let before = evaluate(&run.reference, &train_cfg, eval_seed).map_err(fail)?;
    let after = evaluate(&run.policy, &train_cfg, eval_seed).map_err(fail)?;
    log::info!("toy run finished in {elapsed:.2}s");
    Ok(Outcome {
        lines: None,
        details: json!({
            "seed": train_cfg.toy.seed,
            "iterations": train_cfg.toy.iterations,
            "think_weight": train_cfg.reward.think_weight,
            "before": before,
            "after": after,
            "answer_tv_distance": answer_tv_distance(&run.policy, &run.reference),
        }),
    })
}

#[derive(Serialize)]
struct ObjectiveOutput {
    objective: f64,
    advantages: Vec<f64>,
    per_token: Vec<geozero_core::grpo::TokenTerms>,
    /// dJ / d logp_current, per response and token.
    gradient: Vec<Vec<f64>>,
}

pub fn objective_cmd(cfg: &RepoConfig, input: &mut dyn BufRead, out: &mut Output) -> Result<Outcome, Failure> {
    let mut sum = 0.0;
    let lines = stream(
        input,
        |line| {
            let group: RolloutGroup = parse(line)?;
            let adv = advantages(&group.rewards(), &cfg.grpo);
            let value = objective(&group, &adv, &cfg.grpo).map_err(|e| e.to_string())?;
            let gradient = logp_gradient(&group, &adv, &cfg.grpo).map_err(|e| e.to_string())?;
            let j = value.objective;
            let text = to_line(&ObjectiveOutput {
                objective: j,
                advantages: adv,
                per_token: value.per_token,
                gradient,
            })?;
            Ok((j, text))
        },
        |(j, text)| {
            sum += j;
            out.write_line(&text)
        },
    )?;
    let mean = if lines.ok > 0 { sum / lines.ok as f64 } else { 0.0 };
    Ok(Outcome::streamed(lines, json!({ "mean_objective": mean, "kl_beta": cfg.grpo.kl_beta })))
}
