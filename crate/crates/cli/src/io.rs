use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::Failure;

/// Lines handed to the worker pool at a time; bounds memory on long inputs.
const CHUNK: usize = 1024;

fn is_stdio(path: Option<&Path>) -> bool {
    path.is_none_or(|p| p == Path::new("-"))
}

pub fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>, Failure> {
    if is_stdio(path) {
        return Ok(Box::new(io::stdin().lock()));
    }
    let path = path.expect("checked above");
    let file = File::open(path).map_err(|e| Failure::io(path, e))?;
    Ok(Box::new(BufReader::new(file)))
}

pub struct Output {
    path: Option<PathBuf>,
    inner: Box<dyn Write>,
}

impl Output {
    pub fn open(path: Option<&Path>) -> Result<Self, Failure> {
        if is_stdio(path) {
            return Ok(Self {
                path: None,
                inner: Box::new(BufWriter::new(io::stdout().lock())),
            });
        }
        let path = path.expect("checked above");
        let file = File::create(path).map_err(|e| Failure::io(path, e))?;
        Ok(Self {
            path: Some(path.to_owned()),
            inner: Box::new(BufWriter::new(file)),
        })
    }

    fn fail(&self, e: io::Error) -> Failure {
        Failure::io(self.path.as_deref().unwrap_or(Path::new("<stdout>")), e)
    }

    pub fn write_str(&mut self, s: &str) -> Result<(), Failure> {
        self.inner.write_all(s.as_bytes()).map_err(|e| self.fail(e))
    }

    pub fn write_line(&mut self, line: &str) -> Result<(), Failure> {
        self.write_str(line)?;
        self.write_str("\n")
    }

    pub fn write_json<T: Serialize>(&mut self, value: &T) -> Result<(), Failure> {
        let line = serde_json::to_string(value).map_err(|e| Failure::Runtime(e.to_string()))?;
        self.write_line(&line)
    }

    pub fn finish(mut self) -> Result<(), Failure> {
        self.inner.flush().map_err(|e| self.fail(e))
    }
}

/// Per-run counts of input lines. Blank lines are ignored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LineReport {
    pub records: usize,
    pub ok: usize,
    pub bad: usize,
}

/// Applies `work` to every non-blank line in parallel and feeds the results
/// to `sink` in input order. Failed lines are reported on standard error
/// with their 1-based line number.
pub fn stream<T, W, S>(input: &mut dyn BufRead, work: W, mut sink: S) -> Result<LineReport, Failure>
where
    T: Send,
    W: Fn(&str) -> Result<T, String> + Sync,
    S: FnMut(T) -> Result<(), Failure>,
{
    let mut report = LineReport::default();
    let mut lines = input.lines().enumerate();
    loop {
        let mut chunk = Vec::with_capacity(CHUNK);
        for (idx, line) in lines.by_ref() {
            let line = line.map_err(|e| Failure::io(Path::new("<input>"), e))?;
            if !line.trim().is_empty() {
                chunk.push((idx + 1, line));
            }
            if chunk.len() == CHUNK {
                break;
            }
        }
        if chunk.is_empty() {
            return Ok(report);
        }
        let results: Vec<_> = chunk.par_iter().map(|(n, line)| (*n, work(line))).collect();
        for (n, result) in results {
            report.records += 1;
            match result {
                Ok(value) => {
                    report.ok += 1;
                    sink(value)?;
                }
                Err(e) => {
                    report.bad += 1;
                    eprintln!("line {n}: {e}");
                }
            }
        }
    }
}

pub fn parse<T: serde::de::DeserializeOwned>(line: &str) -> Result<T, String> {
    serde_json::from_str(line).map_err(|e| format!("invalid record: {e}"))
}

pub fn to_line<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Writes the run summary to `path`, or to standard error when absent.
pub fn emit_summary(path: Option<&Path>, summary: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Failure::Runtime(e.to_string()))?;
    match path {
        Some(p) if p != Path::new("-") => std::fs::write(p, text + "\n").map_err(|e| Failure::io(p, e)),
        Some(_) => {
            println!("{text}");
            Ok(())
        }
        None => {
            eprintln!("{text}");
            Ok(())
        }
    }
}
