//! Bounded-concurrency generation over an instruction JSONL file with an
//! append-only progress log for resumption.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Completer, LlmError};
use crate::instruct::{InstructionRecord, RecordKey, Split};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub kind: String,
    pub message: String,
}

impl From<&LlmError> for RecordError {
    fn from(e: &LlmError) -> Self {
        RecordError { kind: e.kind().to_string(), message: e.to_string() }
    }
}

/// One generation attempt for one instruction record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub dataset_id: String,
    pub split: Split,
    pub index: usize,
    pub prompt: String,
    pub raw_response: Option<String>,
    pub error: Option<RecordError>,
    pub latency_ms: f64,
    pub attempt_count: u32,
    pub finish_reason: Option<String>,
    /// Which model produced the response.
    pub generator: String,
}

impl GenerationRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey { dataset_id: self.dataset_id.clone(), split: self.split, index: self.index }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none() && self.raw_response.is_some()
    }
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("duplicate record {0} in input")]
    DuplicateKey(RecordKey),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub total: usize,
    pub reused: usize,
    pub requested: usize,
    pub succeeded: usize,
    pub failed: usize,
}

/// Successful records already in a progress log, keyed for reuse. A torn
/// last line (from an interrupted run) is ignored.
pub fn read_progress(path: &Path) -> Result<HashMap<RecordKey, GenerationRecord>, BatchError> {
    let mut done = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(source) => return Err(BatchError::Io { path: path.to_path_buf(), source }),
    };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| BatchError::Io { path: path.to_path_buf(), source })?;
        let Ok(rec) = serde_json::from_str::<GenerationRecord>(&line) else { continue };
        if rec.is_ok() {
            done.insert(rec.key(), rec);
        }
    }
    Ok(done)
}

/// Runs every record through `completer`, at most `max_in_flight` at a
/// time. Each finished record is appended to `progress` and flushed before
/// the next is taken. Records already completed in `progress` are reused,
/// not re-requested. The result follows input order.
///
/// Per-record failures, authentication included, become error entries and
/// never stop the batch; failed records are retried on the next run.
pub async fn generate_batch(
    completer: &dyn Completer,
    records: &[InstructionRecord],
    progress: &Path,
    max_in_flight: usize,
) -> Result<(Vec<GenerationRecord>, BatchSummary), BatchError> {
    let mut keys = HashSet::new();
    for r in records {
        if !keys.insert(r.key()) {
            return Err(BatchError::DuplicateKey(r.key()));
        }
    }
    let mut done = read_progress(progress)?;
    done.retain(|k, _| keys.contains(k));
    let reused = done.len();
    let pending: Vec<&InstructionRecord> = records.iter().filter(|r| !done.contains_key(&r.key())).collect();
    let requested = pending.len();

    let io = |source| BatchError::Io { path: progress.to_path_buf(), source };
    if let Some(dir) = progress.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut log = OpenOptions::new().create(true).append(true).open(progress).map_err(io)?;
    let generator = completer.describe();

    let mut results = stream::iter(pending)
        .map(|rec| async move { (rec, completer.complete(&rec.prompt).await) })
        .buffer_unordered(max_in_flight.max(1));
    let mut fresh: HashMap<RecordKey, GenerationRecord> = HashMap::new();
    while let Some((rec, outcome)) = results.next().await {
        let mut g = GenerationRecord {
            dataset_id: rec.dataset_id.clone(),
            split: rec.split,
            index: rec.index,
            prompt: rec.prompt.clone(),
            raw_response: None,
            error: None,
            latency_ms: 0.0,
            attempt_count: 0,
            finish_reason: None,
            generator: generator.clone(),
        };
        match outcome {
            Ok(c) => {
                g.raw_response = Some(c.text);
                g.latency_ms = ms(c.latency);
                g.attempt_count = c.attempts;
                g.finish_reason = c.finish_reason;
            }
            Err(e) => {
                g.attempt_count = e.attempts();
                g.error = Some(RecordError::from(&e));
            }
        }
        let mut line = serde_json::to_string(&g).expect("record serializes");
        line.push('\n');
        log.write_all(line.as_bytes()).map_err(io)?;
        log.flush().map_err(io)?;
        fresh.insert(g.key(), g);
    }

    let ordered: Vec<GenerationRecord> = records
        .iter()
        .map(|r| {
            let k = r.key();
            done.remove(&k).or_else(|| fresh.remove(&k)).expect("every record has a result")
        })
        .collect();
    let succeeded = ordered.iter().filter(|g| g.is_ok()).count();
    let summary = BatchSummary { total: ordered.len(), reused, requested, succeeded, failed: ordered.len() - succeeded };
    Ok((ordered, summary))
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

pub fn write_generations(path: &Path, records: &[GenerationRecord]) -> Result<(), BatchError> {
    let io = |source| BatchError::Io { path: path.to_path_buf(), source };
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io)
}

pub fn read_generations(path: &Path) -> Result<Vec<GenerationRecord>, BatchError> {
    let io = |source| BatchError::Io { path: path.to_path_buf(), source };
    let text = std::fs::read_to_string(path).map_err(io)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                io(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))
            })
        })
        .collect()
}
