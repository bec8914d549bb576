//! Offline stand-ins for a model, for tests and dry runs.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use futures::future::BoxFuture;
use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::{Completer, Completion, LlmError};
use crate::instruct::SNAPSHOT_HEADING;
use crate::parse::lex_record;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockMode {
    /// The prompt's input snapshot, verbatim.
    EchoInput,
    /// As many rows as the snapshot has, drawn from it with replacement.
    ResampleRows,
    /// Instruction-like filler with no table in it.
    Garbage,
}

impl std::str::FromStr for MockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "echo" | "echo_input" => Ok(MockMode::EchoInput),
            "resample" | "resample_rows" => Ok(MockMode::ResampleRows),
            "garbage" => Ok(MockMode::Garbage),
            other => Err(format!("unknown mock mode {other:?} (echo-input, resample-rows, garbage)")),
        }
    }
}

/// The CSV snapshot inside a prompt built by the instruction builder.
pub fn extract_snapshot(prompt: &str) -> Option<&str> {
    let after = &prompt[prompt.find(SNAPSHOT_HEADING)?..];
    let open = after.find("```csv\n")? + "```csv\n".len();
    let body = &after[open..];
    let close = body.find("\n```")?;
    Some(&body[..close])
}

/// Raw text of each CSV record in `block`, quoting preserved.
fn record_slices(block: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < block.len() {
        let r = lex_record(block, pos);
        out.push(&block[r.start..r.end]);
        pos = r.next.max(pos + 1);
    }
    out
}

const GARBAGE: [&str; 3] = [
    "### Instruction:\nCreate a new dataset about the topic described above and explain how each column \
     should be filled in.\n\n### Input:\nThe table should describe customers and what they bought.\n\n\
     ### Response:\nSure. Here is how you can approach this task.\n1. Read the description of every column \
     carefully.\n2. Decide which values are allowed for each column.\n3. Write new rows that look like the \
     input rows.\n\n### Instruction:\nSummarize the main trends of the data in two sentences.\n",
    "Below is an instruction that describes a task. Write a response that appropriately completes the \
     request.\n\n### Instruction:\nGiven the table above write a short story about the people in it.\n\n\
     ### Response:\nOnce upon a time there was a table with many rows.\n\n### Instruction:\nTranslate the \
     column names into French.\n\n### Response:\n",
    "I can help you generate data for this table. Before I start please tell me how many rows you need and \
     whether the values should be realistic.\n\nInstruction: Explain the difference between numerical and \
     categorical columns.\nAnswer: Numerical columns hold numbers while categorical columns hold labels.\n\n\
     Instruction: List three applications of this dataset.\n",
];

/// Deterministic reply to `prompt`. Draws depend on `seed` and the prompt.
pub fn mock_complete(prompt: &str, mode: MockMode, seed: u64) -> Result<String, LlmError> {
    let mut rng = seed::stream(seed, &["mock".into(), prompt.into()]);
    match mode {
        MockMode::Garbage => Ok(GARBAGE.choose(&mut rng).expect("non-empty").to_string()),
        MockMode::EchoInput => extract_snapshot(prompt).map(str::to_string).ok_or(LlmError::SnapshotNotFound),
        MockMode::ResampleRows => {
            let snapshot = extract_snapshot(prompt).ok_or(LlmError::SnapshotNotFound)?;
            let records = record_slices(snapshot);
            let (header, rows) = records.split_first().ok_or(LlmError::SnapshotNotFound)?;
            if rows.is_empty() {
                return Err(LlmError::SnapshotNotFound);
            }
            let mut out = vec![*header];
            out.extend((0..rows.len()).map(|_| *rows.choose(&mut rng).expect("non-empty")));
            Ok(out.join("\n"))
        }
    }
}

/// `Completer` over `mock_complete`, counting calls. Reported latency is the
/// simulated one, so mock runs are reproducible byte for byte.
#[derive(Debug)]
pub struct MockCompleter {
    pub mode: MockMode,
    pub seed: u64,
    pub latency: Option<Duration>,
    calls: AtomicUsize,
}

impl MockCompleter {
    pub fn new(mode: MockMode, seed: u64) -> MockCompleter {
        MockCompleter { mode, seed, latency: None, calls: AtomicUsize::new(0) }
    }

    pub fn with_latency(mut self, latency: Duration) -> MockCompleter {
        self.latency = Some(latency);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Completer for MockCompleter {
    fn complete<'a>(&'a self, prompt: &'a str) -> BoxFuture<'a, Result<Completion, LlmError>> {
        Box::pin(async move {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if let Some(d) = self.latency {
                tokio::time::sleep(d).await;
            }
            let text = mock_complete(prompt, self.mode, self.seed)?;
            Ok(Completion { text, attempts: 1, finish_reason: Some("stop".into()), latency: self.latency.unwrap_or_default() })
        })
    }

    fn describe(&self) -> String {
        format!("mock:{:?} seed {}", self.mode, self.seed)
    }
}
