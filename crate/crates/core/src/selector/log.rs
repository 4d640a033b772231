use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CallOutcome, ParseStatus, PromptVariant};
use crate::error::{Error, Result};

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub scene_id: String,
    pub model: String,
    pub seed: u64,
    pub variant: PromptVariant,
    pub k: usize,
    pub raw_text: String,
    pub see: String,
    pub implications: String,
    pub action: String,
    pub choice_id: usize,
    pub confidence: f64,
    pub status: ParseStatus,
    pub over_word_limit: bool,
    pub latency_s: f64,
}

impl DecisionRecord {
    pub fn from_outcome(scene_id: &str, model: &str, variant: PromptVariant, k: usize, out: &CallOutcome) -> Self {
        let d = &out.decision;
        Self {
            scene_id: scene_id.to_string(),
            model: model.to_string(),
            seed: out.seed,
            variant,
            k,
            raw_text: d.raw_text.clone(),
            see: d.see.clone(),
            implications: d.implications.clone(),
            action: d.action.clone(),
            choice_id: d.choice_id,
            confidence: d.confidence,
            status: d.parse_status,
            over_word_limit: d.over_word_limit,
            latency_s: out.latency_s,
        }
    }
}

/// Append-only JSON-lines writer.
pub struct DecisionLogWriter {
    path: PathBuf,
    file: File,
}

impl DecisionLogWriter {
    pub fn append(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(format!("open decision log {}", path.display()), e))?;
        Ok(Self { path: path.to_path_buf(), file })
    }

    pub fn write(&mut self, record: &DecisionRecord) -> Result<()> {
        let line = serde_json::to_string(record).map_err(|e| Error::json("decision record", e))?;
        writeln!(self.file, "{line}").map_err(|e| Error::io(format!("write {}", self.path.display()), e))?;
        self.file.flush().map_err(|e| Error::io("flush decision log", e))
    }
}

/// Reads a decision log; a missing file reads as empty. A torn final line from
/// an interrupted run is skipped.
pub fn read_decision_log(path: &Path) -> Result<Vec<DecisionRecord>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(format!("open {}", path.display()), e)),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(format!("read {}", path.display()), e))?;
    let mut out = Vec::with_capacity(lines.len());
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i == last => tracing::warn!(path = %path.display(), "skipping torn final log line"),
            Err(e) => return Err(Error::json(format!("{} line {}", path.display(), i + 1), e)),
        }
    }
    Ok(out)
}
