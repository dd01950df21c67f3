//! Append-only session traces: a JSON sidecar with the session header and a
//! JSONL file with one line per finished round.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentError, SessionConfig};
use crate::cake::{Allocation, Points};
use crate::procedure::{Action, ProcedureId, RoundTrace, Step};
use crate::valuation::Valuation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub actor: usize,
    pub query_kind: String,
    pub value: Action,
    pub t_ms: u64,
}

impl From<&Step> for ActionRecord {
    fn from(step: &Step) -> Self {
        ActionRecord {
            actor: step.actor,
            query_kind: step.query.kind.name().to_string(),
            value: step.action.clone(),
            t_ms: step.t_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLine {
    pub session: String,
    pub subject: String,
    pub procedure: ProcedureId,
    pub round: u32,
    pub revealed: bool,
    pub actions: Vec<ActionRecord>,
    /// `[start, end, agent]` runs; empty for a round lost to the time limit.
    pub allocation: Vec<(u32, u32, usize)>,
    pub points: Vec<Points>,
    /// Every agent's piece valued by the subject.
    pub subject_view_of_pieces: Vec<Points>,
    #[serde(default)]
    pub timed_out: bool,
}

impl TraceLine {
    pub fn from_round(
        session: &str,
        subject: &str,
        round: u32,
        revealed: bool,
        trace: &RoundTrace,
        subject_valuation: &Valuation,
    ) -> Self {
        TraceLine {
            session: session.to_string(),
            subject: subject.to_string(),
            procedure: trace.procedure,
            round,
            revealed,
            actions: trace.steps.iter().map(ActionRecord::from).collect(),
            allocation: trace.allocation.segments(),
            points: trace.points.clone(),
            subject_view_of_pieces: subject_view(subject_valuation, &trace.allocation),
            timed_out: false,
        }
    }

    /// Whether the subject strictly prefers some other piece by more than
    /// `tolerance` points.
    pub fn subject_envious(&self, subject: usize, tolerance: Points) -> bool {
        let Some(&own) = self.subject_view_of_pieces.get(subject) else {
            return false;
        };
        self.subject_view_of_pieces
            .iter()
            .enumerate()
            .any(|(j, &v)| j != subject && v > own + tolerance)
    }

    pub fn duration_ms(&self) -> u64 {
        self.actions.last().map_or(0, |a| a.t_ms)
    }
}

pub(crate) fn subject_view(v: &Valuation, allocation: &Allocation) -> Vec<Points> {
    allocation
        .pieces()
        .iter()
        .map(|p| v.value_of(p).unwrap_or(0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub id: String,
    pub subject: String,
    /// Milliseconds since the Unix epoch.
    pub created_ms: u64,
    pub config: SessionConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub header: SessionHeader,
    pub lines: Vec<TraceLine>,
}

/// A directory of `<id>.session.json` sidecars and `<id>.jsonl` traces.
#[derive(Debug, Clone)]
pub struct TraceStore {
    dir: PathBuf,
}

const SIDECAR: &str = ".session.json";

pub(crate) fn check_id(id: &str) -> Result<(), ExperimentError> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(ExperimentError::BadId(id.to_string()))
    }
}

impl TraceStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ExperimentError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(TraceStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn sidecar(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}{SIDECAR}"))
    }

    fn lines_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn create(&self, header: &SessionHeader) -> Result<(), ExperimentError> {
        check_id(&header.id)?;
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(self.sidecar(&header.id))
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => ExperimentError::Exists(header.id.clone()),
                _ => e.into(),
            })?;
        serde_json::to_writer_pretty(&mut file, header)?;
        file.write_all(b"\n")?;
        file.sync_all()?;
        File::create(self.lines_path(&header.id))?;
        Ok(())
    }

    pub fn append(&self, id: &str, lines: &[TraceLine]) -> Result<(), ExperimentError> {
        check_id(id)?;
        if lines.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for line in lines {
            serde_json::to_writer(&mut buf, line)?;
            buf.push(b'\n');
        }
        let mut file = OpenOptions::new().append(true).open(self.lines_path(id))?;
        file.write_all(&buf)?;
        file.sync_data()?;
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<SessionRecord, ExperimentError> {
        check_id(id)?;
        let sidecar = self.sidecar(id);
        if !sidecar.exists() {
            return Err(ExperimentError::NotFound(id.to_string()));
        }
        let header: SessionHeader = serde_json::from_reader(BufReader::new(File::open(sidecar)?))?;
        let mut lines = Vec::new();
        let path = self.lines_path(id);
        if path.exists() {
            for (i, text) in BufReader::new(File::open(path)?).lines().enumerate() {
                let text = text?;
                if text.trim().is_empty() {
                    continue;
                }
                let line = serde_json::from_str(&text).map_err(|e| ExperimentError::Trace {
                    session: id.to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                lines.push(line);
            }
        }
        Ok(SessionRecord { header, lines })
    }

    /// Session ids with a sidecar, sorted.
    pub fn ids(&self) -> Result<Vec<String>, ExperimentError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(SIDECAR)) {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn load_all(&self) -> Result<Vec<SessionRecord>, ExperimentError> {
        self.ids()?.iter().map(|id| self.load(id)).collect()
    }

    /// Writes a whole record at once, for batch output.
    pub fn save(&self, record: &SessionRecord) -> Result<(), ExperimentError> {
        self.create(&record.header)?;
        self.append(&record.header.id, &record.lines)
    }
}
