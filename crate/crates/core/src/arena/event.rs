//! Vote events and their newline-delimited JSON log.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ExpertProfile;
use crate::ids::{ExpertId, MatchId, PromptId, ToolId};

/// The rater's forced choice. There is deliberately no tie variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Left,
    Right,
}

/// One immutable judgment. Field order is the canonical on-disk order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteEvent {
    pub event_id: u64,
    pub match_id: MatchId,
    pub expert_id: ExpertId,
    pub prompt_id: PromptId,
    pub tool_left: ToolId,
    pub tool_right: ToolId,
    pub choice: Choice,
    pub full_view_acknowledged: bool,
    pub latency_ms: u64,
    pub recorded_at: String,
}

impl VoteEvent {
    pub fn winner_loser(&self) -> (&ToolId, &ToolId) {
        match self.choice {
            Choice::Left => (&self.tool_left, &self.tool_right),
            Choice::Right => (&self.tool_right, &self.tool_left),
        }
    }

    /// Canonical single-line encoding, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("vote events are always serializable")
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("corrupt event log at line {line} (byte offset {offset}): {reason}")]
    Corrupt {
        line: usize,
        offset: u64,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parse an NDJSON event log. Blank lines are ignored; a final line without
/// its newline is treated as a torn write and reported as corrupt.
pub fn read_log(reader: impl Read) -> Result<Vec<VoteEvent>, LogError> {
    let mut reader = BufReader::new(reader);
    let mut events = Vec::new();
    let mut offset = 0u64;
    let mut line_no = 0usize;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let corrupt = |reason: String| LogError::Corrupt {
            line: line_no,
            offset,
            reason,
        };
        if buf.last() != Some(&b'\n') {
            return Err(corrupt("truncated record (missing newline)".into()));
        }
        let text = std::str::from_utf8(&buf[..n - 1])
            .map_err(|e| corrupt(format!("invalid UTF-8: {e}")))?;
        let text = text.strip_suffix('\r').unwrap_or(text);
        if !text.trim().is_empty() {
            let event: VoteEvent =
                serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
            let expected = events.len() as u64 + 1;
            if event.event_id != expected {
                return Err(corrupt(format!(
                    "event_id {} out of sequence (expected {expected})",
                    event.event_id
                )));
            }
            events.push(event);
        }
        offset += n as u64;
    }
    Ok(events)
}

pub fn read_log_file(path: &Path) -> Result<Vec<VoteEvent>, LogError> {
    match File::open(path) {
        Ok(f) => read_log(f),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

pub fn write_log(events: &[VoteEvent], mut out: impl Write) -> io::Result<()> {
    for e in events {
        out.write_all(e.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Durable storage behind the service: the vote log plus expert profiles.
pub trait Store: Send + Sync {
    fn append_vote(&mut self, event: &VoteEvent) -> io::Result<()>;
    fn save_profile(&mut self, profile: &ExpertProfile) -> io::Result<()>;
}

/// Keeps nothing; the service's in-memory log is the only copy.
#[derive(Debug, Default)]
pub struct MemoryStore;

impl Store for MemoryStore {
    fn append_vote(&mut self, _event: &VoteEvent) -> io::Result<()> {
        Ok(())
    }

    fn save_profile(&mut self, _profile: &ExpertProfile) -> io::Result<()> {
        Ok(())
    }
}

/// Append-only files: `<log>` for votes and `<log>.experts.jsonl` for
/// profiles. Each append is flushed and synced before returning.
#[derive(Debug)]
pub struct FileStore {
    log: File,
    profiles: File,
}

impl FileStore {
    pub fn open(log_path: &Path) -> io::Result<Self> {
        let append = |p: &Path| OpenOptions::new().create(true).append(true).open(p);
        Ok(Self {
            log: append(log_path)?,
            profiles: append(&Self::profiles_path(log_path))?,
        })
    }

    pub fn profiles_path(log_path: &Path) -> PathBuf {
        let mut name = log_path.as_os_str().to_owned();
        name.push(".experts.jsonl");
        PathBuf::from(name)
    }

    /// Load profiles written by a previous run; later lines win.
    pub fn read_profiles(log_path: &Path) -> io::Result<Vec<ExpertProfile>> {
        let path = Self::profiles_path(log_path);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut out = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            // a torn final write is dropped; the expert simply re-onboards
            if let Ok(p) = serde_json::from_str::<ExpertProfile>(&line) {
                out.push(p);
            }
        }
        Ok(out)
    }

    fn write_line(file: &mut File, line: &str) -> io::Result<()> {
        let mut bytes = Vec::with_capacity(line.len() + 1);
        bytes.extend_from_slice(line.as_bytes());
        bytes.push(b'\n');
        file.write_all(&bytes)?;
        file.sync_data()
    }
}

impl Store for FileStore {
    fn append_vote(&mut self, event: &VoteEvent) -> io::Result<()> {
        Self::write_line(&mut self.log, &event.to_line())
    }

    fn save_profile(&mut self, profile: &ExpertProfile) -> io::Result<()> {
        let line = serde_json::to_string(profile).map_err(io::Error::other)?;
        Self::write_line(&mut self.profiles, &line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn event(id: u64) -> VoteEvent {
        VoteEvent {
            event_id: id,
            match_id: MatchId::new(format!("m{id}")),
            expert_id: "x1".into(),
            prompt_id: "p01".into(),
            tool_left: "a".into(),
            tool_right: "b".into(),
            choice: if id % 2 == 0 { Choice::Left } else { Choice::Right },
            full_view_acknowledged: true,
            latency_ms: 1200,
            recorded_at: "2025-01-01T00:00:00Z".into(),
        }
    }

    fn encode(events: &[VoteEvent]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_log(events, &mut buf).unwrap();
        buf
    }

    #[test]
    fn canonical_field_order() {
        let line = event(1).to_line();
        assert_eq!(
            line,
            r#"{"event_id":1,"match_id":"m1","expert_id":"x1","prompt_id":"p01","tool_left":"a","tool_right":"b","choice":"right","full_view_acknowledged":true,"latency_ms":1200,"recorded_at":"2025-01-01T00:00:00Z"}"#
        );
    }

    #[test]
    fn reads_back_what_was_written() {
        let events: Vec<_> = (1..=5).map(event).collect();
        assert_eq!(read_log(&encode(&events)[..]).unwrap(), events);
        assert!(read_log(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn truncated_tail_reports_its_offset() {
        let events: Vec<_> = (1..=3).map(event).collect();
        let bytes = encode(&events);
        let cut = bytes.len() - 10;
        let expected_offset = encode(&events[..2]).len() as u64;
        match read_log(&bytes[..cut]) {
            Err(LogError::Corrupt { line, offset, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(offset, expected_offset);
            }
            other => panic!("expected corrupt log, got {other:?}"),
        }
    }

    #[test]
    fn gaps_and_reordering_are_corrupt() {
        let events = vec![event(1), event(3)];
        assert!(matches!(
            read_log(&encode(&events)[..]),
            Err(LogError::Corrupt { line: 2, .. })
        ));
        let events = vec![event(2)];
        assert!(matches!(
            read_log(&encode(&events)[..]),
            Err(LogError::Corrupt { line: 1, offset: 0, .. })
        ));
    }

    #[test]
    fn tie_or_unknown_fields_are_rejected() {
        let line = event(1).to_line().replace("\"right\"", "\"tie\"");
        assert!(read_log(format!("{line}\n").as_bytes()).is_err());
        let line = event(1).to_line().replace("\"event_id\"", "\"extra\":1,\"event_id\"");
        assert!(read_log(format!("{line}\n").as_bytes()).is_err());
    }

    #[test]
    fn file_store_appends_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("votes.ndjson");
        {
            let mut store = FileStore::open(&path).unwrap();
            store.append_vote(&event(1)).unwrap();
            store.append_vote(&event(2)).unwrap();
        }
        let mut store = FileStore::open(&path).unwrap();
        store.append_vote(&event(3)).unwrap();
        let back = read_log_file(&path).unwrap();
        assert_eq!(back.len(), 3);
        assert!(read_log_file(&dir.path().join("missing")).unwrap().is_empty());
    }
}
