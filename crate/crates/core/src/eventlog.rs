//! Append-only JSONL logs and deterministic replay.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::SessionConfig;
use crate::error::{Error, Result};
use crate::event::{Event, EventRecord};
use crate::metrics::CodedValue;
use crate::session::SessionState;

/// Appends records to a log file, one line each, flushing every line.
#[derive(Debug)]
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(LogWriter { path, out: BufWriter::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &EventRecord) -> Result<()> {
        self.append_line(&record.to_json_line())
    }

    pub fn append_coded(&mut self, coded: &CodedValue) -> Result<()> {
        let line = serde_json::to_string(coded).expect("coded values serialize");
        self.append_line(&line)
    }

    fn append_line(&mut self, line: &str) -> Result<()> {
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Parses every complete line; a trailing line without its newline is a
/// write still in progress and is left for a later read.
pub fn parse_log(text: &str) -> Result<Vec<EventRecord>> {
    complete_lines(text).filter(|l| !l.trim().is_empty()).map(EventRecord::from_json_line).collect()
}

fn complete_lines(text: &str) -> impl Iterator<Item = &str> {
    let complete = match text.rfind('\n') {
        Some(end) => &text[..end],
        None => "",
    };
    complete.split('\n').filter(move |_| !complete.is_empty())
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<EventRecord>> {
    let text = std::fs::read_to_string(path)?;
    parse_log(&text)
}

pub fn write_log(path: impl AsRef<Path>, records: &[EventRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for rec in records {
        writeln!(out, "{}", rec.to_json_line())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<CodedValue>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let coded: CodedValue = serde_json::from_str(&line).map_err(|e| Error::malformed(e.to_string()))?;
        coded.validate()?;
        out.push(coded);
    }
    Ok(out)
}

/// The configuration carried by a log's setup record.
pub fn config_of(log: &[EventRecord]) -> Result<SessionConfig> {
    match log.first() {
        Some(EventRecord { event: Event::Configure(cfg), .. }) => Ok(cfg.clone()),
        _ => Err(Error::ConfigMismatch),
    }
}

/// Folds `log` over the initial state for `config`.
pub fn replay(log: &[EventRecord], config: &SessionConfig) -> Result<SessionState> {
    let mut state = SessionState::new(config.clone())?;
    for record in log {
        state.apply(record)?;
    }
    Ok(state)
}

/// Replays every prefix, yielding the state after each record.
pub fn replay_states<'a>(
    log: &'a [EventRecord],
    config: &SessionConfig,
) -> Result<impl Iterator<Item = Result<(&'a EventRecord, SessionState)>> + 'a> {
    let mut state = SessionState::new(config.clone())?;
    Ok(log.iter().map(move |rec| {
        state.apply(rec)?;
        Ok((rec, state.clone()))
    }))
}

/// Replays using the log's own setup record.
pub fn replay_log(log: &[EventRecord]) -> Result<SessionState> {
    replay(log, &config_of(log)?)
}
