use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::structure::{CreationEvent, CreationKind};
use crate::{Error, Result};

/// Structural events of one run, one `<stream_index>,<rule_index>,<kind>`
/// line each when serialised.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DriftTrace {
    events: Vec<CreationEvent>,
}

impl DriftTrace {
    pub fn new(events: Vec<CreationEvent>) -> Result<Self> {
        for w in events.windows(2) {
            if w[1].stream_index <= w[0].stream_index {
                return Err(Error::TraceMismatch(format!(
                    "stream indices must increase strictly ({} then {})",
                    w[0].stream_index, w[1].stream_index
                )));
            }
        }
        Ok(DriftTrace { events })
    }

    pub fn events(&self) -> &[CreationEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: CreationKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub(crate) fn by_index(&self) -> BTreeMap<u64, CreationEvent> {
        self.events.iter().map(|e| (e.stream_index, *e)).collect()
    }

    pub(crate) fn push(&mut self, event: CreationEvent) {
        debug_assert!(self.events.last().is_none_or(|l| l.stream_index < event.stream_index));
        self.events.push(event);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(out, "{},{},{}", e.stream_index, e.rule_index, e.kind);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut events = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: idx + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let stream_index = fields[0].parse().map_err(|_| err(format!("bad stream index {:?}", fields[0])))?;
            let rule_index = fields[1].parse().map_err(|_| err(format!("bad rule index {:?}", fields[1])))?;
            let kind = fields[2].parse().map_err(err)?;
            events.push(CreationEvent { stream_index, rule_index, kind });
        }
        DriftTrace::new(events)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DriftTrace::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
