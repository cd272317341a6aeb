//! Execution traces of external calls and the ≡_A equivalence check.

mod brute;
mod equiv;
pub mod reference;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::control::{Annotation, Phase};
use crate::error::TraceError;

pub use brute::brute_force_equivalent;
pub use equiv::{traces_equivalent, Verdict, Witness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventPhase {
    Queued,
    Dispatched,
    Resolved,
}

impl From<Phase> for EventPhase {
    fn from(p: Phase) -> Self {
        match p {
            Phase::Queued => EventPhase::Queued,
            Phase::Dispatched => EventPhase::Dispatched,
            Phase::Resolved => EventPhase::Resolved,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub seq: u64,
    pub call_id: u64,
    pub phase: EventPhase,
    pub name: String,
    /// The annotation applied; unknown for a call still waiting on its arguments.
    pub annotation: Option<Annotation>,
    pub args: Vec<String>,
    pub t_ms: f64,
}

/// One external call as seen in dispatch order.
#[derive(Debug, Clone, PartialEq)]
pub struct CallRecord {
    pub call_id: u64,
    pub name: String,
    pub annotation: Annotation,
    pub args: Vec<String>,
}

impl std::fmt::Display for CallRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{} {}({}) [{}]", self.call_id, self.name, self.args.join(", "), self.annotation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelineEntry {
    pub call_id: u64,
    pub name: String,
    pub annotation: Option<Annotation>,
    pub queued_ms: Option<f64>,
    pub dispatched_ms: Option<f64>,
    pub resolved_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(
        &mut self,
        call_id: u64,
        phase: EventPhase,
        name: &str,
        annotation: Option<Annotation>,
        args: Vec<String>,
        t_ms: f64,
    ) -> usize {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent { seq, call_id, phase, name: name.to_string(), annotation, args, t_ms });
        self.events.len() - 1
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, TraceError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: TraceEvent = serde_json::from_str(line).map_err(|e| TraceError::Malformed { line: i + 1, message: e.to_string() })?;
            events.push(e);
        }
        Ok(Trace { events })
    }

    /// Calls in dispatch order. Fails if some queued call never resolved.
    pub fn dispatch_order(&self) -> Result<Vec<CallRecord>, TraceError> {
        let mut resolved = std::collections::HashSet::new();
        for e in &self.events {
            if e.phase == EventPhase::Resolved {
                resolved.insert(e.call_id);
            }
        }
        for e in &self.events {
            if e.phase == EventPhase::Queued && !resolved.contains(&e.call_id) {
                return Err(TraceError::IncompleteTrace { call_id: e.call_id, name: e.name.clone() });
            }
        }
        let mut out = Vec::new();
        for e in &self.events {
            if e.phase == EventPhase::Dispatched {
                let annotation = e.annotation.ok_or_else(|| TraceError::Malformed {
                    line: e.seq as usize + 1,
                    message: "dispatched call without annotation".into(),
                })?;
                out.push(CallRecord { call_id: e.call_id, name: e.name.clone(), annotation, args: e.args.clone() });
            }
        }
        Ok(out)
    }

    /// One record per call with its phase timestamps, by call id.
    pub fn timeline(&self) -> Vec<TimelineEntry> {
        let mut by_id: BTreeMap<u64, TimelineEntry> = BTreeMap::new();
        for e in &self.events {
            let t = by_id.entry(e.call_id).or_insert_with(|| TimelineEntry {
                call_id: e.call_id,
                name: e.name.clone(),
                annotation: None,
                queued_ms: None,
                dispatched_ms: None,
                resolved_ms: None,
            });
            if e.annotation.is_some() {
                t.annotation = e.annotation;
            }
            match e.phase {
                EventPhase::Queued => t.queued_ms = Some(e.t_ms),
                EventPhase::Dispatched => t.dispatched_ms = Some(e.t_ms),
                EventPhase::Resolved => t.resolved_ms = Some(e.t_ms),
            }
        }
        by_id.into_values().collect()
    }

    /// Events for calls named `name` in the given phase.
    pub fn events_of<'a>(&'a self, name: &'a str, phase: EventPhase) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events.iter().filter(move |e| e.name == name && e.phase == phase)
    }

    pub fn count(&self, phase: EventPhase) -> usize {
        self.events.iter().filter(|e| e.phase == phase).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_and_keys() {
        let mut t = Trace::default();
        t.push(1, EventPhase::Queued, "llm", Some(Annotation::Unordered), vec!["text:\"a\"".into()], 0.0);
        t.push(1, EventPhase::Dispatched, "llm", Some(Annotation::Unordered), vec!["text:\"a\"".into()], 0.5);
        t.push(1, EventPhase::Resolved, "llm", Some(Annotation::Unordered), vec!["text:\"a\"".into()], 100.5);
        let text = t.to_jsonl();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let keys: Vec<&String> = first.as_object().unwrap().keys().collect();
        for k in ["seq", "call_id", "phase", "name", "annotation", "args", "t_ms"] {
            assert!(keys.iter().any(|x| *x == k), "{k}");
        }
        assert_eq!(first["phase"], "queued");
        assert_eq!(first["annotation"], "unordered");
        assert_eq!(Trace::from_jsonl(&text).unwrap(), t);
        assert_eq!(t.timeline()[0].resolved_ms, Some(100.5));
    }

    #[test]
    fn unresolved_call_is_incomplete() {
        let mut t = Trace::default();
        t.push(3, EventPhase::Queued, "print", None, vec![], 0.0);
        assert!(matches!(t.dispatch_order(), Err(TraceError::IncompleteTrace { call_id: 3, .. })));
    }
}
