//! Annotations and the read/write signal protocol that orders external calls.

mod signals;

pub use signals::{SignalArena, SignalId, Waiter};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::runtime::value::Value;

/// Reorderability class of an external. Ordered from least to most permissive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Annotation {
    Sequential,
    ReadOnly,
    Unordered,
}

impl Annotation {
    pub const ALL: [Annotation; 3] = [Annotation::Sequential, Annotation::ReadOnly, Annotation::Unordered];

    pub fn as_str(self) -> &'static str {
        match self {
            Annotation::Sequential => "sequential",
            Annotation::ReadOnly => "readonly",
            Annotation::Unordered => "unordered",
        }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Annotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Annotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for Annotation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sequential" => Ok(Annotation::Sequential),
            "readonly" => Ok(Annotation::ReadOnly),
            "unordered" => Ok(Annotation::Unordered),
            _ => Err(format!("unknown annotation `{s}`")),
        }
    }
}

/// How an external's annotation is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationPolicy {
    Static(Annotation),
    /// Unordered if every argument is immutable, ReadOnly otherwise.
    Operator,
    /// Unordered if both sides immutable, ReadOnly if only the right side is
    /// mutable, Sequential if the left side is mutable.
    InPlace,
    /// Sequential when the first argument (the receiver) is mutable, otherwise `Operator`.
    Mutator,
    /// `callmethod(obj, attr, ...)`: `Mutator` if `attr` mutates `obj`'s type, otherwise `Operator`.
    Method,
}

impl AnnotationPolicy {
    pub fn is_static(self) -> Option<Annotation> {
        match self {
            AnnotationPolicy::Static(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnnotationTable {
    entries: HashMap<String, AnnotationPolicy>,
}

impl AnnotationTable {
    pub fn insert(&mut self, name: impl Into<String>, policy: AnnotationPolicy) {
        self.entries.insert(name.into(), policy);
    }

    pub fn get(&self, name: &str) -> Option<AnnotationPolicy> {
        self.entries.get(name).copied()
    }

    /// Unknown names fall back to Sequential.
    pub fn policy(&self, name: &str) -> AnnotationPolicy {
        self.get(name).unwrap_or(AnnotationPolicy::Static(Annotation::Sequential))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

pub fn apply_policy(policy: AnnotationPolicy, args: &[Value]) -> Annotation {
    let any_mut = || args.iter().any(Value::is_mutable);
    match policy {
        AnnotationPolicy::Static(a) => a,
        AnnotationPolicy::Operator => {
            if any_mut() {
                Annotation::ReadOnly
            } else {
                Annotation::Unordered
            }
        }
        AnnotationPolicy::InPlace => {
            let left = args.first().is_some_and(Value::is_mutable);
            let right = args.iter().skip(1).any(Value::is_mutable);
            if left {
                Annotation::Sequential
            } else if right {
                Annotation::ReadOnly
            } else {
                Annotation::Unordered
            }
        }
        AnnotationPolicy::Mutator => {
            if args.first().is_some_and(Value::is_mutable) {
                Annotation::Sequential
            } else {
                apply_policy(AnnotationPolicy::Operator, args)
            }
        }
        AnnotationPolicy::Method => {
            let mutates = match args {
                [recv, Value::Text(attr), ..] => {
                    crate::library::MUTATING_METHODS.contains(&format!("{}.{attr}", recv.type_name()).as_str())
                }
                _ => false,
            };
            let p = if mutates { AnnotationPolicy::Mutator } else { AnnotationPolicy::Operator };
            apply_policy(p, args)
        }
    }
}

/// Annotation applied to a call of `name` with resolved `args`.
pub fn resolve_annotation(name: &str, args: &[Value], table: &AnnotationTable) -> Annotation {
    apply_policy(table.policy(name), args)
}

/// Runtime content of a sequence variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqToken {
    /// Position along the sequence chain; equals the sequential order of the call consuming it.
    pub index: u64,
    /// Fulfilled once every preceding Sequential call has resolved.
    pub fr: SignalId,
    /// Fulfilled once every preceding Sequential and ReadOnly call has resolved.
    pub fw: SignalId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Queued,
    Dispatched,
    Resolved,
}

/// Per-call controller state.
#[derive(Debug, Clone)]
pub struct Controller {
    pub call_id: u64,
    pub s_in: SeqToken,
    pub s_out: SeqToken,
    /// The annotation recorded in the trace.
    pub annotation: Option<Annotation>,
    /// The protocol actually enforced. Differs from `annotation` only in oracle mode.
    pub protocol: Option<Annotation>,
    pub phase: Phase,
}

/// What a controller needs before it can dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Ready,
    Wait(SignalId),
}

impl Controller {
    pub fn new(call_id: u64, s_in: SeqToken, s_out: SeqToken) -> Self {
        Controller { call_id, s_in, s_out, annotation: None, protocol: None, phase: Phase::Queued }
    }

    /// Fixes the annotation and performs the forwarding the protocol allows before dispatch.
    pub fn set_annotation(&mut self, annotation: Annotation, protocol: Annotation, sigs: &mut SignalArena) {
        debug_assert!(self.protocol.is_none());
        self.annotation = Some(annotation);
        self.protocol = Some(protocol);
        match protocol {
            Annotation::Unordered => {
                sigs.link(self.s_out.fr, self.s_in.fr);
                sigs.link(self.s_out.fw, self.s_in.fw);
            }
            Annotation::ReadOnly => sigs.link(self.s_out.fr, self.s_in.fr),
            Annotation::Sequential => {}
        }
    }

    /// Signal gate for dispatch, assuming data arguments are resolved.
    pub fn dispatch_gate(&self, sigs: &SignalArena) -> Gate {
        let need: &[SignalId] = match self.protocol.expect("annotation not set") {
            Annotation::Unordered => &[],
            Annotation::ReadOnly => std::slice::from_ref(&self.s_in.fr),
            Annotation::Sequential => &[self.s_in.fw, self.s_in.fr],
        };
        for &s in need {
            if !sigs.is_fulfilled(s) {
                return Gate::Wait(s);
            }
        }
        Gate::Ready
    }

    /// Out-signal bookkeeping once the backend result is in.
    pub fn on_resolve(&mut self, sigs: &mut SignalArena) {
        self.phase = Phase::Resolved;
        match self.protocol.expect("annotation not set") {
            Annotation::Sequential => {
                sigs.fulfill(self.s_out.fr);
                sigs.fulfill(self.s_out.fw);
            }
            Annotation::ReadOnly => sigs.link(self.s_out.fw, self.s_in.fw),
            Annotation::Unordered => {}
        }
    }

    /// Releases any out-signal not yet scheduled, so an aborting run cannot leave waiters behind.
    pub fn release(&mut self, sigs: &mut SignalArena) {
        match self.protocol {
            None => {
                sigs.fulfill_if_pending(self.s_out.fr);
                sigs.fulfill_if_pending(self.s_out.fw);
            }
            Some(Annotation::Sequential) if self.phase != Phase::Resolved => {
                sigs.fulfill_if_pending(self.s_out.fr);
                sigs.fulfill_if_pending(self.s_out.fw);
            }
            Some(Annotation::ReadOnly) if self.phase != Phase::Resolved => {
                sigs.fulfill_if_pending(self.s_out.fw);
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::value::Obj;

    fn list() -> Value {
        Value::List(Obj::new(1, vec![]))
    }

    fn tup() -> Value {
        Value::tuple(vec![Value::text("a")])
    }

    #[test]
    fn inplace_policy() {
        assert_eq!(apply_policy(AnnotationPolicy::InPlace, &[tup(), tup()]), Annotation::Unordered);
        assert_eq!(apply_policy(AnnotationPolicy::InPlace, &[list(), tup()]), Annotation::Sequential);
        assert_eq!(apply_policy(AnnotationPolicy::InPlace, &[tup(), list()]), Annotation::ReadOnly);
    }

    #[test]
    fn operator_policy() {
        let fs = Value::frozenset(vec![]).unwrap();
        assert_eq!(apply_policy(AnnotationPolicy::Operator, &[fs.clone(), list()]), Annotation::ReadOnly);
        assert_eq!(apply_policy(AnnotationPolicy::Operator, &[fs, tup()]), Annotation::Unordered);
    }

    #[test]
    fn permissiveness_order() {
        assert!(Annotation::Sequential < Annotation::ReadOnly);
        assert!(Annotation::ReadOnly < Annotation::Unordered);
    }

    fn token(sigs: &mut SignalArena, index: u64) -> SeqToken {
        SeqToken { index, fr: sigs.create(), fw: sigs.create() }
    }

    #[test]
    fn sequential_waits_and_fulfills() {
        let mut sigs = SignalArena::default();
        let s0 = token(&mut sigs, 0);
        let s1 = token(&mut sigs, 1);
        let mut c = Controller::new(0, s0, s1);
        c.set_annotation(Annotation::Sequential, Annotation::Sequential, &mut sigs);
        assert_eq!(c.dispatch_gate(&sigs), Gate::Wait(s0.fw));
        sigs.fulfill(s0.fw);
        assert_eq!(c.dispatch_gate(&sigs), Gate::Wait(s0.fr));
        sigs.fulfill(s0.fr);
        assert_eq!(c.dispatch_gate(&sigs), Gate::Ready);
        assert!(!sigs.is_fulfilled(s1.fr));
        c.on_resolve(&mut sigs);
        assert!(sigs.is_fulfilled(s1.fr) && sigs.is_fulfilled(s1.fw));
        assert_eq!(sigs.created(), sigs.fulfilled());
    }

    #[test]
    fn readonly_forwards_read_signal_before_resolving() {
        let mut sigs = SignalArena::default();
        let s0 = token(&mut sigs, 0);
        let s1 = token(&mut sigs, 1);
        let mut c = Controller::new(0, s0, s1);
        c.set_annotation(Annotation::ReadOnly, Annotation::ReadOnly, &mut sigs);
        sigs.fulfill(s0.fr);
        assert!(sigs.is_fulfilled(s1.fr));
        assert_eq!(c.dispatch_gate(&sigs), Gate::Ready);
        c.on_resolve(&mut sigs);
        assert!(!sigs.is_fulfilled(s1.fw));
        sigs.fulfill(s0.fw);
        assert!(sigs.is_fulfilled(s1.fw));
    }

    #[test]
    fn unordered_links_both() {
        let mut sigs = SignalArena::default();
        let s0 = token(&mut sigs, 0);
        let s1 = token(&mut sigs, 1);
        let mut c = Controller::new(0, s0, s1);
        c.set_annotation(Annotation::Unordered, Annotation::Unordered, &mut sigs);
        assert_eq!(c.dispatch_gate(&sigs), Gate::Ready);
        sigs.fulfill(s0.fw);
        assert!(sigs.is_fulfilled(s1.fw) && !sigs.is_fulfilled(s1.fr));
        sigs.fulfill(s0.fr);
        assert!(sigs.is_fulfilled(s1.fr));
    }
}
