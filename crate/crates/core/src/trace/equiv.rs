//! The ≡_A decision procedure: multiset equality, identical Sequential
//! subsequence, and matching ReadOnly epochs.

use std::collections::HashMap;

use super::{CallRecord, Trace};
use crate::control::Annotation;
use crate::error::TraceError;

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub call: CallRecord,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Equivalent,
    Inequivalent(Witness),
}

impl Verdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Verdict::Equivalent)
    }
}

type Key = (String, Vec<String>, usize);

/// Keys calls by (name, args, occurrence index).
fn keyed(calls: &[CallRecord]) -> Vec<Key> {
    let mut seen: HashMap<(&str, &[String]), usize> = HashMap::new();
    calls
        .iter()
        .map(|c| {
            let n = seen.entry((c.name.as_str(), c.args.as_slice())).or_default();
            *n += 1;
            (c.name.clone(), c.args.clone(), *n - 1)
        })
        .collect()
}

/// Decides whether `par` reorders `seq` only in ways the applied annotations allow.
pub fn traces_equivalent(par: &Trace, seq: &Trace) -> Result<Verdict, TraceError> {
    let a = par.dispatch_order()?;
    let b = seq.dispatch_order()?;
    Ok(calls_equivalent(&a, &b))
}

pub(crate) fn calls_equivalent(a: &[CallRecord], b: &[CallRecord]) -> Verdict {
    let ka = keyed(a);
    let kb = keyed(b);
    let index_b: HashMap<&Key, usize> = kb.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let index_a: HashMap<&Key, usize> = ka.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let bad = |c: &CallRecord, reason: &str| Verdict::Inequivalent(Witness { call: c.clone(), reason: reason.to_string() });

    for (i, k) in ka.iter().enumerate() {
        match index_b.get(k) {
            None => return bad(&a[i], "call absent from the other trace"),
            Some(&j) if b[j].annotation != a[i].annotation => return bad(&a[i], "annotation differs"),
            _ => {}
        }
    }
    for (j, k) in kb.iter().enumerate() {
        if !index_a.contains_key(k) {
            return bad(&b[j], "call missing from this trace");
        }
    }

    let seq_a: Vec<usize> = (0..a.len()).filter(|&i| a[i].annotation == Annotation::Sequential).collect();
    let seq_b: Vec<usize> = (0..b.len()).filter(|&j| b[j].annotation == Annotation::Sequential).collect();
    for (x, y) in seq_a.iter().zip(&seq_b) {
        if ka[*x] != kb[*y] {
            return bad(&a[*x], "sequential call out of order");
        }
    }

    let epochs = |calls: &[CallRecord], keys: &[Key]| -> HashMap<Key, usize> {
        let mut n = 0;
        let mut out = HashMap::new();
        for (c, k) in calls.iter().zip(keys) {
            match c.annotation {
                Annotation::Sequential => n += 1,
                Annotation::ReadOnly => {
                    out.insert(k.clone(), n);
                }
                Annotation::Unordered => {}
            }
        }
        out
    };
    let ea = epochs(a, &ka);
    let eb = epochs(b, &kb);
    for (i, k) in ka.iter().enumerate() {
        if a[i].annotation == Annotation::ReadOnly && ea.get(k) != eb.get(k) {
            return bad(&a[i], "read-only call crosses a sequential call");
        }
    }
    Verdict::Equivalent
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(id: u64, name: &str, ann: Annotation, arg: &str) -> CallRecord {
        CallRecord { call_id: id, name: name.into(), annotation: ann, args: vec![arg.into()] }
    }

    #[test]
    fn swapped_prints_are_rejected_with_witness() {
        use Annotation::*;
        let seq = vec![rec(1, "print", Sequential, "a"), rec(2, "print", Sequential, "b")];
        let par = vec![seq[1].clone(), seq[0].clone()];
        match calls_equivalent(&par, &seq) {
            Verdict::Inequivalent(w) => assert_eq!(w.call.args, vec!["b".to_string()]),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn unordered_may_cross_sequential() {
        use Annotation::*;
        let seq = vec![rec(1, "llm", Unordered, "a"), rec(2, "print", Sequential, "0"), rec(3, "llm", Unordered, "b")];
        let par = vec![seq[0].clone(), seq[2].clone(), seq[1].clone()];
        assert!(calls_equivalent(&par, &seq).is_equivalent());
    }

    #[test]
    fn readonly_epoch_is_checked() {
        use Annotation::*;
        let seq = vec![rec(1, "w", Sequential, "1"), rec(2, "r", ReadOnly, "x")];
        let par = vec![seq[1].clone(), seq[0].clone()];
        assert!(!calls_equivalent(&par, &seq).is_equivalent());
    }

    #[test]
    fn duplicate_calls_pair_positionally() {
        use Annotation::*;
        let seq = vec![rec(1, "print", Sequential, "dup"), rec(2, "llm", Unordered, "q"), rec(3, "print", Sequential, "dup")];
        let par = vec![seq[1].clone(), seq[0].clone(), seq[2].clone()];
        assert!(calls_equivalent(&par, &seq).is_equivalent());
    }
}
