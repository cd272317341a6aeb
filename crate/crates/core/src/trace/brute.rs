//! Exhaustive ≡_A check by search over annotation-allowed adjacent swaps.

use std::collections::{HashSet, VecDeque};

use super::CallRecord;
use crate::control::Annotation;

fn may_swap(x: Annotation, y: Annotation) -> bool {
    use Annotation::*;
    !matches!((x, y), (Sequential, Sequential) | (Sequential, ReadOnly) | (ReadOnly, Sequential))
}

/// True when `b` is reachable from `a` by swapping adjacent calls that commute.
/// Intended for short traces (at most about 8 calls).
pub fn brute_force_equivalent(a: &[CallRecord], b: &[CallRecord]) -> bool {
    let ident = |c: &CallRecord| (c.name.clone(), c.args.clone(), c.annotation);
    let start: Vec<_> = a.iter().map(ident).collect();
    let goal: Vec<_> = b.iter().map(ident).collect();
    if start.len() != goal.len() {
        return false;
    }
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    while let Some(cur) = queue.pop_front() {
        if cur == goal {
            return true;
        }
        for i in 0..cur.len().saturating_sub(1) {
            if may_swap(cur[i].2, cur[i + 1].2) {
                let mut next = cur.clone();
                next.swap(i, i + 1);
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::equiv::calls_equivalent;
    use proptest::prelude::*;

    fn ann() -> impl Strategy<Value = Annotation> {
        prop_oneof![Just(Annotation::Sequential), Just(Annotation::ReadOnly), Just(Annotation::Unordered)]
    }

    fn calls() -> impl Strategy<Value = Vec<CallRecord>> {
        prop::collection::vec((0..3u8, ann()), 0..7).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (n, a))| CallRecord {
                    call_id: i as u64 + 1,
                    name: format!("f{}", a.as_str()),
                    annotation: a,
                    args: vec![n.to_string()],
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn epoch_check_agrees_with_search(a in calls(), perm in any::<prop::sample::Index>(), seed in any::<u64>()) {
            // Candidate: a random permutation of `a`.
            let mut b = a.clone();
            let n = b.len();
            if n > 1 {
                let mut s = seed;
                for i in (1..n).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let j = (s >> 33) as usize % (i + 1);
                    b.swap(i, j);
                }
                let k = perm.index(n);
                b.rotate_left(k % n);
            }
            prop_assert_eq!(calls_equivalent(&b, &a).is_equivalent(), brute_force_equivalent(&a, &b));
        }

        #[test]
        fn equivalence_is_reflexive_and_symmetric(a in calls(), seed in any::<u64>()) {
            prop_assert!(calls_equivalent(&a, &a).is_equivalent());
            let mut b = a.clone();
            if b.len() > 1 {
                let j = (seed as usize) % b.len();
                b.swap(0, j);
            }
            prop_assert_eq!(calls_equivalent(&a, &b).is_equivalent(), calls_equivalent(&b, &a).is_equivalent());
        }

        #[test]
        fn equivalence_is_transitive(a in calls(), s1 in any::<u64>(), s2 in any::<u64>()) {
            let shuffle = |v: &Vec<CallRecord>, mut s: u64| {
                let mut w = v.clone();
                for i in (1..w.len()).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    w.swap(i, (s >> 33) as usize % (i + 1));
                }
                w
            };
            let b = shuffle(&a, s1);
            let c = shuffle(&b, s2);
            if calls_equivalent(&a, &b).is_equivalent() && calls_equivalent(&b, &c).is_equivalent() {
                prop_assert!(calls_equivalent(&a, &c).is_equivalent());
            }
        }
    }
}
