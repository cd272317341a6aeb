//! Built-in externals: data operators, methods of core types, and backends.

mod backend;
mod builtins;
mod config;
mod render;

pub(crate) use backend::write_stdout;
pub use backend::{file_call, http_call, mock_latency, mock_reply, stdout_line};
pub(crate) use builtins::iter_items;
pub use builtins::{call_builtin, getattr_method};
pub use config::{value_from_json, value_to_json, BackendSpec, FileMode, ReplyRule, RuntimeConfig, DEFAULT_MAX_IN_FLIGHT};
pub use render::canonical_render;

use crate::control::{Annotation, AnnotationPolicy, AnnotationTable};
use crate::frontend::ast::{BinOp, CmpOp, UnaryOp};

/// Operator functions emitted by desugaring: binary, comparison, unary, and `getitem`.
pub fn operator_names() -> Vec<&'static str> {
    let mut out: Vec<&'static str> = BinOp::ALL.iter().map(|o| o.operator_name()).collect();
    out.extend(CmpOp::ALL.iter().map(|o| o.operator_name()));
    out.extend(UnaryOp::ALL.iter().map(|o| o.operator_name()));
    out.push("getitem");
    out
}

pub fn inplace_names() -> Vec<&'static str> {
    BinOp::ALL.iter().map(|o| o.inplace_name()).collect()
}

/// Plain builtins with the Operator policy.
pub const FUNCTIONS: &[&str] = &[
    "make_tuple",
    "make_frozenset",
    "unpack",
    "to_sequence",
    "format",
    "concat",
    "range",
    "enumerate",
    "len",
    "topk",
    "tuple",
    "frozenset",
    "list",
    "dict",
    "str",
    "int",
    "float",
    "bool",
    "min",
    "max",
    "sum",
    "sorted",
    "zip",
    "abs",
    "repr",
    "getattr",
];

/// Methods of immutable core types, reached through `getattr`.
pub const IMMUTABLE_METHODS: &[&str] = &[
    "str.upper",
    "str.lower",
    "str.strip",
    "str.split",
    "str.join",
    "str.startswith",
    "str.endswith",
    "str.replace",
    "str.find",
    "str.count",
    "str.isdigit",
    "tuple.index",
    "tuple.count",
    "frozenset.union",
    "frozenset.intersection",
    "frozenset.difference",
    "frozenset.issubset",
    "int.bit_length",
    "float.is_integer",
    "bool.bit_length",
];

/// Methods of mutable types that only read their receiver.
pub const READING_METHODS: &[&str] = &["list.index", "list.count", "list.copy", "dict.get", "dict.keys", "dict.values", "dict.items"];

/// Methods that mutate their receiver.
pub const MUTATING_METHODS: &[&str] =
    &["list.append", "list.extend", "list.pop", "list.insert", "list.remove", "list.clear", "dict.update"];

/// Names that resolve to a library function when no scope declares them.
pub fn is_library_name(name: &str) -> bool {
    name == "print"
        || FUNCTIONS.contains(&name)
        || operator_names().contains(&name)
        || inplace_names().contains(&name)
        || matches!(name, "setattr" | "setitem")
}

/// The shipped annotation table.
pub fn annotation_table() -> AnnotationTable {
    let mut t = AnnotationTable::default();
    for n in operator_names() {
        t.insert(n, AnnotationPolicy::Operator);
    }
    for n in inplace_names() {
        t.insert(n, AnnotationPolicy::InPlace);
    }
    for n in FUNCTIONS.iter().chain(IMMUTABLE_METHODS).chain(READING_METHODS) {
        t.insert(*n, AnnotationPolicy::Operator);
    }
    for n in MUTATING_METHODS.iter().chain(&["setattr", "setitem"]) {
        t.insert(*n, AnnotationPolicy::Mutator);
    }
    t.insert(crate::mutation_opt::CALLMETHOD, AnnotationPolicy::Method);
    t.insert("print", AnnotationPolicy::Static(Annotation::Sequential));
    t
}

/// True when `name` has a builtin data implementation.
pub fn is_builtin(name: &str) -> bool {
    name == crate::mutation_opt::CALLMETHOD
        || name != "print"
            && (is_library_name(name)
                || IMMUTABLE_METHODS.contains(&name)
                || READING_METHODS.contains(&name)
                || MUTATING_METHODS.contains(&name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::apply_policy;
    use crate::runtime::value::{Obj, Value};

    #[test]
    fn operator_counts() {
        assert_eq!(operator_names().len(), 28);
        assert_eq!(inplace_names().len(), 13);
    }

    #[test]
    fn every_desugared_operator_has_an_entry() {
        let t = annotation_table();
        for n in operator_names().into_iter().chain(inplace_names()) {
            assert!(t.contains(n), "{n}");
        }
        for n in ["getattr", "setattr", "setitem", "make_tuple", "make_frozenset", "unpack", "to_sequence", "format", "concat"] {
            assert!(t.contains(n), "{n}");
        }
    }

    #[test]
    fn dynamic_annotations() {
        let t = annotation_table();
        let tup = Value::tuple(vec![Value::text("a")]);
        let list = Value::List(Obj::new(1, vec![]));
        let fs = Value::frozenset(vec![]).unwrap();
        assert_eq!(apply_policy(t.policy("iadd"), &[tup.clone(), tup.clone()]), Annotation::Unordered);
        assert_eq!(apply_policy(t.policy("iadd"), &[list.clone(), tup.clone()]), Annotation::Sequential);
        assert_eq!(apply_policy(t.policy("iadd"), &[tup.clone(), list.clone()]), Annotation::ReadOnly);
        assert_eq!(apply_policy(t.policy("eq"), &[fs, list.clone()]), Annotation::ReadOnly);
        assert_eq!(apply_policy(t.policy("list.append"), &[list.clone(), tup.clone()]), Annotation::Sequential);
        assert_eq!(apply_policy(t.policy("getattr"), &[list.clone(), Value::text("append")]), Annotation::ReadOnly);
        assert_eq!(apply_policy(t.policy("setitem"), &[list, Value::Int(0), tup]), Annotation::Sequential);
        assert_eq!(apply_policy(t.policy("print"), &[]), Annotation::Sequential);
        assert_eq!(apply_policy(t.policy("my_unknown"), &[]), Annotation::Sequential);
    }
}
