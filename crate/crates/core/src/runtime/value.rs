//! Runtime values.

use std::any::Any;
use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::rc::Rc;

use crate::control::SeqToken;

/// Key of a mutable variable in memory: name plus frame id (0 for module scope).
pub type MemKey = (Rc<str>, u64);
pub type Memory = im_rc::HashMap<MemKey, Value>;

/// A mutable heap object with a stable serial.
#[derive(Debug)]
pub struct Obj<T> {
    pub serial: u64,
    pub data: RefCell<T>,
}

impl<T> Obj<T> {
    pub fn new(serial: u64, data: T) -> Rc<Self> {
        Rc::new(Obj { serial, data: RefCell::new(data) })
    }
}

/// A first-class internal function. The body is interpreter-specific.
pub struct Closure {
    pub name: String,
    pub body: Rc<dyn Any>,
}

impl fmt::Debug for Closure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<function {}>", self.name)
    }
}

/// A reference to an external function, optionally bound to a receiver.
#[derive(Debug, Clone)]
pub struct ExtFn {
    pub name: String,
    pub bound: Option<Value>,
}

#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(Rc<str>),
    Bool(bool),
    None,
    Tuple(Rc<Vec<Value>>),
    /// Elements kept sorted by `order_cmp` and deduplicated by `py_eq`.
    FrozenSet(Rc<Vec<Value>>),
    List(Rc<Obj<Vec<Value>>>),
    Map(Rc<Obj<Vec<(Value, Value)>>>),
    Closure(Rc<Closure>),
    Ext(Rc<ExtFn>),
    Seq(SeqToken),
    Memory(Memory),
    Unbound,
    Frame(u64),
}

impl Value {
    pub fn text(s: impl Into<Rc<str>>) -> Value {
        Value::Text(s.into())
    }

    pub fn tuple(items: Vec<Value>) -> Value {
        Value::Tuple(Rc::new(items))
    }

    pub fn frozenset(mut items: Vec<Value>) -> Result<Value, String> {
        for v in &items {
            if !v.is_hashable() {
                return Err(format!("TypeError: unhashable type: '{}'", v.type_name()));
            }
        }
        items.sort_by(order_cmp);
        items.dedup_by(|a, b| py_eq(a, b));
        Ok(Value::FrozenSet(Rc::new(items)))
    }

    pub fn ext(name: impl Into<String>) -> Value {
        Value::Ext(Rc::new(ExtFn { name: name.into(), bound: None }))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Text(_) => "str",
            Value::Bool(_) => "bool",
            Value::None => "NoneType",
            Value::Tuple(_) => "tuple",
            Value::FrozenSet(_) => "frozenset",
            Value::List(_) => "list",
            Value::Map(_) => "dict",
            Value::Closure(_) => "function",
            Value::Ext(_) => "builtin_function_or_method",
            Value::Seq(_) => "seqtoken",
            Value::Memory(_) => "memory",
            Value::Unbound => "unbound",
            Value::Frame(_) => "frame",
        }
    }

    /// Deep mutability: an immutable container holding a mutable object counts as mutable.
    pub fn is_mutable(&self) -> bool {
        match self {
            Value::List(_) | Value::Map(_) => true,
            Value::Tuple(items) | Value::FrozenSet(items) => items.iter().any(Value::is_mutable),
            Value::Ext(e) => e.bound.as_ref().is_some_and(Value::is_mutable),
            _ => false,
        }
    }

    pub fn is_hashable(&self) -> bool {
        match self {
            Value::List(_) | Value::Map(_) => false,
            Value::Tuple(items) => items.iter().all(Value::is_hashable),
            _ => true,
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::Int(i) => *i != 0,
            Value::Float(f) => *f != 0.0,
            Value::Text(s) => !s.is_empty(),
            Value::Bool(b) => *b,
            Value::None | Value::Unbound => false,
            Value::Tuple(items) | Value::FrozenSet(items) => !items.is_empty(),
            Value::List(l) => !l.data.borrow().is_empty(),
            Value::Map(m) => !m.data.borrow().is_empty(),
            _ => true,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            Value::Bool(b) => Some(*b as i64 as f64),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Bool(b) => Some(*b as i64),
            _ => None,
        }
    }

    /// Python `str()`.
    pub fn py_str(&self) -> String {
        match self {
            Value::Text(s) => s.to_string(),
            _ => self.py_repr(),
        }
    }

    /// Python `repr()`.
    pub fn py_repr(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Float(f) => float_repr(*f),
            Value::Text(s) => text_repr(s),
            Value::Bool(true) => "True".into(),
            Value::Bool(false) => "False".into(),
            Value::None => "None".into(),
            Value::Tuple(items) => {
                let inner: Vec<String> = items.iter().map(Value::py_repr).collect();
                if inner.len() == 1 {
                    format!("({},)", inner[0])
                } else {
                    format!("({})", inner.join(", "))
                }
            }
            Value::FrozenSet(items) => {
                if items.is_empty() {
                    "frozenset()".into()
                } else {
                    let inner: Vec<String> = items.iter().map(Value::py_repr).collect();
                    format!("frozenset({{{}}})", inner.join(", "))
                }
            }
            Value::List(l) => {
                let inner: Vec<String> = l.data.borrow().iter().map(Value::py_repr).collect();
                format!("[{}]", inner.join(", "))
            }
            Value::Map(m) => {
                let inner: Vec<String> = m.data.borrow().iter().map(|(k, v)| format!("{}: {}", k.py_repr(), v.py_repr())).collect();
                format!("{{{}}}", inner.join(", "))
            }
            Value::Closure(c) => format!("<function {}>", c.name),
            Value::Ext(e) => format!("<built-in function {}>", e.name),
            Value::Seq(t) => format!("<seq {}>", t.index),
            Value::Memory(m) => format!("<memory {} entries>", m.len()),
            Value::Unbound => "<unbound>".into(),
            Value::Frame(id) => format!("<frame {id}>"),
        }
    }
}

pub fn float_repr(f: f64) -> String {
    if f.is_nan() {
        return "nan".into();
    }
    if f.is_infinite() {
        return if f > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = f.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) {
        let s = format!("{f}");
        if s.contains('.') {
            s
        } else {
            format!("{s}.0")
        }
    } else {
        let s = format!("{f:e}");
        let (mant, exp) = s.split_once('e').unwrap();
        let exp: i32 = exp.parse().unwrap();
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    }
}

pub fn text_repr(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || c as u32 == 0x7f => out.push_str(&format!("\\x{:02x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

/// Python `==`.
pub fn py_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Text(x), Value::Text(y)) => x == y,
        (Value::None, Value::None) => true,
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Tuple(x), Value::Tuple(y)) => x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| py_eq(p, q)),
        (Value::FrozenSet(x), Value::FrozenSet(y)) => x.len() == y.len() && x.iter().all(|p| y.iter().any(|q| py_eq(p, q))),
        (Value::List(x), Value::List(y)) => {
            Rc::ptr_eq(x, y) || {
                let (x, y) = (x.data.borrow(), y.data.borrow());
                x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| py_eq(p, q))
            }
        }
        (Value::Map(x), Value::Map(y)) => {
            Rc::ptr_eq(x, y) || {
                let (x, y) = (x.data.borrow(), y.data.borrow());
                x.len() == y.len() && x.iter().all(|(k, v)| y.iter().any(|(k2, v2)| py_eq(k, k2) && py_eq(v, v2)))
            }
        }
        (Value::Closure(x), Value::Closure(y)) => Rc::ptr_eq(x, y),
        (Value::Ext(x), Value::Ext(y)) => {
            x.name == y.name
                && match (&x.bound, &y.bound) {
                    (None, None) => true,
                    (Some(p), Some(q)) => py_eq(p, q),
                    _ => false,
                }
        }
        (Value::Unbound, Value::Unbound) => true,
        (Value::Frame(x), Value::Frame(y)) => x == y,
        _ => match (a.as_number(), b.as_number()) {
            (Some(x), Some(y)) => {
                if let (Some(i), Some(j)) = (a.as_int(), b.as_int()) {
                    i == j
                } else {
                    x == y
                }
            }
            _ => false,
        },
    }
}

fn kind_rank(v: &Value) -> u8 {
    match v {
        Value::Bool(_) | Value::Int(_) | Value::Float(_) => 0,
        Value::Text(_) => 1,
        Value::None => 2,
        Value::Tuple(_) => 3,
        Value::FrozenSet(_) => 4,
        Value::List(_) => 5,
        Value::Map(_) => 6,
        _ => 7,
    }
}

/// Total order used for frozenset storage. Consistent with `py_eq` on hashable values.
pub fn order_cmp(a: &Value, b: &Value) -> Ordering {
    let (ra, rb) = (kind_rank(a), kind_rank(b));
    if ra != rb {
        return ra.cmp(&rb);
    }
    match (a, b) {
        (Value::Text(x), Value::Text(y)) => x.cmp(y),
        (Value::Tuple(x), Value::Tuple(y)) | (Value::FrozenSet(x), Value::FrozenSet(y)) => {
            if matches!(a, Value::FrozenSet(_)) && x.len() != y.len() {
                return x.len().cmp(&y.len());
            }
            for (p, q) in x.iter().zip(y.iter()) {
                let o = order_cmp(p, q);
                if o != Ordering::Equal {
                    return o;
                }
            }
            x.len().cmp(&y.len())
        }
        _ if ra == 0 => {
            if let (Some(i), Some(j)) = (a.as_int(), b.as_int()) {
                i.cmp(&j)
            } else {
                a.as_number().unwrap().total_cmp(&b.as_number().unwrap())
            }
        }
        _ => Ordering::Equal,
    }
}

/// Python `<` and friends. `None` when the types are not orderable.
pub fn py_cmp(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Text(x), Value::Text(y)) => Some(x.cmp(y)),
        (Value::Tuple(x), Value::Tuple(y)) => seq_cmp(x, y),
        (Value::List(x), Value::List(y)) => {
            let (x, y) = (x.data.borrow().clone(), y.data.borrow().clone());
            seq_cmp(&x, &y)
        }
        (Value::FrozenSet(x), Value::FrozenSet(y)) => {
            let sub = |p: &[Value], q: &[Value]| p.iter().all(|e| q.iter().any(|f| py_eq(e, f)));
            match (sub(x, y), sub(y, x)) {
                (true, true) => Some(Ordering::Equal),
                (true, false) => Some(Ordering::Less),
                (false, true) => Some(Ordering::Greater),
                _ => None,
            }
        }
        _ => {
            if let (Some(i), Some(j)) = (a.as_int(), b.as_int()) {
                return Some(i.cmp(&j));
            }
            match (a.as_number(), b.as_number()) {
                (Some(x), Some(y)) => x.partial_cmp(&y),
                _ => None,
            }
        }
    }
}

fn seq_cmp(x: &[Value], y: &[Value]) -> Option<Ordering> {
    for (p, q) in x.iter().zip(y.iter()) {
        if !py_eq(p, q) {
            return py_cmp(p, q);
        }
    }
    Some(x.len().cmp(&y.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_reprs() {
        assert_eq!(float_repr(1.0), "1.0");
        assert_eq!(float_repr(0.1), "0.1");
        assert_eq!(float_repr(1e20), "1e+20");
        assert_eq!(float_repr(1.5e-7), "1.5e-07");
        assert_eq!(float_repr(-2.5), "-2.5");
    }

    #[test]
    fn numeric_equality_crosses_types() {
        assert!(py_eq(&Value::Int(1), &Value::Float(1.0)));
        assert!(py_eq(&Value::Bool(true), &Value::Int(1)));
        assert!(!py_eq(&Value::text("1"), &Value::Int(1)));
    }

    #[test]
    fn frozenset_dedups() {
        let s = Value::frozenset(vec![Value::Int(1), Value::Bool(true), Value::text("a"), Value::Float(1.0)]).unwrap();
        let Value::FrozenSet(items) = s else { panic!() };
        assert_eq!(items.len(), 2);
    }

    #[test]
    fn reprs() {
        let t = Value::tuple(vec![Value::text("a"), Value::Int(1)]);
        assert_eq!(t.py_repr(), "('a', 1)");
        assert_eq!(Value::tuple(vec![Value::None]).py_repr(), "(None,)");
        assert_eq!(Value::text("it's").py_repr(), "\"it's\"");
    }

    #[test]
    fn mutability_is_deep() {
        let l = Value::List(Obj::new(1, vec![]));
        assert!(l.is_mutable());
        assert!(Value::tuple(vec![l]).is_mutable());
        assert!(!Value::tuple(vec![Value::Int(1)]).is_mutable());
    }
}
