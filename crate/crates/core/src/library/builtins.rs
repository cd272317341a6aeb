//! Builtin data operations with Python semantics.

use std::cmp::Ordering;
use std::rc::Rc;

use crate::runtime::value::{order_cmp, py_cmp, py_eq, ExtFn, Obj, Value};

type R = Result<Value, String>;

fn type_error(msg: impl Into<String>) -> String {
    format!("TypeError: {}", msg.into())
}

fn arity(name: &str, args: &[Value], lo: usize, hi: usize) -> Result<(), String> {
    if args.len() < lo || args.len() > hi {
        let want = if lo == hi { lo.to_string() } else { format!("{lo} to {hi}") };
        return Err(type_error(format!("{name}() takes {want} arguments ({} given)", args.len())));
    }
    Ok(())
}

fn unsupported(op: &str, a: &Value, b: &Value) -> String {
    type_error(format!("unsupported operand type(s) for {op}: '{}' and '{}'", a.type_name(), b.type_name()))
}

fn overflow() -> String {
    "OverflowError: integer overflow".into()
}

fn new_list(serial: u64, items: Vec<Value>) -> Value {
    Value::List(Obj::new(serial, items))
}

/// Elements of an iterable, snapshotted.
pub(crate) fn iter_items(v: &Value) -> Result<Vec<Value>, String> {
    match v {
        Value::Tuple(items) | Value::FrozenSet(items) => Ok(items.to_vec()),
        Value::List(l) => Ok(l.data.borrow().clone()),
        Value::Map(m) => Ok(m.data.borrow().iter().map(|(k, _)| k.clone()).collect()),
        Value::Text(s) => Ok(s.chars().map(|c| Value::text(c.to_string())).collect()),
        _ => Err(type_error(format!("'{}' object is not iterable", v.type_name()))),
    }
}

fn text_arg<'a>(v: &'a Value, what: &str) -> Result<&'a str, String> {
    match v {
        Value::Text(s) => Ok(s),
        _ => Err(type_error(format!("{what} must be str, not {}", v.type_name()))),
    }
}

fn int_arg(v: &Value, what: &str) -> Result<i64, String> {
    v.as_int().ok_or_else(|| type_error(format!("{what} must be an integer, not {}", v.type_name())))
}

fn index_of(len: usize, i: i64) -> Result<usize, String> {
    let j = if i < 0 { i + len as i64 } else { i };
    if j < 0 || j >= len as i64 {
        return Err("IndexError: index out of range".into());
    }
    Ok(j as usize)
}

fn is_float(v: &Value) -> bool {
    matches!(v, Value::Float(_))
}

/// Integer, float or neither for a numeric binary operator.
enum Num {
    I(i64, i64),
    F(f64, f64),
    No,
}

fn nums(a: &Value, b: &Value) -> Num {
    match (a.as_int(), b.as_int()) {
        (Some(x), Some(y)) if !is_float(a) && !is_float(b) => Num::I(x, y),
        _ => match (a.as_number(), b.as_number()) {
            (Some(x), Some(y)) => Num::F(x, y),
            _ => Num::No,
        },
    }
}

fn repeat(items: &[Value], n: i64) -> Vec<Value> {
    let mut out = Vec::new();
    for _ in 0..n.max(0) {
        out.extend(items.iter().cloned());
    }
    out
}

fn floor_div_int(x: i64, y: i64) -> Result<i64, String> {
    if y == 0 {
        return Err("ZeroDivisionError: integer division or modulo by zero".into());
    }
    let q = x.checked_div(y).ok_or_else(overflow)?;
    Ok(if (x % y != 0) && ((x < 0) != (y < 0)) { q - 1 } else { q })
}

fn mod_int(x: i64, y: i64) -> Result<i64, String> {
    if y == 0 {
        return Err("ZeroDivisionError: integer division or modulo by zero".into());
    }
    let r = x.checked_rem(y).unwrap_or(0);
    Ok(if r != 0 && ((r < 0) != (y < 0)) { r + y } else { r })
}

fn mod_float(x: f64, y: f64) -> Result<f64, String> {
    if y == 0.0 {
        return Err("ZeroDivisionError: float modulo".into());
    }
    let r = x % y;
    Ok(if r != 0.0 && ((r < 0.0) != (y < 0.0)) { r + y } else { r })
}

fn binary(name: &str, a: &Value, b: &Value, serial: u64) -> R {
    let sym = match name {
        "add" => "+",
        "sub" => "-",
        "mul" => "*",
        "matmul" => "@",
        "truediv" => "/",
        "floordiv" => "//",
        "mod" => "%",
        "pow" => "**",
        "lshift" => "<<",
        "rshift" => ">>",
        "and_" => "&",
        "or_" => "|",
        _ => "^",
    };
    let n = nums(a, b);
    match name {
        "add" => match (n, a, b) {
            (Num::I(x, y), ..) => x.checked_add(y).map(Value::Int).ok_or_else(overflow),
            (Num::F(x, y), ..) => Ok(Value::Float(x + y)),
            (_, Value::Text(x), Value::Text(y)) => Ok(Value::text(format!("{x}{y}"))),
            (_, Value::Tuple(x), Value::Tuple(y)) => Ok(Value::tuple(x.iter().chain(y.iter()).cloned().collect())),
            (_, Value::List(x), Value::List(y)) => {
                let mut v = x.data.borrow().clone();
                v.extend(y.data.borrow().iter().cloned());
                Ok(new_list(serial, v))
            }
            _ => Err(unsupported(sym, a, b)),
        },
        "sub" => match (n, a, b) {
            (Num::I(x, y), ..) => x.checked_sub(y).map(Value::Int).ok_or_else(overflow),
            (Num::F(x, y), ..) => Ok(Value::Float(x - y)),
            (_, Value::FrozenSet(x), Value::FrozenSet(y)) => {
                Value::frozenset(x.iter().filter(|e| !y.iter().any(|f| py_eq(e, f))).cloned().collect())
            }
            _ => Err(unsupported(sym, a, b)),
        },
        "mul" => match (n, a, b) {
            (Num::I(x, y), ..) => x.checked_mul(y).map(Value::Int).ok_or_else(overflow),
            (Num::F(x, y), ..) => Ok(Value::Float(x * y)),
            (_, Value::Text(s), k) | (_, k, Value::Text(s)) if k.as_int().is_some() && !is_float(k) => {
                Ok(Value::text(s.repeat(k.as_int().unwrap().max(0) as usize)))
            }
            (_, Value::Tuple(t), k) | (_, k, Value::Tuple(t)) if k.as_int().is_some() && !is_float(k) => {
                Ok(Value::tuple(repeat(t, k.as_int().unwrap())))
            }
            (_, Value::List(l), k) | (_, k, Value::List(l)) if k.as_int().is_some() && !is_float(k) => {
                Ok(new_list(serial, repeat(&l.data.borrow(), k.as_int().unwrap())))
            }
            _ => Err(unsupported(sym, a, b)),
        },
        "truediv" => match n {
            Num::I(_, 0) => Err("ZeroDivisionError: division by zero".into()),
            Num::I(x, y) => Ok(Value::Float(x as f64 / y as f64)),
            Num::F(_, 0.0) => Err("ZeroDivisionError: float division by zero".into()),
            Num::F(x, y) => Ok(Value::Float(x / y)),
            Num::No => Err(unsupported(sym, a, b)),
        },
        "floordiv" => match n {
            Num::I(x, y) => floor_div_int(x, y).map(Value::Int),
            Num::F(_, 0.0) => Err("ZeroDivisionError: float floor division by zero".into()),
            Num::F(x, y) => Ok(Value::Float((x / y).floor())),
            Num::No => Err(unsupported(sym, a, b)),
        },
        "mod" => match n {
            Num::I(x, y) => mod_int(x, y).map(Value::Int),
            Num::F(x, y) => mod_float(x, y).map(Value::Float),
            Num::No => Err(unsupported(sym, a, b)),
        },
        "pow" => match n {
            Num::I(x, y) if y >= 0 => {
                let e = u32::try_from(y).map_err(|_| overflow())?;
                x.checked_pow(e).map(Value::Int).ok_or_else(overflow)
            }
            Num::I(0, _) => Err("ZeroDivisionError: 0.0 cannot be raised to a negative power".into()),
            Num::I(x, y) => Ok(Value::Float((x as f64).powf(y as f64))),
            Num::F(x, y) if x == 0.0 && y < 0.0 => Err("ZeroDivisionError: 0.0 cannot be raised to a negative power".into()),
            Num::F(x, y) => Ok(Value::Float(x.powf(y))),
            Num::No => Err(unsupported(sym, a, b)),
        },
        "lshift" | "rshift" => match n {
            Num::I(_, y) if y < 0 => Err("ValueError: negative shift count".into()),
            Num::I(x, y) if name == "lshift" => {
                if y >= 64 {
                    return if x == 0 { Ok(Value::Int(0)) } else { Err(overflow()) };
                }
                let r = x << y;
                if r >> y != x {
                    return Err(overflow());
                }
                Ok(Value::Int(r))
            }
            Num::I(x, y) => Ok(Value::Int(x >> y.min(63))),
            _ => Err(unsupported(sym, a, b)),
        },
        "and_" | "or_" | "xor" => match (a, b) {
            (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(match name {
                "and_" => x & y,
                "or_" => x | y,
                _ => x ^ y,
            })),
            (Value::FrozenSet(x), Value::FrozenSet(y)) => {
                let in_y = |e: &Value| y.iter().any(|f| py_eq(e, f));
                let in_x = |e: &Value| x.iter().any(|f| py_eq(e, f));
                let items: Vec<Value> = match name {
                    "and_" => x.iter().filter(|e| in_y(e)).cloned().collect(),
                    "or_" => x.iter().chain(y.iter()).cloned().collect(),
                    _ => x.iter().filter(|e| !in_y(e)).chain(y.iter().filter(|e| !in_x(e))).cloned().collect(),
                };
                Value::frozenset(items)
            }
            _ => match n {
                Num::I(x, y) => Ok(Value::Int(match name {
                    "and_" => x & y,
                    "or_" => x | y,
                    _ => x ^ y,
                })),
                _ => Err(unsupported(sym, a, b)),
            },
        },
        _ => Err(unsupported(sym, a, b)),
    }
}

fn compare(name: &str, a: &Value, b: &Value) -> R {
    let ord = py_cmp(a, b).ok_or_else(|| {
        let sym = match name {
            "lt" => "<",
            "le" => "<=",
            "gt" => ">",
            _ => ">=",
        };
        type_error(format!("'{sym}' not supported between instances of '{}' and '{}'", a.type_name(), b.type_name()))
    })?;
    Ok(Value::Bool(match name {
        "lt" => ord == Ordering::Less,
        "le" => ord != Ordering::Greater,
        "gt" => ord == Ordering::Greater,
        _ => ord != Ordering::Less,
    }))
}

fn identical(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::List(x), Value::List(y)) => Rc::ptr_eq(x, y),
        (Value::Map(x), Value::Map(y)) => Rc::ptr_eq(x, y),
        (Value::Closure(x), Value::Closure(y)) => Rc::ptr_eq(x, y),
        (Value::Int(_), Value::Int(_))
        | (Value::Float(_), Value::Float(_))
        | (Value::Bool(_), Value::Bool(_))
        | (Value::None, Value::None)
        | (Value::Text(_), Value::Text(_))
        | (Value::Tuple(_), Value::Tuple(_))
        | (Value::FrozenSet(_), Value::FrozenSet(_))
        | (Value::Ext(_), Value::Ext(_)) => py_eq(a, b),
        _ => false,
    }
}

fn contains(container: &Value, item: &Value) -> Result<bool, String> {
    match container {
        Value::Text(s) => Ok(s.contains(text_arg(item, "left operand of 'in'")?)),
        Value::Tuple(items) => Ok(items.iter().any(|e| py_eq(e, item))),
        Value::FrozenSet(items) => {
            if !item.is_hashable() {
                return Err(type_error(format!("unhashable type: '{}'", item.type_name())));
            }
            Ok(items.binary_search_by(|e| order_cmp(e, item)).is_ok() || items.iter().any(|e| py_eq(e, item)))
        }
        Value::List(l) => Ok(l.data.borrow().iter().any(|e| py_eq(e, item))),
        Value::Map(m) => Ok(m.data.borrow().iter().any(|(k, _)| py_eq(k, item))),
        _ => Err(type_error(format!("argument of type '{}' is not iterable", container.type_name()))),
    }
}

fn getitem(obj: &Value, idx: &Value) -> R {
    match obj {
        Value::Tuple(items) => Ok(items[index_of(items.len(), int_arg(idx, "tuple indices")?)?].clone()),
        Value::List(l) => {
            let v = l.data.borrow();
            Ok(v[index_of(v.len(), int_arg(idx, "list indices")?)?].clone())
        }
        Value::Text(s) => {
            let chars: Vec<char> = s.chars().collect();
            Ok(Value::text(chars[index_of(chars.len(), int_arg(idx, "string indices")?)?].to_string()))
        }
        Value::Map(m) => m
            .data
            .borrow()
            .iter()
            .find(|(k, _)| py_eq(k, idx))
            .map(|(_, v)| v.clone())
            .ok_or_else(|| format!("KeyError: {}", idx.py_repr())),
        _ => Err(type_error(format!("'{}' object is not subscriptable", obj.type_name()))),
    }
}

fn setitem(obj: &Value, idx: &Value, v: &Value) -> R {
    match obj {
        Value::List(l) => {
            let mut data = l.data.borrow_mut();
            let i = index_of(data.len(), int_arg(idx, "list indices")?)?;
            data[i] = v.clone();
            Ok(Value::None)
        }
        Value::Map(m) => {
            if !idx.is_hashable() {
                return Err(type_error(format!("unhashable type: '{}'", idx.type_name())));
            }
            let mut data = m.data.borrow_mut();
            match data.iter_mut().find(|(k, _)| py_eq(k, idx)) {
                Some(slot) => slot.1 = v.clone(),
                None => data.push((idx.clone(), v.clone())),
            }
            Ok(Value::None)
        }
        _ => Err(type_error(format!("'{}' object does not support item assignment", obj.type_name()))),
    }
}

fn inplace(name: &str, a: &Value, b: &Value, serial: u64) -> R {
    let base = &name[1..];
    match (base, a) {
        ("add", Value::List(l)) => {
            let items = iter_items(b)?;
            l.data.borrow_mut().extend(items);
            Ok(a.clone())
        }
        ("mul", Value::List(l)) => {
            let n = int_arg(b, "can't multiply sequence by non-int; count")?;
            let items = repeat(&l.data.borrow(), n);
            *l.data.borrow_mut() = items;
            Ok(a.clone())
        }
        ("or", Value::Map(m)) => {
            if let Value::Map(other) = b {
                let pairs = other.data.borrow().clone();
                for (k, v) in pairs {
                    setitem(a, &k, &v)?;
                }
                let _ = m;
                Ok(a.clone())
            } else {
                Err(unsupported("|=", a, b))
            }
        }
        _ => {
            let op = match base {
                "and" => "and_",
                "or" => "or_",
                other => other,
            };
            binary(op, a, b, serial)
        }
    }
}

fn unary(name: &str, a: &Value) -> R {
    match name {
        "not_" => Ok(Value::Bool(!a.truthy())),
        "neg" => match a {
            Value::Float(f) => Ok(Value::Float(-f)),
            _ => a
                .as_int()
                .ok_or_else(|| type_error(format!("bad operand type for unary -: '{}'", a.type_name())))
                .and_then(|i| i.checked_neg().map(Value::Int).ok_or_else(overflow)),
        },
        "pos" => match a {
            Value::Float(f) => Ok(Value::Float(*f)),
            _ => a.as_int().map(Value::Int).ok_or_else(|| type_error(format!("bad operand type for unary +: '{}'", a.type_name()))),
        },
        _ => match a {
            Value::Float(_) => Err(type_error("bad operand type for unary ~: 'float'")),
            _ => a.as_int().map(|i| Value::Int(!i)).ok_or_else(|| type_error(format!("bad operand type for unary ~: '{}'", a.type_name()))),
        },
    }
}

fn to_int(v: &Value) -> R {
    match v {
        Value::Int(i) => Ok(Value::Int(*i)),
        Value::Bool(b) => Ok(Value::Int(*b as i64)),
        Value::Float(f) if f.is_finite() => {
            let t = f.trunc();
            if t.abs() >= 9.2e18 {
                return Err(overflow());
            }
            Ok(Value::Int(t as i64))
        }
        Value::Float(_) => Err("ValueError: cannot convert float NaN or infinity to integer".into()),
        Value::Text(s) => s
            .trim()
            .replace('_', "")
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| format!("ValueError: invalid literal for int() with base 10: {}", v.py_repr())),
        _ => Err(type_error(format!("int() argument must be a string or a number, not '{}'", v.type_name()))),
    }
}

fn to_float(v: &Value) -> R {
    match v {
        Value::Text(s) => {
            let t = s.trim().to_ascii_lowercase();
            let f = match t.as_str() {
                "inf" | "+inf" | "infinity" => f64::INFINITY,
                "-inf" | "-infinity" => f64::NEG_INFINITY,
                "nan" => f64::NAN,
                _ => t.parse::<f64>().map_err(|_| format!("ValueError: could not convert string to float: {}", v.py_repr()))?,
            };
            Ok(Value::Float(f))
        }
        _ => v
            .as_number()
            .map(Value::Float)
            .ok_or_else(|| type_error(format!("float() argument must be a string or a number, not '{}'", v.type_name()))),
    }
}

fn extreme(name: &str, args: &[Value]) -> R {
    let items = if args.len() == 1 { iter_items(&args[0])? } else { args.to_vec() };
    let mut best: Option<Value> = None;
    for v in items {
        best = Some(match best {
            None => v,
            Some(b) => {
                let o = py_cmp(&v, &b).ok_or_else(|| {
                    type_error(format!("'<' not supported between instances of '{}' and '{}'", v.type_name(), b.type_name()))
                })?;
                let better = if name == "min" { o == Ordering::Less } else { o == Ordering::Greater };
                if better {
                    v
                } else {
                    b
                }
            }
        });
    }
    best.ok_or_else(|| format!("ValueError: {name}() arg is an empty sequence"))
}

fn sort_values(items: &mut [Value]) -> Result<(), String> {
    let mut err = None;
    items.sort_by(|a, b| {
        py_cmp(a, b).unwrap_or_else(|| {
            err.get_or_insert_with(|| {
                type_error(format!("'<' not supported between instances of '{}' and '{}'", a.type_name(), b.type_name()))
            });
            Ordering::Equal
        })
    });
    err.map_or(Ok(()), Err)
}

/// Highest-valued `k` states; ties keep their original order.
fn topk(states: &Value, values: &Value, k: &Value) -> R {
    let states = iter_items(states)?;
    let values = iter_items(values)?;
    if states.len() != values.len() {
        return Err(format!("ValueError: topk() got {} states and {} values", states.len(), values.len()));
    }
    let k = int_arg(k, "topk() count")?.max(0) as usize;
    let mut idx: Vec<usize> = (0..states.len()).collect();
    let mut err = None;
    idx.sort_by(|&i, &j| {
        py_cmp(&values[j], &values[i]).unwrap_or_else(|| {
            err.get_or_insert_with(|| type_error("topk() values are not comparable"));
            Ordering::Equal
        })
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(Value::tuple(idx.into_iter().take(k).map(|i| states[i].clone()).collect()))
}

fn range(args: &[Value]) -> R {
    let ints: Vec<i64> = args.iter().map(|a| int_arg(a, "range() argument")).collect::<Result<_, _>>()?;
    let (start, stop, step) = match ints.as_slice() {
        [stop] => (0, *stop, 1),
        [start, stop] => (*start, *stop, 1),
        [start, stop, step] => (*start, *stop, *step),
        _ => unreachable!(),
    };
    if step == 0 {
        return Err("ValueError: range() arg 3 must not be zero".into());
    }
    let mut out = Vec::new();
    let mut i = start;
    while (step > 0 && i < stop) || (step < 0 && i > stop) {
        out.push(Value::Int(i));
        if out.len() > 10_000_000 {
            return Err("MemoryError: range too large".into());
        }
        i = match i.checked_add(step) {
            Some(n) => n,
            None => break,
        };
    }
    Ok(Value::tuple(out))
}

fn method(name: &str, recv: &Value, args: &[Value], serial: u64) -> R {
    let short = name.split_once('.').map(|p| p.1).unwrap_or(name);
    let check = |lo, hi| arity(short, args, lo, hi);
    match (name, recv) {
        ("str.upper", Value::Text(s)) => check(0, 0).map(|_| Value::text(s.to_uppercase())),
        ("str.lower", Value::Text(s)) => check(0, 0).map(|_| Value::text(s.to_lowercase())),
        ("str.strip", Value::Text(s)) => {
            check(0, 1)?;
            match args.first() {
                Some(Value::Text(chars)) => Ok(Value::text(s.trim_matches(|c| chars.contains(c)))),
                _ => Ok(Value::text(s.trim())),
            }
        }
        ("str.split", Value::Text(s)) => {
            check(0, 1)?;
            let parts: Vec<Value> = match args.first() {
                Some(Value::Text(sep)) if sep.is_empty() => return Err("ValueError: empty separator".into()),
                Some(Value::Text(sep)) => s.split(&**sep).map(Value::text).collect(),
                _ => s.split_whitespace().map(Value::text).collect(),
            };
            Ok(new_list(serial, parts))
        }
        ("str.join", Value::Text(s)) => {
            check(1, 1)?;
            let items = iter_items(&args[0])?;
            let mut parts = Vec::with_capacity(items.len());
            for (i, v) in items.iter().enumerate() {
                match v {
                    Value::Text(t) => parts.push(t.to_string()),
                    _ => return Err(type_error(format!("sequence item {i}: expected str instance, {} found", v.type_name()))),
                }
            }
            Ok(Value::text(parts.join(s)))
        }
        ("str.startswith", Value::Text(s)) => {
            check(1, 1)?;
            Ok(Value::Bool(s.starts_with(text_arg(&args[0], "startswith arg")?)))
        }
        ("str.endswith", Value::Text(s)) => {
            check(1, 1)?;
            Ok(Value::Bool(s.ends_with(text_arg(&args[0], "endswith arg")?)))
        }
        ("str.replace", Value::Text(s)) => {
            check(2, 2)?;
            let from = text_arg(&args[0], "replace arg 1")?;
            let to = text_arg(&args[1], "replace arg 2")?;
            Ok(Value::text(s.replace(from, to)))
        }
        ("str.find", Value::Text(s)) => {
            check(1, 1)?;
            let needle = text_arg(&args[0], "find arg")?;
            Ok(Value::Int(match s.find(needle) {
                Some(b) => s[..b].chars().count() as i64,
                None => -1,
            }))
        }
        ("str.count", Value::Text(s)) => {
            check(1, 1)?;
            let needle = text_arg(&args[0], "count arg")?;
            Ok(Value::Int(if needle.is_empty() { s.chars().count() as i64 + 1 } else { s.matches(needle).count() as i64 }))
        }
        ("str.isdigit", Value::Text(s)) => {
            check(0, 0)?;
            Ok(Value::Bool(!s.is_empty() && s.chars().all(|c| c.is_ascii_digit())))
        }
        ("tuple.index", Value::Tuple(_)) | ("list.index", Value::List(_)) => {
            check(1, 1)?;
            iter_items(recv)?
                .iter()
                .position(|e| py_eq(e, &args[0]))
                .map(|i| Value::Int(i as i64))
                .ok_or_else(|| format!("ValueError: {} is not in {}", args[0].py_repr(), recv.type_name()))
        }
        ("tuple.count", Value::Tuple(_)) | ("list.count", Value::List(_)) => {
            check(1, 1)?;
            Ok(Value::Int(iter_items(recv)?.iter().filter(|e| py_eq(e, &args[0])).count() as i64))
        }
        ("frozenset.union", Value::FrozenSet(x)) => {
            let mut items = x.to_vec();
            for a in args {
                items.extend(iter_items(a)?);
            }
            Value::frozenset(items)
        }
        ("frozenset.intersection", Value::FrozenSet(x)) => {
            let mut items = x.to_vec();
            for a in args {
                let other = iter_items(a)?;
                items.retain(|e| other.iter().any(|f| py_eq(e, f)));
            }
            Value::frozenset(items)
        }
        ("frozenset.difference", Value::FrozenSet(x)) => {
            let mut items = x.to_vec();
            for a in args {
                let other = iter_items(a)?;
                items.retain(|e| !other.iter().any(|f| py_eq(e, f)));
            }
            Value::frozenset(items)
        }
        ("frozenset.issubset", Value::FrozenSet(x)) => {
            check(1, 1)?;
            let other = iter_items(&args[0])?;
            Ok(Value::Bool(x.iter().all(|e| other.iter().any(|f| py_eq(e, f)))))
        }
        ("int.bit_length", _) | ("bool.bit_length", _) => {
            check(0, 0)?;
            let i = recv.as_int().unwrap_or(0);
            Ok(Value::Int(64 - i.unsigned_abs().leading_zeros() as i64))
        }
        ("float.is_integer", Value::Float(f)) => {
            check(0, 0)?;
            Ok(Value::Bool(f.is_finite() && f.fract() == 0.0))
        }
        ("list.append", Value::List(l)) => {
            check(1, 1)?;
            l.data.borrow_mut().push(args[0].clone());
            Ok(Value::None)
        }
        ("list.extend", Value::List(l)) => {
            check(1, 1)?;
            let items = iter_items(&args[0])?;
            l.data.borrow_mut().extend(items);
            Ok(Value::None)
        }
        ("list.pop", Value::List(l)) => {
            check(0, 1)?;
            let mut data = l.data.borrow_mut();
            if data.is_empty() {
                return Err("IndexError: pop from empty list".into());
            }
            let i = match args.first() {
                Some(v) => index_of(data.len(), int_arg(v, "pop index")?)?,
                None => data.len() - 1,
            };
            Ok(data.remove(i))
        }
        ("list.insert", Value::List(l)) => {
            check(2, 2)?;
            let mut data = l.data.borrow_mut();
            let n = data.len() as i64;
            let mut i = int_arg(&args[0], "insert index")?;
            if i < 0 {
                i = (i + n).max(0);
            }
            data.insert(i.min(n) as usize, args[1].clone());
            Ok(Value::None)
        }
        ("list.remove", Value::List(l)) => {
            check(1, 1)?;
            let mut data = l.data.borrow_mut();
            let i = data.iter().position(|e| py_eq(e, &args[0])).ok_or_else(|| "ValueError: list.remove(x): x not in list".to_string())?;
            data.remove(i);
            Ok(Value::None)
        }
        ("list.clear", Value::List(l)) => {
            check(0, 0)?;
            l.data.borrow_mut().clear();
            Ok(Value::None)
        }
        ("list.copy", Value::List(l)) => {
            check(0, 0)?;
            Ok(new_list(serial, l.data.borrow().clone()))
        }
        ("dict.get", Value::Map(m)) => {
            check(1, 2)?;
            let found = m.data.borrow().iter().find(|(k, _)| py_eq(k, &args[0])).map(|(_, v)| v.clone());
            Ok(found.unwrap_or_else(|| args.get(1).cloned().unwrap_or(Value::None)))
        }
        ("dict.keys", Value::Map(m)) => {
            check(0, 0)?;
            Ok(Value::tuple(m.data.borrow().iter().map(|(k, _)| k.clone()).collect()))
        }
        ("dict.values", Value::Map(m)) => {
            check(0, 0)?;
            Ok(Value::tuple(m.data.borrow().iter().map(|(_, v)| v.clone()).collect()))
        }
        ("dict.items", Value::Map(m)) => {
            check(0, 0)?;
            Ok(Value::tuple(m.data.borrow().iter().map(|(k, v)| Value::tuple(vec![k.clone(), v.clone()])).collect()))
        }
        ("dict.update", Value::Map(_)) => {
            check(1, 1)?;
            inplace("ior", recv, &args[0], serial).map(|_| Value::None)
        }
        _ => Err(format!("AttributeError: '{}' object has no attribute '{short}'", recv.type_name())),
    }
}

/// Method names available on each core type.
fn type_methods(type_name: &str) -> &'static [&'static str] {
    match type_name {
        "str" => &["upper", "lower", "strip", "split", "join", "startswith", "endswith", "replace", "find", "count", "isdigit"],
        "tuple" => &["index", "count"],
        "frozenset" => &["union", "intersection", "difference", "issubset"],
        "int" | "bool" => &["bit_length"],
        "float" => &["is_integer"],
        "list" => &["append", "extend", "pop", "insert", "remove", "clear", "index", "count", "copy"],
        "dict" => &["get", "keys", "values", "items", "update"],
        _ => &[],
    }
}

/// `getattr(obj, attr)`: a method bound to `obj`.
pub fn getattr_method(obj: &Value, attr: &str) -> R {
    let t = obj.type_name();
    if type_methods(t).contains(&attr) {
        Ok(Value::Ext(Rc::new(ExtFn { name: format!("{t}.{attr}"), bound: Some(obj.clone()) })))
    } else {
        Err(format!("AttributeError: '{t}' object has no attribute '{attr}'"))
    }
}

/// Runs builtin `name`. Mutable results get object serial `serial`.
pub fn call_builtin(name: &str, args: &[Value], serial: u64) -> R {
    if name.contains('.') {
        let (recv, rest) = args.split_first().ok_or_else(|| type_error(format!("{name}() needs a receiver")))?;
        return method(name, recv, rest, serial);
    }
    match name {
        "callmethod" => {
            let [recv, Value::Text(attr), rest @ ..] = args else {
                return Err(type_error("callmethod() needs a receiver and a method name"));
            };
            getattr_method(recv, attr)?;
            method(&format!("{}.{attr}", recv.type_name()), recv, rest, serial)
        }
        "add" | "sub" | "mul" | "matmul" | "truediv" | "floordiv" | "mod" | "pow" | "lshift" | "rshift" | "and_" | "or_" | "xor" => {
            arity(name, args, 2, 2)?;
            binary(name, &args[0], &args[1], serial)
        }
        "iadd" | "isub" | "imul" | "imatmul" | "itruediv" | "ifloordiv" | "imod" | "ipow" | "ilshift" | "irshift" | "iand" | "ior"
        | "ixor" => {
            arity(name, args, 2, 2)?;
            inplace(name, &args[0], &args[1], serial)
        }
        "eq" | "ne" => {
            arity(name, args, 2, 2)?;
            Ok(Value::Bool(py_eq(&args[0], &args[1]) == (name == "eq")))
        }
        "lt" | "le" | "gt" | "ge" => {
            arity(name, args, 2, 2)?;
            compare(name, &args[0], &args[1])
        }
        "is_" | "is_not" => {
            arity(name, args, 2, 2)?;
            Ok(Value::Bool(identical(&args[0], &args[1]) == (name == "is_")))
        }
        "contains" | "not_contains" => {
            arity(name, args, 2, 2)?;
            Ok(Value::Bool(contains(&args[0], &args[1])? == (name == "contains")))
        }
        "neg" | "pos" | "invert" | "not_" => {
            arity(name, args, 1, 1)?;
            unary(name, &args[0])
        }
        "getitem" => {
            arity(name, args, 2, 2)?;
            getitem(&args[0], &args[1])
        }
        "setitem" => {
            arity(name, args, 3, 3)?;
            setitem(&args[0], &args[1], &args[2])
        }
        "getattr" => {
            arity(name, args, 2, 2)?;
            getattr_method(&args[0], text_arg(&args[1], "attribute name")?)
        }
        "setattr" => {
            arity(name, args, 3, 3)?;
            let attr = text_arg(&args[1], "attribute name")?;
            Err(format!("AttributeError: '{}' object has no attribute '{attr}'", args[0].type_name()))
        }
        "make_tuple" => Ok(Value::tuple(args.to_vec())),
        "make_frozenset" => Value::frozenset(args.to_vec()).map_err(|e| e.to_string()),
        "unpack" => {
            arity(name, args, 2, 2)?;
            let items = iter_items(&args[0])?;
            let n = int_arg(&args[1], "unpack count")? as usize;
            match items.len().cmp(&n) {
                Ordering::Equal => Ok(Value::tuple(items)),
                Ordering::Less => Err(format!("ValueError: not enough values to unpack (expected {n}, got {})", items.len())),
                Ordering::Greater => Err(format!("ValueError: too many values to unpack (expected {n})")),
            }
        }
        "to_sequence" => {
            arity(name, args, 1, 1)?;
            match &args[0] {
                Value::Tuple(_) => Ok(args[0].clone()),
                v => Ok(Value::tuple(iter_items(v)?)),
            }
        }
        "format" => {
            arity(name, args, 1, 1)?;
            Ok(Value::text(args[0].py_str()))
        }
        "concat" => {
            let mut s = String::new();
            for a in args {
                s.push_str(text_arg(a, "concat argument")?);
            }
            Ok(Value::text(s))
        }
        "range" => {
            arity(name, args, 1, 3)?;
            range(args)
        }
        "enumerate" => {
            arity(name, args, 1, 2)?;
            let start = args.get(1).map(|v| int_arg(v, "enumerate start")).transpose()?.unwrap_or(0);
            Ok(Value::tuple(
                iter_items(&args[0])?.into_iter().enumerate().map(|(i, v)| Value::tuple(vec![Value::Int(start + i as i64), v])).collect(),
            ))
        }
        "len" => {
            arity(name, args, 1, 1)?;
            let n = match &args[0] {
                Value::Text(s) => s.chars().count(),
                Value::Tuple(v) | Value::FrozenSet(v) => v.len(),
                Value::List(l) => l.data.borrow().len(),
                Value::Map(m) => m.data.borrow().len(),
                v => return Err(type_error(format!("object of type '{}' has no len()", v.type_name()))),
            };
            Ok(Value::Int(n as i64))
        }
        "topk" => {
            arity(name, args, 3, 3)?;
            topk(&args[0], &args[1], &args[2])
        }
        "tuple" => {
            arity(name, args, 0, 1)?;
            Ok(Value::tuple(args.first().map(iter_items).transpose()?.unwrap_or_default()))
        }
        "frozenset" => {
            arity(name, args, 0, 1)?;
            Value::frozenset(args.first().map(iter_items).transpose()?.unwrap_or_default())
        }
        "list" => {
            arity(name, args, 0, 1)?;
            Ok(new_list(serial, args.first().map(iter_items).transpose()?.unwrap_or_default()))
        }
        "dict" => {
            arity(name, args, 0, 1)?;
            let m = Value::Map(Obj::new(serial, Vec::new()));
            if let Some(src) = args.first() {
                for pair in iter_items(src)? {
                    let kv = iter_items(&pair)?;
                    if kv.len() != 2 {
                        return Err("ValueError: dictionary update sequence element has wrong length".into());
                    }
                    setitem(&m, &kv[0], &kv[1])?;
                }
            }
            Ok(m)
        }
        "str" => {
            arity(name, args, 0, 1)?;
            Ok(Value::text(args.first().map(Value::py_str).unwrap_or_default()))
        }
        "repr" => {
            arity(name, args, 1, 1)?;
            Ok(Value::text(args[0].py_repr()))
        }
        "int" => {
            arity(name, args, 0, 1)?;
            args.first().map_or(Ok(Value::Int(0)), to_int)
        }
        "float" => {
            arity(name, args, 0, 1)?;
            args.first().map_or(Ok(Value::Float(0.0)), to_float)
        }
        "bool" => {
            arity(name, args, 0, 1)?;
            Ok(Value::Bool(args.first().is_some_and(Value::truthy)))
        }
        "abs" => {
            arity(name, args, 1, 1)?;
            match &args[0] {
                Value::Float(f) => Ok(Value::Float(f.abs())),
                v => v
                    .as_int()
                    .ok_or_else(|| type_error(format!("bad operand type for abs(): '{}'", v.type_name())))
                    .and_then(|i| i.checked_abs().map(Value::Int).ok_or_else(overflow)),
            }
        }
        "min" | "max" => {
            if args.is_empty() {
                return Err(type_error(format!("{name} expected at least 1 argument, got 0")));
            }
            extreme(name, args)
        }
        "sum" => {
            arity(name, args, 1, 2)?;
            let mut acc = args.get(1).cloned().unwrap_or(Value::Int(0));
            for v in iter_items(&args[0])? {
                acc = binary("add", &acc, &v, serial)?;
            }
            Ok(acc)
        }
        "sorted" => {
            arity(name, args, 1, 1)?;
            let mut items = iter_items(&args[0])?;
            sort_values(&mut items)?;
            Ok(new_list(serial, items))
        }
        "zip" => {
            let cols: Vec<Vec<Value>> = args.iter().map(iter_items).collect::<Result<_, _>>()?;
            let n = cols.iter().map(Vec::len).min().unwrap_or(0);
            Ok(Value::tuple((0..n).map(|i| Value::tuple(cols.iter().map(|c| c[i].clone()).collect())).collect()))
        }
        _ => Err(format!("NameError: no builtin named '{name}'")),
    }
}
