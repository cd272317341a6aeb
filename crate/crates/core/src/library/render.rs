//! Canonical, type-tagged rendering of values for trace snapshots.

use crate::runtime::value::{float_repr, Value};

pub fn canonical_render(v: &Value) -> String {
    let mut out = String::new();
    render(v, &mut out);
    out
}

fn render(v: &Value, out: &mut String) {
    match v {
        Value::Int(i) => {
            out.push_str("int:");
            out.push_str(&i.to_string());
        }
        Value::Float(f) => {
            out.push_str("float:");
            out.push_str(&float_repr(*f));
        }
        Value::Text(s) => {
            out.push_str("text:");
            out.push_str(&serde_json::to_string(&**s).unwrap_or_default());
        }
        Value::Bool(b) => out.push_str(if *b { "bool:True" } else { "bool:False" }),
        Value::None => out.push_str("none"),
        Value::Tuple(items) => {
            out.push_str("tuple[");
            let parts: Vec<String> = items.iter().map(canonical_render).collect();
            out.push_str(&parts.join(","));
            out.push(']');
        }
        Value::FrozenSet(items) => {
            out.push_str("frozenset[");
            let mut parts: Vec<String> = items.iter().map(canonical_render).collect();
            parts.sort();
            out.push_str(&parts.join(","));
            out.push(']');
        }
        Value::List(l) => out.push_str(&format!("list#{}", l.serial)),
        Value::Map(m) => out.push_str(&format!("dict#{}", m.serial)),
        Value::Closure(c) => out.push_str(&format!("function:{}", c.name)),
        Value::Ext(e) => {
            out.push_str("builtin:");
            out.push_str(&e.name);
            if let Some(b) = &e.bound {
                out.push('<');
                render(b, out);
                out.push('>');
            }
        }
        Value::Seq(t) => out.push_str(&format!("seq:{}", t.index)),
        Value::Memory(_) => out.push_str("memory"),
        Value::Unbound => out.push_str("unbound"),
        Value::Frame(id) => out.push_str(&format!("frame:{id}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::value::Obj;

    #[test]
    fn fixed_grammar() {
        let v = Value::tuple(vec![Value::text("a"), Value::Int(1)]);
        assert_eq!(canonical_render(&v), r#"tuple[text:"a",int:1]"#);
    }

    #[test]
    fn frozenset_order_independent() {
        let a = Value::frozenset(vec![Value::Int(2), Value::text("x"), Value::Int(1)]).unwrap();
        let b = Value::frozenset(vec![Value::text("x"), Value::Int(1), Value::Int(2)]).unwrap();
        assert_eq!(canonical_render(&a), canonical_render(&b));
    }

    #[test]
    fn lists_render_by_identity() {
        let l = Value::List(Obj::new(7, vec![Value::Int(1)]));
        assert_eq!(canonical_render(&l), "list#7");
        if let Value::List(o) = &l {
            o.data.borrow_mut().push(Value::Int(2));
        }
        assert_eq!(canonical_render(&l), "list#7");
    }
}
