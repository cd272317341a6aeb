//! λ^O: the functional form executed by the opportunistic runtime.

mod compile;
pub mod ir;
mod text;

pub use compile::{compile_to_opal, threading_flags};
pub use ir::{Binding, Def, Key, OpalProgram};
pub use text::{emit_opal_text, is_memory_reg, is_sequence_reg, parse_opal_text};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezoar::text::parse_program;

    const BRANCH_STORE: &str = include_str!("../../tests/programs/branch_store.bz");
    const BRANCH_STORE_OPAL: &str = include_str!("../../tests/golden/branch_store.opal");

    fn opal_of(src: &str, entry: Option<&str>) -> OpalProgram {
        let p = crate::bezoar::lower(&crate::frontend::parse_module(src).unwrap(), entry).unwrap();
        compile_to_opal(&crate::mutation_opt::optimize(&p)).unwrap()
    }

    #[test]
    fn branch_store_matches_golden() {
        let p = compile_to_opal(&parse_program(BRANCH_STORE).unwrap()).unwrap();
        assert_eq!(emit_opal_text(&p), BRANCH_STORE_OPAL);
        assert_eq!(emit_opal_text(&p), emit_opal_text(&p.clone()));
    }

    #[test]
    fn golden_round_trips() {
        let p = parse_opal_text(BRANCH_STORE_OPAL).unwrap();
        assert_eq!(emit_opal_text(&p), BRANCH_STORE_OPAL);
        let direct = compile_to_opal(&parse_program(BRANCH_STORE).unwrap()).unwrap();
        assert_eq!(p, direct);
    }

    #[test]
    fn pure_function_skips_threading() {
        let p = compile_to_opal(&parse_program("def f(a):\n    r1 := const 1\n    return r1\n").unwrap()).unwrap();
        assert_eq!(emit_opal_text(&p), "def f(a):\n    r1 := const 1\n    return r1\n");
        let d = p.def("f").unwrap();
        assert!(!d.threads_m && !d.threads_s);
    }

    #[test]
    fn loop_becomes_fold() {
        let src = include_str!("../../tests/programs/get_values.py");
        let p = opal_of(src, Some("get_values"));
        let text = emit_opal_text(&p);
        assert!(text.contains(":= fold("), "{text}");
        let d = p.def("get_values").unwrap();
        assert!(d.threads_s && !d.threads_m);
        assert_eq!(parse_opal_text(&text).unwrap(), p);
    }

    #[test]
    fn while_becomes_recursive_def() {
        let src = "@poppy\ndef f(n):\n    i = 0\n    while i < n:\n        print(i)\n        i = i + 1\n    return i\n";
        let p = opal_of(src, None);
        let text = emit_opal_text(&p);
        assert!(text.contains("def _loop("), "{text}");
        assert!(text.contains(":= ite("), "{text}");
        assert_eq!(parse_opal_text(&text).unwrap(), p, "{text}");
    }

    #[test]
    fn closure_captures_frame() {
        let src = "@poppy\ndef f(a):\n    k = a\n    k = k + 1\n    def g(x):\n        return x + k\n    return g(a)\n";
        let p = opal_of(src, None);
        let text = emit_opal_text(&p);
        assert!(text.contains(":= frame()"), "{text}");
        assert!(text.contains(":= closure(g, fr1)"), "{text}");
        assert!(text.contains(":= apply("), "{text}");
        assert_eq!(parse_opal_text(&text).unwrap(), p, "{text}");
    }
}
