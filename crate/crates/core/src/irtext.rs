//! Line tokenizer shared by the Bezoar and Opal text formats.

use crate::error::CompileError;
use crate::frontend::Literal;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum T {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
pub(crate) struct Line {
    pub indent: usize,
    pub toks: Vec<T>,
    pub lineno: usize,
}

pub(crate) fn err(line: usize, message: impl Into<String>) -> CompileError {
    CompileError::Text { line, message: message.into() }
}

pub(crate) fn lines(src: &str) -> Result<Vec<Line>, CompileError> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = raw.trim_start_matches(' ');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with('\t') {
            return Err(err(lineno, "tabs are not allowed"));
        }
        let indent = raw.len() - trimmed.len();
        out.push(Line { indent, toks: tokenize(trimmed, lineno)?, lineno });
    }
    Ok(out)
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '$' | '@')
}

fn tokenize(s: &str, lineno: usize) -> Result<Vec<T>, CompileError> {
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        if c == ' ' {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        if c == '"' || c == '\'' {
            let (text, next) = string(&chars, i, lineno)?;
            out.push(T::Str(text));
            i = next;
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) && !matches!(out.last(), Some(T::Sym("-"))));
        if starts_number {
            let start = i;
            i += 1;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric()
                    || chars[i] == '.'
                    || chars[i] == '_'
                    || ((chars[i] == '+' || chars[i] == '-') && matches!(chars[i - 1], 'e' | 'E')))
            {
                i += 1;
            }
            let text: String = chars[start..i].iter().filter(|c| **c != '_').collect();
            if text.contains(['.', 'e', 'E']) || text.ends_with("inf") || text.ends_with("NaN") {
                let v: f64 = text.parse().map_err(|_| err(lineno, format!("bad number `{text}`")))?;
                out.push(T::Float(v));
            } else {
                let v: i64 = text.parse().map_err(|_| err(lineno, format!("bad number `{text}`")))?;
                out.push(T::Int(v));
            }
            continue;
        }
        if is_ident_char(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            out.push(T::Ident(chars[start..i].iter().collect()));
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym = match two.as_str() {
            ":=" => Some(":="),
            "->" => Some("->"),
            _ => None,
        };
        if let Some(sym) = sym {
            out.push(T::Sym(sym));
            i += 2;
            continue;
        }
        let sym = match c {
            '(' => "(",
            ')' => ")",
            ',' => ",",
            ':' => ":",
            '=' => "=",
            _ => return Err(err(lineno, format!("unexpected character `{c}`"))),
        };
        out.push(T::Sym(sym));
        i += 1;
    }
    Ok(out)
}

fn string(chars: &[char], start: usize, lineno: usize) -> Result<(String, usize), CompileError> {
    let quote = chars[start];
    let mut i = start + 1;
    let mut out = String::new();
    while i < chars.len() {
        let c = chars[i];
        if c == quote {
            return Ok((out, i + 1));
        }
        if c == '\\' {
            let e = *chars.get(i + 1).ok_or_else(|| err(lineno, "unterminated string"))?;
            i += 2;
            match e {
                'n' => out.push('\n'),
                't' => out.push('\t'),
                'r' => out.push('\r'),
                '0' => out.push('\0'),
                '\\' | '"' | '\'' => out.push(e),
                'x' | 'u' | 'U' => {
                    let n = match e {
                        'x' => 2,
                        'u' => 4,
                        _ => 8,
                    };
                    let hex: String = chars.get(i..i + n).ok_or_else(|| err(lineno, "bad escape"))?.iter().collect();
                    let v = u32::from_str_radix(&hex, 16).map_err(|_| err(lineno, "bad escape"))?;
                    out.push(char::from_u32(v).ok_or_else(|| err(lineno, "bad escape"))?);
                    i += n;
                }
                other => {
                    out.push('\\');
                    out.push(other);
                }
            }
            continue;
        }
        out.push(c);
        i += 1;
    }
    Err(err(lineno, "unterminated string"))
}

/// Cursor over one line's tokens.
pub(crate) struct Cur<'a> {
    pub toks: &'a [T],
    pub pos: usize,
    pub line: usize,
}

impl<'a> Cur<'a> {
    pub fn new(line: &'a Line) -> Self {
        Cur { toks: &line.toks, pos: 0, line: line.lineno }
    }

    pub fn peek(&self) -> Option<&T> {
        self.toks.get(self.pos)
    }

    pub fn next(&mut self) -> Option<&T> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    pub fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(T::Sym(x)) if *x == s)
    }

    pub fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Some(T::Ident(x)) if x == s)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn sym(&mut self, s: &str) -> Result<(), CompileError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(err(self.line, format!("expected `{s}`")))
        }
    }

    pub fn ident(&mut self) -> Result<String, CompileError> {
        match self.next() {
            Some(T::Ident(s)) => Ok(s.clone()),
            _ => Err(err(self.line, "expected identifier")),
        }
    }

    pub fn end(&self) -> Result<(), CompileError> {
        if self.done() {
            Ok(())
        } else {
            Err(err(self.line, "unexpected trailing tokens"))
        }
    }

    /// Comma-separated identifiers up to (not including) a terminator symbol or end of line.
    pub fn ident_list(&mut self) -> Result<Vec<String>, CompileError> {
        let mut out = Vec::new();
        while let Some(T::Ident(_)) = self.peek() {
            out.push(self.ident()?);
            if !self.eat_sym(",") {
                break;
            }
        }
        Ok(out)
    }
}

pub(crate) fn literal_of(t: &T) -> Option<Literal> {
    Some(match t {
        T::Int(i) => Literal::Int(*i),
        T::Float(f) => Literal::Float(*f),
        T::Str(s) => Literal::Str(s.clone()),
        T::Ident(s) if s == "True" => Literal::Bool(true),
        T::Ident(s) if s == "False" => Literal::Bool(false),
        T::Ident(s) if s == "None" => Literal::None,
        _ => return None,
    })
}

pub(crate) fn render_literal(l: &Literal) -> String {
    match l {
        Literal::Float(f) if !f.is_finite() => {
            if f.is_nan() {
                "NaN".into()
            } else if *f > 0.0 {
                "inf".into()
            } else {
                "-inf".into()
            }
        }
        _ => crate::frontend::printer::literal_to_string(l, false),
    }
}

/// Lines of a block: those after `start` indented deeper than `parent_indent`.
pub(crate) fn block_end(lines: &[Line], start: usize, parent_indent: usize) -> usize {
    let mut i = start;
    while i < lines.len() && lines[i].indent > parent_indent {
        i += 1;
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_binding() {
        let ls = lines("    S1, r1 := print(S0, \"b\\x22ar\", -3, 1.5)\n").unwrap();
        assert_eq!(ls[0].indent, 4);
        assert_eq!(
            ls[0].toks,
            vec![
                T::Ident("S1".into()),
                T::Sym(","),
                T::Ident("r1".into()),
                T::Sym(":="),
                T::Ident("print".into()),
                T::Sym("("),
                T::Ident("S0".into()),
                T::Sym(","),
                T::Str("b\"ar".into()),
                T::Sym(","),
                T::Int(-3),
                T::Sym(","),
                T::Float(1.5),
                T::Sym(")"),
            ]
        );
    }
}
