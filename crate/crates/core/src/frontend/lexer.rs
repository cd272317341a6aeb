//! Tokenizer with an explicit INDENT/DEDENT pass.
//!
//! Indentation must be spaces only; a tab anywhere in leading whitespace is a
//! syntax error. Newlines inside brackets are joined.

use super::ast::{Pos, Span};
use crate::error::FrontendError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Float(f64),
    Str(String),
    /// Raw body of an f-string, with the position of its first content char.
    FStr(String, Pos),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "+=", "-=", "*=", "/=", "%=", "@=",
    "&=", "|=", "^=", "+", "-", "*", "/", "%", "@", "&", "|", "^", "~", "<", ">", "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "=",
];

struct Lexer<'a> {
    chars: Vec<char>,
    idx: usize,
    line: u32,
    col: u32,
    src: &'a str,
    tokens: Vec<Token>,
    indents: Vec<u32>,
    depth: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, FrontendError> {
    let mut lx = Lexer { chars: src.chars().collect(), idx: 0, line: 1, col: 1, src, tokens: Vec::new(), indents: vec![0], depth: 0 };
    lx.run()?;
    Ok(lx.tokens)
}

impl<'a> Lexer<'a> {
    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.idx + n).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.idx).copied()?;
        self.idx += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn push(&mut self, tok: Tok, start: Pos) {
        let span = Span::new(start, self.pos());
        self.tokens.push(Token { tok, span });
    }

    fn err(&self, start: Pos, msg: impl Into<String>) -> FrontendError {
        FrontendError::syntax(Span::new(start, self.pos()), msg)
    }

    fn run(&mut self) -> Result<(), FrontendError> {
        let _ = self.src;
        let mut at_line_start = true;
        loop {
            if at_line_start && self.depth == 0 {
                if !self.handle_indentation()? {
                    break;
                }
                at_line_start = false;
            }
            let Some(c) = self.peek() else { break };
            let start = self.pos();
            match c {
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        self.push(Tok::Newline, start);
                        at_line_start = true;
                    }
                }
                ' ' | '\r' => {
                    self.bump();
                }
                '\t' => {
                    if self.depth == 0 {
                        return Err(self.err(start, "tab characters are not allowed"));
                    }
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '\\' if self.peek_at(1) == Some('\n') => {
                    self.bump();
                    self.bump();
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) => self.number()?,
                c if c.is_alphabetic() || c == '_' => self.word()?,
                '"' | '\'' => {
                    let s = self.string_body(false)?;
                    self.push(Tok::Str(s), start);
                }
                _ => self.operator()?,
            }
        }
        let end = self.pos();
        if self.depth > 0 {
            return Err(self.err(end, "unexpected end of input inside brackets"));
        }
        if !matches!(self.tokens.last().map(|t| &t.tok), None | Some(Tok::Newline) | Some(Tok::Dedent)) {
            self.push(Tok::Newline, end);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, end);
        }
        self.push(Tok::Eof, end);
        Ok(())
    }

    /// Measures indentation of the next non-blank line; returns false at EOF.
    fn handle_indentation(&mut self) -> Result<bool, FrontendError> {
        loop {
            let start = self.pos();
            let mut width = 0u32;
            while let Some(c) = self.peek() {
                match c {
                    ' ' => {
                        width += 1;
                        self.bump();
                    }
                    '\t' => return Err(self.err(start, "tab characters are not allowed in indentation")),
                    '\r' | '\x0c' => {
                        self.bump();
                    }
                    _ => break,
                }
            }
            match self.peek() {
                None => return Ok(false),
                Some('\n') => {
                    self.bump();
                    continue;
                }
                Some('#') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                    continue;
                }
                Some(_) => {}
            }
            let here = self.pos();
            let current = *self.indents.last().unwrap();
            if width > current {
                self.indents.push(width);
                self.push(Tok::Indent, here);
            } else {
                while width < *self.indents.last().unwrap() {
                    self.indents.pop();
                    self.push(Tok::Dedent, here);
                }
                if width != *self.indents.last().unwrap() {
                    return Err(self.err(start, "unindent does not match any outer indentation level"));
                }
            }
            return Ok(true);
        }
    }

    fn number(&mut self) -> Result<(), FrontendError> {
        let start = self.pos();
        let mut text = String::new();
        let mut is_float = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == '_' {
                if c != '_' {
                    text.push(c);
                }
                self.bump();
            } else if c == '.' && !is_float {
                is_float = true;
                text.push(c);
                self.bump();
            } else if (c == 'e' || c == 'E')
                && (self.peek_at(1).is_some_and(|d| d.is_ascii_digit())
                    || (matches!(self.peek_at(1), Some('+') | Some('-')) && self.peek_at(2).is_some_and(|d| d.is_ascii_digit())))
            {
                is_float = true;
                text.push('e');
                self.bump();
                if let Some(s @ ('+' | '-')) = self.peek() {
                    text.push(s);
                    self.bump();
                }
            } else {
                break;
            }
        }
        if self.peek().is_some_and(|c| c.is_alphanumeric()) {
            return Err(self.err(start, "invalid numeric literal"));
        }
        if is_float {
            let v: f64 = text.parse().map_err(|_| self.err(start, "invalid float literal"))?;
            self.push(Tok::Float(v), start);
        } else {
            let v: i64 = text.parse().map_err(|_| self.err(start, "integer literal out of range"))?;
            self.push(Tok::Int(v), start);
        }
        Ok(())
    }

    fn word(&mut self) -> Result<(), FrontendError> {
        let start = self.pos();
        let mut text = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                text.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if matches!(self.peek(), Some('"') | Some('\'')) {
            let lower = text.to_ascii_lowercase();
            match lower.as_str() {
                "f" => {
                    let body_start = self.pos();
                    let s = self.string_body(true)?;
                    let content = Pos { line: body_start.line, col: body_start.col + 1 };
                    self.push(Tok::FStr(s, content), start);
                    return Ok(());
                }
                "r" => {
                    let s = self.raw_string_body()?;
                    self.push(Tok::Str(s), start);
                    return Ok(());
                }
                _ => return Err(FrontendError::unsupported(Span::new(start, self.pos()), format!("string prefix `{text}`"))),
            }
        }
        self.push(Tok::Name(text), start);
        Ok(())
    }

    fn raw_string_body(&mut self) -> Result<String, FrontendError> {
        let start = self.pos();
        let quote = self.bump().unwrap();
        let mut out = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.err(start, "unterminated string literal")),
                Some(c) if c == quote => return Ok(out),
                Some('\\') => {
                    out.push('\\');
                    if let Some(c) = self.bump() {
                        out.push(c);
                    }
                }
                Some(c) => out.push(c),
            }
        }
    }

    /// Reads a quoted string. For f-strings, escapes are decoded but braces are
    /// left intact, and quotes nested inside `{...}` holes are skipped over.
    fn string_body(&mut self, fstring: bool) -> Result<String, FrontendError> {
        let start = self.pos();
        let quote = self.bump().unwrap();
        let triple = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        if triple {
            self.bump();
            self.bump();
        }
        let mut out = String::new();
        let mut brace_depth = 0usize;
        loop {
            let Some(c) = self.peek() else {
                return Err(self.err(start, "unterminated string literal"));
            };
            if fstring && brace_depth > 0 {
                match c {
                    '{' => brace_depth += 1,
                    '}' => brace_depth -= 1,
                    '"' | '\'' if c != quote => {
                        out.push(c);
                        self.bump();
                        while let Some(d) = self.bump() {
                            out.push(d);
                            if d == c {
                                break;
                            }
                        }
                        continue;
                    }
                    '\n' if !triple => return Err(self.err(start, "unterminated string literal")),
                    _ => {}
                }
                if c == quote && !triple {
                    return Err(self.err(self.pos(), "quote inside f-string hole"));
                }
                out.push(c);
                self.bump();
                continue;
            }
            if c == quote {
                if triple {
                    if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                        self.bump();
                        self.bump();
                        self.bump();
                        return Ok(out);
                    }
                    out.push(c);
                    self.bump();
                    continue;
                }
                self.bump();
                return Ok(out);
            }
            match c {
                '\n' if !triple => return Err(self.err(start, "unterminated string literal")),
                '\\' => {
                    let esc_start = self.pos();
                    self.bump();
                    let Some(e) = self.bump() else {
                        return Err(self.err(start, "unterminated string literal"));
                    };
                    match e {
                        '\n' => {}
                        '\\' => out.push('\\'),
                        '\'' => out.push('\''),
                        '"' => out.push('"'),
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        '0' => out.push('\0'),
                        'x' => out.push(self.hex_escape(2, esc_start)?),
                        'u' => out.push(self.hex_escape(4, esc_start)?),
                        'U' => out.push(self.hex_escape(8, esc_start)?),
                        other => {
                            out.push('\\');
                            out.push(other);
                        }
                    }
                }
                '{' if fstring => {
                    if self.peek_at(1) == Some('{') {
                        out.push_str("{{");
                        self.bump();
                        self.bump();
                    } else {
                        brace_depth += 1;
                        out.push('{');
                        self.bump();
                    }
                }
                _ => {
                    out.push(c);
                    self.bump();
                }
            }
        }
    }

    fn hex_escape(&mut self, n: usize, start: Pos) -> Result<char, FrontendError> {
        let mut v = 0u32;
        for _ in 0..n {
            let d = self.bump().and_then(|c| c.to_digit(16)).ok_or_else(|| self.err(start, "invalid escape sequence"))?;
            v = v * 16 + d;
        }
        char::from_u32(v).ok_or_else(|| self.err(start, "invalid code point in escape"))
    }

    fn operator(&mut self) -> Result<(), FrontendError> {
        let start = self.pos();
        for op in OPERATORS {
            let n = op.chars().count();
            if (0..n).all(|i| self.peek_at(i) == op.chars().nth(i)) {
                for _ in 0..n {
                    self.bump();
                }
                match *op {
                    "(" | "[" | "{" => self.depth += 1,
                    ")" | "]" | "}" => {
                        if self.depth == 0 {
                            return Err(self.err(start, format!("unmatched `{op}`")));
                        }
                        self.depth -= 1;
                    }
                    _ => {}
                }
                self.push(Tok::Op(op), start);
                return Ok(());
            }
        }
        let c = self.peek().unwrap();
        Err(self.err(start, format!("unexpected character `{c}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn indent_dedent_pairs() {
        let toks = kinds("if a:\n    b\nc\n");
        let indents = toks.iter().filter(|t| **t == Tok::Indent).count();
        let dedents = toks.iter().filter(|t| **t == Tok::Dedent).count();
        assert_eq!(indents, 1);
        assert_eq!(dedents, 1);
    }

    #[test]
    fn tabs_rejected() {
        let err = tokenize("if a:\n\tb\n").unwrap_err();
        assert!(matches!(err, FrontendError::Syntax { .. }));
    }

    #[test]
    fn brackets_join_lines() {
        let toks = kinds("f(a,\n  b)\n");
        assert_eq!(toks.iter().filter(|t| **t == Tok::Newline).count(), 1);
    }

    #[test]
    fn bad_dedent() {
        assert!(tokenize("if a:\n    b\n  c\n").is_err());
    }

    #[test]
    fn fstring_keeps_holes() {
        let toks = kinds("f\"{idx}: {value}\"\n");
        assert!(matches!(&toks[0], Tok::FStr(s, _) if s == "{idx}: {value}"));
    }

    #[test]
    fn string_escapes() {
        let toks = kinds("'a\\nb\\x41'\n");
        assert_eq!(toks[0], Tok::Str("a\nbA".into()));
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("1_000 2.5 1e3\n")[..3], [Tok::Int(1000), Tok::Float(2.5), Tok::Float(1000.0)]);
    }
}
