//! Minimal reader for the Lisp-style data files used by policies, channel
//! specifications and provenance records.
//!
//! Grammar: lists in parentheses, double-quoted strings with `\"` and `\\`
//! escapes, bare atoms, `;` line comments, and `'datum` as shorthand for
//! `(quote datum)`.

use std::fmt;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    /// Bare atom: symbol, number or boolean.
    Atom(String),
    /// Double-quoted string.
    Str(String),
    List(Vec<Sexp>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("syntax error at byte {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

fn err(offset: usize, message: impl Into<String>) -> SyntaxError {
    SyntaxError { offset, message: message.into() }
}

impl Sexp {
    pub fn atom(s: &str) -> Sexp {
        Sexp::Atom(s.to_string())
    }

    pub fn string(s: &str) -> Sexp {
        Sexp::Str(s.to_string())
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Sexp::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items) => Some(items),
            _ => None,
        }
    }

    /// For a list whose first element is the atom `head`, the remaining elements.
    pub fn tagged(&self, head: &str) -> Option<&[Sexp]> {
        match self.as_list()? {
            [Sexp::Atom(h), rest @ ..] if h == head => Some(rest),
            _ => None,
        }
    }

    /// Finds the first `(key ...)` child in a list's elements.
    pub fn field<'a>(items: &'a [Sexp], key: &str) -> Option<&'a [Sexp]> {
        items.iter().find_map(|i| i.tagged(key))
    }

    /// A symbol written bare, as a string, or quoted (`'name`).
    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::Str(s) => Some(s),
            Sexp::List(_) => match self.tagged("quote")? {
                [Sexp::Atom(a)] => Some(a),
                _ => None,
            },
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '"' | ';' | '\'')
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn skip_blank(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else if c == ';' {
                match self.text[self.pos..].find('\n') {
                    Some(n) => self.pos += n + 1,
                    None => self.pos = self.text.len(),
                }
            } else {
                break;
            }
        }
    }

    fn datum(&mut self, depth: usize) -> Result<Sexp, SyntaxError> {
        if depth > 256 {
            return Err(err(self.pos, "nesting too deep"));
        }
        self.skip_blank();
        let start = self.pos;
        match self.peek() {
            None => Err(err(start, "unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_blank();
                    match self.peek() {
                        None => return Err(err(start, "unbalanced parenthesis")),
                        Some(')') => {
                            self.pos += 1;
                            return Ok(Sexp::List(items));
                        }
                        Some(_) => items.push(self.datum(depth + 1)?),
                    }
                }
            }
            Some(')') => Err(err(start, "unexpected closing parenthesis")),
            Some('\'') => {
                self.pos += 1;
                let quoted = self.datum(depth + 1)?;
                Ok(Sexp::List(vec![Sexp::atom("quote"), quoted]))
            }
            Some('"') => {
                self.pos += 1;
                let mut out = String::new();
                let mut chars = self.text[self.pos..].char_indices();
                loop {
                    let Some((i, c)) = chars.next() else {
                        return Err(err(start, "unterminated string"));
                    };
                    match c {
                        '"' => {
                            self.pos += i + 1;
                            return Ok(Sexp::Str(out));
                        }
                        '\\' => match chars.next() {
                            Some((_, '"')) => out.push('"'),
                            Some((_, '\\')) => out.push('\\'),
                            Some((j, _)) => return Err(err(self.pos + j - 1, "unknown escape sequence")),
                            None => return Err(err(start, "unterminated string")),
                        },
                        c => out.push(c),
                    }
                }
            }
            Some(_) => {
                let len = self.text[self.pos..].find(is_delimiter).unwrap_or(self.text.len() - self.pos);
                self.pos += len;
                Ok(Sexp::Atom(self.text[start..self.pos].to_string()))
            }
        }
    }
}

fn decode(bytes: &[u8]) -> Result<&str, SyntaxError> {
    if bytes.starts_with(&[0xEF, 0xBB, 0xBF]) {
        return Err(err(0, "byte-order mark not allowed"));
    }
    std::str::from_utf8(bytes).map_err(|e| err(e.valid_up_to(), "invalid UTF-8"))
}

/// Parses every top-level datum in `bytes`.
pub fn parse_sexps(bytes: &[u8]) -> Result<Vec<Sexp>, SyntaxError> {
    let text = decode(bytes)?;
    let mut p = Parser { text, pos: 0 };
    let mut out = Vec::new();
    loop {
        p.skip_blank();
        if p.pos >= text.len() {
            return Ok(out);
        }
        out.push(p.datum(0)?);
    }
}

/// Parses exactly one datum.
pub fn parse_sexp(bytes: &[u8]) -> Result<Sexp, SyntaxError> {
    let text = decode(bytes)?;
    let mut p = Parser { text, pos: 0 };
    let datum = p.datum(0)?;
    p.skip_blank();
    if p.pos < text.len() {
        return Err(err(p.pos, "trailing data after expression"));
    }
    Ok(datum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nested_lists_and_strings() {
        let s = parse_sexp(br#"(a (b "c"))"#).unwrap();
        assert_eq!(s, Sexp::List(vec![Sexp::atom("a"), Sexp::List(vec![Sexp::atom("b"), Sexp::string("c")])]));
    }

    #[test]
    fn comments_and_escapes() {
        let s = parse_sexp(b"(x ; comment here\n \"q\\\"uote\\\\\") ; trailing").unwrap();
        assert_eq!(s, Sexp::List(vec![Sexp::atom("x"), Sexp::string("q\"uote\\")]));
    }

    #[test]
    fn quote_shorthand() {
        let s = parse_sexp(b"(name 'my-channel)").unwrap();
        let rest = s.tagged("name").unwrap();
        assert_eq!(rest[0].as_symbol(), Some("my-channel"));
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(parse_sexp(b"(unclosed").unwrap_err().offset, 0);
        assert_eq!(parse_sexp(b"(a \"open)").unwrap_err().offset, 3);
        assert_eq!(parse_sexp(b"(a))").unwrap_err().offset, 3);
        assert!(parse_sexp(b")").is_err());
        assert!(parse_sexp(b"").is_err());
        assert!(parse_sexp(b"(a \"\\n\")").is_err());
        assert_eq!(parse_sexp(b"\xEF\xBB\xBF(a)").unwrap_err().offset, 0);
        assert!(parse_sexp(b"(a \xff)").is_err());
    }

    #[test]
    fn multiple_data() {
        assert_eq!(parse_sexps(b"(a) (b) c").unwrap().len(), 3);
        assert!(parse_sexps(b"  ; nothing\n").unwrap().is_empty());
    }

    fn arb_sexp() -> impl Strategy<Value = Sexp> {
        let leaf = prop_oneof!["[a-z0-9#!?*<>=+-]{1,8}".prop_map(Sexp::Atom), "[ -~]{0,10}".prop_map(Sexp::Str),];
        leaf.prop_recursive(4, 32, 6, |inner| prop::collection::vec(inner, 0..6).prop_map(Sexp::List))
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(s in arb_sexp()) {
            let printed = s.to_string();
            prop_assert_eq!(parse_sexp(printed.as_bytes()).unwrap(), s);
        }
    }
}
