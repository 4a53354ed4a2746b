//! Whitespace tokenizer shared by the LEF and DEF readers.

use crate::error::{Error, Result};
use crate::geom::{parse_um, Dbu};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Token<'a> {
    pub text: &'a str,
    pub line: usize,
    pub col: usize,
}

/// A recorded, non-fatal problem found while reading a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub line: usize,
    pub message: String,
}

pub(crate) struct Tokens<'a> {
    toks: Vec<Token<'a>>,
    pos: usize,
    eof_line: usize,
    pub warnings: Vec<Warning>,
}

impl<'a> Tokens<'a> {
    pub fn new(text: &'a str) -> Result<Self> {
        let mut toks = Vec::new();
        let mut last_line = 1;
        for (li, line) in text.lines().enumerate() {
            last_line = li + 1;
            let bytes = line.as_bytes();
            let mut i = 0;
            while i < bytes.len() {
                let b = bytes[i];
                if b.is_ascii_whitespace() {
                    i += 1;
                    continue;
                }
                if b == b'#' {
                    break;
                }
                let start = i;
                if b == b'"' {
                    i += 1;
                    while i < bytes.len() && bytes[i] != b'"' {
                        i += 1;
                    }
                    if i >= bytes.len() {
                        return Err(Error::syntax(li + 1, start + 1, "unterminated string"));
                    }
                    i += 1;
                    toks.push(Token { text: &line[start..i], line: li + 1, col: start + 1 });
                    continue;
                }
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                let word = &line[start..i];
                if word.len() > 1 && word.ends_with(';') {
                    let cut = word.len() - 1;
                    toks.push(Token { text: &word[..cut], line: li + 1, col: start + 1 });
                    toks.push(Token { text: ";", line: li + 1, col: start + cut + 1 });
                } else {
                    toks.push(Token { text: word, line: li + 1, col: start + 1 });
                }
            }
        }
        Ok(Tokens { toks, pos: 0, eof_line: last_line, warnings: Vec::new() })
    }

    pub fn peek(&self) -> Option<Token<'a>> {
        self.toks.get(self.pos).copied()
    }

    pub fn next(&mut self) -> Result<Token<'a>> {
        let t = self.toks.get(self.pos).copied().ok_or_else(|| Error::syntax(self.eof_line, 1, "unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    pub fn expect(&mut self, want: &str) -> Result<Token<'a>> {
        let t = self.next()?;
        if t.text != want {
            return Err(Error::syntax(t.line, t.col, format!("expected `{want}`, found `{}`", t.text)));
        }
        Ok(t)
    }

    pub fn eat(&mut self, want: &str) -> bool {
        if self.peek().is_some_and(|t| t.text == want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn ident(&mut self) -> Result<Token<'a>> {
        let t = self.next()?;
        if t.text == ";" {
            return Err(Error::syntax(t.line, t.col, "expected a name, found `;`"));
        }
        Ok(t)
    }

    pub fn um(&mut self) -> Result<Dbu> {
        let t = self.next()?;
        parse_um(t.text).ok_or_else(|| Error::syntax(t.line, t.col, format!("expected a number, found `{}`", t.text)))
    }

    pub fn int(&mut self) -> Result<i64> {
        let t = self.next()?;
        t.text.parse().map_err(|_| Error::syntax(t.line, t.col, format!("expected an integer, found `{}`", t.text)))
    }

    /// Skips to and including the next `;`.
    pub fn skip_statement(&mut self) -> Result<()> {
        loop {
            if self.next()?.text == ";" {
                return Ok(());
            }
        }
    }

    /// Skips tokens up to and including `END <name>`.
    pub fn skip_block(&mut self, name: &str) -> Result<()> {
        loop {
            let t = self.next()?;
            if t.text == "END" && self.peek().is_some_and(|n| n.text == name) {
                self.pos += 1;
                return Ok(());
            }
        }
    }

    pub fn warn(&mut self, line: usize, message: String) {
        log::debug!("line {line}: {message}");
        self.warnings.push(Warning { line, message });
    }
}

/// Strips surrounding double quotes.
pub(crate) fn unquote(s: &str) -> &str {
    s.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(s)
}
