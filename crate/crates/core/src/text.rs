//! Character cursor shared by the group-word and algebra-expression parsers.

use std::fmt;

/// Parse failure at a 1-based character column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone)]
pub(crate) struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    // column offset of `chars[0]` within the user's original text
    base: usize,
    _src: std::marker::PhantomData<&'a str>,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Cursor::with_base(src, 0)
    }

    pub(crate) fn with_base(src: &'a str, base: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            base,
            _src: std::marker::PhantomData,
        }
    }

    pub(crate) fn column(&self) -> usize {
        self.base + self.pos + 1
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            column: self.column(),
            message: message.into(),
        }
    }

    pub(crate) fn error_at(&self, pos: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            column: self.base + pos + 1,
            message: message.into(),
        }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    pub(crate) fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    pub(crate) fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    pub(crate) fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    pub(crate) fn is_minus(c: char) -> bool {
        c == '-' || c == '−'
    }

    /// Unsigned decimal digits.
    pub(crate) fn digits(&mut self) -> Option<String> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| self.chars[start..self.pos].iter().collect())
    }

    /// Signed integer: `-?digits`, or the same wrapped in parentheses.
    pub(crate) fn signed_int(&mut self) -> Result<i64, ParseError> {
        let start = self.pos;
        let paren = self.eat('(');
        if paren {
            self.skip_ws();
        }
        let neg = match self.peek() {
            Some(c) if Cursor::is_minus(c) => {
                self.pos += 1;
                true
            }
            Some('+') => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        let d = self
            .digits()
            .ok_or_else(|| self.error("malformed exponent"))?;
        let mut v: i64 = d
            .parse()
            .map_err(|_| self.error_at(start, "exponent out of range"))?;
        if neg {
            v = -v;
        }
        if paren {
            self.skip_ws();
            if !self.eat(')') {
                return Err(self.error("expected `)` after exponent"));
            }
        }
        Ok(v)
    }
}
