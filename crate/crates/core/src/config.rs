//! The small key/value document format shared by vocabulary and levels files.
//!
//! ```text
//! # comment
//! PRICE = [1, 2]
//! TECH = [COMFORT, 6]
//! "Embarkment port" = [7]
//! levels = [[[1], [2]], [[1, 2]]]
//! ```
//!
//! Keys are bare identifiers or double-quoted strings. Values are integers,
//! names (bare or quoted), or arrays of values; arrays may span lines.

use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{position}: {message}")]
pub struct ConfigError {
    pub position: Position,
    pub message: String,
}

impl ConfigError {
    pub fn new(position: Position, message: impl Into<String>) -> Self {
        ConfigError {
            position,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ValueKind {
    Int(i64),
    Name(String),
    Array(Vec<Value>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Value {
    pub kind: ValueKind,
    pub position: Position,
}

impl Value {
    pub fn as_array(&self) -> Option<&[Value]> {
        match &self.kind {
            ValueKind::Array(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self.kind {
            ValueKind::Int(i) => Some(i),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub position: Position,
    pub value: Value,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Document {
    pub entries: Vec<Entry>,
}

impl Document {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Ident(String),
    Str(String),
    Int(i64),
    Eq,
    Open,
    Close,
    Comma,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn pos(&self) -> Position {
        Position {
            line: self.line,
            column: self.column,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == '#' {
                while self.chars.peek().is_some_and(|&c| c != '\n') {
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<Option<(Token, Position)>, ConfigError> {
        self.skip_trivia();
        let start = self.pos();
        let Some(&c) = self.chars.peek() else {
            return Ok(None);
        };
        let tok = match c {
            '=' => {
                self.bump();
                Token::Eq
            }
            '[' => {
                self.bump();
                Token::Open
            }
            ']' => {
                self.bump();
                Token::Close
            }
            ',' => {
                self.bump();
                Token::Comma
            }
            '"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some(e @ ('"' | '\\')) => s.push(e),
                            _ => return Err(ConfigError::new(start, "invalid escape in string")),
                        },
                        Some('\n') | None => {
                            return Err(ConfigError::new(start, "unterminated string"))
                        }
                        Some(ch) => s.push(ch),
                    }
                }
                Token::Str(s)
            }
            c if c == '-' || c.is_ascii_digit() => {
                let mut s = String::new();
                s.push(self.bump().unwrap_or_default());
                while self.chars.peek().is_some_and(|c| c.is_ascii_alphanumeric() || *c == '.') {
                    s.push(self.bump().unwrap_or_default());
                }
                let value = s
                    .parse::<i64>()
                    .map_err(|_| ConfigError::new(start, format!("invalid integer `{s}`")))?;
                Token::Int(value)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while self
                    .chars
                    .peek()
                    .is_some_and(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
                {
                    s.push(self.bump().unwrap_or_default());
                }
                Token::Ident(s)
            }
            other => {
                return Err(ConfigError::new(start, format!("unexpected character `{other}`")))
            }
        };
        Ok(Some((tok, start)))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(Token, Position)>,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<Option<&(Token, Position)>, ConfigError> {
        if self.peeked.is_none() {
            self.peeked = self.lexer.next_token()?;
        }
        Ok(self.peeked.as_ref())
    }

    fn next(&mut self) -> Result<Option<(Token, Position)>, ConfigError> {
        match self.peeked.take() {
            Some(t) => Ok(Some(t)),
            None => self.lexer.next_token(),
        }
    }

    fn end(&self) -> Position {
        self.lexer.pos()
    }

    fn value(&mut self) -> Result<Value, ConfigError> {
        let Some((tok, position)) = self.next()? else {
            return Err(ConfigError::new(self.end(), "expected a value, found end of input"));
        };
        let kind = match tok {
            Token::Int(i) => ValueKind::Int(i),
            Token::Ident(s) | Token::Str(s) => ValueKind::Name(s),
            Token::Open => {
                let mut items = Vec::new();
                loop {
                    if matches!(self.peek()?, Some((Token::Close, _))) {
                        self.next()?;
                        break;
                    }
                    items.push(self.value()?);
                    match self.next()? {
                        Some((Token::Comma, _)) => continue,
                        Some((Token::Close, _)) => break,
                        Some((_, p)) => return Err(ConfigError::new(p, "expected `,` or `]`")),
                        None => {
                            return Err(ConfigError::new(position, "unterminated array"));
                        }
                    }
                }
                ValueKind::Array(items)
            }
            _ => return Err(ConfigError::new(position, "expected a value")),
        };
        Ok(Value { kind, position })
    }
}

pub fn parse_document(src: &str) -> Result<Document, ConfigError> {
    let mut parser = Parser {
        lexer: Lexer::new(src),
        peeked: None,
    };
    let mut doc = Document::default();
    while let Some((tok, position)) = parser.next()? {
        let key = match tok {
            Token::Ident(s) | Token::Str(s) => s,
            _ => return Err(ConfigError::new(position, "expected a key")),
        };
        match parser.next()? {
            Some((Token::Eq, _)) => {}
            Some((_, p)) => return Err(ConfigError::new(p, format!("expected `=` after `{key}`"))),
            None => {
                return Err(ConfigError::new(parser.end(), format!("expected `=` after `{key}`")))
            }
        }
        if doc.get(&key).is_some() {
            return Err(ConfigError::new(position, format!("duplicate key `{key}`")));
        }
        let value = parser.value()?;
        doc.entries.push(Entry { key, position, value });
    }
    Ok(doc)
}

/// Bare identifiers are written as-is, anything else is quoted.
pub fn format_name(name: &str) -> String {
    let bare = name
        .chars()
        .next()
        .is_some_and(|c| c.is_alphabetic() || c == '_')
        && name
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if bare {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_values_and_nesting() {
        let doc = parse_document(
            "# cars\nPRICE = [1, 2]\nTECH = [COMFORT, 6,]\n\"Embarkment port\" = [7]\nlevels = [\n  [[1], [2]],\n  [[1, 2]]\n]\nn = 3\n",
        )
        .unwrap();
        let keys: Vec<_> = doc.entries.iter().map(|e| e.key.as_str()).collect();
        assert_eq!(keys, ["PRICE", "TECH", "Embarkment port", "levels", "n"]);
        let tech = doc.get("TECH").unwrap().value.as_array().unwrap();
        assert_eq!(tech[0].kind, ValueKind::Name("COMFORT".into()));
        assert_eq!(tech[1].as_int(), Some(6));
        assert_eq!(tech[1].position, Position { line: 3, column: 18 });
        let levels = doc.get("levels").unwrap().value.as_array().unwrap();
        assert_eq!(levels.len(), 2);
        assert_eq!(doc.get("n").unwrap().value.as_int(), Some(3));
    }

    #[test]
    fn reports_positions() {
        let err = parse_document("A = [1, 2\nB = [3]").unwrap_err();
        assert_eq!(err.position, Position { line: 2, column: 1 });
        let err = parse_document("A [1]").unwrap_err();
        assert_eq!(err.position.column, 3);
        let err = parse_document("A = [1]\nA = [2]").unwrap_err();
        assert!(err.message.contains("duplicate"));
        assert_eq!(err.position.line, 2);
        assert!(parse_document("A = \"open").is_err());
        assert!(parse_document("A = 1.5").is_err());
    }

    #[test]
    fn name_formatting() {
        assert_eq!(format_name("TECH"), "TECH");
        assert_eq!(format_name("Embarkment port"), "\"Embarkment port\"");
    }
}
