//! Sectioned key–value text format shared by farm and factor files.
//!
//! ```text
//! # comment
//! [crop.rye]
//! area = 40 ha
//! name = "Petkus"
//! land_class = marginal
//! perennial = false
//! compare = tall_wheatgrass, rye
//! ```
//!
//! Section order is irrelevant. Keys are unique within a section and section
//! paths are unique within a document.

use std::fmt;

use thiserror::Error;

use crate::quantity::{parse_quantity, Quantity};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyntaxErrorKind {
    Malformed,
    DuplicateKey,
    /// Carries the dotted section path.
    DuplicateSection(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub kind: SyntaxErrorKind,
}

impl SyntaxError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            column,
            message: message.into(),
            kind: SyntaxErrorKind::Malformed,
        }
    }

    fn with_kind(mut self, kind: SyntaxErrorKind) -> Self {
        self.kind = kind;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Quantity(Quantity),
    Text(String),
    Ident(String),
    Bool(bool),
    List(Vec<Value>),
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Quantity(_) => "quantity",
            Value::Text(_) => "text",
            Value::Ident(_) => "identifier",
            Value::Bool(_) => "boolean",
            Value::List(_) => "list",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Quantity(q) => write!(f, "{q}"),
            Value::Text(s) => {
                write!(f, "\"")?;
                for c in s.chars() {
                    match c {
                        '"' => write!(f, "\\\"")?,
                        '\\' => write!(f, "\\\\")?,
                        '\n' => write!(f, "\\n")?,
                        '\t' => write!(f, "\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                write!(f, "\"")
            }
            Value::Ident(s) => write!(f, "{s}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::List(items) => {
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub key: String,
    pub value: Value,
    pub line: usize,
}

/// Positions are ignored by equality so that a formatted and reparsed
/// document compares equal to its source.
impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.value == other.value
    }
}

#[derive(Debug, Clone)]
pub struct Section {
    pub path: Vec<String>,
    pub entries: Vec<Entry>,
    pub line: usize,
}

impl PartialEq for Section {
    fn eq(&self, other: &Self) -> bool {
        self.path == other.path && self.entries == other.entries
    }
}

impl Section {
    pub fn name(&self) -> String {
        self.path.join(".")
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn section(&self, path: &[&str]) -> Option<&Section> {
        self.sections
            .iter()
            .find(|s| s.path.iter().map(String::as_str).eq(path.iter().copied()))
    }

    /// Sections whose path starts with `prefix`.
    pub fn sections_under<'a>(&'a self, prefix: &'a [&'a str]) -> impl Iterator<Item = &'a Section> {
        self.sections.iter().filter(move |s| {
            s.path.len() >= prefix.len()
                && s.path.iter().zip(prefix).all(|(a, b)| a == b)
        })
    }
}

impl fmt::Display for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "[{}]", s.name())?;
            for e in &s.entries {
                writeln!(f, "{} = {}", e.key, e.value)?;
            }
        }
        Ok(())
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_') && chars.all(is_name_char)
}

/// `marginal.2013`: identifier segments joined by dots, used for references.
fn is_dotted_ident(s: &str) -> bool {
    let mut parts = s.split('.');
    parts.next().is_some_and(is_ident) && parts.all(|p| !p.is_empty() && p.chars().all(is_name_char))
}

/// Strips a trailing comment, honoring `#` inside quoted text.
fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_quotes => escaped = true,
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Splits a value on top-level commas; `col` is the 1-based column of `text`.
fn split_list(text: &str, line: usize, col: usize) -> Result<Vec<(usize, &str)>, SyntaxError> {
    let mut parts = Vec::new();
    let mut in_quotes = false;
    let mut escaped = false;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_quotes => escaped = true,
            '"' => in_quotes = !in_quotes,
            ',' if !in_quotes => {
                parts.push((col + start, &text[start..i]));
                start = i + 1;
            }
            _ => {}
        }
    }
    if in_quotes {
        return Err(SyntaxError::new(line, col, "unterminated string"));
    }
    parts.push((col + start, &text[start..]));
    Ok(parts)
}

fn parse_text(raw: &str, line: usize, col: usize) -> Result<String, SyntaxError> {
    let inner = &raw[1..raw.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                other => {
                    return Err(SyntaxError::new(
                        line,
                        col,
                        format!("invalid escape `\\{}`", other.map(String::from).unwrap_or_default()),
                    ))
                }
            },
            '"' => return Err(SyntaxError::new(line, col, "unescaped quote in string")),
            c => out.push(c),
        }
    }
    Ok(out)
}

fn parse_scalar(raw: &str, line: usize, col: usize) -> Result<Value, SyntaxError> {
    let trimmed = raw.trim();
    let col = col + (raw.len() - raw.trim_start().len());
    if trimmed.is_empty() {
        return Err(SyntaxError::new(line, col, "missing value"));
    }
    if trimmed.starts_with('"') {
        if trimmed.len() < 2 || !trimmed.ends_with('"') {
            return Err(SyntaxError::new(line, col, "unterminated string"));
        }
        return parse_text(trimmed, line, col).map(Value::Text);
    }
    match trimmed {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    if trimmed.starts_with(|c: char| c.is_ascii_digit() || matches!(c, '+' | '-' | '.')) {
        return parse_quantity(trimmed)
            .map(Value::Quantity)
            .map_err(|e| SyntaxError::new(line, col, e.to_string()));
    }
    if is_ident(trimmed) || is_dotted_ident(trimmed) {
        return Ok(Value::Ident(trimmed.to_string()));
    }
    Err(SyntaxError::new(
        line,
        col,
        format!("cannot parse value `{trimmed}`"),
    ))
}

fn parse_value(text: &str, line: usize, col: usize) -> Result<Value, SyntaxError> {
    let parts = split_list(text, line, col)?;
    if parts.len() == 1 {
        return parse_scalar(parts[0].1, line, parts[0].0);
    }
    parts
        .into_iter()
        .map(|(c, p)| parse_scalar(p, line, c))
        .collect::<Result<Vec<_>, _>>()
        .map(Value::List)
}

/// Parses a document. Accepts LF or CRLF line endings.
pub fn parse_document(text: &str) -> Result<Document, SyntaxError> {
    let mut doc = Document::default();
    for (idx, raw_line) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let raw_line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let content = strip_comment(raw_line);
        let indent = content.len() - content.trim_start().len();
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let col = indent + 1;
        if let Some(rest) = content.strip_prefix('[') {
            let inner = rest
                .strip_suffix(']')
                .ok_or_else(|| SyntaxError::new(line_no, col, "unterminated section header"))?;
            let path: Vec<String> = inner.split('.').map(|s| s.trim().to_string()).collect();
            if path.iter().any(|s| s.is_empty() || !s.chars().all(is_name_char)) {
                return Err(SyntaxError::new(
                    line_no,
                    col,
                    format!("invalid section path `{inner}`"),
                ));
            }
            if doc.sections.iter().any(|s| s.path == path) {
                return Err(SyntaxError::new(
                    line_no,
                    col,
                    format!("duplicate section `{}`", path.join(".")),
                )
                .with_kind(SyntaxErrorKind::DuplicateSection(path.join("."))));
            }
            doc.sections.push(Section {
                path,
                entries: Vec::new(),
                line: line_no,
            });
            continue;
        }
        let (key, raw_value) = content
            .split_once('=')
            .ok_or_else(|| SyntaxError::new(line_no, col, "expected `key = value`"))?;
        let key = key.trim();
        if !is_ident(key) {
            return Err(SyntaxError::new(line_no, col, format!("invalid key `{key}`")));
        }
        let section = doc
            .sections
            .last_mut()
            .ok_or_else(|| SyntaxError::new(line_no, col, "entry outside of any section"))?;
        if section.entries.iter().any(|e| e.key == key) {
            return Err(SyntaxError::new(
                line_no,
                col,
                format!("duplicate key `{key}` in section `{}`", section.name()),
            )
            .with_kind(SyntaxErrorKind::DuplicateKey));
        }
        let value_col = col + content.len() - raw_value.len();
        let value = parse_value(raw_value, line_no, value_col)?;
        section.entries.push(Entry {
            key: key.to_string(),
            value,
            line: line_no,
        });
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_value_kinds() {
        let doc = parse_document(
            "# header\r\n[crop.rye]\r\narea = 40 ha # trailing\nname = \"Pet#kus\"\nclass = marginal\nperennial = false\npair = tall_wheatgrass, rye\n",
        )
        .unwrap();
        let s = doc.section(&["crop", "rye"]).unwrap();
        assert_eq!(s.entries.len(), 5);
        assert!(matches!(s.get("area").unwrap().value, Value::Quantity(_)));
        assert_eq!(s.get("name").unwrap().value, Value::Text("Pet#kus".into()));
        assert_eq!(s.get("class").unwrap().value, Value::Ident("marginal".into()));
        assert_eq!(s.get("perennial").unwrap().value, Value::Bool(false));
        assert_eq!(
            s.get("pair").unwrap().value,
            Value::List(vec![
                Value::Ident("tall_wheatgrass".into()),
                Value::Ident("rye".into())
            ])
        );
    }

    #[test]
    fn reports_line_and_column() {
        let err = parse_document("[farm]\narea = 40 parsecs\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.column, 8);
        let err = parse_document("[farm\n").unwrap_err();
        assert_eq!((err.line, err.column), (1, 1));
        let err = parse_document("x = 1\n").unwrap_err();
        assert!(err.message.contains("outside"));
    }

    #[test]
    fn rejects_duplicates() {
        let err = parse_document("[a]\nx = 1\nx = 2\n").unwrap_err();
        assert!(err.message.contains("duplicate key"));
        let err = parse_document("[a]\n[b]\n[a]\n").unwrap_err();
        assert!(err.message.contains("duplicate section"));
        assert_eq!(err.line, 3);
    }

    #[test]
    fn text_escapes_round_trip() {
        let doc = parse_document("[a]\nt = \"say \\\"hi\\\" \\\\ #1\"\n").unwrap();
        let again = parse_document(&doc.to_string()).unwrap();
        assert_eq!(doc, again);
        assert_eq!(
            doc.sections[0].entries[0].value,
            Value::Text("say \"hi\" \\ #1".into())
        );
    }

    #[test]
    fn empty_document_has_no_sections() {
        assert!(parse_document("").unwrap().sections.is_empty());
        assert!(parse_document("  # only a comment\n").unwrap().sections.is_empty());
    }
}
