//! Line-based `key = value` config parsing with optional `[section]` blocks.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One parsed `[section]` with its key/value pairs in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub pairs: Vec<(String, String)>,
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are
/// ignored. Returns pairs in file order.
pub fn parse_kv(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::parse(path, format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Parses a sectioned file. Keys before the first `[section]` go into a
/// section with an empty name.
pub fn parse_sections(text: &str, path: &Path) -> Result<Vec<Section>> {
    let mut sections = vec![Section {
        name: String::new(),
        pairs: Vec::new(),
    }];
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            sections.push(Section {
                name: name.trim().to_string(),
                pairs: Vec::new(),
            });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::parse(path, format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        sections
            .last_mut()
            .unwrap()
            .pairs
            .push((key.trim().to_string(), value.trim().to_string()));
    }
    if sections[0].pairs.is_empty() {
        sections.remove(0);
    }
    Ok(sections)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(idx) => &line[..idx],
        None => line,
    }
}

pub fn read_kv_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kv(&text, path)
}

/// Looks up `key` and parses it, erroring with the file path on failure.
pub fn require<T: FromStr>(pairs: &[(String, String)], key: &str, path: &Path) -> Result<T> {
    let value = lookup(pairs, key)
        .ok_or_else(|| Error::parse(path, format!("missing required key '{key}'")))?;
    value
        .parse()
        .map_err(|_| Error::parse(path, format!("invalid value '{value}' for key '{key}'")))
}

/// Optional lookup with parse; `None` when the key is absent.
pub fn optional<T: FromStr>(
    pairs: &[(String, String)],
    key: &str,
    path: &Path,
) -> Result<Option<T>> {
    match lookup(pairs, key) {
        None => Ok(None),
        Some(value) => value
            .parse()
            .map(Some)
            .map_err(|_| Error::parse(path, format!("invalid value '{value}' for key '{key}'"))),
    }
}

pub fn lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}
