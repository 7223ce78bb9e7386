//! Document tree model shared by every other module.
//!
//! A [`DocNode`] is an ordered, position-annotated YAML/JSON document tree.
//! Mapping key order is preserved through parse/serialize round trips;
//! structural equality ignores source positions.

pub mod emit;
mod parse;
pub mod path;

pub use emit::{to_json, to_json_pretty, to_yaml};
pub use parse::{parse_document, parse_raw_documents, resolve_plain_scalar, DocFormat, ParseError, RawNode, RawValue};

use serde::ser::{Serialize, SerializeMap, SerializeSeq, Serializer};
use std::fmt;

/// Scalar type inferred per the YAML 1.2 core schema (JSON types map onto it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScalarKind {
    Bool,
    Int,
    Float,
    Str,
    Null,
}

impl ScalarKind {
    pub fn name(self) -> &'static str {
        match self {
            ScalarKind::Bool => "boolean",
            ScalarKind::Int => "integer",
            ScalarKind::Float => "float",
            ScalarKind::Str => "string",
            ScalarKind::Null => "null",
        }
    }
}

/// A scalar value with its canonical text.
///
/// Canonical forms: booleans are `true`/`false`, integers are decimal,
/// floats keep a normalized decimal rendering, null is `null`. Equality is
/// canonical-text equality per kind, so `True` and `true` compare equal once
/// parsed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Scalar {
    kind: ScalarKind,
    text: String,
}

impl Scalar {
    pub fn bool(v: bool) -> Self {
        Scalar {
            kind: ScalarKind::Bool,
            text: if v { "true" } else { "false" }.to_string(),
        }
    }

    pub fn int(v: i64) -> Self {
        Scalar {
            kind: ScalarKind::Int,
            text: v.to_string(),
        }
    }

    pub fn float(v: f64) -> Self {
        Scalar {
            kind: ScalarKind::Float,
            text: format_float(v),
        }
    }

    pub fn str(v: impl Into<String>) -> Self {
        Scalar {
            kind: ScalarKind::Str,
            text: v.into(),
        }
    }

    pub fn null() -> Self {
        Scalar {
            kind: ScalarKind::Null,
            text: "null".to_string(),
        }
    }

    /// Builds a scalar from raw text plus an already-resolved kind,
    /// canonicalizing the text.
    pub fn resolved(kind: ScalarKind, text: &str) -> Self {
        match kind {
            ScalarKind::Bool => Scalar::bool(text.eq_ignore_ascii_case("true")),
            ScalarKind::Int => match parse_int(text) {
                Some(v) => Scalar {
                    kind: ScalarKind::Int,
                    text: v.to_string(),
                },
                // Out-of-range integers keep their source text.
                None => Scalar {
                    kind: ScalarKind::Int,
                    text: text.to_string(),
                },
            },
            ScalarKind::Float => match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Scalar::float(v),
                _ => Scalar {
                    kind: ScalarKind::Float,
                    text: text.to_string(),
                },
            },
            ScalarKind::Str => Scalar::str(text),
            ScalarKind::Null => Scalar::null(),
        }
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.kind {
            ScalarKind::Bool => Some(self.text == "true"),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self.kind {
            ScalarKind::Int => self.text.parse().ok(),
            _ => None,
        }
    }

    /// Helm-style truthiness: false, 0, empty string and null are falsey.
    pub fn truthy(&self) -> bool {
        match self.kind {
            ScalarKind::Bool => self.text == "true",
            ScalarKind::Int => self.text != "0",
            ScalarKind::Float => !matches!(self.text.as_str(), "0" | "0.0" | "-0.0"),
            ScalarKind::Str => !self.text.is_empty(),
            ScalarKind::Null => false,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn format_float(v: f64) -> String {
    if v.is_nan() {
        ".nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { ".inf" } else { "-.inf" }.to_string()
    } else {
        // Print through the same shortest-round-trip printer the JSON
        // emitter uses, so canonical text is stable across formats.
        let s = serde_json::Number::from_f64(v)
            .map(|n| n.to_string())
            .unwrap_or_else(|| format!("{v}"));
        // Keep a trailing ".0" so the value re-parses as a float.
        if s.contains('.') || s.contains('e') || s.contains('E') {
            s
        } else {
            format!("{s}.0")
        }
    }
}

fn parse_int(text: &str) -> Option<i64> {
    if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()
    } else if let Some(oct) = text.strip_prefix("0o").or_else(|| text.strip_prefix("0O")) {
        i64::from_str_radix(oct, 8).ok()
    } else {
        let t = text.strip_prefix('+').unwrap_or(text);
        t.parse().ok()
    }
}

/// Source position (1-indexed line and column).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

/// An ordered mapping with unique keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocMapping {
    entries: Vec<(String, DocNode)>,
}

impl DocMapping {
    pub fn new() -> Self {
        DocMapping::default()
    }

    pub fn get(&self, key: &str) -> Option<&DocNode> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut DocNode> {
        self.entries
            .iter_mut()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.iter().any(|(k, _)| k == key)
    }

    /// Inserts or replaces, preserving the position of an existing key.
    pub fn insert(&mut self, key: impl Into<String>, value: DocNode) {
        let key = key.into();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => *v = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<DocNode> {
        let idx = self.entries.iter().position(|(k, _)| k == key)?;
        Some(self.entries.remove(idx).1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DocNode)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut DocNode)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromIterator<(String, DocNode)> for DocMapping {
    fn from_iter<T: IntoIterator<Item = (String, DocNode)>>(iter: T) -> Self {
        let mut m = DocMapping::new();
        for (k, v) in iter {
            m.insert(k, v);
        }
        m
    }
}

/// Node payload: scalar, sequence or mapping.
#[derive(Debug, Clone, PartialEq)]
pub enum DocValue {
    Scalar(Scalar),
    Sequence(Vec<DocNode>),
    Mapping(DocMapping),
}

/// A document tree node with an optional source position.
///
/// Equality is structural and ignores positions.
#[derive(Debug, Clone)]
pub struct DocNode {
    pub value: DocValue,
    pub pos: Option<Position>,
}

impl PartialEq for DocNode {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl DocNode {
    pub fn scalar(s: Scalar) -> Self {
        DocNode {
            value: DocValue::Scalar(s),
            pos: None,
        }
    }

    pub fn bool(v: bool) -> Self {
        DocNode::scalar(Scalar::bool(v))
    }

    pub fn int(v: i64) -> Self {
        DocNode::scalar(Scalar::int(v))
    }

    pub fn str(v: impl Into<String>) -> Self {
        DocNode::scalar(Scalar::str(v))
    }

    pub fn null() -> Self {
        DocNode::scalar(Scalar::null())
    }

    pub fn sequence(items: Vec<DocNode>) -> Self {
        DocNode {
            value: DocValue::Sequence(items),
            pos: None,
        }
    }

    pub fn mapping(m: DocMapping) -> Self {
        DocNode {
            value: DocValue::Mapping(m),
            pos: None,
        }
    }

    pub fn mapping_from(entries: Vec<(&str, DocNode)>) -> Self {
        DocNode::mapping(
            entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        )
    }

    pub fn as_scalar(&self) -> Option<&Scalar> {
        match &self.value {
            DocValue::Scalar(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_sequence(&self) -> Option<&[DocNode]> {
        match &self.value {
            DocValue::Sequence(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_mapping(&self) -> Option<&DocMapping> {
        match &self.value {
            DocValue::Mapping(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_mapping_mut(&mut self) -> Option<&mut DocMapping> {
        match &mut self.value {
            DocValue::Mapping(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match &self.value {
            DocValue::Scalar(s) if s.kind() == ScalarKind::Str => Some(s.text()),
            _ => None,
        }
    }

    /// Looks up a descendant by mapping keys.
    pub fn get_path(&self, keys: &[&str]) -> Option<&DocNode> {
        let mut cur = self;
        for key in keys {
            cur = cur.as_mapping()?.get(key)?;
        }
        Some(cur)
    }

    pub fn type_name(&self) -> &'static str {
        match &self.value {
            DocValue::Scalar(s) => s.kind().name(),
            DocValue::Sequence(_) => "sequence",
            DocValue::Mapping(_) => "mapping",
        }
    }
}

impl Serialize for DocNode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match &self.value {
            DocValue::Scalar(s) => match s.kind() {
                ScalarKind::Bool => serializer.serialize_bool(s.text() == "true"),
                ScalarKind::Int => match s.as_int() {
                    Some(v) => serializer.serialize_i64(v),
                    None => serializer.serialize_str(s.text()),
                },
                ScalarKind::Float => match s.text().parse::<f64>() {
                    Ok(v) if v.is_finite() => serializer.serialize_f64(v),
                    _ => serializer.serialize_str(s.text()),
                },
                ScalarKind::Str => serializer.serialize_str(s.text()),
                ScalarKind::Null => serializer.serialize_unit(),
            },
            DocValue::Sequence(items) => {
                let mut seq = serializer.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
            DocValue::Mapping(m) => {
                let mut map = serializer.serialize_map(Some(m.len()))?;
                for (k, v) in m.iter() {
                    map.serialize_entry(k, v)?;
                }
                map.end()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_canonicalizes_bool_variants() {
        assert_eq!(Scalar::resolved(ScalarKind::Bool, "True"), Scalar::bool(true));
        assert_eq!(Scalar::resolved(ScalarKind::Bool, "FALSE"), Scalar::bool(false));
    }

    #[test]
    fn scalar_canonicalizes_int_radix() {
        assert_eq!(Scalar::resolved(ScalarKind::Int, "0x1A").text(), "26");
        assert_eq!(Scalar::resolved(ScalarKind::Int, "0o17").text(), "15");
        assert_eq!(Scalar::resolved(ScalarKind::Int, "+7").text(), "7");
    }

    #[test]
    fn mapping_insert_replaces_in_place() {
        let mut m = DocMapping::new();
        m.insert("a", DocNode::int(1));
        m.insert("b", DocNode::int(2));
        m.insert("a", DocNode::int(3));
        let keys: Vec<_> = m.keys().collect();
        assert_eq!(keys, vec!["a", "b"]);
        assert_eq!(m.get("a"), Some(&DocNode::int(3)));
    }

    #[test]
    fn equality_ignores_positions() {
        let mut a = DocNode::int(5);
        a.pos = Some(Position { line: 3, column: 9 });
        assert_eq!(a, DocNode::int(5));
    }
}
