//! YAML and JSON parsing into [`DocNode`] trees.
//!
//! YAML goes through the yaml-rust2 event stream so every node carries a
//! source position and so anchors, aliases and tags can be rejected up
//! front. Plain scalars are resolved per the YAML 1.2 core schema; quoted
//! scalars are always strings. JSON is parsed with a custom deserializer
//! visitor so object key order survives.

use super::{DocMapping, DocNode, DocValue, Position, Scalar, ScalarKind};
use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use std::fmt;
use thiserror::Error;
use yaml_rust2::parser::{Event, MarkedEventReceiver, Parser, Tag};
use yaml_rust2::scanner::{Marker, TScalarStyle};

/// Input syntax for [`parse_document`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocFormat {
    Yaml,
    Json,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: Position, message: String },
    #[error("input contains multiple documents; split it first")]
    MultipleDocuments,
    #[error("input contains no document")]
    EmptyDocument,
    #[error("YAML aliases and anchors are not supported ({position})")]
    AliasUnsupported { position: Position },
    #[error("YAML tag `{tag}` is not supported here ({position})")]
    TagUnsupported { tag: String, position: Position },
    #[error("mapping keys must be scalars ({position})")]
    NonScalarKey { position: Position },
    #[error("duplicate mapping key `{key}` ({position})")]
    DuplicateKey { key: String, position: Position },
}

/// A parsed node annotated with style and tag, before tag policy is applied.
///
/// [`parse_document`] rejects tags outright; schema and validator loaders
/// consume `RawNode`s directly because they assign meaning to `!lock` tags
/// and to scalar styles (a quoted scalar is never a placeholder token).
#[derive(Debug, Clone)]
pub struct RawNode {
    pub value: RawValue,
    pub pos: Position,
    pub tag: Option<String>,
    /// True when the node is a scalar written in plain (unquoted) style.
    pub plain: bool,
}

#[derive(Debug, Clone)]
pub enum RawValue {
    Scalar(Scalar),
    Sequence(Vec<RawNode>),
    Mapping(Vec<(String, RawNode)>),
}

impl RawNode {
    /// Converts to a [`DocNode`], rejecting any tag in the subtree.
    pub fn into_doc(self) -> Result<DocNode, ParseError> {
        if let Some(tag) = self.tag {
            return Err(ParseError::TagUnsupported {
                tag,
                position: self.pos,
            });
        }
        let value = match self.value {
            RawValue::Scalar(s) => DocValue::Scalar(s),
            RawValue::Sequence(items) => DocValue::Sequence(
                items
                    .into_iter()
                    .map(RawNode::into_doc)
                    .collect::<Result<_, _>>()?,
            ),
            RawValue::Mapping(entries) => {
                let mut m = DocMapping::new();
                for (k, v) in entries {
                    m.insert(k, v.into_doc()?);
                }
                DocValue::Mapping(m)
            }
        };
        Ok(DocNode {
            value,
            pos: Some(self.pos),
        })
    }
}

/// Parses a single document in the given format.
///
/// Multi-document YAML input is rejected; tags, anchors and aliases are
/// rejected with a positioned error.
pub fn parse_document(text: &str, format: DocFormat) -> Result<DocNode, ParseError> {
    match format {
        DocFormat::Yaml => {
            let mut docs = parse_raw_documents(text)?;
            match docs.len() {
                0 => Err(ParseError::EmptyDocument),
                1 => docs.pop().unwrap().into_doc(),
                _ => Err(ParseError::MultipleDocuments),
            }
        }
        DocFormat::Json => parse_json(text),
    }
}

/// Parses a YAML stream into raw (tagged, styled) document nodes.
pub fn parse_raw_documents(text: &str) -> Result<Vec<RawNode>, ParseError> {
    let mut parser = Parser::new_from_str(text);
    let mut builder = RawBuilder::default();
    parser.load(&mut builder, true).map_err(|e| {
        let m = e.marker();
        ParseError::Syntax {
            position: mark_pos(m),
            message: e.info().to_string(),
        }
    })?;
    if let Some(err) = builder.error {
        return Err(err);
    }
    Ok(builder.docs)
}

fn mark_pos(m: &Marker) -> Position {
    Position {
        line: m.line(),
        column: m.col() + 1,
    }
}

enum Frame {
    Seq {
        items: Vec<RawNode>,
        pos: Position,
        tag: Option<String>,
    },
    Map {
        entries: Vec<(String, RawNode)>,
        pending_key: Option<String>,
        pos: Position,
        tag: Option<String>,
    },
}

#[derive(Default)]
struct RawBuilder {
    stack: Vec<Frame>,
    docs: Vec<RawNode>,
    error: Option<ParseError>,
}

fn tag_text(tag: Option<&Tag>) -> Option<String> {
    tag.map(|t| format!("{}{}", t.handle, t.suffix))
}

impl RawBuilder {
    fn push_node(&mut self, node: RawNode) {
        match self.stack.last_mut() {
            None => self.docs.push(node),
            Some(Frame::Seq { items, .. }) => items.push(node),
            Some(Frame::Map {
                entries,
                pending_key,
                ..
            }) => match pending_key.take() {
                None => match node.value {
                    RawValue::Scalar(ref s) => {
                        let key = s.text().to_string();
                        if entries.iter().any(|(k, _)| *k == key) {
                            self.error = Some(ParseError::DuplicateKey {
                                key,
                                position: node.pos,
                            });
                        } else {
                            *pending_key = Some(key);
                        }
                    }
                    _ => {
                        self.error = Some(ParseError::NonScalarKey { position: node.pos });
                    }
                },
                Some(key) => entries.push((key, node)),
            },
        }
    }
}

impl MarkedEventReceiver for RawBuilder {
    fn on_event(&mut self, ev: Event, mark: Marker) {
        if self.error.is_some() {
            return;
        }
        let pos = mark_pos(&mark);
        match ev {
            Event::Nothing | Event::StreamStart | Event::StreamEnd | Event::DocumentStart
            | Event::DocumentEnd => {}
            Event::Alias(_) => {
                self.error = Some(ParseError::AliasUnsupported { position: pos });
            }
            Event::Scalar(text, style, anchor, tag) => {
                if anchor != 0 {
                    self.error = Some(ParseError::AliasUnsupported { position: pos });
                    return;
                }
                let plain = style == TScalarStyle::Plain;
                let scalar = if plain {
                    resolve_plain_scalar(&text)
                } else {
                    Scalar::str(text)
                };
                self.push_node(RawNode {
                    value: RawValue::Scalar(scalar),
                    pos,
                    tag: tag_text(tag.as_ref()),
                    plain,
                });
            }
            Event::SequenceStart(anchor, tag) => {
                if anchor != 0 {
                    self.error = Some(ParseError::AliasUnsupported { position: pos });
                    return;
                }
                self.stack.push(Frame::Seq {
                    items: Vec::new(),
                    pos,
                    tag: tag_text(tag.as_ref()),
                });
            }
            Event::SequenceEnd => {
                if let Some(Frame::Seq { items, pos, tag }) = self.stack.pop() {
                    self.push_node(RawNode {
                        value: RawValue::Sequence(items),
                        pos,
                        tag,
                        plain: false,
                    });
                }
            }
            Event::MappingStart(anchor, tag) => {
                if anchor != 0 {
                    self.error = Some(ParseError::AliasUnsupported { position: pos });
                    return;
                }
                self.stack.push(Frame::Map {
                    entries: Vec::new(),
                    pending_key: None,
                    pos,
                    tag: tag_text(tag.as_ref()),
                });
            }
            Event::MappingEnd => {
                if let Some(Frame::Map {
                    entries, pos, tag, ..
                }) = self.stack.pop()
                {
                    self.push_node(RawNode {
                        value: RawValue::Mapping(entries),
                        pos,
                        tag,
                        plain: false,
                    });
                }
            }
        }
    }
}

/// Resolves a plain scalar per the YAML 1.2 core schema.
pub fn resolve_plain_scalar(text: &str) -> Scalar {
    match text {
        "" | "~" | "null" | "Null" | "NULL" => return Scalar::null(),
        "true" | "True" | "TRUE" => return Scalar::bool(true),
        "false" | "False" | "FALSE" => return Scalar::bool(false),
        ".inf" | ".Inf" | ".INF" | "+.inf" | "+.Inf" | "+.INF" => {
            return Scalar::resolved(ScalarKind::Float, ".inf")
        }
        "-.inf" | "-.Inf" | "-.INF" => return Scalar::resolved(ScalarKind::Float, "-.inf"),
        ".nan" | ".NaN" | ".NAN" => return Scalar::resolved(ScalarKind::Float, ".nan"),
        _ => {}
    }
    if is_core_int(text) {
        Scalar::resolved(ScalarKind::Int, text)
    } else if is_core_float(text) {
        Scalar::resolved(ScalarKind::Float, text)
    } else {
        Scalar::str(text)
    }
}

fn is_core_int(text: &str) -> bool {
    if let Some(rest) = text.strip_prefix("0x") {
        return !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_hexdigit());
    }
    if let Some(rest) = text.strip_prefix("0o") {
        return !rest.is_empty() && rest.bytes().all(|b| (b'0'..=b'7').contains(&b));
    }
    let t = text
        .strip_prefix(['-', '+'])
        .unwrap_or(text);
    !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit())
}

fn is_core_float(text: &str) -> bool {
    let t = text.strip_prefix(['-', '+']).unwrap_or(text);
    if t.is_empty() {
        return false;
    }
    let (mantissa, exponent) = match t.split_once(['e', 'E']) {
        Some((m, e)) => (m, Some(e)),
        None => (t, None),
    };
    if let Some(e) = exponent {
        let e = e.strip_prefix(['-', '+']).unwrap_or(e);
        if e.is_empty() || !e.bytes().all(|b| b.is_ascii_digit()) {
            return false;
        }
        if mantissa.is_empty() {
            return false;
        }
    }
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (mantissa, None),
    };
    if !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return false;
    }
    match frac_part {
        // "1e3" counts as a float only with an exponent present.
        None => exponent.is_some() && !int_part.is_empty(),
        Some(f) => {
            (!int_part.is_empty() || !f.is_empty()) && f.bytes().all(|b| b.is_ascii_digit())
        }
    }
}

fn parse_json(text: &str) -> Result<DocNode, ParseError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let node = de.deserialize_any(DocVisitor).map_err(json_err)?;
    de.end().map_err(json_err)?;
    Ok(node)
}

fn json_err(e: serde_json::Error) -> ParseError {
    ParseError::Syntax {
        position: Position {
            line: e.line(),
            column: e.column(),
        },
        message: e.to_string(),
    }
}

struct DocVisitor;

impl<'de> Visitor<'de> for DocVisitor {
    type Value = DocNode;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_bool<E>(self, v: bool) -> Result<DocNode, E> {
        Ok(DocNode::bool(v))
    }

    fn visit_i64<E>(self, v: i64) -> Result<DocNode, E> {
        Ok(DocNode::int(v))
    }

    fn visit_u64<E>(self, v: u64) -> Result<DocNode, E> {
        Ok(match i64::try_from(v) {
            Ok(i) => DocNode::int(i),
            Err(_) => DocNode::scalar(Scalar::resolved(ScalarKind::Int, &v.to_string())),
        })
    }

    fn visit_f64<E>(self, v: f64) -> Result<DocNode, E> {
        Ok(DocNode::scalar(Scalar::float(v)))
    }

    fn visit_str<E>(self, v: &str) -> Result<DocNode, E> {
        Ok(DocNode::str(v))
    }

    fn visit_unit<E>(self) -> Result<DocNode, E> {
        Ok(DocNode::null())
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<DocNode, A::Error> {
        let mut items = Vec::new();
        while let Some(item) = seq.next_element_seed(DocSeed)? {
            items.push(item);
        }
        Ok(DocNode::sequence(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<DocNode, A::Error> {
        let mut m = DocMapping::new();
        while let Some(key) = map.next_key::<String>()? {
            if m.contains_key(&key) {
                return Err(de::Error::custom(format!("duplicate mapping key `{key}`")));
            }
            m.insert(key, map.next_value_seed(DocSeed)?);
        }
        Ok(DocNode::mapping(m))
    }
}

struct DocSeed;

impl<'de> de::DeserializeSeed<'de> for DocSeed {
    type Value = DocNode;

    fn deserialize<D: Deserializer<'de>>(self, deserializer: D) -> Result<DocNode, D::Error> {
        deserializer.deserialize_any(DocVisitor)
    }
}
