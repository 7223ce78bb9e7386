//! Validator and values-schema file formats.
//!
//! Validator files are YAML with a `meta:` provenance block and a `kinds:`
//! mapping of resource kind to schema tree. Leaves are placeholder tokens
//! (`bool`, `int`, `string`, `IP`, `[list]`, `{dict}`), plain scalars for
//! constants, or flow-sequence enums (`[IfNotPresent, Always]`). Locked
//! leaves carry a `!lock` tag (`!lock.require` for require-and-pin). String
//! constants that would read as tokens are double-quoted, and the loader
//! honors that distinction through scalar style.

use crate::doc::path::FieldPath;
use crate::doc::{
    emit, parse_raw_documents, resolve_plain_scalar, ParseError, RawNode, RawValue, Scalar,
    ScalarKind,
};
use crate::policy::{PolicyError, Validator, ValidatorMeta, ValuesSchema, ValuesSchemaNode};
use crate::schema::{LockMode, LockValue, MappingEntry, Placeholder, SchemaNode};
use thiserror::Error;

const LOCK_TAG: &str = "!lock";
const LOCK_REQUIRE_TAG: &str = "!lock.require";

#[derive(Debug, Error)]
pub enum ValidatorIoError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("validator file has no `kinds` mapping")]
    MissingKinds,
    #[error("unknown tag `{tag}` at `{path}`")]
    UnknownTag { tag: String, path: FieldPath },
    #[error("unknown placeholder `{token}` at `{path}`")]
    UnknownPlaceholder { token: String, path: FieldPath },
    #[error("malformed node at `{path}`: {message}")]
    Malformed { path: FieldPath, message: String },
    #[error(transparent)]
    Merge(#[from] PolicyError),
}

/// Serializes a validator to its canonical YAML file form.
pub fn validator_to_yaml(v: &Validator) -> String {
    let mut out = String::new();
    out.push_str("meta:\n");
    out.push_str(&format!("  chart: {}\n", emit_plain(&Scalar::str(v.meta.chart.clone()))));
    out.push_str(&format!(
        "  generated: {}\n",
        emit_plain(&Scalar::str(v.meta.generated.clone()))
    ));
    out.push_str(&format!(
        "  locks_digest: {}\n",
        emit_plain(&Scalar::str(v.meta.locks_digest.clone()))
    ));
    out.push_str("kinds:\n");
    for (kind, tree) in &v.kinds {
        out.push_str(&format!("  {}:", emit_key(kind)));
        emit_schema_value(&mut out, tree, 4);
    }
    out
}

/// Loads a validator from YAML text.
pub fn validator_from_yaml(text: &str) -> Result<Validator, ValidatorIoError> {
    let mut docs = parse_raw_documents(text)?;
    if docs.len() != 1 {
        return Err(ValidatorIoError::Malformed {
            path: FieldPath::root(),
            message: "expected exactly one document".to_string(),
        });
    }
    let root = docs.pop().unwrap();
    let RawValue::Mapping(entries) = &root.value else {
        return Err(ValidatorIoError::MissingKinds);
    };
    let mut meta = ValidatorMeta {
        chart: String::new(),
        generated: String::new(),
        locks_digest: String::new(),
    };
    let mut kinds = Vec::new();
    let mut saw_kinds = false;
    for (key, node) in entries {
        match key.as_str() {
            "meta" => {
                if let RawValue::Mapping(meta_entries) = &node.value {
                    for (mk, mv) in meta_entries {
                        if let RawValue::Scalar(s) = &mv.value {
                            match mk.as_str() {
                                "chart" => meta.chart = s.text().to_string(),
                                "generated" => meta.generated = s.text().to_string(),
                                "locks_digest" => meta.locks_digest = s.text().to_string(),
                                _ => {}
                            }
                        }
                    }
                }
            }
            "kinds" => {
                saw_kinds = true;
                let RawValue::Mapping(kind_entries) = &node.value else {
                    return Err(ValidatorIoError::MissingKinds);
                };
                for (kind, tree) in kind_entries {
                    let path = FieldPath::root().child(kind);
                    kinds.push((kind.clone(), load_schema_node(tree, &path)?));
                }
            }
            other => {
                return Err(ValidatorIoError::Malformed {
                    path: FieldPath::root().child(other),
                    message: "unexpected top-level key".to_string(),
                })
            }
        }
    }
    if !saw_kinds {
        return Err(ValidatorIoError::MissingKinds);
    }
    Ok(Validator { kinds, meta })
}

fn emit_plain(s: &Scalar) -> String {
    emit::scalar_text(s)
}

fn emit_key(key: &str) -> String {
    emit::scalar_text(&Scalar::str(key))
}

/// A string constant that would re-load as a placeholder token or marker
/// must be quoted.
fn emit_constant(s: &Scalar) -> String {
    if s.kind() == ScalarKind::Str
        && (Placeholder::from_scalar_token(s.text()).is_some() || s.text() == "list")
    {
        format!("\"{}\"", s.text())
    } else {
        emit::scalar_text(s)
    }
}

fn lock_tag(mode: LockMode) -> &'static str {
    match mode {
        LockMode::Pin => LOCK_TAG,
        LockMode::RequireAndPin => LOCK_REQUIRE_TAG,
    }
}

fn lock_value_text(value: &LockValue) -> String {
    match value {
        LockValue::Scalar(s) => emit_constant(s),
        LockValue::Placeholder(p) => p.token().to_string(),
    }
}

/// Emits the value part of `key:<here>` (leading space or indented block).
fn emit_schema_value(out: &mut String, node: &SchemaNode, indent: usize) {
    match node {
        SchemaNode::Constant(s) => {
            out.push(' ');
            out.push_str(&emit_constant(s));
            out.push('\n');
        }
        SchemaNode::Placeholder(p) => {
            out.push(' ');
            out.push_str(p.token());
            out.push('\n');
        }
        SchemaNode::Locked { value, mode } => {
            out.push(' ');
            out.push_str(lock_tag(*mode));
            out.push(' ');
            out.push_str(&lock_value_text(value));
            out.push('\n');
        }
        SchemaNode::Enum(values) => {
            out.push(' ');
            out.push_str(&flow_enum(values));
            out.push('\n');
        }
        SchemaNode::Mapping(entries) => {
            if entries.is_empty() {
                out.push_str(" {}\n");
                return;
            }
            out.push('\n');
            for (key, entry) in entries {
                push_indent(out, indent);
                out.push_str(&emit_key(key));
                out.push(':');
                emit_schema_value(out, &entry.schema, indent + 2);
            }
        }
        SchemaNode::Sequence(elem) => match elem.as_ref() {
            SchemaNode::Constant(s) => {
                out.push_str(&format!(" [{}]\n", emit_constant(s)));
            }
            SchemaNode::Placeholder(Placeholder::List) => out.push_str(" [[list]]\n"),
            SchemaNode::Placeholder(Placeholder::Dict) => out.push_str(" [{dict}]\n"),
            SchemaNode::Placeholder(p) => {
                out.push_str(&format!(" [{}]\n", p.token()));
            }
            SchemaNode::Enum(values) => {
                out.push(' ');
                out.push_str(&flow_enum(values));
                out.push('\n');
            }
            structural => {
                out.push('\n');
                push_indent(out, indent);
                out.push_str("-");
                emit_sequence_item(out, structural, indent + 2);
            }
        },
    }
}

fn emit_sequence_item(out: &mut String, node: &SchemaNode, indent: usize) {
    match node {
        SchemaNode::Mapping(entries) if !entries.is_empty() => {
            for (i, (key, entry)) in entries.iter().enumerate() {
                if i == 0 {
                    out.push(' ');
                } else {
                    push_indent(out, indent);
                }
                out.push_str(&emit_key(key));
                out.push(':');
                emit_schema_value(out, &entry.schema, indent + 2);
            }
        }
        SchemaNode::Locked { value, mode } => {
            out.push(' ');
            out.push_str(lock_tag(*mode));
            out.push(' ');
            out.push_str(&lock_value_text(value));
            out.push('\n');
        }
        other => {
            // Scalar-ish and nested-sequence items reuse the value form.
            emit_schema_value(out, other, indent);
        }
    }
}

fn flow_enum(values: &[Scalar]) -> String {
    let items: Vec<String> = values.iter().map(emit_constant).collect();
    format!("[{}]", items.join(", "))
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push(' ');
    }
}

/// Loads one schema node from a raw (style- and tag-aware) YAML node.
pub fn load_schema_node(node: &RawNode, path: &FieldPath) -> Result<SchemaNode, ValidatorIoError> {
    if let Some(tag) = &node.tag {
        let mode = match tag.as_str() {
            LOCK_TAG => LockMode::Pin,
            LOCK_REQUIRE_TAG => LockMode::RequireAndPin,
            other => {
                return Err(ValidatorIoError::UnknownTag {
                    tag: other.to_string(),
                    path: path.clone(),
                })
            }
        };
        let value = match &node.value {
            RawValue::Scalar(s) => {
                if node.plain {
                    match Placeholder::from_scalar_token(s.text()) {
                        Some(p) => LockValue::Placeholder(p),
                        None => LockValue::Scalar(s.clone()),
                    }
                } else {
                    LockValue::Scalar(s.clone())
                }
            }
            other => match raw_marker(other) {
                Some(p) => LockValue::Placeholder(p),
                None => {
                    return Err(ValidatorIoError::Malformed {
                        path: path.clone(),
                        message: "lock value must be a scalar or placeholder".to_string(),
                    })
                }
            },
        };
        return Ok(SchemaNode::Locked { value, mode });
    }
    match &node.value {
        RawValue::Scalar(s) => {
            if node.plain {
                if let Some(p) = Placeholder::from_scalar_token(s.text()) {
                    return Ok(SchemaNode::Placeholder(p));
                }
            }
            Ok(SchemaNode::Constant(s.clone()))
        }
        seq @ RawValue::Sequence(items) => {
            if raw_marker(seq) == Some(Placeholder::List) {
                return Ok(SchemaNode::Placeholder(Placeholder::List));
            }
            let all_scalars = items
                .iter()
                .all(|i| matches!(i.value, RawValue::Scalar(_)) && i.tag.is_none());
            if all_scalars && items.len() >= 2 {
                let mut values = Vec::new();
                for item in items {
                    if let RawValue::Scalar(s) = &item.value {
                        if !values.contains(s) {
                            values.push(s.clone());
                        }
                    }
                }
                return Ok(SchemaNode::Enum(values));
            }
            if items.is_empty() {
                return Ok(SchemaNode::Placeholder(Placeholder::List));
            }
            if items.len() == 1 {
                if let RawValue::Scalar(s) = &items[0].value {
                    if items[0].tag.is_none() {
                        if items[0].plain {
                            if let Some(p) = Placeholder::from_scalar_token(s.text()) {
                                return Ok(SchemaNode::Sequence(Box::new(
                                    SchemaNode::Placeholder(p),
                                )));
                            }
                        }
                        return Ok(SchemaNode::Sequence(Box::new(SchemaNode::Constant(
                            s.clone(),
                        ))));
                    }
                }
            }
            // Structural elements merge into one element schema.
            let elem_path = path.element();
            let mut merged: Option<SchemaNode> = None;
            for item in items {
                let tree = load_schema_node(item, &elem_path)?;
                merged = Some(match merged {
                    None => tree,
                    Some(prev) => {
                        crate::policy::schema_merge(prev, tree, &elem_path, false)?
                    }
                });
            }
            Ok(SchemaNode::Sequence(Box::new(merged.expect("non-empty"))))
        }
        map @ RawValue::Mapping(entries) => {
            if raw_marker(map) == Some(Placeholder::Dict) {
                return Ok(SchemaNode::Placeholder(Placeholder::Dict));
            }
            let mut out = Vec::with_capacity(entries.len());
            for (key, value) in entries {
                out.push((
                    key.clone(),
                    MappingEntry {
                        schema: load_schema_node(value, &path.child(key))?,
                        // Presence is only ever enforced through
                        // require-and-pin locks; file entries load optional.
                        optional: true,
                    },
                ));
            }
            Ok(SchemaNode::Mapping(out))
        }
    }
}

/// Marker recognition over raw nodes (`[list]` and `{dict}` forms).
fn raw_marker(value: &RawValue) -> Option<Placeholder> {
    match value {
        RawValue::Sequence(items) => match items.as_slice() {
            [only] => match &only.value {
                RawValue::Scalar(s)
                    if only.plain && only.tag.is_none() && s.text() == "list" =>
                {
                    Some(Placeholder::List)
                }
                _ => None,
            },
            _ => None,
        },
        RawValue::Mapping(entries) => match entries.as_slice() {
            [(key, v)] => match &v.value {
                RawValue::Scalar(s)
                    if key == "dict" && s.kind() == ScalarKind::Null && v.tag.is_none() =>
                {
                    Some(Placeholder::Dict)
                }
                _ => None,
            },
            _ => None,
        },
        RawValue::Scalar(_) => None,
    }
}

/// Serializes a values schema in its display form: placeholder tokens,
/// locked constants as plain values, enums comma-joined (`standalone, repl`).
pub fn values_schema_to_yaml(schema: &ValuesSchema) -> String {
    let mut out = String::new();
    match &schema.root {
        ValuesSchemaNode::Mapping(entries) if entries.is_empty() => out.push_str("{}\n"),
        ValuesSchemaNode::Mapping(entries) => {
            emit_values_entries(&mut out, entries, 0);
        }
        other => {
            emit_values_value(&mut out, other, 0);
            out = out.trim_start().to_string();
        }
    }
    out
}

fn emit_values_entries(out: &mut String, entries: &[(String, ValuesSchemaNode)], indent: usize) {
    for (key, value) in entries {
        push_indent(out, indent);
        out.push_str(&emit_key(key));
        out.push(':');
        emit_values_value(out, value, indent + 2);
    }
}

fn emit_values_value(out: &mut String, node: &ValuesSchemaNode, indent: usize) {
    match node {
        ValuesSchemaNode::Placeholder(p) => {
            out.push(' ');
            out.push_str(p.token());
            out.push('\n');
        }
        ValuesSchemaNode::Locked { value, .. } => {
            out.push(' ');
            out.push_str(&lock_value_text(value));
            out.push('\n');
        }
        ValuesSchemaNode::Enum(options) => {
            out.push(' ');
            let opts: Vec<String> = options.iter().map(|s| s.text().to_string()).collect();
            out.push_str(&opts.join(", "));
            out.push('\n');
        }
        ValuesSchemaNode::Mapping(entries) => {
            if entries.is_empty() {
                out.push_str(" {}\n");
            } else {
                out.push('\n');
                emit_values_entries(out, entries, indent);
            }
        }
    }
}

/// Loads a values schema from its display form. Plain scalars holding the
/// four scalar tokens load as placeholders, comma-joined plain scalars load
/// as enum lists, everything else loads as a pinned constant. Single-element
/// bracket or brace forms must be the `[list]`/`{dict}` markers; anything
/// else is an unknown placeholder.
pub fn values_schema_from_yaml(text: &str) -> Result<ValuesSchemaNode, ValidatorIoError> {
    let mut docs = parse_raw_documents(text)?;
    if docs.len() != 1 {
        return Err(ValidatorIoError::Malformed {
            path: FieldPath::root(),
            message: "expected exactly one document".to_string(),
        });
    }
    load_values_node(&docs.pop().unwrap(), &FieldPath::root())
}

fn load_values_node(
    node: &RawNode,
    path: &FieldPath,
) -> Result<ValuesSchemaNode, ValidatorIoError> {
    if let Some(tag) = &node.tag {
        return Err(ValidatorIoError::UnknownTag {
            tag: tag.clone(),
            path: path.clone(),
        });
    }
    match &node.value {
        RawValue::Scalar(s) => {
            if node.plain {
                if let Some(p) = Placeholder::from_scalar_token(s.text()) {
                    return Ok(ValuesSchemaNode::Placeholder(p));
                }
                if s.kind() == ScalarKind::Str && s.text().contains(',') {
                    let options: Vec<Scalar> = s
                        .text()
                        .split(',')
                        .map(str::trim)
                        .filter(|t| !t.is_empty())
                        .map(resolve_plain_scalar)
                        .collect();
                    if options.len() >= 2 {
                        return Ok(ValuesSchemaNode::Enum(options));
                    }
                }
            }
            Ok(ValuesSchemaNode::Locked {
                value: LockValue::Scalar(s.clone()),
                mode: LockMode::Pin,
            })
        }
        seq @ RawValue::Sequence(items) => {
            if raw_marker(seq) == Some(Placeholder::List) {
                return Ok(ValuesSchemaNode::Placeholder(Placeholder::List));
            }
            let token = match items.as_slice() {
                [only] => match &only.value {
                    RawValue::Scalar(s) => format!("[{}]", s.text()),
                    _ => "[...]".to_string(),
                },
                _ => "[...]".to_string(),
            };
            Err(ValidatorIoError::UnknownPlaceholder {
                token,
                path: path.clone(),
            })
        }
        map @ RawValue::Mapping(entries) => {
            if raw_marker(map) == Some(Placeholder::Dict) {
                return Ok(ValuesSchemaNode::Placeholder(Placeholder::Dict));
            }
            // A single-entry mapping with a null value is a malformed
            // placeholder attempt; generated schemas never contain null
            // leaves.
            if let [(key, v)] = entries.as_slice() {
                if matches!(&v.value, RawValue::Scalar(s) if s.kind() == ScalarKind::Null) {
                    return Err(ValidatorIoError::UnknownPlaceholder {
                        token: format!("{{{key}}}"),
                        path: path.clone(),
                    });
                }
            }
            let mut out = Vec::with_capacity(entries.len());
            for (key, value) in entries {
                out.push((key.clone(), load_values_node(value, &path.child(key))?));
            }
            Ok(ValuesSchemaNode::Mapping(out))
        }
    }
}
