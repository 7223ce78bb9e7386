//! Canonical YAML and JSON emitters.
//!
//! The YAML emitter produces block style with two-space indentation and
//! conservative scalar quoting: any string that could re-parse as a
//! different kind, or that contains structurally significant characters,
//! is double-quoted. `parse(emit(doc))` is structurally equal to `doc`.

use super::{DocNode, DocValue, Scalar, ScalarKind};

/// Serializes a document as canonical YAML (trailing newline included).
pub fn to_yaml(node: &DocNode) -> String {
    let mut out = String::new();
    emit_node(&mut out, node, 0, Context::Document);
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out
}

/// Serializes a document as compact JSON.
pub fn to_json(node: &DocNode) -> String {
    serde_json::to_string(node).expect("document serialization cannot fail")
}

/// Serializes a document as pretty-printed JSON.
pub fn to_json_pretty(node: &DocNode) -> String {
    serde_json::to_string_pretty(node).expect("document serialization cannot fail")
}

#[derive(Clone, Copy, PartialEq)]
enum Context {
    Document,
    MappingValue,
    SequenceItem,
}

fn emit_node(out: &mut String, node: &DocNode, indent: usize, ctx: Context) {
    match &node.value {
        DocValue::Scalar(s) => {
            out.push_str(&scalar_text(s));
            out.push('\n');
        }
        DocValue::Sequence(items) if items.is_empty() => {
            out.push_str("[]\n");
        }
        DocValue::Mapping(m) if m.is_empty() => {
            out.push_str("{}\n");
        }
        DocValue::Sequence(items) => {
            if ctx == Context::MappingValue {
                out.push('\n');
            }
            for item in items {
                push_indent(out, indent);
                out.push('-');
                emit_inline_item(out, item, indent + 2);
            }
        }
        DocValue::Mapping(m) => {
            if ctx == Context::MappingValue {
                out.push('\n');
            }
            for (i, (k, v)) in m.iter().enumerate() {
                if !(ctx == Context::SequenceItem && i == 0) {
                    push_indent(out, indent);
                }
                out.push_str(&key_text(k));
                out.push(':');
                match &v.value {
                    DocValue::Scalar(_) => {
                        out.push(' ');
                        emit_node(out, v, indent, Context::MappingValue);
                    }
                    DocValue::Sequence(items) if items.is_empty() => out.push_str(" []\n"),
                    DocValue::Mapping(inner) if inner.is_empty() => out.push_str(" {}\n"),
                    _ => emit_node(out, v, indent + 2, Context::MappingValue),
                }
            }
        }
    }
}

/// Emits a sequence item payload after the dash; mappings continue on the
/// dash line, nested sequences start a fresh indented block.
fn emit_inline_item(out: &mut String, item: &DocNode, indent: usize) {
    match &item.value {
        DocValue::Scalar(_) => {
            out.push(' ');
            emit_node(out, item, indent, Context::SequenceItem);
        }
        DocValue::Sequence(items) if items.is_empty() => out.push_str(" []\n"),
        DocValue::Mapping(m) if m.is_empty() => out.push_str(" {}\n"),
        DocValue::Sequence(_) => {
            out.push('\n');
            emit_node(out, item, indent, Context::Document);
        }
        DocValue::Mapping(_) => {
            out.push(' ');
            emit_node(out, item, indent, Context::SequenceItem);
        }
    }
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push(' ');
    }
}

/// Renders a scalar, quoting when plain style would change its meaning.
pub fn scalar_text(s: &Scalar) -> String {
    match s.kind() {
        ScalarKind::Str => {
            if plain_safe(s.text()) {
                s.text().to_string()
            } else {
                quote_double(s.text())
            }
        }
        _ => s.text().to_string(),
    }
}

fn key_text(key: &str) -> String {
    if plain_safe(key) {
        key.to_string()
    } else {
        quote_double(key)
    }
}

/// True when `text` can be emitted as a plain scalar and re-parse as the
/// same string. Deliberately conservative.
pub fn plain_safe(text: &str) -> bool {
    if text.is_empty() {
        return false;
    }
    // Would resolve to a non-string kind.
    if super::parse::resolve_plain_scalar(text).kind() != ScalarKind::Str {
        return false;
    }
    let bytes = text.as_bytes();
    let first = bytes[0];
    if matches!(
        first,
        b'!' | b'&' | b'*' | b'?' | b'|' | b'>' | b'%' | b'@' | b'`' | b'"' | b'\'' | b'#'
            | b',' | b'[' | b']' | b'{' | b'}' | b':' | b'-' | b' ' | b'\t'
    ) {
        return false;
    }
    if bytes[bytes.len() - 1] == b' ' || bytes[bytes.len() - 1] == b'\t' {
        return false;
    }
    if text.ends_with(':') {
        return false;
    }
    for ch in text.chars() {
        if ch.is_control() {
            return false;
        }
        if matches!(ch, ',' | '[' | ']' | '{' | '}' | '#' | '&' | '*' | '!' | '|' | '>' | '\''
            | '"' | '%' | '@' | '`' | '\\')
        {
            return false;
        }
    }
    if text.contains(": ") {
        return false;
    }
    true
}

fn quote_double(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for ch in text.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                out.push_str(&format!("\\x{:02x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Renders a scalar in flow context (inside `[...]`), where commas and
/// brackets additionally force quoting. The shared `plain_safe` already
/// rejects those characters, so this is the same routine by construction.
pub fn flow_scalar_text(s: &Scalar) -> String {
    scalar_text(s)
}

#[cfg(test)]
mod tests {
    use super::super::{parse_document, DocFormat, DocMapping};
    use super::*;

    fn roundtrip(doc: &DocNode) {
        let text = to_yaml(doc);
        let back = parse_document(&text, DocFormat::Yaml)
            .unwrap_or_else(|e| panic!("reparse failed: {e}\n---\n{text}"));
        assert_eq!(&back, doc, "yaml round trip\n---\n{text}");
    }

    #[test]
    fn emits_block_mapping() {
        let doc = DocNode::mapping_from(vec![
            ("a", DocNode::int(1)),
            (
                "b",
                DocNode::mapping_from(vec![("c", DocNode::str("x"))]),
            ),
        ]);
        assert_eq!(to_yaml(&doc), "a: 1\nb:\n  c: x\n");
        roundtrip(&doc);
    }

    #[test]
    fn emits_sequences_with_inline_mappings() {
        let doc = DocNode::mapping_from(vec![(
            "containers",
            DocNode::sequence(vec![DocNode::mapping_from(vec![
                ("name", DocNode::str("nginx")),
                ("image", DocNode::str("nginx:latest")),
            ])]),
        )]);
        assert_eq!(
            to_yaml(&doc),
            "containers:\n  - name: nginx\n    image: nginx:latest\n"
        );
        roundtrip(&doc);
    }

    #[test]
    fn quotes_ambiguous_strings() {
        let doc = DocNode::mapping_from(vec![
            ("a", DocNode::str("true")),
            ("b", DocNode::str("123")),
            ("c", DocNode::str("x: y")),
            ("d", DocNode::str("")),
            ("e", DocNode::str("- dash")),
            ("f", DocNode::str("line\nbreak")),
        ]);
        roundtrip(&doc);
        let text = to_yaml(&doc);
        assert!(text.contains("a: \"true\""));
        assert!(text.contains("b: \"123\""));
    }

    #[test]
    fn empty_containers() {
        let doc = DocNode::mapping_from(vec![
            ("m", DocNode::mapping(DocMapping::new())),
            ("s", DocNode::sequence(vec![])),
        ]);
        assert_eq!(to_yaml(&doc), "m: {}\ns: []\n");
        roundtrip(&doc);
    }

    #[test]
    fn nested_sequences() {
        let doc = DocNode::sequence(vec![
            DocNode::sequence(vec![DocNode::int(1), DocNode::int(2)]),
            DocNode::str("x"),
        ]);
        roundtrip(&doc);
    }

    #[test]
    fn json_round_trip_preserves_order() {
        let doc = DocNode::mapping_from(vec![
            ("z", DocNode::int(1)),
            ("a", DocNode::bool(true)),
            ("n", DocNode::null()),
        ]);
        let text = to_json(&doc);
        assert_eq!(text, r#"{"z":1,"a":true,"n":null}"#);
        let back = parse_document(&text, DocFormat::Json).unwrap();
        assert_eq!(back, doc);
    }
}
