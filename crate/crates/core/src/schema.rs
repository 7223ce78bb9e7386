//! Placeholder taxonomy, schema trees and the node-matching kernel.
//!
//! A [`SchemaNode`] generalizes a document node: a type placeholder, a
//! security-locked constant, an enumerated value set, or nested structure.
//! Schema trees are the payload of both values schemas and validators; the
//! matching kernel here is the single recursion the validation engine runs
//! over whole request bodies.

use crate::doc::path::FieldPath;
use crate::doc::{DocNode, DocValue, Scalar, ScalarKind};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::OnceLock;

/// The closed set of type placeholders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Placeholder {
    Bool,
    Int,
    Str,
    Ip,
    List,
    Dict,
}

pub const PLACEHOLDER_TOKENS: [(&str, Placeholder); 6] = [
    ("bool", Placeholder::Bool),
    ("int", Placeholder::Int),
    ("string", Placeholder::Str),
    ("IP", Placeholder::Ip),
    ("[list]", Placeholder::List),
    ("{dict}", Placeholder::Dict),
];

impl Placeholder {
    pub fn token(self) -> &'static str {
        match self {
            Placeholder::Bool => "bool",
            Placeholder::Int => "int",
            Placeholder::Str => "string",
            Placeholder::Ip => "IP",
            Placeholder::List => "[list]",
            Placeholder::Dict => "{dict}",
        }
    }

    /// Looks up the scalar token forms (`bool`, `int`, `string`, `IP`).
    pub fn from_scalar_token(text: &str) -> Option<Placeholder> {
        match text {
            "bool" => Some(Placeholder::Bool),
            "int" => Some(Placeholder::Int),
            "string" => Some(Placeholder::Str),
            "IP" => Some(Placeholder::Ip),
            _ => None,
        }
    }

    /// Admission check for a document node against this placeholder.
    ///
    /// `string` is the top scalar type and admits every scalar; `bool`,
    /// `int` and `IP` are strict; `[list]` admits any sequence (including
    /// empty) and `{dict}` any mapping; both admit null (an empty
    /// structure). Every placeholder admits its own token text, so rendered
    /// manifests that carry tokens validate against the policy they
    /// generated.
    pub fn admits(self, node: &DocNode) -> bool {
        if let Some(s) = node.as_scalar() {
            if s.kind() == ScalarKind::Str && s.text() == self.token() {
                return true;
            }
        }
        match self {
            Placeholder::Bool => {
                matches!(node.as_scalar(), Some(s) if s.kind() == ScalarKind::Bool)
            }
            Placeholder::Int => {
                matches!(node.as_scalar(), Some(s) if s.kind() == ScalarKind::Int)
            }
            Placeholder::Str => node.as_scalar().is_some(),
            Placeholder::Ip => match node.as_scalar() {
                Some(s) => s.kind() == ScalarKind::Str && is_ipv4(s.text()),
                None => false,
            },
            Placeholder::List => {
                matches!(node.value, DocValue::Sequence(_)) || is_null(node)
            }
            Placeholder::Dict => {
                matches!(node.value, DocValue::Mapping(_)) || is_null(node)
            }
        }
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

fn is_null(node: &DocNode) -> bool {
    matches!(node.as_scalar(), Some(s) if s.kind() == ScalarKind::Null)
}

fn is_ipv4(text: &str) -> bool {
    static RE: OnceLock<regex::Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        regex::Regex::new(
            r"^((25[0-5]|2[0-4][0-9]|1[0-9][0-9]|[1-9]?[0-9])\.){3}(25[0-5]|2[0-4][0-9]|1[0-9][0-9]|[1-9]?[0-9])$",
        )
        .expect("static regex")
    });
    re.is_match(text)
}

/// Infers the placeholder generalizing a document node.
///
/// Booleans map to `bool`, integers to `int`, dotted-quad strings to `IP`,
/// every other scalar (strings, floats, null) to `string`; sequences map to
/// `[list]` and mappings to `{dict}`. Total and deterministic.
pub fn infer_placeholder(node: &DocNode) -> Placeholder {
    match &node.value {
        DocValue::Scalar(s) => match s.kind() {
            ScalarKind::Bool => Placeholder::Bool,
            ScalarKind::Int => Placeholder::Int,
            ScalarKind::Str if is_ipv4(s.text()) => Placeholder::Ip,
            _ => Placeholder::Str,
        },
        DocValue::Sequence(_) => Placeholder::List,
        DocValue::Mapping(_) => Placeholder::Dict,
    }
}

/// How a lock rule constrains its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LockMode {
    /// Value-constrained when present.
    Pin,
    /// Must be present (when its parent is) with the pinned value.
    RequireAndPin,
}

/// The pinned value of a lock: a concrete scalar or a type placeholder
/// (e.g. `{dict}` for "any mapping must be present").
#[derive(Debug, Clone, PartialEq)]
pub enum LockValue {
    Scalar(Scalar),
    Placeholder(Placeholder),
}

impl LockValue {
    pub fn admits(&self, node: &DocNode) -> bool {
        match self {
            LockValue::Scalar(want) => matches!(node.as_scalar(), Some(s) if s == want),
            LockValue::Placeholder(p) => p.admits(node),
        }
    }
}

impl fmt::Display for LockValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LockValue::Scalar(s) => write!(f, "{s}"),
            LockValue::Placeholder(p) => write!(f, "{p}"),
        }
    }
}

/// One mapping entry of a schema: the child schema plus whether the key may
/// be absent (a key seen in only some merged manifests becomes optional).
#[derive(Debug, Clone, PartialEq)]
pub struct MappingEntry {
    pub schema: SchemaNode,
    pub optional: bool,
}

/// A generalized document node.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemaNode {
    Placeholder(Placeholder),
    Constant(Scalar),
    Locked { value: LockValue, mode: LockMode },
    /// Ordered set of allowed scalar values; always has at least two
    /// distinct members (single values stay constants).
    Enum(Vec<Scalar>),
    Mapping(Vec<(String, MappingEntry)>),
    Sequence(Box<SchemaNode>),
}

impl SchemaNode {
    pub fn mapping_get(&self, key: &str) -> Option<&MappingEntry> {
        match self {
            SchemaNode::Mapping(entries) => {
                entries.iter().find(|(k, _)| k == key).map(|(_, e)| e)
            }
            _ => None,
        }
    }

    /// True when denying absence is warranted somewhere in this subtree,
    /// i.e. it contains a require-and-pin lock.
    pub fn requires_presence(&self) -> bool {
        match self {
            SchemaNode::Locked {
                mode: LockMode::RequireAndPin,
                ..
            } => true,
            SchemaNode::Mapping(entries) => {
                entries.iter().any(|(_, e)| e.schema.requires_presence())
            }
            _ => false,
        }
    }

    /// Depth-first path of the first require-and-pin lock in the subtree.
    fn first_required_path(&self, base: &FieldPath) -> Option<FieldPath> {
        match self {
            SchemaNode::Locked {
                mode: LockMode::RequireAndPin,
                ..
            } => Some(base.clone()),
            SchemaNode::Mapping(entries) => entries
                .iter()
                .find_map(|(k, e)| e.schema.first_required_path(&base.child(k))),
            _ => None,
        }
    }
}

/// Machine-readable cause of a denial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DenyReason {
    UnknownKind,
    UnknownField,
    TypeMismatch,
    EnumViolation,
    LockViolation,
    MissingRequired,
    ShapeMismatch,
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DenyReason::UnknownKind => "UnknownKind",
            DenyReason::UnknownField => "UnknownField",
            DenyReason::TypeMismatch => "TypeMismatch",
            DenyReason::EnumViolation => "EnumViolation",
            DenyReason::LockViolation => "LockViolation",
            DenyReason::MissingRequired => "MissingRequired",
            DenyReason::ShapeMismatch => "ShapeMismatch",
        };
        f.write_str(s)
    }
}

/// One rule violation found during a schema walk.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: FieldPath,
    pub reason: DenyReason,
    pub message: String,
}

/// Options for the matching walk.
#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    /// Treat the document as a partial object: never report
    /// `MissingRequired` (used for patch bodies).
    pub partial: bool,
    /// Collect every violation instead of stopping at the first.
    pub all_violations: bool,
}

/// Walks a document against a schema, depth-first in document order,
/// returning the violations found (empty means admitted).
pub fn check(node: &DocNode, schema: &SchemaNode, opts: CheckOptions) -> Vec<Violation> {
    let mut out = Vec::new();
    walk(node, schema, &FieldPath::root(), opts, &mut out);
    out
}

/// Single-node admission: the kernel reused by the validation engine.
/// Returns `true` plus no path when admitted, or `false` plus the
/// shallowest mismatching path.
pub fn value_matches(node: &DocNode, schema: &SchemaNode) -> (bool, Option<FieldPath>) {
    let violations = check(node, schema, CheckOptions::default());
    match violations.into_iter().next() {
        None => (true, None),
        Some(v) => (false, Some(v.path)),
    }
}

fn walk(
    node: &DocNode,
    schema: &SchemaNode,
    path: &FieldPath,
    opts: CheckOptions,
    out: &mut Vec<Violation>,
) {
    if !opts.all_violations && !out.is_empty() {
        return;
    }
    match schema {
        SchemaNode::Placeholder(p) => {
            if !p.admits(node) {
                out.push(Violation {
                    path: path.clone(),
                    reason: DenyReason::TypeMismatch,
                    message: format!(
                        "expected {} but found {}",
                        p.token(),
                        describe(node)
                    ),
                });
            }
        }
        SchemaNode::Constant(want) => match &node.value {
            DocValue::Scalar(s) => {
                if s != want {
                    out.push(Violation {
                        path: path.clone(),
                        reason: DenyReason::EnumViolation,
                        message: format!("value {} is not the allowed value {}", s, want),
                    });
                }
            }
            _ => out.push(Violation {
                path: path.clone(),
                reason: DenyReason::ShapeMismatch,
                message: format!("expected scalar {} but found {}", want, node.type_name()),
            }),
        },
        SchemaNode::Locked { value, mode: _ } => {
            if !value.admits(node) {
                out.push(Violation {
                    path: path.clone(),
                    reason: DenyReason::LockViolation,
                    message: format!(
                        "field is locked to {} but request carries {}",
                        value,
                        describe(node)
                    ),
                });
            }
        }
        SchemaNode::Enum(allowed) => match &node.value {
            DocValue::Scalar(s) => {
                if !allowed.contains(s) {
                    out.push(Violation {
                        path: path.clone(),
                        reason: DenyReason::EnumViolation,
                        message: format!("value {} is not in {}", s, enum_text(allowed)),
                    });
                }
            }
            // A list position whose merged elements were all scalars
            // serializes as a flow enum; admit sequences whose every
            // element is an allowed scalar.
            DocValue::Sequence(items) => {
                for item in items {
                    let elem_path = path.element();
                    match item.as_scalar() {
                        Some(s) if allowed.contains(s) => {}
                        Some(s) => {
                            out.push(Violation {
                                path: elem_path,
                                reason: DenyReason::EnumViolation,
                                message: format!("value {} is not in {}", s, enum_text(allowed)),
                            });
                            if !opts.all_violations {
                                return;
                            }
                        }
                        None => {
                            out.push(Violation {
                                path: elem_path,
                                reason: DenyReason::ShapeMismatch,
                                message: format!(
                                    "expected a value from {} but found {}",
                                    enum_text(allowed),
                                    item.type_name()
                                ),
                            });
                            if !opts.all_violations {
                                return;
                            }
                        }
                    }
                }
            }
            DocValue::Mapping(_) => out.push(Violation {
                path: path.clone(),
                reason: DenyReason::ShapeMismatch,
                message: format!("expected a value from {} but found a mapping", enum_text(allowed)),
            }),
        },
        SchemaNode::Mapping(entries) => match &node.value {
            // Null stands for an empty mapping: no keys to check, but
            // required locks still count as absent.
            DocValue::Scalar(s) if s.kind() == crate::doc::ScalarKind::Null => {
                if !opts.partial {
                    report_missing_locks(entries, path, opts, out);
                }
            }
            DocValue::Mapping(m) => {
                for (key, child) in m.iter() {
                    let child_path = path.child(key);
                    match entries.iter().find(|(k, _)| k == key) {
                        None => {
                            out.push(Violation {
                                path: child_path,
                                reason: DenyReason::UnknownField,
                                message: format!("field `{key}` is not in the allowed set"),
                            });
                            if !opts.all_violations {
                                return;
                            }
                        }
                        Some((_, entry)) => {
                            walk(child, &entry.schema, &child_path, opts, out);
                            if !opts.all_violations && !out.is_empty() {
                                return;
                            }
                        }
                    }
                }
                if !opts.partial {
                    let present: Vec<&str> = m.keys().collect();
                    report_missing_locks_except(entries, &present, path, opts, out);
                }
            }
            _ => out.push(Violation {
                path: path.clone(),
                reason: DenyReason::ShapeMismatch,
                message: format!("expected a mapping but found {}", node.type_name()),
            }),
        },
        SchemaNode::Sequence(elem) => match &node.value {
            // Null stands for an empty sequence.
            DocValue::Scalar(s) if s.kind() == crate::doc::ScalarKind::Null => {}
            DocValue::Sequence(items) => {
                for item in items {
                    walk(item, elem, &path.element(), opts, out);
                    if !opts.all_violations && !out.is_empty() {
                        return;
                    }
                }
            }
            _ => out.push(Violation {
                path: path.clone(),
                reason: DenyReason::ShapeMismatch,
                message: format!("expected a sequence but found {}", node.type_name()),
            }),
        },
    }
}

fn report_missing_locks(
    entries: &[(String, MappingEntry)],
    path: &FieldPath,
    opts: CheckOptions,
    out: &mut Vec<Violation>,
) {
    report_missing_locks_except(entries, &[], path, opts, out);
}

fn report_missing_locks_except(
    entries: &[(String, MappingEntry)],
    present: &[&str],
    path: &FieldPath,
    opts: CheckOptions,
    out: &mut Vec<Violation>,
) {
    for (key, entry) in entries {
        if !present.contains(&key.as_str()) && entry.schema.requires_presence() {
            let missing = entry
                .schema
                .first_required_path(&path.child(key))
                .unwrap_or_else(|| path.child(key));
            out.push(Violation {
                path: missing.clone(),
                reason: DenyReason::MissingRequired,
                message: format!("required field `{missing}` is absent"),
            });
            if !opts.all_violations {
                return;
            }
        }
    }
}

fn describe(node: &DocNode) -> String {
    match &node.value {
        DocValue::Scalar(s) => format!("{} `{}`", s.kind().name(), s),
        other @ (DocValue::Sequence(_) | DocValue::Mapping(_)) => match other {
            DocValue::Sequence(_) => "a sequence".to_string(),
            _ => "a mapping".to_string(),
        },
    }
}

fn enum_text(allowed: &[Scalar]) -> String {
    let opts: Vec<String> = allowed.iter().map(|s| s.to_string()).collect();
    format!("[{}]", opts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::{parse_document, DocFormat};

    #[test]
    fn infer_matches_paper_examples() {
        assert_eq!(infer_placeholder(&DocNode::bool(true)), Placeholder::Bool);
        assert_eq!(infer_placeholder(&DocNode::int(1)), Placeholder::Int);
        assert_eq!(
            infer_placeholder(&DocNode::str("0.0.0.0")),
            Placeholder::Ip
        );
        let seq = parse_document("- name: secret-1\n- name: secret-2", DocFormat::Yaml).unwrap();
        assert_eq!(infer_placeholder(&seq), Placeholder::List);
        assert_eq!(infer_placeholder(&DocNode::null()), Placeholder::Str);
        assert_eq!(
            infer_placeholder(&DocNode::scalar(Scalar::float(1.5))),
            Placeholder::Str
        );
    }

    #[test]
    fn ipv6_and_bad_quads_are_strings() {
        assert_eq!(infer_placeholder(&DocNode::str("::1")), Placeholder::Str);
        assert_eq!(
            infer_placeholder(&DocNode::str("256.1.1.1")),
            Placeholder::Str
        );
        assert_eq!(
            infer_placeholder(&DocNode::str("1.2.3")),
            Placeholder::Str
        );
    }

    #[test]
    fn int_matches_int_placeholder() {
        let (ok, _) = value_matches(&DocNode::int(5), &SchemaNode::Placeholder(Placeholder::Int));
        assert!(ok);
    }

    #[test]
    fn enum_membership() {
        let schema = SchemaNode::Enum(vec![Scalar::str("IfNotPresent"), Scalar::str("Always")]);
        let (ok, _) = value_matches(&DocNode::str("Always"), &schema);
        assert!(ok);
        let (ok, path) = value_matches(&DocNode::str("Never"), &schema);
        assert!(!ok);
        assert_eq!(path.unwrap().to_string(), ".");
    }

    #[test]
    fn locked_constant_rejects_other_values() {
        let schema = SchemaNode::Locked {
            value: LockValue::Scalar(Scalar::bool(true)),
            mode: LockMode::RequireAndPin,
        };
        let (ok, path) = value_matches(&DocNode::bool(false), &schema);
        assert!(!ok);
        assert_eq!(path.unwrap().to_string(), ".");
        let (ok, _) = value_matches(&DocNode::bool(true), &schema);
        assert!(ok);
    }

    #[test]
    fn placeholder_generalization_admits_origin() {
        for text in ["5", "true", "a: 1", "- x\n- 2", "0.0.0.0", "hello", "1.25", "~"] {
            let node = parse_document(text, DocFormat::Yaml).unwrap();
            let p = infer_placeholder(&node);
            let (ok, _) = value_matches(&node, &SchemaNode::Placeholder(p));
            assert!(ok, "{text:?} should match its inferred placeholder {p}");
        }
    }

    #[test]
    fn unknown_field_reports_shallowest_path() {
        let schema = SchemaNode::Mapping(vec![(
            "spec".to_string(),
            MappingEntry {
                schema: SchemaNode::Mapping(vec![(
                    "replicas".to_string(),
                    MappingEntry {
                        schema: SchemaNode::Placeholder(Placeholder::Int),
                        optional: true,
                    },
                )]),
                optional: true,
            },
        )]);
        let doc = parse_document("spec:\n  hostNetwork: true", DocFormat::Yaml).unwrap();
        let violations = check(&doc, &schema, CheckOptions::default());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].reason, DenyReason::UnknownField);
        assert_eq!(violations[0].path.to_string(), "spec.hostNetwork");
    }

    #[test]
    fn missing_require_and_pin_reported_at_lock_path() {
        let schema = SchemaNode::Mapping(vec![(
            "securityContext".to_string(),
            MappingEntry {
                schema: SchemaNode::Mapping(vec![(
                    "runAsNonRoot".to_string(),
                    MappingEntry {
                        schema: SchemaNode::Locked {
                            value: LockValue::Scalar(Scalar::bool(true)),
                            mode: LockMode::RequireAndPin,
                        },
                        optional: false,
                    },
                )]),
                optional: false,
            },
        )]);
        // Container-level mapping missing securityContext entirely.
        let doc = parse_document("{}", DocFormat::Yaml).unwrap();
        let violations = check(&doc, &schema, CheckOptions::default());
        assert_eq!(violations[0].reason, DenyReason::MissingRequired);
        assert_eq!(
            violations[0].path.to_string(),
            "securityContext.runAsNonRoot"
        );
        // Partial bodies are exempt.
        let violations = check(
            &doc,
            &schema,
            CheckOptions {
                partial: true,
                ..Default::default()
            },
        );
        assert!(violations.is_empty());
    }

    #[test]
    fn enum_admits_sequences_of_members() {
        let schema = SchemaNode::Enum(vec![Scalar::str("--port"), Scalar::str("8080")]);
        let doc = parse_document("- --port\n- 8080", DocFormat::Yaml).unwrap();
        // "8080" parses as int; enum holds strings, so this must miss.
        let (ok, _) = value_matches(&doc, &schema);
        assert!(!ok);
        let schema = SchemaNode::Enum(vec![Scalar::str("--port"), Scalar::int(8080)]);
        let (ok, _) = value_matches(&doc, &schema);
        assert!(ok);
    }

    #[test]
    fn dict_placeholder_admits_any_mapping() {
        let schema = SchemaNode::Placeholder(Placeholder::Dict);
        let doc = parse_document("cpu: 100m\nmemory: 128Mi", DocFormat::Yaml).unwrap();
        assert!(value_matches(&doc, &schema).0);
        assert!(!value_matches(&DocNode::int(1), &schema).0);
    }
}
