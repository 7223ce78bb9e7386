//! Request-body validation: hierarchical comparison of a Kubernetes object
//! (or patch fragment) against a validator.

use crate::doc::path::{FieldPath, Segment};
use crate::doc::{DocNode, DocValue};
use crate::policy::Validator;
use crate::schema::{check, CheckOptions, DenyReason, LockMode, SchemaNode, Violation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The outcome of validating one request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "lowercase")]
pub enum Verdict {
    Allow,
    Deny {
        path: String,
        reason: DenyReason,
        message: String,
    },
}

impl Verdict {
    pub fn is_allow(&self) -> bool {
        matches!(self, Verdict::Allow)
    }

    pub fn deny(path: &FieldPath, reason: DenyReason, message: impl Into<String>) -> Self {
        Verdict::Deny {
            path: path.to_string(),
            reason,
            message: message.into(),
        }
    }

    fn from_violation(v: Violation) -> Self {
        Verdict::Deny {
            path: v.path.to_string(),
            reason: v.reason,
            message: v.message,
        }
    }
}

/// Validates a whole object: the kind must exist in the validator, only
/// whitelisted fields may be present, leaf values must match, and
/// require-and-pin locks must be present with their pinned value. The first
/// violation in depth-first document order is returned.
pub fn validate_object(object: &DocNode, validator: &Validator) -> Verdict {
    let Some(kind) = object.get_path(&["kind"]).and_then(DocNode::as_str) else {
        return Verdict::deny(
            &FieldPath::keys(&["kind"]),
            DenyReason::UnknownKind,
            "request body has no scalar `kind`",
        );
    };
    validate_object_as(object, kind, validator, CheckOptions::default())
}

/// Collects every violation instead of the first.
pub fn validate_object_all(object: &DocNode, validator: &Validator) -> Vec<Verdict> {
    let Some(kind) = object.get_path(&["kind"]).and_then(DocNode::as_str) else {
        return vec![Verdict::deny(
            &FieldPath::keys(&["kind"]),
            DenyReason::UnknownKind,
            "request body has no scalar `kind`",
        )];
    };
    let Some(schema) = validator.kind(kind) else {
        return vec![unknown_kind(kind)];
    };
    let violations = check(
        object,
        schema,
        CheckOptions {
            partial: false,
            all_violations: true,
        },
    );
    if violations.is_empty() {
        vec![Verdict::Allow]
    } else {
        violations.into_iter().map(Verdict::from_violation).collect()
    }
}

fn unknown_kind(kind: &str) -> Verdict {
    Verdict::deny(
        &FieldPath::keys(&["kind"]),
        DenyReason::UnknownKind,
        format!("kind `{kind}` is not covered by the policy"),
    )
}

fn validate_object_as(
    object: &DocNode,
    kind: &str,
    validator: &Validator,
    opts: CheckOptions,
) -> Verdict {
    let Some(schema) = validator.kind(kind) else {
        return unknown_kind(kind);
    };
    match check(object, schema, opts).into_iter().next() {
        None => Verdict::Allow,
        Some(v) => Verdict::from_violation(v),
    }
}

/// Patch content types the engine understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchType {
    MergePatch,
    StrategicMerge,
    JsonPatch,
}

impl PatchType {
    /// Maps an HTTP `Content-Type` onto a patch type.
    pub fn from_content_type(value: &str) -> Option<PatchType> {
        let mime = value.split(';').next().unwrap_or("").trim();
        match mime {
            "application/merge-patch+json" => Some(PatchType::MergePatch),
            "application/strategic-merge-patch+json" => Some(PatchType::StrategicMerge),
            "application/json-patch+json" => Some(PatchType::JsonPatch),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("unsupported patch content type `{0}`")]
    UnsupportedPatchType(String),
}

/// Validates a patch body against the validator entry for `kind` (the kind
/// comes from the request path, out of band).
///
/// Merge and strategic-merge bodies are validated as partial objects:
/// unknown-field, type, enum and lock rules apply, but `MissingRequired` is
/// not enforced. JSON-patch operations are checked individually: the target
/// path must be whitelisted, `add`/`replace` values must be admissible, and
/// removing a require-and-pin lock target is a lock violation.
pub fn validate_patch(body: &DocNode, patch_type: PatchType, kind: &str, validator: &Validator) -> Verdict {
    match patch_type {
        PatchType::MergePatch | PatchType::StrategicMerge => {
            let Some(schema) = validator.kind(kind) else {
                return unknown_kind(kind);
            };
            let opts = CheckOptions {
                partial: true,
                all_violations: false,
            };
            match check(body, schema, opts).into_iter().next() {
                None => Verdict::Allow,
                Some(v) => Verdict::from_violation(v),
            }
        }
        PatchType::JsonPatch => validate_json_patch(body, kind, validator),
    }
}

fn validate_json_patch(body: &DocNode, kind: &str, validator: &Validator) -> Verdict {
    let Some(schema) = validator.kind(kind) else {
        return unknown_kind(kind);
    };
    let Some(ops) = body.as_sequence() else {
        return Verdict::deny(
            &FieldPath::root(),
            DenyReason::ShapeMismatch,
            "a JSON patch body must be an array of operations",
        );
    };
    for op in ops {
        let Some(m) = op.as_mapping() else {
            return Verdict::deny(
                &FieldPath::root(),
                DenyReason::ShapeMismatch,
                "each JSON patch operation must be an object",
            );
        };
        let Some(op_name) = m.get("op").and_then(DocNode::as_str) else {
            return Verdict::deny(
                &FieldPath::root(),
                DenyReason::ShapeMismatch,
                "JSON patch operation without `op`",
            );
        };
        let Some(pointer) = m.get("path").and_then(DocNode::as_str) else {
            return Verdict::deny(
                &FieldPath::root(),
                DenyReason::ShapeMismatch,
                "JSON patch operation without `path`",
            );
        };
        let path = pointer_to_path(pointer);
        let Some(target) = resolve_schema_path(schema, &path) else {
            return Verdict::deny(&path, DenyReason::UnknownField, format!(
                "patch path `{path}` is not in the allowed set"
            ));
        };
        match op_name {
            "add" | "replace" => {
                let Some(value) = m.get("value") else {
                    return Verdict::deny(
                        &path,
                        DenyReason::ShapeMismatch,
                        format!("`{op_name}` operation without `value`"),
                    );
                };
                let violations = check(
                    value,
                    target,
                    CheckOptions {
                        partial: true,
                        all_violations: false,
                    },
                );
                if let Some(v) = violations.into_iter().next() {
                    let full = path.join(&v.path);
                    return Verdict::Deny {
                        path: full.to_string(),
                        reason: v.reason,
                        message: v.message,
                    };
                }
            }
            "remove" => {
                if let SchemaNode::Locked {
                    mode: LockMode::RequireAndPin,
                    ..
                } = target
                {
                    return Verdict::deny(
                        &path,
                        DenyReason::LockViolation,
                        format!("`{path}` is required and cannot be removed"),
                    );
                }
            }
            "move" => {
                if let Some(from) = m.get("from").and_then(DocNode::as_str) {
                    let from_path = pointer_to_path(from);
                    match resolve_schema_path(schema, &from_path) {
                        None => {
                            return Verdict::deny(
                                &from_path,
                                DenyReason::UnknownField,
                                format!("patch path `{from_path}` is not in the allowed set"),
                            )
                        }
                        Some(SchemaNode::Locked {
                            mode: LockMode::RequireAndPin,
                            ..
                        }) => {
                            return Verdict::deny(
                                &from_path,
                                DenyReason::LockViolation,
                                format!("`{from_path}` is required and cannot be moved away"),
                            )
                        }
                        Some(_) => {}
                    }
                }
            }
            "copy" | "test" => {}
            other => {
                return Verdict::deny(
                    &path,
                    DenyReason::ShapeMismatch,
                    format!("unknown JSON patch op `{other}`"),
                )
            }
        }
    }
    Verdict::Allow
}

/// Converts a JSON pointer (`/spec/containers/0/name`) to a field path;
/// numeric segments and `-` map to the any-element wildcard.
fn pointer_to_path(pointer: &str) -> FieldPath {
    let mut segments = Vec::new();
    for raw in pointer.split('/').skip(1) {
        let unescaped = raw.replace("~1", "/").replace("~0", "~");
        if unescaped == "-" || unescaped.chars().all(|c| c.is_ascii_digit()) && !unescaped.is_empty()
        {
            segments.push(Segment::AnyIndex);
        } else {
            segments.push(Segment::Key(unescaped));
        }
    }
    FieldPath::from_segments(segments)
}

/// Whitelist membership of a catalog path in a kind schema. `None` means
/// the path is unreachable (restrictable); `Some(value_restricted)` means
/// it is whitelisted, with the flag set when the resolved node pins values
/// (a constant, enum or lock) rather than a free placeholder or structure.
pub fn schema_whitelists_path(schema: &SchemaNode, path: &FieldPath) -> Option<bool> {
    let node = resolve_schema_path(schema, path)?;
    Some(matches!(
        node,
        SchemaNode::Constant(_) | SchemaNode::Enum(_) | SchemaNode::Locked { .. }
    ))
}

/// Walks a schema tree by path; placeholders absorb any deeper path.
fn resolve_schema_path<'a>(schema: &'a SchemaNode, path: &FieldPath) -> Option<&'a SchemaNode> {
    let mut cur = schema;
    for seg in path.segments() {
        match (cur, seg) {
            // `{dict}`/`[list]` admit entire subtrees.
            (SchemaNode::Placeholder(p), _) if p.admits_subtree() => return Some(cur),
            (
                SchemaNode::Locked {
                    value: crate::schema::LockValue::Placeholder(p),
                    ..
                },
                _,
            ) if p.admits_subtree() => return Some(cur),
            (SchemaNode::Mapping(entries), Segment::Key(key)) => {
                cur = &entries.iter().find(|(k, _)| k == key)?.1.schema;
            }
            (SchemaNode::Sequence(elem), Segment::AnyIndex) => cur = elem,
            // Sequence positions over enum leaves (scalar lists).
            (SchemaNode::Enum(_), Segment::AnyIndex) => return Some(cur),
            _ => return None,
        }
    }
    Some(cur)
}

impl crate::schema::Placeholder {
    fn admits_subtree(self) -> bool {
        matches!(
            self,
            crate::schema::Placeholder::List | crate::schema::Placeholder::Dict
        )
    }
}

/// Presence of structural payload, used by callers that must decide whether
/// a body is an object at all.
pub fn is_object_like(node: &DocNode) -> bool {
    matches!(node.value, DocValue::Mapping(_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::{parse_document, DocFormat, Scalar};
    use crate::policy::ValidatorMeta;
    use crate::schema::{LockValue, MappingEntry, Placeholder};

    fn meta() -> ValidatorMeta {
        ValidatorMeta {
            chart: "t".to_string(),
            generated: String::new(),
            locks_digest: String::new(),
        }
    }

    fn entry(schema: SchemaNode) -> MappingEntry {
        MappingEntry {
            schema,
            optional: true,
        }
    }

    fn deployment_validator() -> Validator {
        let container = SchemaNode::Mapping(vec![
            ("name".into(), entry(SchemaNode::Placeholder(Placeholder::Str))),
            ("image".into(), entry(SchemaNode::Placeholder(Placeholder::Str))),
            (
                "imagePullPolicy".into(),
                entry(SchemaNode::Enum(vec![
                    Scalar::str("IfNotPresent"),
                    Scalar::str("Always"),
                ])),
            ),
            (
                "securityContext".into(),
                entry(SchemaNode::Mapping(vec![(
                    "runAsNonRoot".into(),
                    MappingEntry {
                        schema: SchemaNode::Locked {
                            value: LockValue::Scalar(Scalar::bool(true)),
                            mode: LockMode::RequireAndPin,
                        },
                        optional: false,
                    },
                )])),
            ),
        ]);
        let tree = SchemaNode::Mapping(vec![
            ("apiVersion".into(), entry(SchemaNode::Constant(Scalar::str("apps/v1")))),
            ("kind".into(), entry(SchemaNode::Constant(Scalar::str("Deployment")))),
            (
                "spec".into(),
                entry(SchemaNode::Mapping(vec![
                    ("replicas".into(), entry(SchemaNode::Placeholder(Placeholder::Int))),
                    (
                        "template".into(),
                        entry(SchemaNode::Mapping(vec![(
                            "spec".into(),
                            entry(SchemaNode::Mapping(vec![(
                                "containers".into(),
                                entry(SchemaNode::Sequence(Box::new(container))),
                            )])),
                        )])),
                    ),
                ])),
            ),
        ]);
        Validator {
            kinds: vec![("Deployment".to_string(), tree)],
            meta: meta(),
        }
    }

    #[test]
    fn fig10_manifest_is_a_lock_violation() {
        let manifest = parse_document(
            "apiVersion: apps/v1\nkind: Deployment\nspec:\n  template:\n    spec:\n      containers:\n      - name: nginx\n        image: testImage\n        securityContext:\n          runAsNonRoot: false\n",
            DocFormat::Yaml,
        )
        .unwrap();
        let verdict = validate_object(&manifest, &deployment_validator());
        match verdict {
            Verdict::Deny { path, reason, .. } => {
                assert_eq!(reason, DenyReason::LockViolation);
                assert_eq!(
                    path,
                    "spec.template.spec.containers[].securityContext.runAsNonRoot"
                );
            }
            Verdict::Allow => panic!("must deny"),
        }
    }

    #[test]
    fn unknown_kind_is_denied() {
        let manifest =
            parse_document("apiVersion: v1\nkind: Pod\nspec: {}\n", DocFormat::Yaml).unwrap();
        let verdict = validate_object(&manifest, &deployment_validator());
        assert!(
            matches!(verdict, Verdict::Deny { reason: DenyReason::UnknownKind, .. })
        );
    }

    #[test]
    fn unknown_field_is_denied() {
        let manifest = parse_document(
            "apiVersion: apps/v1\nkind: Deployment\nspec:\n  hostNetwork: true\n",
            DocFormat::Yaml,
        )
        .unwrap();
        let verdict = validate_object(&manifest, &deployment_validator());
        match verdict {
            Verdict::Deny { path, reason, .. } => {
                assert_eq!(reason, DenyReason::UnknownField);
                assert_eq!(path, "spec.hostNetwork");
            }
            Verdict::Allow => panic!("must deny"),
        }
    }

    #[test]
    fn enum_violation_on_image_pull_policy() {
        let manifest = parse_document(
            "apiVersion: apps/v1\nkind: Deployment\nspec:\n  template:\n    spec:\n      containers:\n      - name: a\n        imagePullPolicy: Never\n        securityContext:\n          runAsNonRoot: true\n",
            DocFormat::Yaml,
        )
        .unwrap();
        let verdict = validate_object(&manifest, &deployment_validator());
        assert!(
            matches!(verdict, Verdict::Deny { reason: DenyReason::EnumViolation, .. })
        );
    }

    #[test]
    fn merge_patch_allows_partial_bodies() {
        let validator = deployment_validator();
        let patch = parse_document(r#"{"spec":{"replicas":3}}"#, DocFormat::Json).unwrap();
        let verdict = validate_patch(&patch, PatchType::MergePatch, "Deployment", &validator);
        assert_eq!(verdict, Verdict::Allow);
    }

    #[test]
    fn merge_patch_rejects_unknown_fields() {
        let validator = deployment_validator();
        let patch = parse_document(r#"{"spec":{"hostPID":true}}"#, DocFormat::Json).unwrap();
        let verdict = validate_patch(&patch, PatchType::MergePatch, "Deployment", &validator);
        match verdict {
            Verdict::Deny { path, reason, .. } => {
                assert_eq!(reason, DenyReason::UnknownField);
                assert_eq!(path, "spec.hostPID");
            }
            Verdict::Allow => panic!("must deny"),
        }
    }

    #[test]
    fn json_patch_remove_of_lock_is_denied() {
        let validator = deployment_validator();
        let patch = parse_document(
            r#"[{"op":"remove","path":"/spec/template/spec/containers/0/securityContext/runAsNonRoot"}]"#,
            DocFormat::Json,
        )
        .unwrap();
        let verdict = validate_patch(&patch, PatchType::JsonPatch, "Deployment", &validator);
        match verdict {
            Verdict::Deny { path, reason, .. } => {
                assert_eq!(reason, DenyReason::LockViolation);
                assert_eq!(
                    path,
                    "spec.template.spec.containers[].securityContext.runAsNonRoot"
                );
            }
            Verdict::Allow => panic!("must deny"),
        }
    }

    #[test]
    fn json_patch_add_checks_value() {
        let validator = deployment_validator();
        let ok = parse_document(
            r#"[{"op":"replace","path":"/spec/replicas","value":4}]"#,
            DocFormat::Json,
        )
        .unwrap();
        assert_eq!(
            validate_patch(&ok, PatchType::JsonPatch, "Deployment", &validator),
            Verdict::Allow
        );
        let bad = parse_document(
            r#"[{"op":"replace","path":"/spec/replicas","value":"many"}]"#,
            DocFormat::Json,
        )
        .unwrap();
        assert!(matches!(
            validate_patch(&bad, PatchType::JsonPatch, "Deployment", &validator),
            Verdict::Deny { reason: DenyReason::TypeMismatch, .. }
        ));
        let unknown = parse_document(
            r#"[{"op":"add","path":"/spec/paused","value":true}]"#,
            DocFormat::Json,
        )
        .unwrap();
        assert!(matches!(
            validate_patch(&unknown, PatchType::JsonPatch, "Deployment", &validator),
            Verdict::Deny { reason: DenyReason::UnknownField, .. }
        ));
    }

    #[test]
    fn patch_content_types() {
        assert_eq!(
            PatchType::from_content_type("application/merge-patch+json; charset=utf-8"),
            Some(PatchType::MergePatch)
        );
        assert_eq!(
            PatchType::from_content_type("application/apply-patch+yaml"),
            None
        );
    }
}
