//! Kind-level RBAC baseline: the comparison policy model that grants verbs
//! over whole resource kinds and sees nothing inside request bodies.

use crate::doc::{parse_document, DocFormat, DocNode, ParseError};
use thiserror::Error;

/// One allow rule: a kind plus the verbs granted on it. `*` matches
/// anything.
#[derive(Debug, Clone, PartialEq)]
pub struct RbacRule {
    pub kind: String,
    pub verbs: Vec<String>,
}

/// A kind/verb allow list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RbacPolicy {
    pub rules: Vec<RbacRule>,
}

#[derive(Debug, Error)]
pub enum RbacError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("malformed RBAC policy: {0}")]
    Malformed(String),
}

impl RbacPolicy {
    /// Grants every verb on every kind.
    pub fn permissive() -> Self {
        RbacPolicy {
            rules: vec![RbacRule {
                kind: "*".to_string(),
                verbs: vec!["*".to_string()],
            }],
        }
    }

    pub fn allows_kind(&self, kind: &str) -> bool {
        self.rules.iter().any(|r| r.kind == "*" || r.kind == kind)
    }

    pub fn allows(&self, kind: &str, verb: &str) -> bool {
        self.rules.iter().any(|r| {
            (r.kind == "*" || r.kind == kind)
                && r.verbs.iter().any(|v| v == "*" || v == verb)
        })
    }

    /// Loads the `allow:` list form:
    ///
    /// ```yaml
    /// allow:
    ///   - kind: Deployment
    ///     verbs: [create, update, patch]
    ///   - kind: "*"
    ///     verbs: ["*"]
    /// ```
    pub fn from_yaml(text: &str) -> Result<Self, RbacError> {
        let doc = parse_document(text, DocFormat::Yaml)?;
        let rules_node = doc
            .get_path(&["allow"])
            .ok_or_else(|| RbacError::Malformed("missing top-level `allow`".to_string()))?;
        let items = rules_node
            .as_sequence()
            .ok_or_else(|| RbacError::Malformed("`allow` must be a sequence".to_string()))?;
        let mut rules = Vec::new();
        for item in items {
            let kind = item
                .get_path(&["kind"])
                .and_then(DocNode::as_str)
                .ok_or_else(|| RbacError::Malformed("rule without `kind`".to_string()))?
                .to_string();
            let verbs = match item.get_path(&["verbs"]).and_then(DocNode::as_sequence) {
                None => vec!["*".to_string()],
                Some(seq) => seq
                    .iter()
                    .filter_map(|v| v.as_scalar().map(|s| s.text().to_string()))
                    .collect(),
            };
            rules.push(RbacRule { kind, verbs });
        }
        Ok(RbacPolicy { rules })
    }
}
