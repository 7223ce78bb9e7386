//! Attack-surface quantification: how many configurable fields each
//! enforcement model can make unreachable.
//!
//! RBAC can only restrict a field by disabling its entire resource kind;
//! the validator additionally restricts any field absent from its
//! whitelist, so its restrictable set is a strict superset of RBAC's.

use crate::doc::path::FieldPath;
use crate::doc::{parse_document, DocFormat, DocNode, ParseError};
use crate::policy::Validator;
use crate::rbac::RbacPolicy;
use crate::validate::schema_whitelists_path;
use serde::Serialize;
use std::fmt;
use thiserror::Error;

/// The configurable field space, one path set per kind.
#[derive(Debug, Clone, Default)]
pub struct FieldCatalog {
    pub kinds: Vec<(String, Vec<FieldPath>)>,
}

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("malformed field catalog: {0}")]
    Malformed(String),
    #[error("duplicate catalog path `{path}` under kind `{kind}`")]
    DuplicatePath { kind: String, path: String },
    #[error("validator covers kind `{0}` which is missing from the catalog")]
    UnknownKindInValidator(String),
    #[error("catalog holds no fields; reduction is undefined")]
    ZeroTotal,
}

impl FieldCatalog {
    /// Loads the fixture form:
    ///
    /// ```yaml
    /// kinds:
    ///   Deployment:
    ///     - spec.replicas
    ///     - spec.template.spec.containers[].image
    /// ```
    pub fn from_yaml(text: &str) -> Result<Self, SurfaceError> {
        let doc = parse_document(text, DocFormat::Yaml)?;
        let kinds_node = doc
            .get_path(&["kinds"])
            .and_then(DocNode::as_mapping)
            .ok_or_else(|| SurfaceError::Malformed("missing `kinds` mapping".to_string()))?;
        let mut kinds = Vec::new();
        for (kind, paths_node) in kinds_node.iter() {
            let items = paths_node.as_sequence().ok_or_else(|| {
                SurfaceError::Malformed(format!("paths for `{kind}` must be a sequence"))
            })?;
            let mut paths: Vec<FieldPath> = Vec::with_capacity(items.len());
            for item in items {
                let text = item.as_scalar().map(|s| s.text().to_string()).ok_or_else(
                    || SurfaceError::Malformed(format!("paths for `{kind}` must be scalars")),
                )?;
                let path = FieldPath::parse(&text)
                    .map_err(|e| SurfaceError::Malformed(e.to_string()))?;
                if paths.contains(&path) {
                    return Err(SurfaceError::DuplicatePath {
                        kind: kind.to_string(),
                        path: text,
                    });
                }
                paths.push(path);
            }
            kinds.push((kind.to_string(), paths));
        }
        Ok(FieldCatalog { kinds })
    }

    pub fn total(&self) -> u64 {
        self.kinds.iter().map(|(_, p)| p.len() as u64).sum()
    }

    pub fn kind_names(&self) -> impl Iterator<Item = &str> {
        self.kinds.iter().map(|(k, _)| k.as_str())
    }
}

/// A percentage with exactly two decimals, rounded half-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Percent(pub u64);

impl Percent {
    pub fn hundredths(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02} %", self.0 / 100, self.0 % 100)
    }
}

/// 100 * restrictable / total, rounded half-up to two decimals.
pub fn compute_reduction(restrictable: u64, total: u64) -> Result<Percent, SurfaceError> {
    if total == 0 {
        return Err(SurfaceError::ZeroTotal);
    }
    debug_assert!(restrictable <= total);
    let num = 20_000u128 * restrictable as u128 + total as u128;
    let den = 2u128 * total as u128;
    Ok(Percent((num / den) as u64))
}

/// Per-workload attack-surface comparison.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceReport {
    pub workload: String,
    pub total: u64,
    pub restrictable_rbac: u64,
    pub restrictable_kf: u64,
    pub reduction_rbac: Percent,
    pub reduction_kf: Percent,
    /// Percentage-point improvement of the validator over RBAC.
    pub improvement: Percent,
    /// Fields present in the whitelist but value-restricted (enums and
    /// locks); reported only under `--count-value-locks`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_locked: Option<u64>,
}

/// Options for [`analyze`].
#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyzeOptions {
    /// Additionally count whitelisted-but-value-restricted fields.
    pub count_value_locks: bool,
}

/// Computes restrictable field counts for RBAC and the validator.
///
/// RBAC restricts all fields of kinds outside its allow list. The
/// validator restricts those too, plus every field of an allowed kind that
/// its whitelist does not contain (a kind with no validator entry is
/// blocked wholesale by the proxy).
pub fn analyze(
    workload: &str,
    catalog: &FieldCatalog,
    validator: &Validator,
    rbac: &RbacPolicy,
    opts: AnalyzeOptions,
) -> Result<SurfaceReport, SurfaceError> {
    for kind in validator.kind_names() {
        if !catalog.kind_names().any(|k| k == kind) {
            return Err(SurfaceError::UnknownKindInValidator(kind.to_string()));
        }
    }
    let total = catalog.total();
    if total == 0 {
        return Err(SurfaceError::ZeroTotal);
    }
    let mut restrictable_rbac = 0u64;
    let mut restrictable_kf = 0u64;
    let mut value_locked = 0u64;
    for (kind, paths) in &catalog.kinds {
        let rbac_allows = rbac.allows_kind(kind);
        if !rbac_allows {
            restrictable_rbac += paths.len() as u64;
            restrictable_kf += paths.len() as u64;
            continue;
        }
        match validator.kind(kind) {
            None => {
                // Allowed by RBAC but never used by the workload: the proxy
                // denies the whole kind.
                restrictable_kf += paths.len() as u64;
            }
            Some(schema) => {
                for path in paths {
                    match schema_whitelists_path(schema, path) {
                        None => restrictable_kf += 1,
                        Some(value_restricted) => {
                            if value_restricted {
                                value_locked += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    let reduction_rbac = compute_reduction(restrictable_rbac, total)?;
    let reduction_kf = compute_reduction(restrictable_kf, total)?;
    Ok(SurfaceReport {
        workload: workload.to_string(),
        total,
        restrictable_rbac,
        restrictable_kf,
        reduction_rbac,
        reduction_kf,
        improvement: Percent(reduction_kf.0.saturating_sub(reduction_rbac.0)),
        value_locked: opts.count_value_locks.then_some(value_locked),
    })
}

/// Text table over one or more reports (per-workload rows with counts and
/// both reduction percentages).
pub fn render_table(reports: &[SurfaceReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>20} {:>20} {:>10} {:>11} {:>10}\n",
        "Workload", "RBAC fields", "KubeFence fields", "RBAC", "KubeFence", "Gain(pp)"
    ));
    for r in reports {
        out.push_str(&format!(
            "{:<12} {:>13} / {:<4} {:>13} / {:<4} {:>10} {:>11} {:>10}\n",
            r.workload,
            r.restrictable_rbac,
            r.total,
            r.restrictable_kf,
            r.total,
            r.reduction_rbac.to_string(),
            r.reduction_kf.to_string(),
            format!("{:.2}", r.improvement.as_f64()),
        ));
    }
    out
}
