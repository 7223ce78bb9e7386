//! Malicious-specification catalog and injection harness.
//!
//! Fifteen entries (E1–E8 CVE-backed exploits, M1–M7 misconfigurations),
//! each naming the API fields it abuses. Entries are injected into
//! legitimate fixture manifests and evaluated against both the validator
//! and a kind-level RBAC baseline.

use crate::doc::path::{FieldPath, Segment};
use crate::doc::{DocMapping, DocNode, DocValue};
use crate::policy::Validator;
use crate::rbac::RbacPolicy;
use crate::schema::DenyReason;
use crate::validate::{validate_object, Verdict};
use serde::Serialize;
use thiserror::Error;

/// How an entry mutates a manifest.
#[derive(Debug, Clone, PartialEq)]
pub enum Mutation {
    /// Write a value at an alias-expanded path (intermediate mappings are
    /// created; wildcard steps fan out over existing elements).
    Set { path: String, value: DocNode },
    /// Delete the field at an alias-expanded path wherever it exists.
    Remove { path: String },
}

/// One catalog row.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub description: &'static str,
    /// Targeted API fields exactly as the catalog names them (pre-alias).
    pub target_paths: Vec<&'static str>,
    pub mutations: Vec<Mutation>,
    pub applicable_kinds: Vec<&'static str>,
}

impl CatalogEntry {
    pub fn is_cve(&self) -> bool {
        self.id.starts_with('E')
    }
}

const WORKLOAD_KINDS: [&str; 6] = [
    "Deployment",
    "StatefulSet",
    "DaemonSet",
    "ReplicaSet",
    "Job",
    "Pod",
];

/// The shipped catalog of 15 malicious specifications.
pub fn builtin_catalog() -> Vec<CatalogEntry> {
    let workloads: Vec<&'static str> = WORKLOAD_KINDS.to_vec();
    let set = |path: &str, value: DocNode| Mutation::Set {
        path: path.to_string(),
        value,
    };
    vec![
        CatalogEntry {
            id: "E1",
            description: "Activation of hostNetwork (CVE-2020-15257)",
            target_paths: vec!["hostNetwork"],
            mutations: vec![set("hostNetwork", DocNode::bool(true))],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "E2",
            description: "Abusing LoadBalancer or ExternalIPs (CVE-2020-8554)",
            target_paths: vec!["externalIPs"],
            mutations: vec![set(
                "externalIPs",
                DocNode::sequence(vec![DocNode::str("203.0.113.7")]),
            )],
            applicable_kinds: vec!["Service"],
        },
        CatalogEntry {
            id: "E3",
            description: "Command injection via volume and volumeMounts (CVE-2023-3676)",
            target_paths: vec![
                "containers.volumeMounts.subPath",
                "containers.volumes.subPath",
            ],
            mutations: vec![
                set("containers.volumeMounts.subPath", DocNode::str("symlink-door")),
                set("containers.volumes.subPath", DocNode::str("symlink-door")),
            ],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "E4",
            description: "Mount subPath on a file or emptyDir (CVE-2017-1002101)",
            target_paths: vec!["containers.volumeMounts.subPath"],
            mutations: vec![set(
                "containers.volumeMounts.subPath",
                DocNode::str("symlink-door"),
            )],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "E5",
            description: "Absent Resource Limit (CVE-2019-11253)",
            target_paths: vec!["containers.resources.limits"],
            mutations: vec![Mutation::Remove {
                path: "containers.resources.limits".to_string(),
            }],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "E6",
            description: "Symlink exchange allows host filesystem access (CVE-2021-25741)",
            target_paths: vec!["container.command"],
            mutations: vec![set(
                "container.command",
                DocNode::sequence(vec![
                    DocNode::str("ln"),
                    DocNode::str("-s"),
                    DocNode::str("/"),
                    DocNode::str("/mnt/x"),
                ]),
            )],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "E7",
            description: "Bypass of Seccomp Profile (CVE-2023-2431)",
            target_paths: vec!["containers.securityContext.seccompProfile.localhostProfile"],
            mutations: vec![
                set(
                    "containers.securityContext.seccompProfile.type",
                    DocNode::str("Localhost"),
                ),
                set(
                    "containers.securityContext.seccompProfile.localhostProfile",
                    DocNode::str("../../relative/escape"),
                ),
            ],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "E8",
            description: "Privileged Containers (CVE-2021-21334)",
            target_paths: vec!["containers.securityContext.privileged"],
            mutations: vec![set(
                "containers.securityContext.privileged",
                DocNode::bool(true),
            )],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "M1",
            description: "Activation of hostIPC",
            target_paths: vec!["hostIPC"],
            mutations: vec![set("hostIPC", DocNode::bool(true))],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "M2",
            description: "Activation of hostPID",
            target_paths: vec!["hostPID"],
            mutations: vec![set("hostPID", DocNode::bool(true))],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "M3",
            description: "Use Readonly Filesystem",
            target_paths: vec!["containers.securityContext.readOnlyRootFilesystem"],
            mutations: vec![set(
                "containers.securityContext.readOnlyRootFilesystem",
                DocNode::bool(false),
            )],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "M4",
            description: "Running Containers as Root",
            target_paths: vec![
                "containers.securityContext.runAsNonRoot",
                "containers.securityContext.runAsRootAllowed",
            ],
            mutations: vec![set(
                "containers.securityContext.runAsNonRoot",
                DocNode::bool(false),
            )],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "M5",
            description: "Allow Dangerous Capabilities to Containers",
            target_paths: vec!["containers.securityContext.capabilities.add"],
            mutations: vec![set(
                "containers.securityContext.capabilities.add",
                DocNode::sequence(vec![DocNode::str("SYS_ADMIN")]),
            )],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "M6",
            description: "Escalated Privileges for Child Container Processes",
            target_paths: vec!["containers.securityContext.allowPrivilegeEscalation"],
            mutations: vec![set(
                "containers.securityContext.allowPrivilegeEscalation",
                DocNode::bool(true),
            )],
            applicable_kinds: workloads.clone(),
        },
        CatalogEntry {
            id: "M7",
            description: "Custom SELinux user or role",
            target_paths: vec![
                "containers.securityContext.seLinuxOptions.user",
                "containers.securityContext.seLinuxOptions.role",
            ],
            mutations: vec![
                set(
                    "containers.securityContext.seLinuxOptions.user",
                    DocNode::str("system_u"),
                ),
                set(
                    "containers.securityContext.seLinuxOptions.role",
                    DocNode::str("system_r"),
                ),
            ],
            applicable_kinds: workloads,
        },
    ]
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("entry {entry} does not apply to kind `{kind}`")]
    InapplicableKind { entry: String, kind: String },
    #[error("workload `{workload}` has no fixture manifest for entry {entry}")]
    MissingFixture { workload: String, entry: String },
    #[error("manifest has no scalar `kind`")]
    MissingKind,
    #[error("catalog path `{0}` has no alias expansion for kind `{1}`")]
    NoAlias(String, String),
}

/// Pod-spec location per kind; the catalog's `containers.*` paths expand
/// under it.
fn pod_scope(kind: &str) -> Option<&'static str> {
    match kind {
        "Pod" => Some("spec"),
        "Deployment" | "StatefulSet" | "DaemonSet" | "ReplicaSet" | "Job" => {
            Some("spec.template.spec")
        }
        "CronJob" => Some("spec.jobTemplate.spec.template.spec"),
        _ => None,
    }
}

/// Expands a catalog path (pre-alias, as printed in the catalog) into the
/// full canonical path for a target kind. The catalog abbreviates paths:
/// `containers.*` nests under the kind's pod spec, `containers.volumes.*`
/// actually lives at pod level, and bare host flags (`hostNetwork`) are
/// pod-spec fields.
pub fn expand_alias(path: &str, kind: &str) -> Result<FieldPath, AttackError> {
    let no_alias = || AttackError::NoAlias(path.to_string(), kind.to_string());
    if path == "externalIPs" {
        if kind != "Service" {
            return Err(no_alias());
        }
        return Ok(FieldPath::keys(&["spec", "externalIPs"]));
    }
    let pod = pod_scope(kind).ok_or_else(no_alias)?;
    let mut full = FieldPath::parse(pod).expect("static path");
    if matches!(path, "hostNetwork" | "hostIPC" | "hostPID") {
        return Ok(full.child(path));
    }
    let rest = path
        .strip_prefix("containers.")
        .or_else(|| path.strip_prefix("container."))
        .ok_or_else(no_alias)?;
    if let Some(vol_rest) = rest.strip_prefix("volumes.") {
        full = full.child("volumes").element();
        for seg in vol_rest.split('.') {
            full = full.child(seg);
        }
        return Ok(full);
    }
    full = full.child("containers").element();
    if let Some(vm_rest) = rest.strip_prefix("volumeMounts.") {
        full = full.child("volumeMounts").element();
        for seg in vm_rest.split('.') {
            full = full.child(seg);
        }
        return Ok(full);
    }
    for seg in rest.split('.') {
        full = full.child(seg);
    }
    Ok(full)
}

/// Injects one catalog entry into a legitimate manifest.
///
/// Set-mutations write the malicious value at every location matching the
/// alias-expanded path, creating intermediate mappings (and one-element
/// sequences for absent wildcard steps). Remove-mutations delete the field
/// wherever it exists. Nothing else is touched.
pub fn inject(manifest: &DocNode, entry: &CatalogEntry) -> Result<DocNode, AttackError> {
    let kind = manifest
        .get_path(&["kind"])
        .and_then(DocNode::as_str)
        .ok_or(AttackError::MissingKind)?
        .to_string();
    if !entry.applicable_kinds.contains(&kind.as_str()) {
        return Err(AttackError::InapplicableKind {
            entry: entry.id.to_string(),
            kind,
        });
    }
    let mut out = manifest.clone();
    for mutation in &entry.mutations {
        match mutation {
            Mutation::Set { path, value } => {
                let full = expand_alias(path, &kind)?;
                set_at(&mut out, full.segments(), value);
            }
            Mutation::Remove { path } => {
                let full = expand_alias(path, &kind)?;
                remove_at(&mut out, full.segments());
            }
        }
    }
    Ok(out)
}

fn set_at(node: &mut DocNode, segments: &[Segment], value: &DocNode) {
    let Some((head, rest)) = segments.split_first() else {
        *node = value.clone();
        return;
    };
    match head {
        Segment::Key(key) => {
            if node.as_mapping().is_none() {
                node.value = DocValue::Mapping(DocMapping::new());
                node.pos = None;
            }
            let m = node.as_mapping_mut().expect("just ensured");
            if !m.contains_key(key) {
                m.insert(key.clone(), DocNode::mapping(DocMapping::new()));
            }
            set_at(m.get_mut(key).expect("just inserted"), rest, value);
        }
        Segment::AnyIndex => {
            let items = match &mut node.value {
                DocValue::Sequence(items) => items,
                _ => {
                    node.value =
                        DocValue::Sequence(vec![DocNode::mapping(DocMapping::new())]);
                    node.pos = None;
                    match &mut node.value {
                        DocValue::Sequence(items) => items,
                        _ => unreachable!(),
                    }
                }
            };
            if items.is_empty() {
                items.push(DocNode::mapping(DocMapping::new()));
            }
            for item in items {
                set_at(item, rest, value);
            }
        }
    }
}

fn remove_at(node: &mut DocNode, segments: &[Segment]) {
    let Some((head, rest)) = segments.split_first() else {
        return;
    };
    match head {
        Segment::Key(key) => {
            let Some(m) = node.as_mapping_mut() else {
                return;
            };
            if rest.is_empty() {
                m.remove(key);
            } else if let Some(child) = m.get_mut(key) {
                remove_at(child, rest);
            }
        }
        Segment::AnyIndex => {
            if let DocValue::Sequence(items) = &mut node.value {
                for item in items {
                    remove_at(item, rest);
                }
            }
        }
    }
}

/// One workload under test.
pub struct WorkloadFixture<'a> {
    pub name: String,
    pub validator: &'a Validator,
    pub manifests: Vec<DocNode>,
    pub rbac: &'a RbacPolicy,
}

/// Result of one (workload, entry) cell.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixCell {
    pub entry: String,
    pub kind: String,
    pub blocked_rbac: bool,
    pub blocked_kf: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kf_reason: Option<DenyReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kf_path: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WorkloadResult {
    pub workload: String,
    pub cells: Vec<MatrixCell>,
    pub cves_blocked_rbac: usize,
    pub cves_blocked_kf: usize,
    pub misconfigs_blocked_rbac: usize,
    pub misconfigs_blocked_kf: usize,
}

/// The full evaluation matrix.
#[derive(Debug, Clone, Serialize, Default)]
pub struct AttackMatrix {
    pub workloads: Vec<WorkloadResult>,
}

/// Highest-level kinds first: injections prefer Deployment over Pod.
fn fixture_for<'a>(
    manifests: &'a [DocNode],
    entry: &CatalogEntry,
) -> Option<(&'a DocNode, String)> {
    let preference = [
        "Deployment",
        "StatefulSet",
        "DaemonSet",
        "ReplicaSet",
        "Job",
        "CronJob",
        "Pod",
        "Service",
    ];
    let mut best: Option<(&DocNode, usize, String)> = None;
    for doc in manifests {
        let Some(kind) = doc.get_path(&["kind"]).and_then(DocNode::as_str) else {
            continue;
        };
        if !entry.applicable_kinds.contains(&kind) {
            continue;
        }
        let rank = preference
            .iter()
            .position(|k| *k == kind)
            .unwrap_or(preference.len());
        if best.as_ref().map(|(_, r, _)| rank < *r).unwrap_or(true) {
            best = Some((doc, rank, kind.to_string()));
        }
    }
    best.map(|(doc, _, kind)| (doc, kind))
}

/// Injects every applicable catalog entry into every workload and records
/// whether the validator and the RBAC baseline block it. The baseline
/// denies only when the kind or verb is outside its allow list.
pub fn run_catalog(
    catalog: &[CatalogEntry],
    workloads: &[WorkloadFixture],
) -> Result<AttackMatrix, AttackError> {
    let mut matrix = AttackMatrix::default();
    for workload in workloads {
        let mut result = WorkloadResult {
            workload: workload.name.clone(),
            cells: Vec::new(),
            cves_blocked_rbac: 0,
            cves_blocked_kf: 0,
            misconfigs_blocked_rbac: 0,
            misconfigs_blocked_kf: 0,
        };
        for entry in catalog {
            let (manifest, kind) =
                fixture_for(&workload.manifests, entry).ok_or_else(|| {
                    AttackError::MissingFixture {
                        workload: workload.name.clone(),
                        entry: entry.id.to_string(),
                    }
                })?;
            let malicious = inject(manifest, entry)?;
            let blocked_rbac = !workload.rbac.allows(&kind, "create");
            let verdict = validate_object(&malicious, workload.validator);
            let (blocked_kf, kf_reason, kf_path) = match verdict {
                Verdict::Allow => (false, None, None),
                Verdict::Deny { path, reason, .. } => (true, Some(reason), Some(path)),
            };
            if entry.is_cve() {
                result.cves_blocked_rbac += blocked_rbac as usize;
                result.cves_blocked_kf += blocked_kf as usize;
            } else {
                result.misconfigs_blocked_rbac += blocked_rbac as usize;
                result.misconfigs_blocked_kf += blocked_kf as usize;
            }
            result.cells.push(MatrixCell {
                entry: entry.id.to_string(),
                kind,
                blocked_rbac,
                blocked_kf,
                kf_reason,
                kf_path,
            });
        }
        matrix.workloads.push(result);
    }
    Ok(matrix)
}

/// Text table in the mitigation-matrix shape: per workload, blocked CVE and
/// misconfiguration counts for both mechanisms.
pub fn render_matrix(matrix: &AttackMatrix) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>10} {:>14} {:>14} {:>18}\n",
        "Workload", "CVEs RBAC", "CVEs KubeFence", "Misconf RBAC", "Misconf KubeFence"
    ));
    for w in &matrix.workloads {
        out.push_str(&format!(
            "{:<12} {:>10} {:>14} {:>14} {:>18}\n",
            w.workload,
            w.cves_blocked_rbac,
            w.cves_blocked_kf,
            w.misconfigs_blocked_rbac,
            w.misconfigs_blocked_kf
        ));
    }
    out
}

/// The catalog as a YAML document (for the `catalog` subcommand).
pub fn catalog_to_yaml(catalog: &[CatalogEntry]) -> String {
    let mut root = DocMapping::new();
    let mut entries = Vec::new();
    for entry in catalog {
        let mut m = DocMapping::new();
        m.insert("id", DocNode::str(entry.id));
        m.insert("description", DocNode::str(entry.description));
        m.insert(
            "target_paths",
            DocNode::sequence(entry.target_paths.iter().map(|p| DocNode::str(*p)).collect()),
        );
        let mutations = entry
            .mutations
            .iter()
            .map(|mu| {
                let mut mm = DocMapping::new();
                match mu {
                    Mutation::Set { path, value } => {
                        mm.insert("op", DocNode::str("set"));
                        mm.insert("path", DocNode::str(path.clone()));
                        mm.insert("value", value.clone());
                    }
                    Mutation::Remove { path } => {
                        mm.insert("op", DocNode::str("remove"));
                        mm.insert("path", DocNode::str(path.clone()));
                    }
                }
                DocNode::mapping(mm)
            })
            .collect();
        m.insert("mutations", DocNode::sequence(mutations));
        m.insert(
            "applicable_kinds",
            DocNode::sequence(
                entry
                    .applicable_kinds
                    .iter()
                    .map(|k| DocNode::str(*k))
                    .collect(),
            ),
        );
        entries.push(DocNode::mapping(m));
    }
    root.insert("catalog", DocNode::sequence(entries));
    crate::doc::to_yaml(&DocNode::mapping(root))
}
