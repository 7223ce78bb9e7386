//! Policy generation: values-schema generalization, variant exploration,
//! manifest rendering, and validator consolidation.

use crate::chart::{Chart, LockValueSpec, RenderedFile};
use crate::doc::path::{FieldPath, PathPattern, Segment};
use crate::doc::{DocMapping, DocNode, DocValue, Scalar};
use crate::schema::{
    infer_placeholder, LockMode, LockValue, MappingEntry, Placeholder, SchemaNode,
};
use crate::template::{self, ManifestError, TemplateError};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("lock rule conflicts with an enum annotation at `{0}`")]
    LockConflict(FieldPath),
    #[error("lock rule pins `{path}` to the chart default, which is not a scalar")]
    LockDefaultNotScalar { path: FieldPath },
    #[error("conflicting shapes while merging manifests at `{0}`")]
    ShapeConflict(FieldPath),
    #[error("manifest without a scalar `kind`")]
    MissingKind,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

/// A values document generalized into placeholders, locked constants and
/// enum option lists.
#[derive(Debug, Clone, PartialEq)]
pub enum ValuesSchemaNode {
    Placeholder(Placeholder),
    Locked { value: LockValue, mode: LockMode },
    Enum(Vec<Scalar>),
    Mapping(Vec<(String, ValuesSchemaNode)>),
}

/// The phase-1 artifact: the generalized values tree plus the lock table
/// resolved against this chart (pin-to-default rules carry their resolved
/// constants here).
#[derive(Debug, Clone, PartialEq)]
pub struct ValuesSchema {
    pub root: ValuesSchemaNode,
    pub resolved_locks: Vec<ResolvedLock>,
}

/// A lock rule with any pin-to-default value resolved to a concrete scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedLock {
    pub target: PathPattern,
    pub value: LockValue,
    pub mode: LockMode,
}

/// One fully-renderable assignment of enum options (1-based index).
#[derive(Debug, Clone, PartialEq)]
pub struct ValuesVariant {
    pub index: usize,
    pub values: DocNode,
}

/// A manifest rendered from one variant of one template file.
#[derive(Debug, Clone)]
pub struct RenderedManifest {
    pub variant: usize,
    pub file: String,
    pub doc: DocNode,
}

/// Knobs for validator consolidation.
#[derive(Debug, Clone, Copy)]
pub struct MergeOptions {
    /// When set, a constant beats a placeholder at the same path (maximum
    /// restriction); default is the generalizing direction.
    pub strict: bool,
    /// Group manifests by `kind/apiVersion` instead of `kind` alone.
    pub group_by_api_version: bool,
}

impl Default for MergeOptions {
    fn default() -> Self {
        MergeOptions {
            strict: false,
            group_by_api_version: false,
        }
    }
}

/// Provenance carried inside a validator file.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatorMeta {
    pub chart: String,
    pub generated: String,
    pub locks_digest: String,
}

/// The enforced security policy: one schema tree per resource kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Validator {
    pub kinds: Vec<(String, SchemaNode)>,
    pub meta: ValidatorMeta,
}

impl Validator {
    pub fn kind(&self, kind: &str) -> Option<&SchemaNode> {
        self.kinds.iter().find(|(k, _)| k == kind).map(|(_, s)| s)
    }

    pub fn kind_names(&self) -> impl Iterator<Item = &str> {
        self.kinds.iter().map(|(k, _)| k.as_str())
    }
}

/// Phase 1: generalize the chart's default values into a values schema.
///
/// Placeholders replace plain scalars and sequences, enum annotations
/// become option lists, lock rules pin their targets (inserting
/// require-and-pin targets that are absent).
pub fn generate_values_schema(chart: &Chart) -> Result<ValuesSchema, PolicyError> {
    let resolved_locks = resolve_locks(chart)?;
    let annotations: Vec<(&FieldPath, &Vec<Scalar>)> = chart
        .annotations
        .iter()
        .map(|a| (&a.target, &a.options))
        .collect();
    let root = gen_node(
        &chart.values,
        &FieldPath::root(),
        &annotations,
        &resolved_locks,
        chart,
    )?;
    Ok(ValuesSchema {
        root,
        resolved_locks,
    })
}

/// Resolves pin-to-default rules against the values document. Rules whose
/// anchored target is absent from values are kept unresolved-as-skippable
/// only if they never fire; a matching target that is not scalar is an
/// error.
fn resolve_locks(chart: &Chart) -> Result<Vec<ResolvedLock>, PolicyError> {
    let mut out = Vec::new();
    for rule in &chart.locks {
        let value = match &rule.value {
            LockValueSpec::Scalar(s) => LockValue::Scalar(s.clone()),
            LockValueSpec::Placeholder(p) => LockValue::Placeholder(*p),
            LockValueSpec::ChartDefault => {
                match find_first_match(&chart.values, &rule.target) {
                    None => continue, // nothing to pin in this chart
                    Some((path, node)) => match node.as_scalar() {
                        Some(s) => LockValue::Scalar(s.clone()),
                        None => return Err(PolicyError::LockDefaultNotScalar { path }),
                    },
                }
            }
        };
        out.push(ResolvedLock {
            target: rule.target.clone(),
            value,
            mode: rule.mode,
        });
    }
    Ok(out)
}

fn find_first_match<'a>(
    values: &'a DocNode,
    pattern: &PathPattern,
) -> Option<(FieldPath, &'a DocNode)> {
    fn walk<'a>(
        node: &'a DocNode,
        path: &FieldPath,
        pattern: &PathPattern,
    ) -> Option<(FieldPath, &'a DocNode)> {
        if pattern.matches(path) {
            return Some((path.clone(), node));
        }
        if let Some(m) = node.as_mapping() {
            for (k, v) in m.iter() {
                if let Some(hit) = walk(v, &path.child(k), pattern) {
                    return Some(hit);
                }
            }
        }
        None
    }
    walk(values, &FieldPath::root(), pattern)
}

fn gen_node(
    node: &DocNode,
    path: &FieldPath,
    annotations: &[(&FieldPath, &Vec<Scalar>)],
    locks: &[ResolvedLock],
    chart: &Chart,
) -> Result<ValuesSchemaNode, PolicyError> {
    let lock = locks.iter().find(|r| r.target.matches(path));
    let annotation = annotations.iter().find(|(t, _)| *t == path);
    if let Some(rule) = lock {
        if annotation.is_some() {
            return Err(PolicyError::LockConflict(path.clone()));
        }
        return Ok(ValuesSchemaNode::Locked {
            value: rule.value.clone(),
            mode: rule.mode,
        });
    }
    if let Some((_, options)) = annotation {
        return Ok(ValuesSchemaNode::Enum((*options).clone()));
    }
    match &node.value {
        DocValue::Scalar(_) => Ok(ValuesSchemaNode::Placeholder(infer_placeholder(node))),
        DocValue::Sequence(_) => Ok(ValuesSchemaNode::Placeholder(Placeholder::List)),
        DocValue::Mapping(m) => {
            let mut entries = Vec::with_capacity(m.len());
            for (k, v) in m.iter() {
                entries.push((
                    k.to_string(),
                    gen_node(v, &path.child(k), annotations, locks, chart)?,
                ));
            }
            // Any missing critical field is explicitly added.
            for rule in locks {
                if rule.mode != LockMode::RequireAndPin {
                    continue;
                }
                let (Some(parent), Some(key)) = (rule.target.parent(), rule.target.last_key())
                else {
                    continue;
                };
                if parent.matches(path) && !entries.iter().any(|(k, _)| k == key) {
                    entries.push((
                        key.to_string(),
                        ValuesSchemaNode::Locked {
                            value: rule.value.clone(),
                            mode: rule.mode,
                        },
                    ));
                }
            }
            Ok(ValuesSchemaNode::Mapping(entries))
        }
    }
}

/// Phase 2: enumerate values variants.
///
/// With L the longest enum option list, variant i (1-based, i = 1..=L)
/// assigns each enum field its i-th option, reusing the last option when
/// the list is shorter. Every option of every enum appears in at least one
/// variant; a schema without enums yields exactly one variant.
pub fn explore_variants(schema: &ValuesSchema) -> Vec<ValuesVariant> {
    let longest = max_enum_len(&schema.root).max(1);
    (1..=longest)
        .map(|i| ValuesVariant {
            index: i,
            values: variant_node(&schema.root, i),
        })
        .collect()
}

fn max_enum_len(node: &ValuesSchemaNode) -> usize {
    match node {
        ValuesSchemaNode::Enum(options) => options.len(),
        ValuesSchemaNode::Mapping(entries) => entries
            .iter()
            .map(|(_, v)| max_enum_len(v))
            .max()
            .unwrap_or(0),
        _ => 0,
    }
}

fn variant_node(node: &ValuesSchemaNode, index: usize) -> DocNode {
    match node {
        ValuesSchemaNode::Placeholder(p) => template::placeholder_marker(*p),
        ValuesSchemaNode::Locked { value, .. } => match value {
            LockValue::Scalar(s) => DocNode::scalar(s.clone()),
            LockValue::Placeholder(p) => template::placeholder_marker(*p),
        },
        ValuesSchemaNode::Enum(options) => {
            let pick = options[index.min(options.len()) - 1].clone();
            DocNode::scalar(pick)
        }
        ValuesSchemaNode::Mapping(entries) => {
            let mut m = DocMapping::new();
            for (k, v) in entries {
                m.insert(k.clone(), variant_node(v, index));
            }
            DocNode::mapping(m)
        }
    }
}

/// Phase 3: render every variant and split the outputs into manifests.
pub fn render_variants(
    chart: &Chart,
    variants: &[ValuesVariant],
) -> Result<Vec<RenderedManifest>, PolicyError> {
    let mut out = Vec::new();
    for variant in variants {
        let ctx = chart.render_context(variant.values.clone());
        let files: Vec<RenderedFile> = chart.render(&ctx)?;
        for file in files {
            for doc in template::split_manifests(&file.text)? {
                out.push(RenderedManifest {
                    variant: variant.index,
                    file: file.path.clone(),
                    doc,
                });
            }
        }
    }
    Ok(out)
}

/// Phase 4: consolidate manifests into a per-kind validator.
pub fn build_validator(
    chart_name: &str,
    manifests: &[DocNode],
    locks: &[ResolvedLock],
    opts: MergeOptions,
) -> Result<Validator, PolicyError> {
    let mut groups: Vec<(String, Vec<&DocNode>)> = Vec::new();
    for doc in manifests {
        let kind = doc
            .get_path(&["kind"])
            .and_then(DocNode::as_str)
            .ok_or(PolicyError::MissingKind)?;
        let key = if opts.group_by_api_version {
            let api = doc
                .get_path(&["apiVersion"])
                .and_then(DocNode::as_str)
                .unwrap_or("");
            format!("{kind}/{api}")
        } else {
            kind.to_string()
        };
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, docs)) => docs.push(doc),
            None => groups.push((key, vec![doc])),
        }
    }
    groups.sort_by(|(a, _), (b, _)| a.cmp(b));

    let mut kinds = Vec::new();
    for (kind, docs) in groups {
        let mut merged: Option<SchemaNode> = None;
        for doc in docs {
            let tree = generalize(doc);
            merged = Some(match merged {
                None => tree,
                Some(prev) => schema_merge(prev, tree, &FieldPath::root(), opts.strict)?,
            });
        }
        let mut tree = merged.expect("group is non-empty");
        widen_free_text(&mut tree, &FieldPath::root());
        apply_locks(&mut tree, &FieldPath::root(), locks);
        add_server_fields(&mut tree);
        kinds.push((kind, tree));
    }

    Ok(Validator {
        kinds,
        meta: ValidatorMeta {
            chart: chart_name.to_string(),
            generated: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            locks_digest: locks_digest(locks),
        },
    })
}

/// Runs the whole four-phase pipeline over a loaded chart.
pub struct GenerateOutcome {
    pub schema: ValuesSchema,
    pub variants: Vec<ValuesVariant>,
    pub manifests: Vec<RenderedManifest>,
    pub validator: Validator,
}

pub fn generate(chart: &Chart, opts: MergeOptions) -> Result<GenerateOutcome, PolicyError> {
    let schema = generate_values_schema(chart)?;
    let variants = explore_variants(&schema);
    let manifests = render_variants(chart, &variants)?;
    let docs: Vec<DocNode> = manifests.iter().map(|m| m.doc.clone()).collect();
    let validator = build_validator(&chart.name, &docs, &schema.resolved_locks, opts)?;
    Ok(GenerateOutcome {
        schema,
        variants,
        manifests,
        validator,
    })
}

/// Lifts a concrete manifest into a schema tree, retaining placeholder
/// tokens that flowed through rendering.
pub fn generalize(doc: &DocNode) -> SchemaNode {
    if let Some(p) = template::marker_placeholder(doc) {
        return SchemaNode::Placeholder(p);
    }
    match &doc.value {
        DocValue::Scalar(s) => SchemaNode::Constant(s.clone()),
        DocValue::Sequence(items) => {
            if items.is_empty() {
                return SchemaNode::Placeholder(Placeholder::List);
            }
            let mut merged: Option<SchemaNode> = None;
            for item in items {
                let tree = generalize(item);
                merged = Some(match merged {
                    None => tree,
                    // Within one manifest, conflicting element shapes are
                    // already a modelling error; surface them as widening
                    // to the later merge via best effort.
                    Some(prev) => match schema_merge(prev, tree, &FieldPath::root(), false) {
                        Ok(m) => m,
                        Err(_) => SchemaNode::Placeholder(Placeholder::List),
                    },
                });
            }
            match merged {
                Some(SchemaNode::Placeholder(Placeholder::List)) => {
                    SchemaNode::Placeholder(Placeholder::List)
                }
                Some(elem) => SchemaNode::Sequence(Box::new(elem)),
                None => SchemaNode::Placeholder(Placeholder::List),
            }
        }
        DocValue::Mapping(m) => SchemaNode::Mapping(
            m.iter()
                .map(|(k, v)| {
                    (
                        k.to_string(),
                        MappingEntry {
                            schema: generalize(v),
                            optional: false,
                        },
                    )
                })
                .collect(),
        ),
    }
}

/// Merges two schema trees per the consolidation rules: identical constants
/// stay, differing constants become enums, placeholders win over constants
/// (unless strict), keys present on one side only become optional, and
/// sequences merge element-wise.
pub fn schema_merge(
    a: SchemaNode,
    b: SchemaNode,
    path: &FieldPath,
    strict: bool,
) -> Result<SchemaNode, PolicyError> {
    use SchemaNode::*;
    // A null leaf is a conditional block that rendered empty in this
    // variant; it merges with structures as "no entries".
    let is_null =
        |n: &SchemaNode| matches!(n, Constant(s) if s.kind() == crate::doc::ScalarKind::Null);
    Ok(match (a, b) {
        (n, other @ (Mapping(_) | Sequence(_))) | (other @ (Mapping(_) | Sequence(_)), n)
            if is_null(&n) =>
        {
            match other {
                Mapping(entries) => Mapping(
                    entries
                        .into_iter()
                        .map(|(k, e)| (k, MappingEntry { optional: true, ..e }))
                        .collect(),
                ),
                seq => seq,
            }
        }
        (Constant(x), Constant(y)) => {
            if x == y {
                Constant(x)
            } else {
                Enum(vec![x, y])
            }
        }
        (Enum(mut xs), Constant(y)) | (Constant(y), Enum(mut xs)) => {
            if !xs.contains(&y) {
                xs.push(y);
            }
            Enum(xs)
        }
        (Enum(mut xs), Enum(ys)) => {
            for y in ys {
                if !xs.contains(&y) {
                    xs.push(y);
                }
            }
            Enum(xs)
        }
        (Placeholder(p), Placeholder(q)) => {
            if p == q {
                Placeholder(p)
            } else if scalar_placeholder(p) && scalar_placeholder(q) {
                Placeholder(crate::schema::Placeholder::Str)
            } else {
                return Err(PolicyError::ShapeConflict(path.clone()));
            }
        }
        (Placeholder(p), other @ (Constant(_) | Enum(_)))
        | (other @ (Constant(_) | Enum(_)), Placeholder(p)) => {
            if !scalar_placeholder(p) {
                return Err(PolicyError::ShapeConflict(path.clone()));
            }
            if strict {
                other
            } else {
                Placeholder(widest(p))
            }
        }
        (Placeholder(crate::schema::Placeholder::Dict), other @ Mapping(_))
        | (other @ Mapping(_), Placeholder(crate::schema::Placeholder::Dict)) => {
            if strict {
                other
            } else {
                Placeholder(crate::schema::Placeholder::Dict)
            }
        }
        (Placeholder(crate::schema::Placeholder::List), other @ Sequence(_))
        | (other @ Sequence(_), Placeholder(crate::schema::Placeholder::List)) => {
            if strict {
                other
            } else {
                Placeholder(crate::schema::Placeholder::List)
            }
        }
        (Mapping(xs), Mapping(ys)) => {
            let mut merged: Vec<(String, MappingEntry)> = Vec::new();
            let mut ys: Vec<(String, Option<MappingEntry>)> =
                ys.into_iter().map(|(k, e)| (k, Some(e))).collect();
            for (key, x) in xs {
                match ys.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, slot)) => {
                        let y = slot.take().expect("taken once");
                        let schema =
                            schema_merge(x.schema, y.schema, &path.child(&key), strict)?;
                        merged.push((
                            key,
                            MappingEntry {
                                schema,
                                optional: x.optional || y.optional,
                            },
                        ));
                    }
                    None => {
                        merged.push((
                            key,
                            MappingEntry {
                                optional: true,
                                ..x
                            },
                        ));
                    }
                }
            }
            for (key, slot) in ys {
                if let Some(y) = slot {
                    merged.push((
                        key,
                        MappingEntry {
                            optional: true,
                            ..y
                        },
                    ));
                }
            }
            Mapping(merged)
        }
        (Sequence(x), Sequence(y)) => {
            Sequence(Box::new(schema_merge(*x, *y, &path.element(), strict)?))
        }
        (Locked { value, mode }, _) | (_, Locked { value, mode }) => {
            // Locks are applied after merging; carry them over unchanged.
            Locked { value, mode }
        }
        _ => return Err(PolicyError::ShapeConflict(path.clone())),
    })
}

fn scalar_placeholder(p: Placeholder) -> bool {
    matches!(
        p,
        Placeholder::Bool | Placeholder::Int | Placeholder::Str | Placeholder::Ip
    )
}

/// Widening for scalar placeholders that disagree with constants: IP stays
/// IP only against IP-shaped constants, which the caller cannot know here,
/// so every disagreement widens to `string` except exact-type keepers.
fn widest(p: Placeholder) -> Placeholder {
    match p {
        Placeholder::Bool | Placeholder::Int | Placeholder::Ip => p,
        _ => Placeholder::Str,
    }
}

/// Fields whose rendered values are release- or instance-derived free text:
/// they widen to placeholders even when every variant rendered the same
/// constant (names change per installation).
fn widen_free_text(node: &mut SchemaNode, path: &FieldPath) {
    let widen_to = free_text_widening(path);
    if let Some(p) = widen_to {
        let is_scalarish = matches!(node, SchemaNode::Constant(_) | SchemaNode::Enum(_));
        let is_structural_dict =
            p == Placeholder::Dict && matches!(node, SchemaNode::Mapping(_));
        if is_scalarish || is_structural_dict {
            *node = SchemaNode::Placeholder(p);
            return;
        }
    }
    match node {
        SchemaNode::Mapping(entries) => {
            for (k, e) in entries.iter_mut() {
                widen_free_text(&mut e.schema, &path.child(k));
            }
        }
        SchemaNode::Sequence(elem) => widen_free_text(elem, &path.element()),
        _ => {}
    }
}

fn free_text_widening(path: &FieldPath) -> Option<Placeholder> {
    let segs = path.segments();
    let key_tail = |keys: &[&str]| -> bool {
        segs.len() >= keys.len()
            && segs[segs.len() - keys.len()..]
                .iter()
                .zip(keys.iter())
                .all(|(s, k)| matches!(s, Segment::Key(key) if key == k))
    };
    if segs == [Segment::key("metadata"), Segment::key("name")] {
        return Some(Placeholder::Str);
    }
    if segs == [Segment::key("metadata"), Segment::key("labels")] {
        return Some(Placeholder::Dict);
    }
    // Container identity fields inside any workload kind.
    let container_field = |field: &str| -> bool {
        segs.len() >= 3
            && matches!(&segs[segs.len() - 3], Segment::Key(k) if k == "containers" || k == "initContainers")
            && segs[segs.len() - 2] == Segment::AnyIndex
            && matches!(&segs[segs.len() - 1], Segment::Key(k) if k == field)
    };
    if container_field("name") || container_field("image") {
        return Some(Placeholder::Str);
    }
    if key_tail(&["selector", "matchLabels"]) || key_tail(&["template", "metadata", "labels"]) {
        return Some(Placeholder::Dict);
    }
    None
}

/// Applies the lock table to a consolidated kind tree: matching paths are
/// forced to locked constants, and absent require-and-pin targets are
/// inserted into matching parent mappings.
fn apply_locks(node: &mut SchemaNode, path: &FieldPath, locks: &[ResolvedLock]) {
    if let Some(rule) = locks.iter().find(|r| r.target.matches(path)) {
        *node = SchemaNode::Locked {
            value: rule.value.clone(),
            mode: rule.mode,
        };
        return;
    }
    match node {
        SchemaNode::Mapping(entries) => {
            for (k, e) in entries.iter_mut() {
                apply_locks(&mut e.schema, &path.child(k), locks);
            }
            for rule in locks {
                if rule.mode != LockMode::RequireAndPin {
                    continue;
                }
                let (Some(parent), Some(key)) = (rule.target.parent(), rule.target.last_key())
                else {
                    continue;
                };
                if parent.matches(path) && !entries.iter().any(|(k, _)| k == key) {
                    entries.push((
                        key.to_string(),
                        MappingEntry {
                            schema: SchemaNode::Locked {
                                value: rule.value.clone(),
                                mode: rule.mode,
                            },
                            optional: false,
                        },
                    ));
                }
            }
        }
        SchemaNode::Sequence(elem) => apply_locks(elem, &path.element(), locks),
        _ => {}
    }
}

/// Whitelists the fields real API servers inject into stored objects so
/// that controllers echoing them back are not denied.
fn add_server_fields(tree: &mut SchemaNode) {
    let SchemaNode::Mapping(entries) = tree else {
        return;
    };
    let mut ensure_top = |key: &str, schema: SchemaNode| {
        if !entries.iter().any(|(k, _)| k == key) {
            entries.push((
                key.to_string(),
                MappingEntry {
                    schema,
                    optional: true,
                },
            ));
        }
    };
    ensure_top("status", SchemaNode::Placeholder(Placeholder::Dict));
    ensure_top(
        "metadata",
        SchemaNode::Mapping(Vec::new()),
    );
    let Some(metadata) = tree.mapping_get_mut("metadata") else {
        return;
    };
    let SchemaNode::Mapping(meta_entries) = metadata else {
        return;
    };
    for (key, schema) in [
        ("managedFields", SchemaNode::Placeholder(Placeholder::List)),
        ("uid", SchemaNode::Placeholder(Placeholder::Str)),
        ("resourceVersion", SchemaNode::Placeholder(Placeholder::Str)),
        (
            "creationTimestamp",
            SchemaNode::Placeholder(Placeholder::Str),
        ),
        ("generation", SchemaNode::Placeholder(Placeholder::Int)),
    ] {
        if !meta_entries.iter().any(|(k, _)| k == key) {
            meta_entries.push((
                key.to_string(),
                MappingEntry {
                    schema,
                    optional: true,
                },
            ));
        }
    }
}

fn locks_digest(locks: &[ResolvedLock]) -> String {
    let mut hasher = Sha256::new();
    for rule in locks {
        hasher.update(rule.target.to_string().as_bytes());
        hasher.update(b"|");
        hasher.update(rule.value.to_string().as_bytes());
        hasher.update(b"|");
        hasher.update(match rule.mode {
            LockMode::Pin => b"pin".as_slice(),
            LockMode::RequireAndPin => b"require-and-pin".as_slice(),
        });
        hasher.update(b"\n");
    }
    format!("sha256:{}", hex_lower(&hasher.finalize()))
}

fn hex_lower(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Structural equivalence that treats enum sets as unordered and ignores
/// mapping entry order (merge output must be permutation-insensitive up to
/// this relation).
pub fn schema_equivalent(a: &SchemaNode, b: &SchemaNode) -> bool {
    match (a, b) {
        (SchemaNode::Constant(x), SchemaNode::Constant(y)) => x == y,
        (SchemaNode::Placeholder(p), SchemaNode::Placeholder(q)) => p == q,
        (
            SchemaNode::Locked { value: v1, mode: m1 },
            SchemaNode::Locked { value: v2, mode: m2 },
        ) => v1 == v2 && m1 == m2,
        (SchemaNode::Enum(xs), SchemaNode::Enum(ys)) => {
            xs.len() == ys.len()
                && xs.iter().all(|x| ys.contains(x))
                && ys.iter().all(|y| xs.contains(y))
        }
        (SchemaNode::Mapping(xs), SchemaNode::Mapping(ys)) => {
            xs.len() == ys.len()
                && xs.iter().all(|(k, x)| {
                    ys.iter().any(|(k2, y)| {
                        k == k2 && x.optional == y.optional && schema_equivalent(&x.schema, &y.schema)
                    })
                })
        }
        (SchemaNode::Sequence(x), SchemaNode::Sequence(y)) => schema_equivalent(x, y),
        _ => false,
    }
}

impl SchemaNode {
    fn mapping_get_mut(&mut self, key: &str) -> Option<&mut SchemaNode> {
        match self {
            SchemaNode::Mapping(entries) => entries
                .iter_mut()
                .find(|(k, _)| k == key)
                .map(|(_, e)| &mut e.schema),
            _ => None,
        }
    }
}
