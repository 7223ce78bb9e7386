//! End-to-end policy generation over the bundled fixture charts.

use kubefence_core::attack::{builtin_catalog, run_catalog, WorkloadFixture};
use kubefence_core::chart::{extract_enum_annotations, load_chart, Chart, ChartError};
use kubefence_core::doc::{parse_document, DocFormat, DocNode, Scalar};
use kubefence_core::policy::{
    build_validator, explore_variants, generate, generate_values_schema, render_variants,
    schema_equivalent, GenerateOutcome, MergeOptions, ValuesSchema, ValuesSchemaNode,
};
use kubefence_core::policy_io::{validator_from_yaml, validator_to_yaml, values_schema_to_yaml};
use kubefence_core::rbac::RbacPolicy;
use kubefence_core::schema::{LockMode, LockValue, Placeholder, SchemaNode};
use kubefence_core::template::DefineIndex;
use kubefence_core::validate::{validate_object, Verdict};
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn read(path: impl AsRef<Path>) -> String {
    let path = fixtures().join(path);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

/// Builds a chart around a bare values file (no templates), for phase-1
/// tests.
fn values_only_chart(name: &str, values_text: &str) -> Chart {
    let values = parse_document(values_text, DocFormat::Yaml).expect("fixture parses");
    let mut annotations = extract_enum_annotations(values_text).expect("annotations extract");
    // Resolution against values normally happens inside load_chart.
    for ann in &mut annotations {
        let resolved = resolve_ci(&values, &ann.target.to_string());
        ann.target = resolved;
    }
    Chart {
        name: name.to_string(),
        values,
        values_text: values_text.to_string(),
        templates: Vec::new(),
        defines: DefineIndex::new(),
        annotations,
        locks: kubefence_core::chart::default_lock_rules(),
    }
}

fn resolve_ci(values: &DocNode, dotted: &str) -> kubefence_core::FieldPath {
    let mut segs = Vec::new();
    let mut cur = values;
    for part in dotted.split('.') {
        let m = cur.as_mapping().expect("mapping");
        let actual = if m.contains_key(part) {
            part.to_string()
        } else {
            m.keys()
                .find(|k| k.eq_ignore_ascii_case(part))
                .expect("ci match")
                .to_string()
        };
        cur = m.get(&actual).unwrap();
        segs.push(actual);
    }
    kubefence_core::FieldPath::keys(&segs.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn values_schema_reproduces_reference_transcription() {
    let values_text = read("fig7/values.yaml");
    let golden = read("fig7/schema.golden.yaml");
    let chart = values_only_chart("fig7", &values_text);
    let schema = generate_values_schema(&chart).expect("schema generates");
    let rendered = values_schema_to_yaml(&schema);
    assert_eq!(rendered, golden, "canonical serialization must be byte-equal");
}

#[test]
fn reference_schema_yields_two_variants() {
    let values_text = read("fig7/values.yaml");
    let chart = values_only_chart("fig7", &values_text);
    let schema = generate_values_schema(&chart).unwrap();
    let variants = explore_variants(&schema);
    assert_eq!(variants.len(), 2);
    let arch = |v: &kubefence_core::ValuesVariant| {
        v.values
            .get_path(&["postgreSQL", "arch"])
            .unwrap()
            .as_str()
            .unwrap()
            .to_string()
    };
    assert_eq!(arch(&variants[0]), "standalone");
    assert_eq!(arch(&variants[1]), "repl");
    // Non-enum leaves keep their placeholders and locked constants.
    assert_eq!(
        variants[0].values.get_path(&["tracking", "enabled"]),
        Some(&DocNode::str("bool"))
    );
    assert_eq!(
        variants[0].values.get_path(&["image", "registry"]),
        Some(&DocNode::str("docker.io"))
    );
}

#[test]
fn mixed_length_enums_follow_ith_and_last_reused_rule() {
    let values_text = "# a\n# `a1` or `a2`\na: a1\n# b\n# `b1` or `b2` or `b3`\nb: b1\n";
    let chart = values_only_chart("mixed", values_text);
    let schema = generate_values_schema(&chart).unwrap();
    let variants = explore_variants(&schema);
    assert_eq!(variants.len(), 3);
    let pick = |v: &kubefence_core::ValuesVariant, key: &str| {
        v.values.get_path(&[key]).unwrap().as_str().unwrap().to_string()
    };
    assert_eq!((pick(&variants[0], "a"), pick(&variants[0], "b")), ("a1".into(), "b1".into()));
    assert_eq!((pick(&variants[1], "a"), pick(&variants[1], "b")), ("a2".into(), "b2".into()));
    assert_eq!((pick(&variants[2], "a"), pick(&variants[2], "b")), ("a2".into(), "b3".into()));
}

#[test]
fn schema_with_no_enums_yields_one_variant() {
    let chart = values_only_chart("plain", "a: 1\nb: x\n");
    let schema = generate_values_schema(&chart).unwrap();
    assert_eq!(explore_variants(&schema).len(), 1);
}

#[test]
fn empty_values_yield_empty_schema() {
    let chart = values_only_chart("empty", "{}\n");
    let schema = generate_values_schema(&chart).unwrap();
    assert_eq!(schema.root, ValuesSchemaNode::Mapping(vec![]));
    assert_eq!(values_schema_to_yaml(&schema), "{}\n");
}

#[test]
fn missing_run_as_non_root_is_inserted() {
    let values_text = "tracking:\n  containerSecurityContext:\n    readOnlyRootFilesystem: true\n";
    let chart = values_only_chart("insert", values_text);
    let schema = generate_values_schema(&chart).unwrap();
    let ValuesSchemaNode::Mapping(top) = &schema.root else {
        panic!("mapping root");
    };
    let (_, tracking) = &top[0];
    let ValuesSchemaNode::Mapping(tracking) = tracking else {
        panic!("tracking mapping");
    };
    let (_, csc) = &tracking[0];
    let ValuesSchemaNode::Mapping(csc) = csc else {
        panic!("csc mapping");
    };
    let inserted = csc
        .iter()
        .find(|(k, _)| k == "runAsNonRoot")
        .map(|(_, v)| v)
        .expect("runAsNonRoot inserted");
    assert_eq!(
        inserted,
        &ValuesSchemaNode::Locked {
            value: LockValue::Scalar(Scalar::bool(true)),
            mode: LockMode::RequireAndPin,
        }
    );
}

/// The two container manifests of the validator-merge figure, wrapped in a
/// minimal Pod so they carry a kind.
fn fig8_manifests() -> Vec<DocNode> {
    let m1 = "apiVersion: v1\nkind: Pod\nspec:\n  containers:\n  - name: nginx\n    image: nginx:latest\n    imagePullPolicy: IfNotPresent\n    ports:\n    - name: string\n      container: IP\n";
    let m2 = "apiVersion: v1\nkind: Pod\nspec:\n  containers:\n  - name: nginx\n    image: nginx:latest\n    imagePullPolicy: Always\n";
    vec![
        parse_document(m1, DocFormat::Yaml).unwrap(),
        parse_document(m2, DocFormat::Yaml).unwrap(),
    ]
}

#[test]
fn two_manifest_merge_consolidates_enums_and_widens_identity_fields() {
    let manifests = fig8_manifests();
    let validator = build_validator("fig8", &manifests, &[], MergeOptions::default()).unwrap();
    let pod = validator.kind("Pod").expect("Pod tree");
    let containers = pod
        .mapping_get("spec")
        .map(|e| &e.schema)
        .and_then(|s| s.mapping_get("containers"))
        .map(|e| &e.schema)
        .expect("containers");
    let SchemaNode::Sequence(elem) = containers else {
        panic!("containers is a sequence schema");
    };
    assert_eq!(
        elem.mapping_get("name").unwrap().schema,
        SchemaNode::Placeholder(Placeholder::Str)
    );
    assert_eq!(
        elem.mapping_get("image").unwrap().schema,
        SchemaNode::Placeholder(Placeholder::Str)
    );
    assert_eq!(
        elem.mapping_get("imagePullPolicy").unwrap().schema,
        SchemaNode::Enum(vec![Scalar::str("IfNotPresent"), Scalar::str("Always")])
    );
    // ports appears in one manifest only: optional, placeholders retained.
    let ports = elem.mapping_get("ports").expect("ports entry");
    assert!(ports.optional);
    let SchemaNode::Sequence(port_elem) = &ports.schema else {
        panic!("ports sequence");
    };
    assert_eq!(
        port_elem.mapping_get("name").unwrap().schema,
        SchemaNode::Placeholder(Placeholder::Str)
    );
    assert_eq!(
        port_elem.mapping_get("container").unwrap().schema,
        SchemaNode::Placeholder(Placeholder::Ip)
    );
}

#[test]
fn single_manifest_merge_is_identity_plus_locks() {
    let manifest = parse_document(
        "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: c\ndata:\n  key: value\n",
        DocFormat::Yaml,
    )
    .unwrap();
    let validator = build_validator("one", std::slice::from_ref(&manifest), &[], MergeOptions::default())
        .unwrap();
    let tree = validator.kind("ConfigMap").unwrap();
    assert_eq!(
        tree.mapping_get("data")
            .map(|e| &e.schema)
            .and_then(|s| s.mapping_get("key"))
            .map(|e| e.schema.clone()),
        Some(SchemaNode::Constant(Scalar::str("value")))
    );
    // metadata.name widens to a placeholder (release-derived).
    assert_eq!(
        tree.mapping_get("metadata")
            .map(|e| &e.schema)
            .and_then(|s| s.mapping_get("name"))
            .map(|e| e.schema.clone()),
        Some(SchemaNode::Placeholder(Placeholder::Str))
    );
}

#[test]
fn shape_conflicts_fail_loudly() {
    let a = parse_document("apiVersion: v1\nkind: X\nports:\n  p: 1\n", DocFormat::Yaml).unwrap();
    let b = parse_document("apiVersion: v1\nkind: X\nports: 5\n", DocFormat::Yaml).unwrap();
    let err = build_validator("conflict", &[a, b], &[], MergeOptions::default()).unwrap_err();
    let text = err.to_string();
    assert!(text.contains("ports"), "error names the path: {text}");
}

fn load_fixture_chart(name: &str) -> Chart {
    load_chart(&fixtures().join("charts").join(name)).expect("fixture chart loads")
}

#[test]
fn mlflow_chart_loads_with_two_templates_and_annotations() {
    let chart = load_fixture_chart("mlflow-mini");
    assert_eq!(chart.name, "mlflow-mini");
    assert_eq!(chart.templates.len(), 2);
    let targets: BTreeSet<String> = chart
        .annotations
        .iter()
        .map(|a| a.target.to_string())
        .collect();
    assert!(targets.contains("postgreSQL.arch"));
    assert!(targets.contains("image.pullPolicy"));
    assert!(chart.defines.contains_key("mlflow.fullname"));
}

#[test]
fn chart_without_templates_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("values.yaml"), "a: 1\n").unwrap();
    let err = load_chart(dir.path()).unwrap_err();
    assert!(matches!(err, ChartError::MissingTemplates(_)));
}

#[test]
fn duplicate_defines_fail() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("values.yaml"), "a: 1\n").unwrap();
    fs::create_dir(dir.path().join("templates")).unwrap();
    fs::write(
        dir.path().join("templates/a.yaml"),
        "{{- define \"x.name\" -}}a{{- end -}}\nkind: A\napiVersion: v1\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("templates/b.yaml"),
        "{{- define \"x.name\" -}}b{{- end -}}\nkind: B\napiVersion: v1\n",
    )
    .unwrap();
    let err = load_chart(dir.path()).unwrap_err();
    assert!(matches!(err, ChartError::DuplicateDefine(name) if name == "x.name"));
}

#[test]
fn mlflow_renders_three_kinds_across_two_variants() {
    let chart = load_fixture_chart("mlflow-mini");
    let schema = generate_values_schema(&chart).unwrap();
    let variants = explore_variants(&schema);
    assert_eq!(variants.len(), 2, "pullPolicy and arch are both 2-option enums");
    let manifests = render_variants(&chart, &variants).unwrap();
    assert!(manifests.len() >= 6, "3 kinds x 2 variants at minimum, got {}", manifests.len());
    let kinds: BTreeSet<String> = manifests
        .iter()
        .map(|m| {
            m.doc
                .get_path(&["kind"])
                .and_then(DocNode::as_str)
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(
        kinds,
        BTreeSet::from(["Secret".to_string(), "Deployment".to_string(), "Service".to_string()])
    );
    // The conditional secret block renders with and without PGUSER.
    let secrets: Vec<&DocNode> = manifests
        .iter()
        .map(|m| &m.doc)
        .filter(|d| d.get_path(&["kind"]).and_then(DocNode::as_str) == Some("Secret"))
        .collect();
    assert!(secrets
        .iter()
        .any(|s| s.get_path(&["data", "PGUSER"]).is_some()));
    assert!(secrets
        .iter()
        .any(|s| s.get_path(&["data", "PGUSER"]).is_none()));
    // Placeholders flow through rendering as token text.
    let with_pg = secrets
        .iter()
        .find(|s| s.get_path(&["data", "PGUSER"]).is_some())
        .unwrap();
    assert_eq!(
        with_pg.get_path(&["data", "PGUSER"]),
        Some(&DocNode::str("string"))
    );
}

fn soundness_closure(chart_name: &str) {
    let chart = load_fixture_chart(chart_name);
    let GenerateOutcome {
        manifests,
        validator,
        ..
    } = generate(&chart, MergeOptions::default()).unwrap();
    assert!(!manifests.is_empty());
    for m in &manifests {
        let verdict = validate_object(&m.doc, &validator);
        assert_eq!(
            verdict,
            Verdict::Allow,
            "{chart_name}: manifest from variant {} ({}) must validate: {verdict:?}\n{}",
            m.variant,
            m.file,
            kubefence_core::doc::to_yaml(&m.doc)
        );
    }
    // And through the file format round trip.
    let text = validator_to_yaml(&validator);
    let reloaded = validator_from_yaml(&text).unwrap();
    for m in &manifests {
        let verdict = validate_object(&m.doc, &reloaded);
        assert_eq!(verdict, Verdict::Allow, "{chart_name} after round trip");
    }
}

#[test]
fn mlflow_soundness_closure() {
    soundness_closure("mlflow-mini");
}

#[test]
fn nginx_soundness_closure() {
    soundness_closure("nginx-mini");
}

#[test]
fn enum_option_coverage() {
    for name in ["mlflow-mini", "nginx-mini"] {
        let chart = load_fixture_chart(name);
        let outcome = generate(&chart, MergeOptions::default()).unwrap();
        for ann in &chart.annotations {
            for option in &ann.options {
                let covered = outcome.variants.iter().any(|v| {
                    let keys: Vec<&str> = ann
                        .target
                        .segments()
                        .iter()
                        .map(|s| match s {
                            kubefence_core::Segment::Key(k) => k.as_str(),
                            _ => panic!("annotation targets are key paths"),
                        })
                        .collect();
                    v.values.get_path(&keys).and_then(DocNode::as_scalar) == Some(option)
                });
                assert!(
                    covered,
                    "{name}: option {option} of {} must appear in some variant",
                    ann.target
                );
            }
        }
    }
}

#[test]
fn merge_is_order_insensitive() {
    let chart = load_fixture_chart("nginx-mini");
    let outcome = generate(&chart, MergeOptions::default()).unwrap();
    let docs: Vec<DocNode> = outcome.manifests.iter().map(|m| m.doc.clone()).collect();
    let forward = build_validator(
        &chart.name,
        &docs,
        &outcome.schema.resolved_locks,
        MergeOptions::default(),
    )
    .unwrap();
    let mut reversed_docs = docs.clone();
    reversed_docs.reverse();
    let reversed = build_validator(
        &chart.name,
        &reversed_docs,
        &outcome.schema.resolved_locks,
        MergeOptions::default(),
    )
    .unwrap();
    assert_eq!(forward.kinds.len(), reversed.kinds.len());
    for (kind, tree) in &forward.kinds {
        let other = reversed.kind(kind).expect("same kinds");
        assert!(
            schema_equivalent(tree, other),
            "{kind} trees must be equivalent under permutation"
        );
    }
}

#[test]
fn lock_preservation_in_validators() {
    let chart = load_fixture_chart("nginx-mini");
    let outcome = generate(&chart, MergeOptions::default()).unwrap();
    let deployment = outcome.validator.kind("Deployment").unwrap();
    let container = deployment
        .mapping_get("spec")
        .map(|e| &e.schema)
        .and_then(|s| s.mapping_get("template"))
        .map(|e| &e.schema)
        .and_then(|s| s.mapping_get("spec"))
        .map(|e| &e.schema)
        .and_then(|s| s.mapping_get("containers"))
        .map(|e| &e.schema)
        .expect("containers");
    let SchemaNode::Sequence(elem) = container else {
        panic!("sequence");
    };
    let sc = elem
        .mapping_get("securityContext")
        .map(|e| &e.schema)
        .expect("securityContext");
    assert_eq!(
        sc.mapping_get("runAsNonRoot").unwrap().schema,
        SchemaNode::Locked {
            value: LockValue::Scalar(Scalar::bool(true)),
            mode: LockMode::RequireAndPin,
        }
    );
    assert_eq!(
        sc.mapping_get("readOnlyRootFilesystem").unwrap().schema,
        SchemaNode::Locked {
            value: LockValue::Scalar(Scalar::bool(true)),
            mode: LockMode::Pin,
        }
    );
    let limits = elem
        .mapping_get("resources")
        .map(|e| &e.schema)
        .and_then(|s| s.mapping_get("limits"))
        .map(|e| e.schema.clone());
    assert_eq!(
        limits,
        Some(SchemaNode::Locked {
            value: LockValue::Placeholder(Placeholder::Dict),
            mode: LockMode::RequireAndPin,
        })
    );
}

#[test]
fn fig10_manifest_denied_by_both_fixture_validators() {
    let fig10 = parse_document(&read("manifests/fig10-malicious.yaml"), DocFormat::Yaml).unwrap();
    for name in ["nginx-mini", "mlflow-mini"] {
        let chart = load_fixture_chart(name);
        let outcome = generate(&chart, MergeOptions::default()).unwrap();
        let verdict = validate_object(&fig10, &outcome.validator);
        match verdict {
            Verdict::Deny { path, reason, .. } => {
                assert_eq!(reason, kubefence_core::DenyReason::LockViolation);
                assert!(path.ends_with("securityContext.runAsNonRoot"), "{path}");
            }
            Verdict::Allow => panic!("{name} must deny the malicious manifest"),
        }
    }
}

#[test]
fn attack_matrix_blocks_all_catalog_entries() {
    let catalog = builtin_catalog();
    let permissive = RbacPolicy::permissive();
    let mut outcomes = Vec::new();
    for name in ["nginx-mini", "mlflow-mini"] {
        let chart = load_fixture_chart(name);
        let outcome = generate(&chart, MergeOptions::default()).unwrap();
        outcomes.push((name, outcome));
    }
    let workloads: Vec<WorkloadFixture> = outcomes
        .iter()
        .map(|(name, outcome)| WorkloadFixture {
            name: name.to_string(),
            validator: &outcome.validator,
            manifests: outcome.manifests.iter().map(|m| m.doc.clone()).collect(),
            rbac: &permissive,
        })
        .collect();
    let matrix = run_catalog(&catalog, &workloads).unwrap();
    for w in &matrix.workloads {
        assert_eq!(w.cves_blocked_rbac, 0, "{}: permissive RBAC blocks nothing", w.workload);
        assert_eq!(w.misconfigs_blocked_rbac, 0);
        assert_eq!(w.cves_blocked_kf, 8, "{}: all CVE rows blocked", w.workload);
        assert_eq!(w.misconfigs_blocked_kf, 7, "{}: all misconfig rows blocked", w.workload);
        for cell in &w.cells {
            assert!(cell.blocked_kf, "{}: {} must be blocked", w.workload, cell.entry);
            let reason = cell.kf_reason.expect("deny reason");
            assert!(
                matches!(
                    reason,
                    kubefence_core::DenyReason::UnknownField
                        | kubefence_core::DenyReason::LockViolation
                        | kubefence_core::DenyReason::EnumViolation
                        | kubefence_core::DenyReason::MissingRequired
                ),
                "{}: {} denied for {reason}",
                w.workload,
                cell.entry
            );
        }
    }
}

#[test]
fn entry_allowed_when_policy_legitimately_covers_it() {
    // A validator that whitelists hostNetwork: true does not block E1.
    let manifest = parse_document(
        "apiVersion: v1\nkind: Pod\nspec:\n  hostNetwork: true\n  containers:\n  - name: a\n",
        DocFormat::Yaml,
    )
    .unwrap();
    let validator =
        build_validator("hostnet", std::slice::from_ref(&manifest), &[], MergeOptions::default())
            .unwrap();
    let catalog = builtin_catalog();
    let permissive = RbacPolicy::permissive();
    let workloads = vec![WorkloadFixture {
        name: "hostnet".to_string(),
        validator: &validator,
        manifests: vec![manifest],
        rbac: &permissive,
    }];
    let e1: Vec<_> = catalog.into_iter().filter(|e| e.id == "E1").collect();
    let matrix = run_catalog(&e1, &workloads).unwrap();
    assert!(!matrix.workloads[0].cells[0].blocked_kf);
}

#[test]
fn strict_merge_keeps_constants() {
    let a = parse_document("apiVersion: v1\nkind: X\nv: string\n", DocFormat::Yaml).unwrap();
    let b = parse_document("apiVersion: v1\nkind: X\nv: fixed\n", DocFormat::Yaml).unwrap();
    let loose = build_validator("x", &[a.clone(), b.clone()], &[], MergeOptions::default()).unwrap();
    assert_eq!(
        loose.kind("X").unwrap().mapping_get("v").unwrap().schema,
        SchemaNode::Placeholder(Placeholder::Str)
    );
    let strict = build_validator(
        "x",
        &[a, b],
        &[],
        MergeOptions {
            strict: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(
        strict.kind("X").unwrap().mapping_get("v").unwrap().schema,
        SchemaNode::Constant(Scalar::str("fixed"))
    );
}

#[test]
fn null_bodies_merge_with_structures() {
    // A conditional block that rendered empty in one variant must not
    // conflict with the populated form.
    let a = parse_document("apiVersion: v1\nkind: Secret\ndata:\n", DocFormat::Yaml).unwrap();
    let b = parse_document(
        "apiVersion: v1\nkind: Secret\ndata:\n  USER: string\n",
        DocFormat::Yaml,
    )
    .unwrap();
    let validator = build_validator("s", &[a.clone(), b], &[], MergeOptions::default()).unwrap();
    let data = validator
        .kind("Secret")
        .unwrap()
        .mapping_get("data")
        .unwrap();
    let SchemaNode::Mapping(entries) = &data.schema else {
        panic!("data stays a mapping schema");
    };
    assert!(entries.iter().all(|(_, e)| e.optional));
    // Closure: the null form still validates.
    assert_eq!(validate_object(&a, &validator), Verdict::Allow);
}

/// Every values-schema type leaf admits the chart's own default value.
#[test]
fn schema_generalizes_its_origin() {
    for name in ["mlflow-mini", "nginx-mini"] {
        let chart = load_fixture_chart(name);
        let schema = generate_values_schema(&chart).unwrap();
        check_admits(&schema.root, &chart.values, name);
    }
}

fn check_admits(schema: &ValuesSchemaNode, values: &DocNode, chart: &str) {
    match schema {
        ValuesSchemaNode::Placeholder(p) => {
            assert!(p.admits(values), "{chart}: {} admits {:?}", p.token(), values.type_name());
        }
        ValuesSchemaNode::Enum(options) => {
            let s = values.as_scalar().expect("enum targets are scalars");
            assert!(options.contains(s), "{chart}: default in options");
        }
        ValuesSchemaNode::Locked { .. } => {}
        ValuesSchemaNode::Mapping(entries) => {
            let m = values.as_mapping().expect("mapping");
            for (k, child) in entries {
                if let Some(v) = m.get(k) {
                    check_admits(child, v, chart);
                }
            }
        }
    }
}
