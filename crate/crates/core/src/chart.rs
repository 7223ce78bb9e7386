//! Chart package loading: values file, templates, enum annotations and the
//! security lock-rule table.

use crate::doc::path::{FieldPath, PathPattern, Segment};
use crate::doc::{parse_document, DocFormat, DocNode, DocValue, ParseError, Scalar};
use crate::schema::{LockMode, Placeholder};
use crate::template::{
    self, parse_template, DefineIndex, RenderContext, ReleaseInfo, TemplateAst, TemplateError,
};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// An enumerated field extracted from values-file annotations or the
/// `enums.yaml` sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumAnnotation {
    pub target: FieldPath,
    pub options: Vec<Scalar>,
}

/// What a lock rule pins its target to.
#[derive(Debug, Clone, PartialEq)]
pub enum LockValueSpec {
    Scalar(Scalar),
    Placeholder(Placeholder),
    /// Pin to whatever value the chart's values file carries at the target.
    ChartDefault,
}

/// A best-practice constraint pinning a security-critical field.
#[derive(Debug, Clone, PartialEq)]
pub struct LockRule {
    pub target: PathPattern,
    pub value: LockValueSpec,
    pub mode: LockMode,
}

/// The shipped lock-rule table, overridable per chart via `locks.yaml`.
///
/// `runAsNonRoot` and the trusted image coordinates follow the hardening
/// guidance the catalog's misconfiguration rows target; the rest pin the
/// remaining catalog fields to their safe constants.
pub fn default_lock_rules() -> Vec<LockRule> {
    fn rule(target: &str, value: LockValueSpec, mode: LockMode) -> LockRule {
        LockRule {
            target: PathPattern::parse(target).expect("static pattern"),
            value,
            mode,
        }
    }
    vec![
        rule(
            "...containers[].securityContext.runAsNonRoot",
            LockValueSpec::Scalar(Scalar::bool(true)),
            LockMode::RequireAndPin,
        ),
        rule(
            "...containers[].securityContext.readOnlyRootFilesystem",
            LockValueSpec::Scalar(Scalar::bool(true)),
            LockMode::Pin,
        ),
        rule(
            "...containers[].securityContext.allowPrivilegeEscalation",
            LockValueSpec::Scalar(Scalar::bool(false)),
            LockMode::Pin,
        ),
        rule(
            "...containers[].securityContext.privileged",
            LockValueSpec::Scalar(Scalar::bool(false)),
            LockMode::Pin,
        ),
        rule(
            "...containers[].resources.limits",
            LockValueSpec::Placeholder(Placeholder::Dict),
            LockMode::RequireAndPin,
        ),
        rule("image.registry", LockValueSpec::ChartDefault, LockMode::Pin),
        rule(
            "image.repository",
            LockValueSpec::ChartDefault,
            LockMode::Pin,
        ),
    ]
}

/// One template file of a chart.
#[derive(Debug, Clone)]
pub struct TemplateFile {
    /// Path relative to the chart directory, e.g. `templates/secret.yaml`.
    pub path: String,
    pub text: String,
    pub ast: TemplateAst,
}

impl TemplateFile {
    /// Files starting with `_` only contribute named templates.
    pub fn renders_manifests(&self) -> bool {
        !Path::new(&self.path)
            .file_name()
            .and_then(|n| n.to_str())
            .map(|n| n.starts_with('_'))
            .unwrap_or(false)
    }
}

/// A loaded chart package.
#[derive(Debug, Clone)]
pub struct Chart {
    pub name: String,
    pub values: DocNode,
    pub values_text: String,
    pub templates: Vec<TemplateFile>,
    pub defines: DefineIndex,
    pub annotations: Vec<EnumAnnotation>,
    pub locks: Vec<LockRule>,
}

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("chart directory {0} has no values.yaml")]
    MissingValues(PathBuf),
    #[error("chart directory {0} has no templates/ directory with template files")]
    MissingTemplates(PathBuf),
    #[error("{file}: {source}")]
    Parse {
        file: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("duplicate named template `{0}`")]
    DuplicateDefine(String),
    #[error("annotation path `{0}` does not resolve in values")]
    AnnotationPathUnresolved(String),
    #[error("annotation target `{0}` is not a scalar value")]
    AnnotationTargetNotScalar(String),
    #[error("annotation on `{target}` does not include the default value `{default}`")]
    AnnotationDefaultMissing { target: String, default: String },
    #[error("annotation on `{0}` has fewer than two options")]
    AnnotationTooFewOptions(String),
    #[error("malformed {file}: {message}")]
    Sidecar { file: String, message: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Loads a chart directory: `values.yaml`, `templates/*`, optional
/// `Chart.yaml` (name only), optional `enums.yaml` and `locks.yaml`.
pub fn load_chart(dir: &Path) -> Result<Chart, ChartError> {
    let values_path = dir.join("values.yaml");
    if !values_path.is_file() {
        return Err(ChartError::MissingValues(dir.to_path_buf()));
    }
    let values_text = read(&values_path)?;
    let values = parse_document(&values_text, DocFormat::Yaml).map_err(|source| {
        ChartError::Parse {
            file: rel_name(dir, &values_path),
            source,
        }
    })?;

    let templates_dir = dir.join("templates");
    let mut template_paths: Vec<PathBuf> = match fs::read_dir(&templates_dir) {
        Err(_) => return Err(ChartError::MissingTemplates(dir.to_path_buf())),
        Ok(entries) => entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| {
                p.is_file()
                    && matches!(
                        p.extension().and_then(|e| e.to_str()),
                        Some("yaml") | Some("yml") | Some("tpl")
                    )
            })
            .collect(),
    };
    template_paths.sort();
    if template_paths.is_empty() {
        return Err(ChartError::MissingTemplates(dir.to_path_buf()));
    }

    let mut templates = Vec::new();
    let mut defines = DefineIndex::new();
    for path in template_paths {
        let rel = rel_name(dir, &path);
        let text = read(&path)?;
        if text.trim().is_empty() {
            return Err(ChartError::Template(TemplateError::Syntax {
                template: rel,
                position: crate::doc::Position { line: 1, column: 1 },
                expected: "a non-empty template".to_string(),
            }));
        }
        let ast = parse_template(&rel, &text)?;
        for (name, body) in ast.defines() {
            if defines.contains_key(name) {
                return Err(ChartError::DuplicateDefine(name.to_string()));
            }
            defines.insert(name.to_string(), body.to_vec());
        }
        templates.push(TemplateFile {
            path: rel,
            text,
            ast,
        });
    }

    let name = chart_name(dir)?;
    let mut annotations = extract_enum_annotations(&values_text)?;
    validate_annotations(&mut annotations, &values)?;
    if let Some(sidecar) = load_enum_sidecar(dir)? {
        for ann in sidecar {
            annotations.retain(|a| a.target != ann.target);
            annotations.push(ann);
        }
        validate_annotations(&mut annotations, &values)?;
    }
    let locks = match load_lock_sidecar(dir)? {
        Some(locks) => locks,
        None => default_lock_rules(),
    };

    Ok(Chart {
        name,
        values,
        values_text,
        templates,
        defines,
        annotations,
        locks,
    })
}

impl Chart {
    /// Default render context for this chart: the release is named after
    /// the chart.
    pub fn render_context(&self, values: DocNode) -> RenderContext {
        RenderContext {
            values,
            release: ReleaseInfo {
                name: self.name.clone(),
                service: "Helm".to_string(),
            },
            chart_name: self.name.clone(),
        }
    }

    /// Renders every manifest-bearing template file with the given context.
    ///
    /// A file whose conditions branch on `bool` placeholders contributes one
    /// output per truth assignment.
    pub fn render(&self, ctx: &RenderContext) -> Result<Vec<RenderedFile>, TemplateError> {
        let mut out = Vec::new();
        for file in &self.templates {
            if !file.renders_manifests() {
                continue;
            }
            for text in template::render_file(&file.ast, &self.defines, ctx)? {
                out.push(RenderedFile {
                    path: file.path.clone(),
                    text,
                });
            }
        }
        Ok(out)
    }
}

/// One rendered output of one template file.
#[derive(Debug, Clone)]
pub struct RenderedFile {
    pub path: String,
    pub text: String,
}

fn read(path: &Path) -> Result<String, ChartError> {
    fs::read_to_string(path).map_err(|source| ChartError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn rel_name(dir: &Path, path: &Path) -> String {
    path.strip_prefix(dir)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

fn chart_name(dir: &Path) -> Result<String, ChartError> {
    let meta = dir.join("Chart.yaml");
    if meta.is_file() {
        let text = read(&meta)?;
        if let Ok(doc) = parse_document(&text, DocFormat::Yaml) {
            if let Some(name) = doc.get_path(&["name"]).and_then(DocNode::as_str) {
                return Ok(name.to_string());
            }
        }
    }
    Ok(dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "chart".to_string()))
}

/// Extracts the two-line comment annotation form:
///
/// ```yaml
/// # postgresql.arch
/// # `standalone` or `repl`
/// postgreSQL:
/// ```
///
/// The first comment names a dotted path into values, the second lists the
/// allowed options (backtick-quoted, separated by `or` or commas), and the
/// pair must immediately precede a content line.
pub fn extract_enum_annotations(values_text: &str) -> Result<Vec<EnumAnnotation>, ChartError> {
    let lines: Vec<&str> = values_text.lines().collect();
    let mut out = Vec::new();
    for i in 0..lines.len().saturating_sub(2) {
        let Some(path_text) = comment_body(lines[i]) else {
            continue;
        };
        if !looks_like_path(&path_text) {
            continue;
        }
        let Some(options_text) = comment_body(lines[i + 1]) else {
            continue;
        };
        let options = parse_options(&options_text);
        if options.len() < 2 {
            continue;
        }
        // The annotation pair must sit directly above a content line.
        let next = lines[i + 2].trim();
        if next.is_empty() || next.starts_with('#') {
            continue;
        }
        let target = FieldPath::parse(&path_text).map_err(|_| {
            ChartError::AnnotationPathUnresolved(path_text.clone())
        })?;
        out.push(EnumAnnotation { target, options });
    }
    Ok(out)
}

fn comment_body(line: &str) -> Option<String> {
    let trimmed = line.trim_start();
    let body = trimmed.strip_prefix('#')?;
    Some(body.trim().to_string())
}

fn looks_like_path(text: &str) -> bool {
    !text.is_empty()
        && text
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-' | '[' | ']'))
}

/// Parses an options comment. Backtick-quoted spans win when two or more
/// are present; otherwise the text splits on `or` and commas, with stray
/// backticks stripped (the form the paper's figure uses is cut mid-quote).
fn parse_options(text: &str) -> Vec<Scalar> {
    let spans: Vec<&str> = text
        .split('`')
        .enumerate()
        .filter_map(|(i, s)| (i % 2 == 1).then_some(s))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let raw: Vec<String> = if spans.len() >= 2 {
        spans.iter().map(|s| s.to_string()).collect()
    } else {
        text.split(',')
            .flat_map(|piece| piece.split(" or "))
            .map(|s| s.trim().trim_matches('`').trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    };
    let mut options = Vec::new();
    for r in raw {
        let scalar = crate::doc::resolve_plain_scalar(&r);
        if !options.contains(&scalar) {
            options.push(scalar);
        }
    }
    options
}

/// Checks every annotation against the values document: the target must
/// resolve to an existing scalar (case-insensitively as a fallback, since
/// annotation comments do not always match key casing) and the options must
/// include the current default. Targets are rewritten to their resolved
/// casing.
fn validate_annotations(
    annotations: &mut Vec<EnumAnnotation>,
    values: &DocNode,
) -> Result<(), ChartError> {
    for ann in annotations.iter_mut() {
        let (resolved_path, node) = resolve_path_ci(values, &ann.target)
            .ok_or_else(|| ChartError::AnnotationPathUnresolved(ann.target.to_string()))?;
        let default = node
            .as_scalar()
            .ok_or_else(|| ChartError::AnnotationTargetNotScalar(ann.target.to_string()))?;
        if ann.options.len() < 2 {
            return Err(ChartError::AnnotationTooFewOptions(ann.target.to_string()));
        }
        if !ann.options.contains(default) {
            return Err(ChartError::AnnotationDefaultMissing {
                target: ann.target.to_string(),
                default: default.to_string(),
            });
        }
        ann.target = resolved_path;
    }
    Ok(())
}

/// Resolves a key path, preferring exact key matches and falling back to a
/// unique case-insensitive match per level.
fn resolve_path_ci<'a>(values: &'a DocNode, path: &FieldPath) -> Option<(FieldPath, &'a DocNode)> {
    let mut cur = values;
    let mut resolved = Vec::new();
    for seg in path.segments() {
        let key = match seg {
            Segment::Key(k) => k,
            Segment::AnyIndex => return None,
        };
        let m = cur.as_mapping()?;
        let actual = if m.contains_key(key) {
            key.clone()
        } else {
            let mut matches = m
                .keys()
                .filter(|k| k.eq_ignore_ascii_case(key))
                .collect::<Vec<_>>();
            if matches.len() != 1 {
                return None;
            }
            matches.pop().unwrap().to_string()
        };
        cur = m.get(&actual)?;
        resolved.push(Segment::Key(actual));
    }
    Some((FieldPath::from_segments(resolved), cur))
}

/// `enums.yaml`: a mapping from canonical path to an option list.
fn load_enum_sidecar(dir: &Path) -> Result<Option<Vec<EnumAnnotation>>, ChartError> {
    let path = dir.join("enums.yaml");
    if !path.is_file() {
        return Ok(None);
    }
    let file = rel_name(dir, &path);
    let text = read(&path)?;
    let doc = parse_document(&text, DocFormat::Yaml).map_err(|source| ChartError::Parse {
        file: file.clone(),
        source,
    })?;
    let mapping = doc.as_mapping().ok_or_else(|| ChartError::Sidecar {
        file: file.clone(),
        message: "expected a mapping of path to option list".to_string(),
    })?;
    let mut out = Vec::new();
    for (key, value) in mapping.iter() {
        let target = FieldPath::parse(key).map_err(|e| ChartError::Sidecar {
            file: file.clone(),
            message: e.to_string(),
        })?;
        let items = value.as_sequence().ok_or_else(|| ChartError::Sidecar {
            file: file.clone(),
            message: format!("options for `{key}` must be a sequence"),
        })?;
        let mut options = Vec::new();
        for item in items {
            let s = item.as_scalar().ok_or_else(|| ChartError::Sidecar {
                file: file.clone(),
                message: format!("options for `{key}` must be scalars"),
            })?;
            if !options.contains(s) {
                options.push(s.clone());
            }
        }
        out.push(EnumAnnotation { target, options });
    }
    Ok(Some(out))
}

/// `locks.yaml`: replaces the default lock table.
///
/// ```yaml
/// locks:
///   - target: ...containers[].securityContext.runAsNonRoot
///     value: true
///     mode: require-and-pin
///   - target: image.registry     # no value: pin the chart default
///     mode: pin
/// ```
fn load_lock_sidecar(dir: &Path) -> Result<Option<Vec<LockRule>>, ChartError> {
    let path = dir.join("locks.yaml");
    if !path.is_file() {
        return Ok(None);
    }
    let file = rel_name(dir, &path);
    let text = read(&path)?;
    let doc = parse_document(&text, DocFormat::Yaml).map_err(|source| ChartError::Parse {
        file: file.clone(),
        source,
    })?;
    let side_err = |message: String| ChartError::Sidecar {
        file: file.clone(),
        message,
    };
    let rules = doc
        .get_path(&["locks"])
        .and_then(DocNode::as_sequence)
        .ok_or_else(|| side_err("expected a top-level `locks` sequence".to_string()))?;
    let mut out = Vec::new();
    for rule in rules {
        let target_text = rule
            .get_path(&["target"])
            .and_then(DocNode::as_str)
            .ok_or_else(|| side_err("each lock needs a `target`".to_string()))?;
        let target =
            PathPattern::parse(target_text).map_err(|e| side_err(e.to_string()))?;
        let mode = match rule.get_path(&["mode"]).and_then(DocNode::as_str) {
            None | Some("pin") => LockMode::Pin,
            Some("require-and-pin") => LockMode::RequireAndPin,
            Some(other) => return Err(side_err(format!("unknown lock mode `{other}`"))),
        };
        let value = match rule.get_path(&["value"]) {
            None => LockValueSpec::ChartDefault,
            Some(v) => match &v.value {
                DocValue::Scalar(s) => LockValueSpec::Scalar(s.clone()),
                _ => match template::marker_placeholder(v) {
                    Some(p) => LockValueSpec::Placeholder(p),
                    None => {
                        return Err(side_err(format!(
                            "lock value for `{target_text}` must be a scalar or placeholder"
                        )))
                    }
                },
            },
        };
        if out
            .iter()
            .any(|r: &LockRule| r.target == target)
        {
            return Err(side_err(format!("duplicate lock target `{target_text}`")));
        }
        out.push(LockRule {
            target,
            value,
            mode,
        });
    }
    Ok(Some(out))
}
