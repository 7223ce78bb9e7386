//! Template evaluation.
//!
//! Rendering is a pure function of (AST, defines, context). Schema
//! placeholder tokens are legal leaf values and render as their token text.
//! When an `if` condition references a value holding the `bool` placeholder,
//! the file is rendered once per truth assignment of every such condition so
//! the downstream validator merge covers both field sets.

use super::{Func, Pipeline, RefPath, TemplateAst, TemplateError, TemplateNode, Term};
use crate::doc::{
    self, parse_raw_documents, DocMapping, DocNode, DocValue, Position, Scalar, ScalarKind,
};
use crate::schema::Placeholder;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Release metadata available to templates.
#[derive(Debug, Clone)]
pub struct ReleaseInfo {
    pub name: String,
    pub service: String,
}

impl Default for ReleaseInfo {
    fn default() -> Self {
        ReleaseInfo {
            name: "release".to_string(),
            service: "Helm".to_string(),
        }
    }
}

/// Context a template is rendered with.
#[derive(Debug, Clone)]
pub struct RenderContext {
    pub values: DocNode,
    pub release: ReleaseInfo,
    pub chart_name: String,
}

/// Named template blocks collected across a chart's files.
pub type DefineIndex = BTreeMap<String, Vec<TemplateNode>>;

/// True for the sequence form of the `[list]` placeholder marker.
pub fn is_list_marker(node: &DocNode) -> bool {
    match node.as_sequence() {
        Some([only]) => only.as_str() == Some("list"),
        _ => false,
    }
}

/// True for the mapping form of the `{dict}` placeholder marker.
pub fn is_dict_marker(node: &DocNode) -> bool {
    match node.as_mapping() {
        Some(m) if m.len() == 1 => matches!(
            m.get("dict"),
            Some(v) if v.as_scalar().map(Scalar::kind) == Some(ScalarKind::Null)
        ),
        _ => false,
    }
}

/// Builds the document-tree marker for a placeholder.
pub fn placeholder_marker(p: Placeholder) -> DocNode {
    match p {
        Placeholder::List => DocNode::sequence(vec![DocNode::str("list")]),
        Placeholder::Dict => {
            let mut m = DocMapping::new();
            m.insert("dict", DocNode::null());
            DocNode::mapping(m)
        }
        scalar => DocNode::str(scalar.token()),
    }
}

/// Recognizes the placeholder a marker node stands for, if any.
pub fn marker_placeholder(node: &DocNode) -> Option<Placeholder> {
    if is_list_marker(node) {
        return Some(Placeholder::List);
    }
    if is_dict_marker(node) {
        return Some(Placeholder::Dict);
    }
    match node.as_scalar() {
        Some(s) if s.kind() == ScalarKind::Str => Placeholder::from_scalar_token(s.text()),
        _ => None,
    }
}

fn is_bool_marker(node: &DocNode) -> bool {
    node.as_str() == Some("bool")
}

/// Renders one parsed template file.
///
/// Returns one output text per truth assignment of the file's
/// bool-placeholder conditions; a file without such conditions renders to
/// exactly one text. Outputs are deduplicated and deterministic.
pub fn render_file(
    ast: &TemplateAst,
    defines: &DefineIndex,
    ctx: &RenderContext,
) -> Result<Vec<String>, TemplateError> {
    let mut cond_refs = BTreeSet::new();
    collect_bool_condition_refs(&ast.nodes, defines, ctx, 0, &mut cond_refs);
    let assignments = enumerate_assignments(&cond_refs);

    let mut outputs = Vec::new();
    for assignment in assignments {
        let mut renderer = Renderer {
            template: &ast.source_name,
            defines,
            ctx,
            assignment,
            depth: 0,
        };
        let mut out = String::new();
        renderer.render_nodes(&ast.nodes, &Scope::Root, &mut out)?;
        if !outputs.contains(&out) {
            outputs.push(out);
        }
    }
    Ok(outputs)
}

/// Breadth cap on condition branching: beyond this many independent bool
/// placeholders the full cartesian product is replaced by all-true,
/// all-false and single toggles, which still covers every branch once.
const MAX_EXHAUSTIVE_CONDS: usize = 6;

fn enumerate_assignments(refs: &BTreeSet<String>) -> Vec<BTreeMap<String, bool>> {
    let names: Vec<&String> = refs.iter().collect();
    let k = names.len();
    if k == 0 {
        return vec![BTreeMap::new()];
    }
    if k <= MAX_EXHAUSTIVE_CONDS {
        (0..(1usize << k))
            .map(|bits| {
                names
                    .iter()
                    .enumerate()
                    .map(|(i, name)| ((*name).clone(), bits & (1 << i) != 0))
                    .collect()
            })
            .collect()
    } else {
        let mut out = Vec::new();
        let all = |v: bool| -> BTreeMap<String, bool> {
            names.iter().map(|n| ((*n).clone(), v)).collect()
        };
        out.push(all(true));
        out.push(all(false));
        for flip in &names {
            let mut a = all(true);
            a.insert((*flip).clone(), false);
            out.push(a);
        }
        out
    }
}

fn collect_bool_condition_refs(
    nodes: &[TemplateNode],
    defines: &DefineIndex,
    ctx: &RenderContext,
    depth: usize,
    out: &mut BTreeSet<String>,
) {
    if depth > 16 {
        return;
    }
    for node in nodes {
        match node {
            TemplateNode::If {
                cond,
                then_body,
                else_body,
            } => {
                collect_refs_in_pipeline(cond, ctx, out);
                collect_bool_condition_refs(then_body, defines, ctx, depth + 1, out);
                collect_bool_condition_refs(else_body, defines, ctx, depth + 1, out);
            }
            TemplateNode::Range { body, .. } => {
                collect_bool_condition_refs(body, defines, ctx, depth + 1, out);
            }
            TemplateNode::TemplateCall { name, .. } => {
                if let Some(body) = defines.get(name) {
                    collect_bool_condition_refs(body, defines, ctx, depth + 1, out);
                }
            }
            TemplateNode::Define { body, .. } => {
                collect_bool_condition_refs(body, defines, ctx, depth + 1, out);
            }
            TemplateNode::Literal(_) | TemplateNode::Expr(_) => {}
        }
    }
}

fn collect_refs_in_pipeline(p: &Pipeline, ctx: &RenderContext, out: &mut BTreeSet<String>) {
    collect_refs_in_term(&p.head, ctx, out);
    for call in &p.calls {
        for arg in &call.args {
            collect_refs_in_term(arg, ctx, out);
        }
    }
}

fn collect_refs_in_term(term: &Term, ctx: &RenderContext, out: &mut BTreeSet<String>) {
    match term {
        Term::Ref(r) => {
            if let Ok(Some(v)) = resolve_context_ref(r, ctx) {
                if is_bool_marker(&v) {
                    out.insert(r.text());
                }
            }
        }
        Term::Call(call) => {
            for arg in &call.args {
                collect_refs_in_term(arg, ctx, out);
            }
        }
        Term::Paren(p) => collect_refs_in_pipeline(p, ctx, out),
        Term::Str(_) | Term::Num(_) | Term::Bool(_) => {}
    }
}

/// Resolves a `.Values`/`.Release`/`.Chart` reference against the context
/// (scope-independent part of resolution). `Ok(None)` means missing.
fn resolve_context_ref(r: &RefPath, ctx: &RenderContext) -> Result<Option<DocNode>, ()> {
    let parts = &r.parts;
    match parts.first().map(String::as_str) {
        Some("Values") => {
            let mut cur = &ctx.values;
            for key in &parts[1..] {
                match cur.as_mapping().and_then(|m| m.get(key)) {
                    Some(next) => cur = next,
                    None => return Ok(None),
                }
            }
            Ok(Some(cur.clone()))
        }
        Some("Release") => match parts.get(1).map(String::as_str) {
            Some("Name") => Ok(Some(DocNode::str(ctx.release.name.clone()))),
            Some("Service") => Ok(Some(DocNode::str(ctx.release.service.clone()))),
            _ => Ok(None),
        },
        Some("Chart") => match parts.get(1).map(String::as_str) {
            Some("Name") => Ok(Some(DocNode::str(ctx.chart_name.clone()))),
            _ => Ok(None),
        },
        _ => Err(()),
    }
}

/// The current dot object.
#[derive(Clone)]
enum Scope<'a> {
    /// Top-level context (`.` is the root object).
    Root,
    /// Inside a `range` over a concrete sequence, or a template call with a
    /// non-root context.
    Node(&'a DocNode),
    /// Inside a `range` over a `[list]` placeholder: every element
    /// reference renders as the `string` placeholder token.
    Wildcard,
}

struct Renderer<'a> {
    template: &'a str,
    defines: &'a DefineIndex,
    ctx: &'a RenderContext,
    assignment: BTreeMap<String, bool>,
    depth: usize,
}

impl<'a> Renderer<'a> {
    fn render_nodes(
        &mut self,
        nodes: &[TemplateNode],
        scope: &Scope,
        out: &mut String,
    ) -> Result<(), TemplateError> {
        for node in nodes {
            match node {
                TemplateNode::Literal(text) => out.push_str(text),
                TemplateNode::Define { .. } => {}
                TemplateNode::Expr(pipeline) => {
                    let value = self.eval_pipeline(pipeline, scope, false)?;
                    out.push_str(&self.stringify(&value, pipeline.pos)?);
                }
                TemplateNode::If {
                    cond,
                    then_body,
                    else_body,
                } => {
                    let truthy = self.eval_condition(cond, scope)?;
                    if truthy {
                        self.render_nodes(then_body, scope, out)?;
                    } else {
                        self.render_nodes(else_body, scope, out)?;
                    }
                }
                TemplateNode::Range { over, body } => {
                    let collection = self.eval_pipeline(over, scope, true)?;
                    if is_list_marker(&collection) {
                        self.render_nodes(body, &Scope::Wildcard, out)?;
                    } else {
                        match &collection.value {
                            DocValue::Sequence(items) => {
                                for item in items {
                                    self.render_nodes(body, &Scope::Node(item), out)?;
                                }
                            }
                            DocValue::Mapping(m) => {
                                for (_, item) in m.iter() {
                                    self.render_nodes(body, &Scope::Node(item), out)?;
                                }
                            }
                            DocValue::Scalar(s) if s.kind() == ScalarKind::Null => {}
                            DocValue::Scalar(_) => {
                                return Err(TemplateError::Render {
                                    template: self.template.to_string(),
                                    position: over.pos,
                                    message: "range needs a sequence or mapping".to_string(),
                                })
                            }
                        }
                    }
                }
                TemplateNode::TemplateCall { name, context, pos } => {
                    let body = self
                        .defines
                        .get(name)
                        .ok_or_else(|| TemplateError::TemplateCallUnknown { name: name.clone() })?;
                    if self.depth > 32 {
                        return Err(TemplateError::Render {
                            template: self.template.to_string(),
                            position: *pos,
                            message: format!("template call cycle through `{name}`"),
                        });
                    }
                    let call_value;
                    let call_scope = match context {
                        None => Scope::Root,
                        Some(r) if r.parts.is_empty() && !r.rooted => scope.clone(),
                        Some(r) if r.parts.is_empty() => Scope::Root,
                        Some(r) => match self.resolve_ref(r, scope)? {
                            Some(v) => {
                                call_value = v;
                                Scope::Node(&call_value)
                            }
                            None => {
                                return Err(self.unresolved(r, *pos));
                            }
                        },
                    };
                    self.depth += 1;
                    let body = body.clone();
                    self.render_nodes(&body, &call_scope, out)?;
                    self.depth -= 1;
                }
            }
        }
        Ok(())
    }

    fn unresolved(&self, r: &RefPath, pos: Position) -> TemplateError {
        TemplateError::UnresolvedReference {
            template: self.template.to_string(),
            path: r.text(),
            position: pos,
        }
    }

    /// Resolves a reference in the current scope. `Ok(None)` means missing.
    fn resolve_ref(&self, r: &RefPath, scope: &Scope) -> Result<Option<DocNode>, TemplateError> {
        if r.rooted {
            return match resolve_context_ref(r, self.ctx) {
                Ok(v) => Ok(v),
                Err(()) => Ok(None),
            };
        }
        match resolve_context_ref(r, self.ctx) {
            Ok(v) => Ok(v),
            // Not a context name: resolve relative to the current dot.
            Err(()) => match scope {
                Scope::Wildcard => Ok(Some(DocNode::str(Placeholder::Str.token()))),
                Scope::Node(node) => {
                    if r.parts.is_empty() {
                        return Ok(Some((*node).clone()));
                    }
                    let mut cur = *node;
                    for key in &r.parts {
                        match cur.as_mapping().and_then(|m| m.get(key)) {
                            Some(next) => cur = next,
                            None => return Ok(None),
                        }
                    }
                    Ok(Some(cur.clone()))
                }
                Scope::Root => Ok(None),
            },
        }
    }

    fn eval_condition(&mut self, cond: &Pipeline, scope: &Scope) -> Result<bool, TemplateError> {
        let value = self.eval_pipeline_inner(cond, scope, true, true)?;
        Ok(truthy(&value))
    }

    fn eval_pipeline(
        &mut self,
        p: &Pipeline,
        scope: &Scope,
        lenient: bool,
    ) -> Result<DocNode, TemplateError> {
        self.eval_pipeline_inner(p, scope, lenient, false)
    }

    fn eval_pipeline_inner(
        &mut self,
        p: &Pipeline,
        scope: &Scope,
        lenient: bool,
        condition: bool,
    ) -> Result<DocNode, TemplateError> {
        // A head followed by `default` tolerates a missing reference.
        let head_lenient =
            lenient || matches!(p.calls.first(), Some(call) if call.func == Func::Default);
        let mut value = self.eval_term(&p.head, scope, head_lenient, condition, p.pos)?;
        for call in &p.calls {
            let mut args = Vec::with_capacity(call.args.len() + 1);
            for arg in &call.args {
                args.push(self.eval_term(arg, scope, lenient, condition, p.pos)?);
            }
            args.push(value);
            value = self.apply(call.func, args, p.pos)?;
        }
        Ok(value)
    }

    fn eval_term(
        &mut self,
        term: &Term,
        scope: &Scope,
        lenient: bool,
        condition: bool,
        pos: Position,
    ) -> Result<DocNode, TemplateError> {
        match term {
            Term::Str(s) => Ok(DocNode::str(s.clone())),
            Term::Num(n) => Ok(DocNode::scalar(n.clone())),
            Term::Bool(b) => Ok(DocNode::bool(*b)),
            Term::Ref(r) => {
                if condition {
                    if let Some(assigned) = self.assignment.get(&r.text()) {
                        return Ok(DocNode::bool(*assigned));
                    }
                }
                match self.resolve_ref(r, scope)? {
                    Some(v) => Ok(v),
                    None if lenient || condition => Ok(DocNode::null()),
                    None => Err(self.unresolved(r, pos)),
                }
            }
            Term::Call(call) => {
                let mut args = Vec::with_capacity(call.args.len());
                for arg in &call.args {
                    args.push(self.eval_term(arg, scope, lenient, condition, pos)?);
                }
                self.apply(call.func, args, pos)
            }
            Term::Paren(p) => self.eval_pipeline_inner(p, scope, lenient, condition),
        }
    }

    fn apply(
        &self,
        func: Func,
        args: Vec<DocNode>,
        pos: Position,
    ) -> Result<DocNode, TemplateError> {
        let render_err = |message: String| TemplateError::Render {
            template: self.template.to_string(),
            position: pos,
            message,
        };
        let arity = |n: usize| -> Result<(), TemplateError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(render_err(format!(
                    "`{}` takes {} argument(s), got {}",
                    func.name(),
                    n,
                    args.len()
                )))
            }
        };
        match func {
            Func::Default => {
                arity(2)?;
                let (default, value) = (&args[0], &args[1]);
                Ok(if truthy(value) {
                    value.clone()
                } else {
                    default.clone()
                })
            }
            Func::Quote => {
                arity(1)?;
                let text = scalar_arg(&args[0], "quote", &render_err)?;
                Ok(DocNode::str(format!(
                    "\"{}\"",
                    text.replace('\\', "\\\\").replace('"', "\\\"")
                )))
            }
            Func::Upper => {
                arity(1)?;
                let text = scalar_arg(&args[0], "upper", &render_err)?;
                Ok(DocNode::str(text.to_uppercase()))
            }
            Func::Lower => {
                arity(1)?;
                let text = scalar_arg(&args[0], "lower", &render_err)?;
                Ok(DocNode::str(text.to_lowercase()))
            }
            Func::Indent | Func::Nindent => {
                arity(2)?;
                let n = int_arg(&args[0], func.name(), &render_err)?;
                let text = scalar_arg(&args[1], func.name(), &render_err)?;
                let pad = " ".repeat(n as usize);
                let indented: String = text
                    .lines()
                    .map(|line| format!("{pad}{line}"))
                    .collect::<Vec<_>>()
                    .join("\n");
                Ok(DocNode::str(if func == Func::Nindent {
                    format!("\n{indented}")
                } else {
                    indented
                }))
            }
            Func::ToYaml => {
                arity(1)?;
                let text = doc::to_yaml(&args[0]);
                Ok(DocNode::str(text.trim_end_matches('\n').to_string()))
            }
            Func::Trunc => {
                arity(2)?;
                let n = int_arg(&args[0], "trunc", &render_err)?;
                let text = scalar_arg(&args[1], "trunc", &render_err)?;
                Ok(DocNode::str(
                    text.chars().take(n.max(0) as usize).collect::<String>(),
                ))
            }
            Func::TrimSuffix => {
                arity(2)?;
                let suffix = scalar_arg(&args[0], "trimSuffix", &render_err)?;
                let text = scalar_arg(&args[1], "trimSuffix", &render_err)?;
                Ok(DocNode::str(
                    text.strip_suffix(&suffix).unwrap_or(&text).to_string(),
                ))
            }
            Func::Eq => {
                arity(2)?;
                let eq = match (args[0].as_scalar(), args[1].as_scalar()) {
                    (Some(a), Some(b)) => a == b,
                    _ => false,
                };
                Ok(DocNode::bool(eq))
            }
            Func::Not => {
                arity(1)?;
                Ok(DocNode::bool(!truthy(&args[0])))
            }
            Func::And => Ok(DocNode::bool(args.iter().all(truthy))),
            Func::Or => Ok(DocNode::bool(args.iter().any(truthy))),
        }
    }

    /// Text form of an evaluated expression value.
    fn stringify(&self, value: &DocNode, pos: Position) -> Result<String, TemplateError> {
        if is_list_marker(value) {
            return Ok(Placeholder::List.token().to_string());
        }
        if is_dict_marker(value) {
            return Ok(Placeholder::Dict.token().to_string());
        }
        match &value.value {
            DocValue::Scalar(s) => Ok(match s.kind() {
                ScalarKind::Null => String::new(),
                _ => s.text().to_string(),
            }),
            DocValue::Sequence(_) | DocValue::Mapping(_) => Err(TemplateError::Render {
                template: self.template.to_string(),
                position: pos,
                message: "cannot interpolate a structured value; pipe it through toYaml"
                    .to_string(),
            }),
        }
    }
}

fn truthy(node: &DocNode) -> bool {
    match &node.value {
        DocValue::Scalar(s) => s.truthy(),
        DocValue::Sequence(items) => !items.is_empty(),
        DocValue::Mapping(m) => !m.is_empty(),
    }
}

fn scalar_arg(
    node: &DocNode,
    func: &str,
    err: &dyn Fn(String) -> TemplateError,
) -> Result<String, TemplateError> {
    match node.as_scalar() {
        Some(s) if s.kind() == ScalarKind::Null => Ok(String::new()),
        Some(s) => Ok(s.text().to_string()),
        None => Err(err(format!("`{func}` needs a scalar argument"))),
    }
}

fn int_arg(
    node: &DocNode,
    func: &str,
    err: &dyn Fn(String) -> TemplateError,
) -> Result<i64, TemplateError> {
    node.as_scalar()
        .and_then(Scalar::as_int)
        .ok_or_else(|| err(format!("`{func}` needs an integer argument")))
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("document {index} has no top-level `kind`")]
    MissingKind { index: usize },
    #[error("document {index} has no top-level `apiVersion`")]
    MissingApiVersion { index: usize },
    #[error(transparent)]
    Parse(#[from] crate::doc::ParseError),
}

/// Splits rendered text into manifest documents.
///
/// Empty and null documents are dropped; every remaining document must
/// carry top-level `kind` and `apiVersion`.
pub fn split_manifests(text: &str) -> Result<Vec<DocNode>, ManifestError> {
    let raw = parse_raw_documents(text)?;
    let mut docs = Vec::new();
    for node in raw {
        let doc = node.into_doc().map_err(ManifestError::Parse)?;
        if matches!(doc.as_scalar(), Some(s) if s.kind() == ScalarKind::Null) {
            continue;
        }
        let index = docs.len();
        let mapping = doc
            .as_mapping()
            .ok_or(ManifestError::MissingKind { index })?;
        match mapping.get("kind").and_then(DocNode::as_scalar) {
            Some(s) if s.kind() == ScalarKind::Str && !s.text().is_empty() => {}
            _ => return Err(ManifestError::MissingKind { index }),
        }
        if !mapping.contains_key("apiVersion") {
            return Err(ManifestError::MissingApiVersion { index });
        }
        docs.push(doc);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::super::parse_template;
    use super::*;
    use crate::doc::{parse_document, DocFormat};

    fn ctx_from(values_yaml: &str) -> RenderContext {
        RenderContext {
            values: parse_document(values_yaml, DocFormat::Yaml).unwrap(),
            release: ReleaseInfo {
                name: "rel".to_string(),
                service: "Helm".to_string(),
            },
            chart_name: "test".to_string(),
        }
    }

    fn render_one(template: &str, values_yaml: &str) -> String {
        let ast = parse_template("t.yaml", template).unwrap();
        let defines: DefineIndex = ast
            .defines()
            .map(|(n, b)| (n.to_string(), b.to_vec()))
            .collect();
        let outputs = render_file(&ast, &defines, &ctx_from(values_yaml)).unwrap();
        assert_eq!(outputs.len(), 1, "expected a single rendering");
        outputs.into_iter().next().unwrap()
    }

    #[test]
    fn literal_text_is_identity() {
        let text = "apiVersion: v1\nkind: Service\n";
        assert_eq!(render_one(text, "a: 1"), text);
    }

    #[test]
    fn expr_renders_value_and_placeholder_tokens() {
        let out = render_one(
            "host: {{ .Values.tracking.host }}\nuser: {{ .Values.user }}\n",
            "tracking:\n  host: IP\nuser: string",
        );
        assert_eq!(out, "host: IP\nuser: string\n");
    }

    #[test]
    fn concrete_bool_condition_selects_branch() {
        let tpl = "{{- if .Values.enabled }}\non: yes\n{{- else }}\noff: yes\n{{- end }}\n";
        assert_eq!(render_one(tpl, "enabled: true"), "\non: yes\n");
        assert_eq!(render_one(tpl, "enabled: false"), "\noff: yes\n");
    }

    #[test]
    fn bool_placeholder_condition_renders_both_branches() {
        let ast = parse_template(
            "t",
            "a: 1\n{{- if .Values.flag }}\nextra: 2\n{{- end }}\n",
        )
        .unwrap();
        let outputs = render_file(&ast, &DefineIndex::new(), &ctx_from("flag: bool")).unwrap();
        assert_eq!(outputs.len(), 2);
        assert!(outputs.iter().any(|o| o.contains("extra: 2")));
        assert!(outputs.iter().any(|o| !o.contains("extra: 2")));
    }

    #[test]
    fn range_over_concrete_list() {
        let out = render_one(
            "{{ range .Values.ports }}- port: {{ .port }}\n{{ end }}",
            "ports:\n  - port: 80\n  - port: 443",
        );
        assert_eq!(out, "- port: 80\n- port: 443\n");
    }

    #[test]
    fn range_over_list_placeholder_emits_one_wildcard_body() {
        let out = render_one(
            "{{ range .Values.pullSecrets }}- name: {{ .name }}\n{{ end }}",
            "pullSecrets:\n  - list",
        );
        assert_eq!(out, "- name: string\n");
    }

    #[test]
    fn template_call_and_functions() {
        let tpl = "{{- define \"app.fullname\" -}}\n{{ .Release.Name }}-{{ .Chart.Name }}\n{{- end -}}\nname: {{ template \"app.fullname\" . }}-svc\nsecret: {{ .Values.password | quote }}\nshout: {{ .Values.word | upper | trunc 3 }}\n";
        let out = render_one(tpl, "password: hunter2\nword: banana");
        assert_eq!(
            out,
            "name: rel-test-svc\nsecret: \"hunter2\"\nshout: BAN\n"
        );
    }

    #[test]
    fn default_tolerates_missing_reference() {
        let out = render_one("x: {{ .Values.missing | default 5 }}\n", "a: 1");
        assert_eq!(out, "x: 5\n");
    }

    #[test]
    fn missing_reference_in_expr_is_an_error() {
        let ast = parse_template("t", "x: {{ .Values.missing }}").unwrap();
        let err = render_file(&ast, &DefineIndex::new(), &ctx_from("a: 1")).unwrap_err();
        assert!(matches!(err, TemplateError::UnresolvedReference { .. }));
    }

    #[test]
    fn missing_reference_in_condition_is_falsey() {
        let out = render_one("{{ if .Values.absent }}yes{{ else }}no{{ end }}", "a: 1");
        assert_eq!(out, "no");
    }

    #[test]
    fn toyaml_and_nindent() {
        let out = render_one(
            "securityContext:{{ .Values.sc | toYaml | nindent 2 }}\n",
            "sc:\n  runAsNonRoot: true",
        );
        assert_eq!(out, "securityContext:\n  runAsNonRoot: true\n");
    }

    #[test]
    fn unknown_template_call_fails() {
        let ast = parse_template("t", "{{ template \"nope\" . }}").unwrap();
        let err = render_file(&ast, &DefineIndex::new(), &ctx_from("a: 1")).unwrap_err();
        assert!(matches!(err, TemplateError::TemplateCallUnknown { .. }));
    }

    #[test]
    fn split_two_documents() {
        let docs = split_manifests(
            "apiVersion: v1\nkind: Secret\n---\napiVersion: v1\nkind: Service\n",
        )
        .unwrap();
        assert_eq!(docs.len(), 2);
    }

    #[test]
    fn split_empty_text() {
        assert!(split_manifests("").unwrap().is_empty());
        assert!(split_manifests("---\n---\n").unwrap().is_empty());
    }

    #[test]
    fn split_requires_kind() {
        let err = split_manifests("apiVersion: v1\nname: x\n").unwrap_err();
        assert!(matches!(err, ManifestError::MissingKind { index: 0 }));
    }
}
