//! A constrained Helm-template dialect: parser, renderer and manifest
//! splitting.
//!
//! Supported directives: `{{ expr }}` pipelines over value references and
//! literals, `if`/`else`/`end`, `range`/`end`, `define`/`end`,
//! `template "name" ctx`, comments, and the `{{-`/`-}}` whitespace trim
//! markers. Anything else is a parse error so a chart can never be silently
//! mis-rendered into a weaker policy.

mod parse;
mod render;

pub use parse::parse_template;
pub use render::{
    is_dict_marker, is_list_marker, marker_placeholder, placeholder_marker, render_file,
    split_manifests, DefineIndex, ManifestError, RenderContext, ReleaseInfo,
};

use crate::doc::Position;
use crate::doc::Scalar;
use thiserror::Error;

/// Functions the dialect supports in pipelines and conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Default,
    Quote,
    Upper,
    Lower,
    Indent,
    Nindent,
    ToYaml,
    Trunc,
    TrimSuffix,
    Eq,
    Not,
    And,
    Or,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "default" => Func::Default,
            "quote" => Func::Quote,
            "upper" => Func::Upper,
            "lower" => Func::Lower,
            "indent" => Func::Indent,
            "nindent" => Func::Nindent,
            "toYaml" => Func::ToYaml,
            "trunc" => Func::Trunc,
            "trimSuffix" => Func::TrimSuffix,
            "eq" => Func::Eq,
            "not" => Func::Not,
            "and" => Func::And,
            "or" => Func::Or,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Default => "default",
            Func::Quote => "quote",
            Func::Upper => "upper",
            Func::Lower => "lower",
            Func::Indent => "indent",
            Func::Nindent => "nindent",
            Func::ToYaml => "toYaml",
            Func::Trunc => "trunc",
            Func::TrimSuffix => "trimSuffix",
            Func::Eq => "eq",
            Func::Not => "not",
            Func::And => "and",
            Func::Or => "or",
        }
    }
}

/// A dotted value reference, optionally rooted at `$`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefPath {
    /// True for `$`-prefixed references, which always resolve from the root
    /// context regardless of the current scope.
    pub rooted: bool,
    pub parts: Vec<String>,
}

impl RefPath {
    pub fn text(&self) -> String {
        let mut s = String::new();
        if self.rooted {
            s.push('$');
        }
        if self.parts.is_empty() {
            s.push('.');
        } else {
            for p in &self.parts {
                s.push('.');
                s.push_str(p);
            }
        }
        s
    }
}

/// A pipeline term.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Ref(RefPath),
    Str(String),
    Num(Scalar),
    Bool(bool),
    Call(FnCall),
    Paren(Box<Pipeline>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnCall {
    pub func: Func,
    pub args: Vec<Term>,
}

/// A term piped through zero or more function calls.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub head: Term,
    pub calls: Vec<FnCall>,
    pub pos: Position,
}

/// One node of a parsed template.
#[derive(Debug, Clone, PartialEq)]
pub enum TemplateNode {
    Literal(String),
    Expr(Pipeline),
    If {
        cond: Pipeline,
        then_body: Vec<TemplateNode>,
        else_body: Vec<TemplateNode>,
    },
    Range {
        over: Pipeline,
        body: Vec<TemplateNode>,
    },
    TemplateCall {
        name: String,
        context: Option<RefPath>,
        pos: Position,
    },
    Define {
        name: String,
        body: Vec<TemplateNode>,
    },
}

/// A parsed template file.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateAst {
    pub source_name: String,
    pub nodes: Vec<TemplateNode>,
}

impl TemplateAst {
    /// The `define` blocks declared in this file, in order.
    pub fn defines(&self) -> impl Iterator<Item = (&str, &[TemplateNode])> {
        self.nodes.iter().filter_map(|n| match n {
            TemplateNode::Define { name, body } => Some((name.as_str(), body.as_slice())),
            _ => None,
        })
    }
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("{template}: template syntax error at {position}: expected {expected}")]
    Syntax {
        template: String,
        position: Position,
        expected: String,
    },
    #[error("{template}: unsupported function `{name}` at {position}")]
    UnsupportedFunction {
        template: String,
        name: String,
        position: Position,
    },
    #[error("{template}: unresolved reference `{path}` at {position}")]
    UnresolvedReference {
        template: String,
        path: String,
        position: Position,
    },
    #[error("call to unknown named template `{name}`")]
    TemplateCallUnknown { name: String },
    #[error("{template}: {message} at {position}")]
    Render {
        template: String,
        position: Position,
        message: String,
    },
}
