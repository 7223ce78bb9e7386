//! Template lexing and parsing.

use super::{FnCall, Func, Pipeline, RefPath, TemplateAst, TemplateError, TemplateNode, Term};
use crate::doc::{Position, Scalar, ScalarKind};

/// Parses template text into an AST.
///
/// Unsupported functions and directives fail here, at load time.
pub fn parse_template(source_name: &str, text: &str) -> Result<TemplateAst, TemplateError> {
    let pieces = scan(source_name, text)?;
    let mut parser = BlockParser {
        template: source_name.to_string(),
        pieces,
        index: 0,
    };
    let nodes = parser.parse_body(&[])?;
    if parser.index < parser.pieces.len() {
        let pos = parser.current_pos();
        return Err(TemplateError::Syntax {
            template: source_name.to_string(),
            position: pos,
            expected: "no stray `end`/`else` outside a block".to_string(),
        });
    }
    Ok(TemplateAst {
        source_name: source_name.to_string(),
        nodes,
    })
}

/// A lexed fragment of the file: literal text or one `{{ ... }}` action.
enum Piece {
    Literal(String),
    Action { tokens: Vec<Token>, pos: Position },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Ref(RefPath),
    Str(String),
    Num(Scalar),
    Pipe,
    LParen,
    RParen,
}

struct Cursor<'a> {
    text: &'a str,
    bytes: &'a [u8],
    offset: usize,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor {
            text,
            bytes: text.as_bytes(),
            offset: 0,
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Position {
        Position {
            line: self.line,
            column: self.col,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.offset).copied()
    }

    fn starts_with(&self, s: &str) -> bool {
        self.text[self.offset..].starts_with(s)
    }

    fn bump(&mut self) -> Option<char> {
        let ch = self.text[self.offset..].chars().next()?;
        self.offset += ch.len_utf8();
        if ch == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(ch)
    }

    fn bump_str(&mut self, s: &str) {
        for _ in s.chars() {
            self.bump();
        }
    }
}

/// Splits the file into literals and actions, applying trim markers.
fn scan(template: &str, text: &str) -> Result<Vec<Piece>, TemplateError> {
    let mut cur = Cursor::new(text);
    let mut pieces: Vec<Piece> = Vec::new();
    let mut literal = String::new();

    while cur.peek().is_some() {
        if cur.starts_with("{{") {
            let action_pos = cur.pos();
            cur.bump_str("{{");
            let ltrim = cur.starts_with("-")
                && matches!(cur.bytes.get(cur.offset + 1), Some(b' ') | Some(b'\t') | Some(b'\n'));
            if ltrim {
                cur.bump();
                truncate_trailing_whitespace(&mut literal);
            }
            if !literal.is_empty() {
                pieces.push(Piece::Literal(std::mem::take(&mut literal)));
            }
            // Comment action.
            skip_spaces(&mut cur);
            if cur.starts_with("/*") {
                let rtrim = consume_comment(template, &mut cur, action_pos)?;
                if rtrim {
                    skip_leading_whitespace(&mut cur);
                }
                continue;
            }
            let (tokens, rtrim) = lex_action(template, &mut cur, action_pos)?;
            if !tokens.is_empty() {
                pieces.push(Piece::Action {
                    tokens,
                    pos: action_pos,
                });
            }
            if rtrim {
                skip_leading_whitespace(&mut cur);
            }
        } else {
            literal.push(cur.bump().unwrap());
        }
    }
    if !literal.is_empty() {
        pieces.push(Piece::Literal(literal));
    }
    Ok(pieces)
}

/// `{{-` trims all whitespace (including newlines) immediately before the
/// action; `-}}` mirrors it after.
fn truncate_trailing_whitespace(s: &mut String) {
    let trimmed = s.trim_end_matches([' ', '\t', '\r', '\n']).len();
    s.truncate(trimmed);
}

fn skip_leading_whitespace(cur: &mut Cursor) {
    while matches!(cur.peek(), Some(b' ') | Some(b'\t') | Some(b'\r') | Some(b'\n')) {
        cur.bump();
    }
}

fn skip_spaces(cur: &mut Cursor) {
    while matches!(cur.peek(), Some(b' ') | Some(b'\t') | Some(b'\n') | Some(b'\r')) {
        cur.bump();
    }
}

fn consume_comment(
    template: &str,
    cur: &mut Cursor,
    start: Position,
) -> Result<bool, TemplateError> {
    cur.bump_str("/*");
    loop {
        if cur.starts_with("*/") {
            cur.bump_str("*/");
            break;
        }
        if cur.bump().is_none() {
            return Err(TemplateError::Syntax {
                template: template.to_string(),
                position: start,
                expected: "`*/` to close comment".to_string(),
            });
        }
    }
    skip_spaces(cur);
    close_action(template, cur, start)
}

/// Consumes the closing `}}`/`-}}`, returning whether right trim applies.
fn close_action(template: &str, cur: &mut Cursor, start: Position) -> Result<bool, TemplateError> {
    if cur.starts_with("-}}") {
        cur.bump_str("-}}");
        Ok(true)
    } else if cur.starts_with("}}") {
        cur.bump_str("}}");
        Ok(false)
    } else {
        Err(TemplateError::Syntax {
            template: template.to_string(),
            position: cur.pos(),
            expected: format!("`}}}}` to close the action opened at {start}"),
        })
    }
}

fn lex_action(
    template: &str,
    cur: &mut Cursor,
    start: Position,
) -> Result<(Vec<Token>, bool), TemplateError> {
    let mut tokens = Vec::new();
    loop {
        skip_spaces(cur);
        if cur.starts_with("-}}") || cur.starts_with("}}") {
            let rtrim = close_action(template, cur, start)?;
            return Ok((tokens, rtrim));
        }
        let pos = cur.pos();
        match cur.peek() {
            None => {
                return Err(TemplateError::Syntax {
                    template: template.to_string(),
                    position: start,
                    expected: "`}}` to close the action".to_string(),
                })
            }
            Some(b'|') => {
                cur.bump();
                tokens.push(Token::Pipe);
            }
            Some(b'(') => {
                cur.bump();
                tokens.push(Token::LParen);
            }
            Some(b')') => {
                cur.bump();
                tokens.push(Token::RParen);
            }
            Some(b'"') => {
                cur.bump();
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        None => {
                            return Err(TemplateError::Syntax {
                                template: template.to_string(),
                                position: pos,
                                expected: "closing `\"`".to_string(),
                            })
                        }
                        Some('"') => break,
                        Some('\\') => match cur.bump() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some('\\') => s.push('\\'),
                            Some('"') => s.push('"'),
                            Some(other) => s.push(other),
                            None => {
                                return Err(TemplateError::Syntax {
                                    template: template.to_string(),
                                    position: pos,
                                    expected: "escape sequence".to_string(),
                                })
                            }
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                tokens.push(Token::Str(s));
            }
            Some(b'.') | Some(b'$') => {
                tokens.push(Token::Ref(lex_ref(cur)));
            }
            Some(b) if b.is_ascii_digit() || b == b'-' || b == b'+' => {
                let mut s = String::new();
                s.push(cur.bump().unwrap());
                while matches!(cur.peek(), Some(b) if b.is_ascii_digit() || b == b'.') {
                    s.push(cur.bump().unwrap());
                }
                let kind = if s.contains('.') {
                    ScalarKind::Float
                } else {
                    ScalarKind::Int
                };
                tokens.push(Token::Num(Scalar::resolved(kind, &s)));
            }
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => {
                let mut s = String::new();
                while matches!(cur.peek(), Some(b) if b.is_ascii_alphanumeric() || b == b'_') {
                    s.push(cur.bump().unwrap());
                }
                tokens.push(Token::Ident(s));
            }
            Some(other) => {
                return Err(TemplateError::Syntax {
                    template: template.to_string(),
                    position: pos,
                    expected: format!("a template token, found `{}`", other as char),
                })
            }
        }
    }
}

fn lex_ref(cur: &mut Cursor) -> RefPath {
    let rooted = cur.peek() == Some(b'$');
    if rooted {
        cur.bump();
    }
    let mut parts = Vec::new();
    while cur.peek() == Some(b'.') {
        cur.bump();
        let mut part = String::new();
        while matches!(cur.peek(), Some(b) if b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
        {
            part.push(cur.bump().unwrap());
        }
        if part.is_empty() {
            break;
        }
        parts.push(part);
    }
    RefPath { rooted, parts }
}

struct BlockParser {
    template: String,
    pieces: Vec<Piece>,
    index: usize,
}

/// Keywords that terminate the current block body.
const BLOCK_ENDERS: &[&str] = &["end", "else"];

impl BlockParser {
    fn current_pos(&self) -> Position {
        match self.pieces.get(self.index) {
            Some(Piece::Action { pos, .. }) => *pos,
            _ => Position { line: 1, column: 1 },
        }
    }

    fn err(&self, pos: Position, expected: impl Into<String>) -> TemplateError {
        TemplateError::Syntax {
            template: self.template.clone(),
            position: pos,
            expected: expected.into(),
        }
    }

    /// Parses nodes until one of `stop` keywords (left unconsumed) or EOF.
    fn parse_body(&mut self, stop: &[&str]) -> Result<Vec<TemplateNode>, TemplateError> {
        let mut nodes = Vec::new();
        while self.index < self.pieces.len() {
            match &self.pieces[self.index] {
                Piece::Literal(text) => {
                    nodes.push(TemplateNode::Literal(text.clone()));
                    self.index += 1;
                }
                Piece::Action { tokens, pos } => {
                    let keyword = match tokens.first() {
                        Some(Token::Ident(name)) => Some(name.as_str()),
                        _ => None,
                    };
                    if let Some(kw) = keyword {
                        if stop.contains(&kw) {
                            return Ok(nodes);
                        }
                        if BLOCK_ENDERS.contains(&kw) && !stop.contains(&kw) {
                            return Err(self.err(*pos, format!("no `{kw}` outside a block")));
                        }
                    }
                    let pos = *pos;
                    match keyword {
                        Some("if") => nodes.push(self.parse_if(pos)?),
                        Some("range") => nodes.push(self.parse_range(pos)?),
                        Some("define") => nodes.push(self.parse_define(pos)?),
                        Some("template") => nodes.push(self.parse_template_call(pos)?),
                        _ => {
                            let tokens = match &self.pieces[self.index] {
                                Piece::Action { tokens, .. } => tokens.clone(),
                                _ => unreachable!(),
                            };
                            let pipeline = self.parse_pipeline(&tokens, pos)?;
                            nodes.push(TemplateNode::Expr(pipeline));
                            self.index += 1;
                        }
                    }
                }
            }
        }
        if stop.is_empty() {
            Ok(nodes)
        } else {
            Err(self.err(
                Position { line: 0, column: 0 },
                format!("`{}` before end of file", stop.join("` or `")),
            ))
        }
    }

    fn action_tokens(&self) -> (&[Token], Position) {
        match &self.pieces[self.index] {
            Piece::Action { tokens, pos } => (tokens, *pos),
            _ => unreachable!("caller checked"),
        }
    }

    fn parse_if(&mut self, pos: Position) -> Result<TemplateNode, TemplateError> {
        let (tokens, _) = self.action_tokens();
        let cond_tokens: Vec<Token> = tokens[1..].to_vec();
        if cond_tokens.is_empty() {
            return Err(self.err(pos, "a condition after `if`"));
        }
        let cond = self.parse_pipeline(&cond_tokens, pos)?;
        self.index += 1;
        let then_body = self.parse_body(&["end", "else"])?;
        self.finish_else_chain(cond, then_body, pos)
    }

    fn finish_else_chain(
        &mut self,
        cond: Pipeline,
        then_body: Vec<TemplateNode>,
        _pos: Position,
    ) -> Result<TemplateNode, TemplateError> {
        let (tokens, else_pos) = self.action_tokens();
        let else_body = match tokens.first() {
            Some(Token::Ident(kw)) if kw == "else" => {
                if tokens.len() > 1 {
                    match &tokens[1] {
                        Token::Ident(kw2) if kw2 == "if" => {
                            let cond_tokens: Vec<Token> = tokens[2..].to_vec();
                            let nested_cond = self.parse_pipeline(&cond_tokens, else_pos)?;
                            self.index += 1;
                            let nested_then = self.parse_body(&["end", "else"])?;
                            let nested =
                                self.finish_else_chain(nested_cond, nested_then, else_pos)?;
                            return Ok(TemplateNode::If {
                                cond,
                                then_body,
                                else_body: vec![nested],
                            });
                        }
                        _ => return Err(self.err(else_pos, "`if` after `else`")),
                    }
                }
                self.index += 1;
                let body = self.parse_body(&["end"])?;
                self.expect_end()?;
                body
            }
            Some(Token::Ident(kw)) if kw == "end" => {
                self.index += 1;
                Vec::new()
            }
            _ => return Err(self.err(else_pos, "`end` or `else`")),
        };
        Ok(TemplateNode::If {
            cond,
            then_body,
            else_body,
        })
    }

    fn expect_end(&mut self) -> Result<(), TemplateError> {
        match self.pieces.get(self.index) {
            Some(Piece::Action { tokens, pos }) => match tokens.first() {
                Some(Token::Ident(kw)) if kw == "end" => {
                    self.index += 1;
                    Ok(())
                }
                _ => Err(self.err(*pos, "`end`")),
            },
            _ => Err(self.err(Position { line: 0, column: 0 }, "`end` before end of file")),
        }
    }

    fn parse_range(&mut self, pos: Position) -> Result<TemplateNode, TemplateError> {
        let (tokens, _) = self.action_tokens();
        let over_tokens: Vec<Token> = tokens[1..].to_vec();
        if over_tokens.is_empty() {
            return Err(self.err(pos, "a collection after `range`"));
        }
        let over = self.parse_pipeline(&over_tokens, pos)?;
        self.index += 1;
        let body = self.parse_body(&["end"])?;
        self.expect_end()?;
        Ok(TemplateNode::Range { over, body })
    }

    fn parse_define(&mut self, pos: Position) -> Result<TemplateNode, TemplateError> {
        let (tokens, _) = self.action_tokens();
        let name = match tokens.get(1) {
            Some(Token::Str(name)) => name.clone(),
            _ => return Err(self.err(pos, "a quoted name after `define`")),
        };
        if tokens.len() > 2 {
            return Err(self.err(pos, "nothing after the define name"));
        }
        self.index += 1;
        let body = self.parse_body(&["end"])?;
        self.expect_end()?;
        Ok(TemplateNode::Define { name, body })
    }

    fn parse_template_call(&mut self, pos: Position) -> Result<TemplateNode, TemplateError> {
        let (tokens, _) = self.action_tokens();
        let name = match tokens.get(1) {
            Some(Token::Str(name)) => name.clone(),
            _ => return Err(self.err(pos, "a quoted name after `template`")),
        };
        let context = match tokens.get(2) {
            None => None,
            Some(Token::Ref(r)) => Some(r.clone()),
            Some(_) => return Err(self.err(pos, "a reference context after the template name")),
        };
        if tokens.len() > 3 {
            return Err(self.err(pos, "nothing after the template context"));
        }
        self.index += 1;
        Ok(TemplateNode::TemplateCall { name, context, pos })
    }

    /// Parses an action token list as a pipeline: `term | fn args | fn`.
    fn parse_pipeline(&self, tokens: &[Token], pos: Position) -> Result<Pipeline, TemplateError> {
        let stages: Vec<&[Token]> = split_pipes(tokens);
        if stages.is_empty() || stages[0].is_empty() {
            return Err(self.err(pos, "an expression"));
        }
        let mut ts = TermStream {
            parser: self,
            tokens: stages[0],
            index: 0,
            pos,
        };
        let head = ts.parse_head_term()?;
        ts.expect_exhausted()?;
        let mut calls = Vec::new();
        for stage in &stages[1..] {
            if stage.is_empty() {
                return Err(self.err(pos, "a function after `|`"));
            }
            let mut ts = TermStream {
                parser: self,
                tokens: stage,
                index: 0,
                pos,
            };
            let call = ts.parse_fncall()?;
            ts.expect_exhausted()?;
            calls.push(call);
        }
        Ok(Pipeline { head, calls, pos })
    }

}

fn split_pipes(tokens: &[Token]) -> Vec<&[Token]> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate() {
        match t {
            Token::LParen => depth += 1,
            Token::RParen => depth = depth.saturating_sub(1),
            Token::Pipe if depth == 0 => {
                out.push(&tokens[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&tokens[start..]);
    out
}

struct TermStream<'a> {
    parser: &'a BlockParser,
    tokens: &'a [Token],
    index: usize,
    pos: Position,
}

impl<'a> TermStream<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.index)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.index);
        if t.is_some() {
            self.index += 1;
        }
        t
    }

    fn err(&self, expected: impl Into<String>) -> TemplateError {
        self.parser.err(self.pos, expected)
    }

    fn expect_exhausted(&self) -> Result<(), TemplateError> {
        if self.index == self.tokens.len() {
            Ok(())
        } else {
            Err(self.err("end of expression"))
        }
    }

    /// The first stage of a pipeline: a lone term, or a function call with
    /// arguments (`default "x" .Values.y`).
    fn parse_head_term(&mut self) -> Result<Term, TemplateError> {
        match self.peek() {
            Some(Token::Ident(name)) => {
                let name = name.clone();
                if name == "true" || name == "false" {
                    self.next();
                    return Ok(Term::Bool(name == "true"));
                }
                let call = self.parse_fncall()?;
                Ok(Term::Call(call))
            }
            _ => {
                let term = self.parse_arg_term()?;
                Ok(term)
            }
        }
    }

    /// A function name followed by its argument terms to end of stage.
    fn parse_fncall(&mut self) -> Result<FnCall, TemplateError> {
        let (name, func) = match self.next() {
            Some(Token::Ident(name)) => (name.clone(), Func::from_name(name)),
            _ => return Err(self.err("a function name")),
        };
        let func = func.ok_or_else(|| TemplateError::UnsupportedFunction {
            template: self.parser.template.clone(),
            name: name.clone(),
            position: self.pos,
        })?;
        let mut args = Vec::new();
        while self.peek().is_some() {
            args.push(self.parse_arg_term()?);
        }
        Ok(FnCall { func, args })
    }

    /// A single argument term (no trailing argument list).
    fn parse_arg_term(&mut self) -> Result<Term, TemplateError> {
        match self.next() {
            Some(Token::Ref(r)) => Ok(Term::Ref(r.clone())),
            Some(Token::Str(s)) => Ok(Term::Str(s.clone())),
            Some(Token::Num(n)) => Ok(Term::Num(n.clone())),
            Some(Token::Ident(name)) if name == "true" || name == "false" => {
                Ok(Term::Bool(name == "true"))
            }
            Some(Token::Ident(name)) => {
                // A bare function name as an argument is only meaningful
                // with parentheses; reject unknown names loudly.
                Err(TemplateError::UnsupportedFunction {
                    template: self.parser.template.clone(),
                    name: name.clone(),
                    position: self.pos,
                })
            }
            Some(Token::LParen) => {
                let mut depth = 1usize;
                let start = self.index;
                while let Some(t) = self.peek() {
                    match t {
                        Token::LParen => depth += 1,
                        Token::RParen => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                    self.index += 1;
                }
                if depth != 0 {
                    return Err(self.err("`)`"));
                }
                let inner = &self.tokens[start..self.index];
                self.index += 1; // consume `)`
                let pipeline = self.parser.parse_pipeline(inner, self.pos)?;
                Ok(Term::Paren(Box::new(pipeline)))
            }
            _ => Err(self.err("a term")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> TemplateAst {
        parse_template("test.yaml", text).unwrap()
    }

    #[test]
    fn plain_expression() {
        let ast = parse("{{ .Values.tracking.host }}");
        match &ast.nodes[0] {
            TemplateNode::Expr(p) => match &p.head {
                Term::Ref(r) => {
                    assert_eq!(r.text(), ".Values.tracking.host");
                }
                other => panic!("unexpected head {other:?}"),
            },
            other => panic!("unexpected node {other:?}"),
        }
    }

    #[test]
    fn unsupported_function_is_an_error() {
        let err = parse_template("t", "{{ weird .x }}").unwrap_err();
        match err {
            TemplateError::UnsupportedFunction { name, .. } => assert_eq!(name, "weird"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn if_block_with_exprs() {
        let text = "{{- if .Values.backendStore.postgres.Enabled }}\n  PGUSER: {{ .Values.backendStore.postgres.user }}\n  PGPASSWORD: {{ .Values.backendStore.postgres.password }}\n{{- end }}";
        let ast = parse(text);
        let ifs: Vec<_> = ast
            .nodes
            .iter()
            .filter(|n| matches!(n, TemplateNode::If { .. }))
            .collect();
        assert_eq!(ifs.len(), 1);
        match ifs[0] {
            TemplateNode::If {
                cond, then_body, ..
            } => {
                match &cond.head {
                    Term::Ref(r) => {
                        assert_eq!(r.text(), ".Values.backendStore.postgres.Enabled");
                    }
                    other => panic!("unexpected cond {other:?}"),
                }
                let exprs = then_body
                    .iter()
                    .filter(|n| matches!(n, TemplateNode::Expr(_)))
                    .count();
                assert_eq!(exprs, 2);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn define_and_template_call() {
        let text = "{{- define \"app.name\" -}}{{ .Chart.Name }}{{- end -}}\nname: {{ template \"app.name\" . }}";
        let ast = parse(text);
        assert!(ast
            .defines()
            .any(|(name, _)| name == "app.name"));
        assert!(ast.nodes.iter().any(
            |n| matches!(n, TemplateNode::TemplateCall { name, context: Some(c), .. } if name == "app.name" && c.parts.is_empty())
        ));
    }

    #[test]
    fn pipeline_with_functions() {
        let ast = parse("{{ .Values.name | default \"app\" | upper }}");
        match &ast.nodes[0] {
            TemplateNode::Expr(p) => {
                assert_eq!(p.calls.len(), 2);
                assert_eq!(p.calls[0].func, Func::Default);
                assert_eq!(p.calls[1].func, Func::Upper);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn condition_functions_parse() {
        let ast = parse("{{ if and (eq .Values.a \"x\") (not .Values.b) }}y{{ end }}");
        assert!(matches!(ast.nodes[0], TemplateNode::If { .. }));
    }

    #[test]
    fn range_block() {
        let ast = parse("{{ range .Values.items }}- {{ .name }}\n{{ end }}");
        assert!(matches!(ast.nodes[0], TemplateNode::Range { .. }));
    }

    #[test]
    fn unclosed_block_is_an_error() {
        assert!(parse_template("t", "{{ if .Values.a }}x").is_err());
        assert!(parse_template("t", "{{ end }}").is_err());
    }

    #[test]
    fn comments_vanish() {
        let ast = parse("a{{/* note */}}b");
        assert_eq!(
            ast.nodes,
            vec![
                TemplateNode::Literal("a".to_string()),
                TemplateNode::Literal("b".to_string())
            ]
        );
    }
}
