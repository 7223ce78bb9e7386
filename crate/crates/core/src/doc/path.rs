//! Field paths and path patterns.
//!
//! The canonical text form joins mapping keys with dots and marks sequence
//! positions with `[]` appended to the preceding key, e.g.
//! `spec.template.spec.containers[].securityContext.runAsNonRoot`.
//! The empty path renders as `.`.

use std::fmt;
use thiserror::Error;

/// One step of a field path: a mapping key or an any-element wildcard.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Segment {
    Key(String),
    AnyIndex,
}

impl Segment {
    pub fn key(k: impl Into<String>) -> Self {
        Segment::Key(k.into())
    }
}

/// An ordered field path into a document tree.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FieldPath(Vec<Segment>);

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("empty path component in `{0}`")]
    EmptyComponent(String),
    #[error("unbalanced `[]` in path component `{0}`")]
    BadBrackets(String),
}

impl FieldPath {
    pub fn root() -> Self {
        FieldPath(Vec::new())
    }

    pub fn from_segments(segments: Vec<Segment>) -> Self {
        FieldPath(segments)
    }

    /// Convenience constructor from dotted keys (no wildcards).
    pub fn keys(keys: &[&str]) -> Self {
        FieldPath(keys.iter().map(|k| Segment::key(*k)).collect())
    }

    pub fn parse(text: &str) -> Result<Self, PathError> {
        if text == "." || text.is_empty() {
            return Ok(FieldPath::root());
        }
        let mut segments = Vec::new();
        for component in text.split('.') {
            let mut rest = component;
            let mut wildcards = 0;
            while let Some(prefix) = rest.strip_suffix("[]") {
                wildcards += 1;
                rest = prefix;
            }
            if rest.contains('[') || rest.contains(']') {
                return Err(PathError::BadBrackets(component.to_string()));
            }
            if rest.is_empty() {
                if wildcards == 0 {
                    return Err(PathError::EmptyComponent(text.to_string()));
                }
            } else {
                segments.push(Segment::key(rest));
            }
            for _ in 0..wildcards {
                segments.push(Segment::AnyIndex);
            }
        }
        Ok(FieldPath(segments))
    }

    pub fn segments(&self) -> &[Segment] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, key: &str) -> FieldPath {
        let mut segs = self.0.clone();
        segs.push(Segment::key(key));
        FieldPath(segs)
    }

    pub fn element(&self) -> FieldPath {
        let mut segs = self.0.clone();
        segs.push(Segment::AnyIndex);
        FieldPath(segs)
    }

    pub fn join(&self, other: &FieldPath) -> FieldPath {
        let mut segs = self.0.clone();
        segs.extend(other.0.iter().cloned());
        FieldPath(segs)
    }

    pub fn last_key(&self) -> Option<&str> {
        match self.0.last() {
            Some(Segment::Key(k)) => Some(k),
            _ => None,
        }
    }

    pub fn parent(&self) -> Option<FieldPath> {
        if self.0.is_empty() {
            None
        } else {
            Some(FieldPath(self.0[..self.0.len() - 1].to_vec()))
        }
    }
}

impl fmt::Display for FieldPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str(".");
        }
        let mut first = true;
        for seg in &self.0 {
            match seg {
                Segment::Key(k) => {
                    if !first {
                        f.write_str(".")?;
                    }
                    f.write_str(k)?;
                    first = false;
                }
                Segment::AnyIndex => {
                    if first {
                        // A path may start at a sequence element.
                        first = false;
                    }
                    f.write_str("[]")?;
                }
            }
        }
        Ok(())
    }
}

/// A matchable path pattern for lock rules and catalog aliases.
///
/// A leading `...` makes the pattern unanchored. An unanchored pattern
/// matches a path when any suffix of the pattern (longest first, at least
/// one segment) matches the tail of the path; pattern key segments match a
/// concrete key exactly or as a case-insensitive suffix, so
/// `securityContext` matches `containerSecurityContext`. This brings the
/// same rule table to bear on values files (where security blocks sit under
/// chart-specific keys) and on rendered manifests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathPattern {
    anchored: bool,
    segments: Vec<Segment>,
}

impl PathPattern {
    pub fn parse(text: &str) -> Result<Self, PathError> {
        let (anchored, rest) = match text.strip_prefix("...") {
            Some(rest) => (false, rest),
            None => (true, text),
        };
        let path = FieldPath::parse(rest)?;
        Ok(PathPattern {
            anchored,
            segments: path.0,
        })
    }

    pub fn anchored(&self) -> bool {
        self.anchored
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn last_key(&self) -> Option<&str> {
        match self.segments.last() {
            Some(Segment::Key(k)) => Some(k),
            _ => None,
        }
    }

    /// The pattern with its final segment removed (for locating parents of
    /// insertable lock targets). Returns `None` on an empty pattern.
    pub fn parent(&self) -> Option<PathPattern> {
        if self.segments.is_empty() {
            return None;
        }
        Some(PathPattern {
            anchored: self.anchored,
            segments: self.segments[..self.segments.len() - 1].to_vec(),
        })
    }

    pub fn matches(&self, path: &FieldPath) -> bool {
        if self.anchored {
            // Anchored patterns match segment-for-segment, exactly.
            return self.segments == path.0;
        }
        if self.segments.is_empty() {
            // An unanchored empty pattern matches everything (used for
            // parent lookups of single-segment patterns).
            return true;
        }
        for take in (1..=self.segments.len()).rev() {
            let pat = &self.segments[self.segments.len() - take..];
            if path.0.len() < take {
                continue;
            }
            let tail = &path.0[path.0.len() - take..];
            if pat.iter().zip(tail.iter()).all(|(p, c)| segment_matches(p, c)) {
                return true;
            }
        }
        false
    }
}

fn segment_matches(pattern: &Segment, concrete: &Segment) -> bool {
    match (pattern, concrete) {
        (Segment::AnyIndex, Segment::AnyIndex) => true,
        (Segment::Key(p), Segment::Key(c)) => {
            p == c || c.to_ascii_lowercase().ends_with(&p.to_ascii_lowercase())
        }
        _ => false,
    }
}

impl fmt::Display for PathPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.anchored {
            f.write_str("...")?;
        }
        write!(f, "{}", FieldPath(self.segments.clone()))
    }
}
