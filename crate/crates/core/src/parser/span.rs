use std::fmt;

/// A 1-based line/column position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub file: String,
    pub start: Pos,
    pub end: Pos,
}

impl SourceSpan {
    pub fn new(file: impl Into<String>, start: Pos, end: Pos) -> Self {
        debug_assert!(start <= end);
        SourceSpan { file: file.into(), start, end }
    }

    /// Smallest span covering both.
    pub fn join(&self, other: &SourceSpan) -> SourceSpan {
        SourceSpan { file: self.file.clone(), start: self.start.min(other.start), end: self.end.max(other.end) }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.start.line, self.start.col)
    }
}

/// Spans arranged like the labeled tree they describe: `children[k - 1]`
/// belongs to child label `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SpanTree {
    pub span: SourceSpan,
    pub children: Vec<SpanTree>,
}

impl SpanTree {
    pub fn leaf(span: SourceSpan) -> Self {
        SpanTree { span, children: Vec::new() }
    }

    pub fn node(span: SourceSpan, children: Vec<SpanTree>) -> Self {
        SpanTree { span, children }
    }
}
