//! Source text to explicit model, stage by stage, with diagnostics that
//! point into the source.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::bta::{self, dump_bta, verify_annotation, BtEnv, BtaResult};
use crate::explicit::{build_explicit_model, ExplicitError, ExplicitModel, Interval, RangeBox};
use crate::label::Label;
use crate::lang::{infer_env, type_check_eqn, Variable};
use crate::parser::{parse_file, ParsedProgram, SourceSpan};
use crate::specialize::{specialize_program, NormalForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Bta,
    Spec,
    Explicit,
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Stage, String> {
        match s {
            "bta" => Ok(Stage::Bta),
            "spec" => Ok(Stage::Spec),
            "explicit" => Ok(Stage::Explicit),
            other => Err(format!("unknown stage `{other}` (expected bta, spec or explicit)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Parse,
    Type,
    Bta,
    Spec,
    Explicit,
}

impl Phase {
    pub fn exit_code(self) -> i32 {
        match self {
            Phase::Parse | Phase::Type => 1,
            Phase::Bta => 2,
            Phase::Spec => 3,
            Phase::Explicit => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Phase::Parse => "syntax error",
            Phase::Type => "type error",
            Phase::Bta => "binding-time error",
            Phase::Spec => "specialization error",
            Phase::Explicit => "cannot make explicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub phase: Phase,
    pub span: Option<SourceSpan>,
    pub message: String,
    /// The offending source line, when known.
    pub excerpt: Option<String>,
}

impl Diagnostic {
    fn new(phase: Phase, message: impl Into<String>) -> Diagnostic {
        Diagnostic { phase, span: None, message: message.into(), excerpt: None }
    }

    fn at(mut self, span: Option<&SourceSpan>, text: &str) -> Diagnostic {
        if let Some(span) = span {
            self.excerpt = text.lines().nth(span.start.line.saturating_sub(1) as usize).map(str::to_string);
            self.span = Some(span.clone());
        }
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.phase.exit_code()
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(span) = &self.span {
            write!(f, "{span}: ")?;
        }
        write!(f, "{}: {}", self.phase.name(), self.message)?;
        if let (Some(span), Some(line)) = (&self.span, &self.excerpt) {
            let start = span.start.col.max(1) as usize;
            let end = if span.end.line == span.start.line { (span.end.col as usize).max(start + 1) } else { line.len() + 1 };
            let width = end.saturating_sub(start).max(1);
            write!(f, "\n  | {line}\n  | {}{}", " ".repeat(start - 1), "^".repeat(width))?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostic {}

/// A parsed, type-checked and binding-time analyzed program.
pub struct Analyzed {
    pub parsed: ParsedProgram,
    pub bta: BtaResult,
}

pub fn analyze(file: &str, text: &str) -> Result<Analyzed, Diagnostic> {
    let parsed = parse_file(file, text).map_err(|e| Diagnostic::new(Phase::Parse, e.message.clone()).at(Some(&e.span), text))?;
    let span = |l: &Label| parsed.span_of(l);
    let env = infer_env(&parsed.equations);
    type_check_eqn(&env, &parsed.equations)
        .map_err(|e| Diagnostic::new(Phase::Type, e.kind.to_string()).at(span(&e.label), text))?;
    let result = bta::analyze(&parsed.equations).map_err(|e| {
        let label = e.label().cloned();
        Diagnostic::new(Phase::Bta, e.to_string()).at(label.as_ref().and_then(span), text)
    })?;
    if let Err(violations) = verify_annotation(&BtEnv::new(), &result.annotated) {
        let v = &violations[0];
        return Err(Diagnostic::new(Phase::Bta, format!("inconsistent annotation: {v}")).at(span(&v.label), text));
    }
    Ok(Analyzed { parsed, bta: result })
}

pub fn residual(a: &Analyzed, text: &str) -> Result<NormalForm, Diagnostic> {
    specialize_program(&a.bta.annotated).map_err(|e| {
        let message = format!("{}: {}", e.kind, e.detail);
        let span = e.span.as_ref().or_else(|| e.label.as_ref().and_then(|l| a.parsed.span_of(l)));
        Diagnostic::new(Phase::Spec, message).at(span, text)
    })
}

pub fn explicit(w: &NormalForm, ranges: &RangeBox) -> Result<ExplicitModel, Diagnostic> {
    build_explicit_model(w, ranges).map_err(|e: ExplicitError| Diagnostic::new(Phase::Explicit, e.to_string()))
}

pub enum Output {
    Dump(String),
    Model(ExplicitModel),
}

/// Runs every stage, or stops after `dump` and returns its printout.
pub fn run_pipeline(file: &str, text: &str, ranges: &RangeBox, dump: Option<Stage>) -> Result<Output, Diagnostic> {
    let a = analyze(file, text)?;
    if dump == Some(Stage::Bta) {
        return Ok(Output::Dump(dump_bta(&a.bta.annotated)));
    }
    let w = residual(&a, text)?;
    if dump == Some(Stage::Spec) {
        return Ok(Output::Dump(format!("{w}\n")));
    }
    let m = explicit(&w, ranges)?;
    if dump == Some(Stage::Explicit) {
        return Ok(Output::Dump(m.to_string()));
    }
    Ok(Output::Model(m))
}

pub fn compile(file: &str, text: &str, ranges: &RangeBox) -> Result<ExplicitModel, Diagnostic> {
    match run_pipeline(file, text, ranges, None)? {
        Output::Model(m) => Ok(m),
        Output::Dump(_) => unreachable!("no dump requested"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextFileError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for TextFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for TextFileError {}

/// Non-empty lines with `#` comments removed, split on whitespace.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn variable(s: &str, line: usize) -> Result<Variable, TextFileError> {
    Variable::parse(s).ok_or_else(|| TextFileError { line, message: format!("`{s}` is not a variable") })
}

fn number(s: &str, line: usize) -> Result<f64, TextFileError> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| TextFileError { line, message: format!("`{s}` is not a finite number") })
}

/// Lines of `variable lo hi`.
pub fn parse_ranges(text: &str) -> Result<RangeBox, TextFileError> {
    let mut b = RangeBox::new();
    for (line, fields) in records(text) {
        let [x, lo, hi] = fields[..] else {
            return Err(TextFileError { line, message: "expected `variable lo hi`".into() });
        };
        let (lo, hi) = (number(lo, line)?, number(hi, line)?);
        if lo > hi {
            return Err(TextFileError { line, message: format!("empty range [{lo}, {hi}]") });
        }
        b.insert(variable(x, line)?, Interval::new(lo, hi));
    }
    Ok(b)
}

/// Lines of `variable value`.
pub fn parse_init(text: &str) -> Result<HashMap<Variable, f64>, TextFileError> {
    let mut out = HashMap::new();
    for (line, fields) in records(text) {
        let [x, v] = fields[..] else {
            return Err(TextFileError { line, message: "expected `variable value`".into() });
        };
        if out.insert(variable(x, line)?, number(v, line)?).is_some() {
            return Err(TextFileError { line, message: format!("`{x}` is given twice") });
        }
    }
    Ok(out)
}
