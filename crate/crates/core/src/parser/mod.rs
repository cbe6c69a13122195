//! Concrete ASCII syntax: a recursive-descent parser producing equation
//! trees with per-node source spans, and a pretty-printer whose output
//! parses back to the same tree.
//!
//! Operator precedence, loosest first: `a:b`, `||`, `&&`, comparisons,
//! `+ -`, `* /`, unary `-`, `^` (right associative), postfix (`e(i)`,
//! `(e)'`, `e'[x]`).

mod lexer;
mod pretty;
mod span;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::label::Label;
use crate::lang::{Builtin, Constant, Equation, Expr, Variable};
use lexer::{Tok, Token};
pub(crate) use pretty::pretty_marked;
pub use pretty::{pretty, pretty_eqn, pretty_expr};
use span::SpanTree;
pub use span::{Pos, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
}

impl ParseError {
    fn new(span: SourceSpan, message: impl Into<String>) -> Self {
        ParseError { span, message: message.into() }
    }
}

/// A parsed source file: the top-level equation set plus a span for every
/// labeled node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedProgram {
    pub equations: Equation,
    pub spans: BTreeMap<Label, SourceSpan>,
}

impl ParsedProgram {
    /// Wraps an equation built in memory; spans point at a synthetic file.
    pub fn from_equation(equations: Equation) -> ParsedProgram {
        let equations = match equations {
            s @ Equation::Set(_) => s,
            other => Equation::Set(vec![other]),
        };
        ParsedProgram { equations, spans: BTreeMap::new() }
    }

    /// The span of a node, falling back to the nearest ancestor with one.
    pub fn span_of(&self, label: &Label) -> Option<&SourceSpan> {
        label.ancestors().find_map(|l| self.spans.get(&l))
    }
}

const KEYWORDS: [&str; 9] = ["if", "then", "else", "noelse", "foreach", "in", "do", "true", "false"];

pub fn is_reserved(name: &str) -> bool {
    KEYWORDS.contains(&name) || name == "pi" || Builtin::from_call_name(name).is_some()
}

/// Parses a program from text. `file` is only used in spans.
pub fn parse(text: &str) -> Result<ParsedProgram, ParseError> {
    parse_file("<input>", text)
}

pub fn parse_file(file: &str, text: &str) -> Result<ParsedProgram, ParseError> {
    let tokens = lexer::tokenize(file, text)?;
    let mut p = Parser { tokens, pos: 0 };
    let (eqs, trees) = p.eq_list(true)?;
    p.expect_eof()?;
    let root_span = match (trees.first(), trees.last()) {
        (Some(a), Some(b)) => a.span.join(&b.span),
        _ => p.tokens[0].span.clone(),
    };
    let mut spans = BTreeMap::new();
    flatten(&SpanTree::node(root_span, trees), Label::root(), &mut spans);
    Ok(ParsedProgram { equations: Equation::Set(eqs), spans })
}

fn flatten(tree: &SpanTree, label: Label, out: &mut BTreeMap<Label, SourceSpan>) {
    for (k, child) in tree.children.iter().enumerate() {
        flatten(child, label.child(k as u32 + 1), out);
    }
    out.insert(label, tree.span.clone());
}

type PResult<T> = Result<T, ParseError>;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

fn var_tree(span: &SourceSpan, primes: u32) -> SpanTree {
    if primes == 0 {
        SpanTree::leaf(span.clone())
    } else {
        SpanTree::node(span.clone(), vec![var_tree(span, primes - 1)])
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span.clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x, 0) if x == kw)
    }

    fn error_here(&self, expected: &str) -> ParseError {
        ParseError::new(self.span(), format!("expected {expected}, found {}", self.peek().describe()))
    }

    fn expect_sym(&mut self, s: &str) -> PResult<SourceSpan> {
        if self.is_sym(s) {
            Ok(self.bump().span)
        } else {
            Err(self.error_here(&format!("`{s}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<SourceSpan> {
        if self.is_kw(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.error_here(&format!("`{kw}`")))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.error_here("`,` or end of input"))
        }
    }

    /// Comma-separated equations. At top level the list may be empty and may
    /// end with a trailing comma.
    fn eq_list(&mut self, top: bool) -> PResult<(Vec<Equation>, Vec<SpanTree>)> {
        let (mut eqs, mut trees) = (Vec::new(), Vec::new());
        let at_end = |p: &Parser| *p.peek() == Tok::Eof || p.is_sym("}");
        if at_end(self) {
            return Ok((eqs, trees));
        }
        loop {
            let (e, t) = self.equation()?;
            eqs.push(e);
            trees.push(t);
            if !self.is_sym(",") {
                break;
            }
            self.bump();
            if top && at_end(self) {
                break;
            }
        }
        Ok((eqs, trees))
    }

    fn equation(&mut self) -> PResult<(Equation, SpanTree)> {
        let start = self.span();
        if self.is_sym("{") {
            self.bump();
            let (eqs, trees) = self.eq_list(false)?;
            let end = self.expect_sym("}")?;
            return Ok((Equation::Set(eqs), SpanTree::node(start.join(&end), trees)));
        }
        if self.is_kw("if") {
            self.bump();
            let (guard, gt) = self.expr()?;
            self.expect_kw("then")?;
            let (mut eqs, mut trees) = (Vec::new(), Vec::new());
            loop {
                let (e, t) = self.equation()?;
                eqs.push(e);
                trees.push(t);
                if self.is_sym(",") {
                    self.bump();
                } else {
                    break;
                }
            }
            let (then_eq, then_tree) = if eqs.len() == 1 {
                (eqs.pop().unwrap(), trees.pop().unwrap())
            } else {
                let span = trees[0].span.join(&trees[trees.len() - 1].span);
                (Equation::Set(eqs), SpanTree::node(span, trees))
            };
            let (else_eq, else_tree) = if self.is_kw("noelse") {
                let span = self.bump().span;
                (Equation::empty(), SpanTree::leaf(span))
            } else if self.is_kw("else") {
                self.bump();
                self.equation()?
            } else {
                return Err(self.error_here("`,`, `else` or `noelse`"));
            };
            let span = start.join(&else_tree.span);
            return Ok((Equation::cond(guard, then_eq, else_eq), SpanTree::node(span, vec![gt, then_tree, else_tree])));
        }
        if self.is_kw("foreach") {
            self.bump();
            let binder_span = self.span();
            let binder = match self.peek().clone() {
                Tok::Ident(name, 0) if !is_reserved(&name) => {
                    self.bump();
                    name
                }
                Tok::Ident(_, _) => {
                    return Err(ParseError::new(binder_span, "a family binder must be an unprimed name"));
                }
                _ => return Err(self.error_here("a binder name")),
            };
            self.expect_kw("in")?;
            let (range, rt) = self.expr()?;
            self.expect_kw("do")?;
            let (body, bt) = self.equation()?;
            let span = start.join(&bt.span);
            return Ok((Equation::family(binder, range, body), SpanTree::node(span, vec![SpanTree::leaf(binder_span), rt, bt])));
        }
        let (lhs, lt) = self.expr()?;
        if self.is_sym("=") || self.is_sym("+=") {
            let reset = self.is_sym("+=");
            let op_span = self.bump().span;
            let (rhs, rt) = self.expr()?;
            let span = lt.span.join(&rt.span);
            let eq = match (lhs, reset) {
                (Expr::Var(v), false) => Equation::Directed { lhs: v, rhs },
                (Expr::Var(v), true) => Equation::Reset { lhs: v, rhs },
                (_, true) => {
                    return Err(ParseError::new(op_span, "the target of `+=` must be a variable"));
                }
                (other, false) => Equation::Undirected { lhs: other, rhs },
            };
            return Ok((eq, SpanTree::node(span, vec![lt, rt])));
        }
        Err(self.error_here("`=` or `+=`"))
    }

    fn expr(&mut self) -> PResult<(Expr, SpanTree)> {
        let (a, at) = self.or_expr()?;
        if self.is_sym(":") {
            self.bump();
            let (b, bt) = self.or_expr()?;
            return Ok(binary(Builtin::Range, a, at, b, bt));
        }
        Ok((a, at))
    }

    fn left_assoc(
        &mut self,
        ops: &[(&str, Builtin)],
        next: fn(&mut Parser) -> PResult<(Expr, SpanTree)>,
    ) -> PResult<(Expr, SpanTree)> {
        let (mut acc, mut acc_t) = next(self)?;
        'outer: loop {
            for (sym, f) in ops {
                if self.is_sym(sym) {
                    self.bump();
                    let (r, rt) = next(self)?;
                    (acc, acc_t) = binary(*f, acc, acc_t, r, rt);
                    continue 'outer;
                }
            }
            return Ok((acc, acc_t));
        }
    }

    fn or_expr(&mut self) -> PResult<(Expr, SpanTree)> {
        self.left_assoc(&[("||", Builtin::Or)], Parser::and_expr)
    }

    fn and_expr(&mut self) -> PResult<(Expr, SpanTree)> {
        self.left_assoc(&[("&&", Builtin::And)], Parser::cmp_expr)
    }

    fn cmp_expr(&mut self) -> PResult<(Expr, SpanTree)> {
        let (a, at) = self.add_expr()?;
        const OPS: [(&str, Builtin); 6] = [
            ("<", Builtin::Lt),
            ("<=", Builtin::Le),
            (">", Builtin::Gt),
            (">=", Builtin::Ge),
            ("==", Builtin::Eq),
            ("!=", Builtin::Ne),
        ];
        for (sym, f) in OPS {
            if self.is_sym(sym) {
                self.bump();
                let (b, bt) = self.add_expr()?;
                return Ok(binary(f, a, at, b, bt));
            }
        }
        Ok((a, at))
    }

    fn add_expr(&mut self) -> PResult<(Expr, SpanTree)> {
        self.left_assoc(&[("+", Builtin::Add), ("-", Builtin::Sub)], Parser::mul_expr)
    }

    fn mul_expr(&mut self) -> PResult<(Expr, SpanTree)> {
        self.left_assoc(&[("*", Builtin::Mul), ("/", Builtin::Div)], Parser::unary_expr)
    }

    fn unary_expr(&mut self) -> PResult<(Expr, SpanTree)> {
        if self.is_sym("-") {
            let start = self.bump().span;
            // A minus glued to a decimal literal is a negative constant.
            if let Tok::Decimal(q) = self.peek().clone() {
                if !matches!(self.peek_at(1), Tok::Sym("^")) {
                    let lit = self.bump().span;
                    let span = start.join(&lit);
                    return Ok((Expr::Const(Constant::Rat(-q)), SpanTree::leaf(span)));
                }
            }
            let (e, t) = self.unary_expr()?;
            let span = start.join(&t.span);
            return Ok((Expr::unary(Builtin::Neg, e), SpanTree::node(span, vec![t])));
        }
        self.power_expr()
    }

    fn power_expr(&mut self) -> PResult<(Expr, SpanTree)> {
        let (base, bt) = self.postfix_expr()?;
        if self.is_sym("^") {
            self.bump();
            let (exp, et) = self.unary_expr()?;
            return Ok(binary(Builtin::Pow, base, bt, exp, et));
        }
        Ok((base, bt))
    }

    fn postfix_expr(&mut self) -> PResult<(Expr, SpanTree)> {
        let (mut e, mut t) = self.primary()?;
        loop {
            if self.is_sym("(") {
                self.bump();
                let (i, it) = self.expr()?;
                let end = self.expect_sym(")")?;
                let span = t.span.join(&end);
                e = Expr::index(e, i);
                t = SpanTree::node(span, vec![t, it]);
            } else if *self.peek() == Tok::Prime {
                let prime = self.bump().span;
                if self.is_sym("[") {
                    self.bump();
                    let (x, xt) = self.expr()?;
                    let end = self.expect_sym("]")?;
                    let span = t.span.join(&end);
                    e = Expr::partial_der(e, x);
                    t = SpanTree::node(span, vec![t, xt]);
                } else {
                    let span = t.span.join(&prime);
                    e = Expr::time_der(e);
                    t = SpanTree::node(span, vec![t]);
                }
            } else {
                return Ok((e, t));
            }
        }
    }

    fn primary(&mut self) -> PResult<(Expr, SpanTree)> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok((Expr::nat(n), SpanTree::leaf(start)))
            }
            Tok::Decimal(q) => {
                self.bump();
                Ok((Expr::Const(Constant::Rat(q)), SpanTree::leaf(start)))
            }
            Tok::Ident(name, primes) => {
                if primes == 0 {
                    match name.as_str() {
                        "true" | "false" => {
                            self.bump();
                            return Ok((Expr::boolean(name == "true"), SpanTree::leaf(start)));
                        }
                        "pi" => {
                            self.bump();
                            return Ok((Expr::apply(Builtin::Pi, vec![]), SpanTree::leaf(start)));
                        }
                        _ if KEYWORDS.contains(&name.as_str()) => return Err(self.error_here("an expression")),
                        _ => {}
                    }
                    if let Some(f) = Builtin::from_call_name(&name) {
                        if matches!(self.peek_at(1), Tok::Sym("(")) {
                            self.bump();
                            self.bump();
                            let (mut args, mut trees) = (Vec::new(), Vec::new());
                            if !self.is_sym(")") {
                                loop {
                                    let (a, at) = self.expr()?;
                                    args.push(a);
                                    trees.push(at);
                                    if !self.is_sym(",") {
                                        break;
                                    }
                                    self.bump();
                                }
                            }
                            let end = self.expect_sym(")")?;
                            return Ok((Expr::apply(f, args), SpanTree::node(start.join(&end), trees)));
                        }
                        return Err(ParseError::new(start, format!("`{name}` must be applied to an argument")));
                    }
                }
                self.bump();
                if primes > 0 && self.is_sym("[") {
                    // x'[e] differentiates x with respect to e
                    self.bump();
                    let (wrt, wt) = self.expr()?;
                    let end = self.expect_sym("]")?;
                    let of = Expr::Var(Variable::with_primes(name, primes - 1));
                    let span = start.join(&end);
                    return Ok((Expr::partial_der(of, wrt), SpanTree::node(span, vec![var_tree(&start, primes - 1), wt])));
                }
                Ok((Expr::Var(Variable::with_primes(name, primes)), var_tree(&start, primes)))
            }
            Tok::Sym("(") => {
                self.bump();
                let (first, ft) = self.expr()?;
                if self.is_sym(")") {
                    self.bump();
                    return Ok((first, ft));
                }
                let (mut items, mut trees) = (vec![first], vec![ft]);
                while self.is_sym(",") {
                    self.bump();
                    if self.is_sym(")") {
                        break;
                    }
                    let (e, t) = self.expr()?;
                    items.push(e);
                    trees.push(t);
                }
                let end = self.expect_sym(")")?;
                Ok((Expr::Vector(items), SpanTree::node(start.join(&end), trees)))
            }
            _ => Err(self.error_here("an expression")),
        }
    }
}

fn binary(f: Builtin, a: Expr, at: SpanTree, b: Expr, bt: SpanTree) -> (Expr, SpanTree) {
    let span = at.span.join(&bt.span);
    (Expr::binary(f, a, b), SpanTree::node(span, vec![at, bt]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eqs(text: &str) -> Vec<Equation> {
        match parse(text).unwrap().equations {
            Equation::Set(es) => es,
            _ => unreachable!(),
        }
    }

    fn x(name: &str) -> Expr {
        Expr::var(name)
    }

    #[test]
    fn cam_definitions() {
        let got = eqs("v = x'[t]*t', a = (v)'");
        assert_eq!(
            got,
            vec![
                Equation::directed(
                    Variable::new("v"),
                    Expr::binary(Builtin::Mul, Expr::partial_der(x("x"), x("t")), Expr::primed_var("t", 1)),
                ),
                Equation::directed(Variable::new("a"), Expr::time_der(x("v"))),
            ]
        );
    }

    #[test]
    fn reset() {
        assert_eq!(
            eqs("t1 += t2 - t1"),
            vec![Equation::reset(Variable::new("t1"), Expr::binary(Builtin::Sub, x("t2"), x("t1")))]
        );
    }

    #[test]
    fn euler_lagrange_family() {
        let got = eqs("foreach i in 0:length(q) - 1 do L'[(q(i))']' - L'[q(i)] = 0");
        let qi = Expr::index(x("q"), x("i"));
        let expected = Equation::family(
            "i",
            Expr::binary(
                Builtin::Range,
                Expr::nat(0),
                Expr::binary(Builtin::Sub, Expr::unary(Builtin::Length, x("q")), Expr::nat(1)),
            ),
            Equation::undirected(
                Expr::binary(
                    Builtin::Sub,
                    Expr::time_der(Expr::partial_der(x("L"), Expr::time_der(qi.clone()))),
                    Expr::partial_der(x("L"), qi),
                ),
                Expr::nat(0),
            ),
        );
        assert_eq!(got, vec![expected]);
    }

    #[test]
    fn incomplete_equation_reports_end_of_input() {
        let err = parse("x = ").unwrap_err();
        assert!(err.message.contains("end of input"), "{}", err.message);
        assert_eq!(err.span.start, Pos { line: 1, col: 5 });
    }

    #[test]
    fn precedence_and_associativity() {
        let e = |s: &str| match &eqs(&format!("y = {s}"))[0] {
            Equation::Directed { rhs, .. } => rhs.clone(),
            _ => unreachable!(),
        };
        assert_eq!(e("a + b * c"), Expr::binary(Builtin::Add, x("a"), Expr::binary(Builtin::Mul, x("b"), x("c"))));
        assert_eq!(e("a ^ b ^ c"), Expr::binary(Builtin::Pow, x("a"), Expr::binary(Builtin::Pow, x("b"), x("c"))));
        assert_eq!(e("-x^2"), Expr::unary(Builtin::Neg, Expr::binary(Builtin::Pow, x("x"), Expr::nat(2))));
        assert_eq!(e("-1.5"), Expr::rat(-3, 2));
        assert_eq!(e("a - b - c"), Expr::binary(Builtin::Sub, Expr::binary(Builtin::Sub, x("a"), x("b")), x("c")));
    }

    #[test]
    fn conditionals() {
        let got = eqs("if g < 0 && (g)' < 0 then t1 += t2, t2 += -t2 noelse, y = 1");
        assert_eq!(got.len(), 2);
        match &got[0] {
            Equation::Cond { then_eq, else_eq, .. } => {
                assert!(matches!(**then_eq, Equation::Set(ref v) if v.len() == 2));
                assert_eq!(**else_eq, Equation::empty());
            }
            other => panic!("{other:?}"),
        }
        let got = eqs("if true then x' = 1 else x' = 2");
        assert!(matches!(got[0], Equation::Cond { .. }));
        assert_eq!(eqs("if 1 then {} else {}").len(), 1);
    }

    #[test]
    fn every_node_has_a_span() {
        let p = parse("x = 1, if t < 5 then y = x else y' = x").unwrap();
        for l in [
            Label::root(),
            Label::from_path(vec![1]),
            Label::from_path(vec![1, 1]),
            Label::from_path(vec![1, 2]),
            Label::from_path(vec![2, 3, 1, 1]),
        ] {
            assert!(p.spans.contains_key(&l), "missing {l}");
        }
    }

    #[test]
    fn errors_point_into_input() {
        for bad in ["x = (1, 2", "if x then y = 1", "foreach x' in v do y = 1", "3 += 2", "x = y ]"] {
            let err = parse(bad).unwrap_err();
            assert_eq!(err.span.start.line, 1, "{bad}");
            assert!(err.span.start.col as usize <= bad.len() + 1, "{bad}: {err}");
        }
    }
}
