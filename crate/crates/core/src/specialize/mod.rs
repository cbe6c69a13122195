//! Specialization: evaluates everything that can be computed before
//! simulation and leaves a residual program with no families, no partial
//! derivatives and no derivative operators over compound expressions.
//!
//! Definitions are substituted by value into the equations that follow them
//! in dependency order; a definition made inside a conditional branch or a
//! family instance is visible only there.

mod builtins;
mod diff;
mod simplify;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::bta::AnnotatedProgram;
use crate::label::Label;
use crate::lang::{free_vars_eqn, Constant, Equation, Expr, Variable};
use crate::parser::{pretty, SourceSpan};

pub use builtins::{apply_values, static_apply, static_scalar};
pub use diff::{partial_derivative, time_derivative};
pub use simplify::simplify;

/// The result of specializing an expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Static(Constant),
    Residual(Expr),
    Vector(Vec<Value>),
}

impl Value {
    /// Constants become static values and vector literals become vectors.
    pub fn from_expr(e: Expr) -> Value {
        match e {
            Expr::Const(k) => Value::Static(k),
            Expr::Vector(items) => Value::Vector(items.into_iter().map(Value::from_expr).collect()),
            other => Value::Residual(other),
        }
    }

    pub fn to_expr(&self) -> Expr {
        match self {
            Value::Static(k) => Expr::Const(k.clone()),
            Value::Residual(e) => e.clone(),
            Value::Vector(items) => Expr::Vector(items.iter().map(Value::to_expr).collect()),
        }
    }

    pub fn as_constant(&self) -> Option<&Constant> {
        match self {
            Value::Static(k) | Value::Residual(Expr::Const(k)) => Some(k),
            _ => None,
        }
    }

    /// True when no part of the value depends on simulation-time quantities.
    pub fn is_static(&self) -> bool {
        match self {
            Value::Static(_) => true,
            Value::Residual(_) => false,
            Value::Vector(items) => items.iter().all(Value::is_static),
        }
    }

    fn simplified(self) -> Value {
        match self {
            Value::Residual(e) => Value::from_expr(simplify(&e)),
            Value::Vector(items) => Value::Vector(items.into_iter().map(Value::simplified).collect()),
            v => v,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::pretty_expr(&self.to_expr()))
    }
}

/// A residual program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormalForm {
    Directed { lhs: Variable, rhs: Value },
    Undirected { lhs: Value, rhs: Value },
    Reset { lhs: Variable, rhs: Value },
    Cond { guard: Value, then_nf: Box<NormalForm>, else_nf: Box<NormalForm> },
    Set(Vec<NormalForm>),
}

impl NormalForm {
    /// The residual program as an ordinary equation.
    pub fn to_equation(&self) -> Equation {
        match self {
            NormalForm::Directed { lhs, rhs } => Equation::directed(lhs.clone(), rhs.to_expr()),
            NormalForm::Undirected { lhs, rhs } => Equation::equate(lhs.to_expr(), rhs.to_expr()),
            NormalForm::Reset { lhs, rhs } => Equation::reset(lhs.clone(), rhs.to_expr()),
            NormalForm::Cond { guard, then_nf, else_nf } => {
                Equation::cond(guard.to_expr(), then_nf.to_equation(), else_nf.to_equation())
            }
            NormalForm::Set(items) => Equation::Set(items.iter().map(NormalForm::to_equation).collect()),
        }
    }

    /// The members of a set, or the form itself.
    pub fn items(&self) -> &[NormalForm] {
        match self {
            NormalForm::Set(items) => items,
            other => std::slice::from_ref(other),
        }
    }
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty(&self.to_equation()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecErrorKind {
    IndexOutOfBounds,
    NonVariablePartialTarget,
    StaticCycle,
    ArityError,
    DivisionByZero,
    NonDifferentiable,
    Unsupported,
}

impl fmt::Display for SpecErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpecErrorKind::IndexOutOfBounds => "index out of bounds",
            SpecErrorKind::NonVariablePartialTarget => "partial derivative with respect to a non-variable",
            SpecErrorKind::StaticCycle => "cyclic definitions",
            SpecErrorKind::ArityError => "wrong number of arguments",
            SpecErrorKind::DivisionByZero => "division by zero",
            SpecErrorKind::NonDifferentiable => "not differentiable",
            SpecErrorKind::Unsupported => "unsupported",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecError {
    pub kind: SpecErrorKind,
    /// The node being specialized when the error arose.
    pub label: Option<Label>,
    pub span: Option<SourceSpan>,
    pub detail: String,
}

impl SpecError {
    pub fn new(kind: SpecErrorKind, detail: impl Into<String>) -> SpecError {
        SpecError { kind, label: None, span: None, detail: detail.into() }
    }

    fn at(mut self, l: &Label) -> SpecError {
        self.label.get_or_insert_with(|| l.clone());
        self
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(span) = &self.span {
            write!(f, "{span}: ")?;
        } else if let Some(l) = &self.label {
            write!(f, "{l}: ")?;
        }
        write!(f, "{}: {}", self.kind, self.detail)
    }
}

impl std::error::Error for SpecError {}

type Defs = HashMap<Variable, Value>;

fn index_value(target: Value, index: Value) -> Result<Value, SpecError> {
    let position = index.as_constant().and_then(|k| k.as_rational()).filter(|q| q.is_integer());
    match (target, position) {
        (Value::Vector(items), Some(q)) => {
            let len = items.len();
            let i = num::ToPrimitive::to_usize(q.numer()).filter(|i| *i < len);
            match i {
                Some(i) => Ok(items.into_iter().nth(i).expect("in range")),
                None => Err(SpecError::new(SpecErrorKind::IndexOutOfBounds, format!("index {q} into a vector of length {len}"))),
            }
        }
        (t, _) => Ok(Value::Residual(Expr::index(t.to_expr(), index.to_expr()))),
    }
}

fn time_der_value(v: Value) -> Result<Value, SpecError> {
    match v {
        Value::Static(Constant::Bool(_)) => Err(SpecError::new(SpecErrorKind::NonDifferentiable, "derivative of a boolean")),
        Value::Static(_) => Ok(Value::Static(Constant::Nat(0))),
        Value::Residual(Expr::Var(x)) => Ok(Value::Residual(Expr::Var(x.primed()))),
        Value::Residual(e) => Ok(Value::from_expr(time_derivative(&e)?)),
        Value::Vector(items) => Ok(Value::Vector(items.into_iter().map(time_der_value).collect::<Result<_, _>>()?)),
    }
}

fn partial_der_value(v: Value, x: &Variable) -> Result<Value, SpecError> {
    match v {
        Value::Static(Constant::Bool(_)) => Err(SpecError::new(SpecErrorKind::NonDifferentiable, "derivative of a boolean")),
        Value::Static(_) => Ok(Value::Static(Constant::Nat(0))),
        Value::Residual(e) => Ok(Value::from_expr(partial_derivative(&e, x)?)),
        Value::Vector(items) => Ok(Value::Vector(items.into_iter().map(|v| partial_der_value(v, x)).collect::<Result<_, _>>()?)),
    }
}

fn expr(e: &Expr, l: &Label, defs: &Defs) -> Result<Value, SpecError> {
    let child = |k: u32, c: &Expr| expr(c, &l.child(k), defs);
    let out = match e {
        Expr::Const(k) => Ok(Value::Static(k.clone())),
        Expr::Var(x) => Ok(defs.get(x).cloned().unwrap_or_else(|| Value::Residual(e.clone()))),
        Expr::Vector(items) => {
            items.iter().enumerate().map(|(k, c)| child(k as u32 + 1, c)).collect::<Result<_, _>>().map(Value::Vector)
        }
        Expr::Index(t, i) => index_value(child(1, t)?, child(2, i)?),
        Expr::Apply(f, args) => {
            let vals = args.iter().enumerate().map(|(k, c)| child(k as u32 + 1, c)).collect::<Result<_, _>>()?;
            apply_values(*f, vals)
        }
        Expr::TimeDer(inner) => time_der_value(child(1, inner)?),
        Expr::PartialDer(of, wrt) => {
            let target = child(2, wrt)?;
            let x = match &target {
                Value::Residual(Expr::Var(x)) => x.clone(),
                other => {
                    return Err(SpecError::new(SpecErrorKind::NonVariablePartialTarget, format!("`{other}` is not a variable"))
                        .at(&l.child(2)))
                }
            };
            partial_der_value(child(1, of)?, &x)
        }
    };
    out.map_err(|err| err.at(l))
}

/// Specializes a closed expression.
pub fn specialize_expr(e: &Expr) -> Result<Value, SpecError> {
    expr(e, &Label::root(), &Defs::new()).map(Value::simplified)
}

/// Members of `s` with nested sets spliced in, each with its label.
fn flatten<'a>(s: &'a Equation, l: Label, out: &mut Vec<(Label, &'a Equation)>) {
    match s {
        Equation::Set(es) => {
            for (k, e) in es.iter().enumerate() {
                flatten(e, l.child(k as u32 + 1), out);
            }
        }
        other => out.push((l, other)),
    }
}

/// Definitions among `items` whose values can depend on simulation-time
/// quantities: those mentioning a derivative, a variable nothing defines,
/// or a residual outer definition, directly or through other definitions.
fn dynamic_definitions(items: &[(Label, &Equation)], definer: &HashMap<&Variable, usize>, defs: &Defs) -> Vec<bool> {
    let seed = |x: &Variable| match (definer.get(x), defs.get(x)) {
        (Some(_), _) => false,
        (None, Some(v)) => !v.is_static(),
        (None, None) => true,
    };
    let mut dynamic: Vec<bool> = items
        .iter()
        .map(|(_, s)| match s {
            Equation::Directed { lhs, .. } => {
                lhs.is_primed() || free_vars_eqn(s).iter().any(|x| x != lhs && (x.is_primed() || seed(x)))
            }
            _ => false,
        })
        .collect();
    loop {
        let mut changed = false;
        for (k, (_, s)) in items.iter().enumerate() {
            if let Equation::Directed { lhs, .. } = s {
                if !dynamic[k] && free_vars_eqn(s).iter().any(|x| x != lhs && definer.get(x).is_some_and(|d| dynamic[*d])) {
                    dynamic[k] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return dynamic;
        }
    }
}

/// Orders equations so that every definition precedes its uses, keeping
/// source order among independent equations. Cycles through dynamic
/// definitions are broken in source order; the returned flags mark the
/// definitions that must stay residual instead of being substituted.
fn dependency_order(items: &[(Label, &Equation)], defs: &Defs) -> Result<(Vec<usize>, Vec<bool>), SpecError> {
    let definer: HashMap<&Variable, usize> = items
        .iter()
        .enumerate()
        .filter_map(|(k, (_, s))| match s {
            Equation::Directed { lhs, .. } => Some((lhs, k)),
            _ => None,
        })
        .collect();
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); items.len()];
    let mut pending = vec![0usize; items.len()];
    for (k, (_, s)) in items.iter().enumerate() {
        let deps: BTreeSet<usize> = free_vars_eqn(s).iter().filter_map(|x| definer.get(x).copied()).collect();
        for d in deps {
            users[d].push(k);
            pending[k] += 1;
        }
    }
    let mut ready: BTreeSet<usize> = (0..items.len()).filter(|k| pending[*k] == 0).collect();
    let mut order = Vec::with_capacity(items.len());
    let mut opaque = vec![false; items.len()];
    let mut done = vec![false; items.len()];
    let mut dynamic: Option<Vec<bool>> = None;
    while order.len() < items.len() {
        let k = match ready.pop_first() {
            Some(k) => k,
            None => {
                let dynamic = dynamic.get_or_insert_with(|| dynamic_definitions(items, &definer, defs));
                let stuck = (0..items.len()).filter(|k| !done[*k]);
                match stuck.clone().find(|k| dynamic[*k]) {
                    Some(k) => {
                        opaque[k] = true;
                        k
                    }
                    None => {
                        let stuck: Vec<usize> = stuck.collect();
                        let names: Vec<String> = stuck
                            .iter()
                            .filter_map(|k| match items[*k].1 {
                                Equation::Directed { lhs, .. } => Some(lhs.to_string()),
                                _ => None,
                            })
                            .collect();
                        return Err(SpecError::new(
                            SpecErrorKind::StaticCycle,
                            format!("definitions depend on each other: {}", names.join(", ")),
                        )
                        .at(&items[stuck[0]].0));
                    }
                }
            }
        };
        done[k] = true;
        order.push(k);
        for &u in &users[k] {
            pending[u] -= 1;
            if pending[u] == 0 && !done[u] {
                ready.insert(u);
            }
        }
    }
    Ok((order, opaque))
}

fn scalar_equations(lhs: Value, rhs: Value, out: &mut Vec<NormalForm>) {
    match (lhs, rhs) {
        (Value::Vector(a), Value::Vector(b)) if a.len() == b.len() => {
            for (x, y) in a.into_iter().zip(b) {
                scalar_equations(x, y, out);
            }
        }
        (lhs, rhs) => out.push(NormalForm::Undirected { lhs, rhs }),
    }
}

fn set(s: &Equation, l: &Label, defs: &mut Defs) -> Result<Vec<NormalForm>, SpecError> {
    let mut items = Vec::new();
    flatten(s, l.clone(), &mut items);
    let (order, opaque) = dependency_order(&items, defs)?;
    let mut results: Vec<Vec<NormalForm>> = vec![Vec::new(); items.len()];
    for k in order {
        let (l, s) = &items[k];
        results[k] = match (s, opaque[k]) {
            (Equation::Directed { lhs, rhs }, true) => {
                vec![NormalForm::Directed { lhs: lhs.clone(), rhs: expr(rhs, &l.child(2), defs)?.simplified() }]
            }
            _ => eqn(s, l, defs)?,
        };
    }
    Ok(results.into_iter().flatten().collect())
}

fn eqn(s: &Equation, l: &Label, defs: &mut Defs) -> Result<Vec<NormalForm>, SpecError> {
    let out = match s {
        Equation::Directed { lhs, rhs } => {
            let v = expr(rhs, &l.child(2), defs)?.simplified();
            defs.insert(lhs.clone(), v.clone());
            vec![NormalForm::Directed { lhs: lhs.clone(), rhs: v }]
        }
        Equation::Reset { lhs, rhs } => {
            vec![NormalForm::Reset { lhs: lhs.clone(), rhs: expr(rhs, &l.child(2), defs)?.simplified() }]
        }
        Equation::Undirected { lhs, rhs } => {
            let a = expr(lhs, &l.child(1), defs)?.simplified();
            let b = expr(rhs, &l.child(2), defs)?.simplified();
            let mut out = Vec::new();
            scalar_equations(a, b, &mut out);
            out
        }
        Equation::Cond { guard, then_eq, else_eq } => {
            let g = expr(guard, &l.child(1), defs)?.simplified();
            match g.as_constant() {
                Some(Constant::Bool(true)) => set(then_eq, &l.child(2), &mut defs.clone())?,
                Some(Constant::Bool(false)) => set(else_eq, &l.child(3), &mut defs.clone())?,
                Some(other) => {
                    return Err(SpecError::new(SpecErrorKind::Unsupported, format!("guard evaluates to {other}")).at(&l.child(1)))
                }
                None => {
                    let then_nf = NormalForm::Set(set(then_eq, &l.child(2), &mut defs.clone())?);
                    let else_nf = NormalForm::Set(set(else_eq, &l.child(3), &mut defs.clone())?);
                    vec![NormalForm::Cond { guard: g, then_nf: Box::new(then_nf), else_nf: Box::new(else_nf) }]
                }
            }
        }
        Equation::Family { binder, range, body } => {
            let elements = match expr(range, &l.child(2), defs)? {
                Value::Vector(items) => items,
                other => {
                    return Err(SpecError::new(
                        SpecErrorKind::Unsupported,
                        format!("family range `{other}` is not a vector of known length"),
                    )
                    .at(&l.child(2)))
                }
            };
            let mut out = Vec::new();
            for v in elements {
                let mut local = defs.clone();
                local.insert(Variable::new(binder.as_str()), v);
                out.extend(set(body, &l.child(3), &mut local)?);
            }
            out
        }
        Equation::Set(_) => set(s, l, defs)?,
    };
    Ok(out)
}

/// Specializes an annotated program to its residual normal form.
pub fn specialize_program(a: &AnnotatedProgram) -> Result<NormalForm, SpecError> {
    specialize(a.erase())
}

/// Specializes a program directly.
pub fn specialize(program: &Equation) -> Result<NormalForm, SpecError> {
    let mut defs = Defs::new();
    set(program, &Label::root(), &mut defs).map(NormalForm::Set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::Builtin;
    use crate::parser::{parse, pretty_expr};

    fn spec(src: &str) -> Result<NormalForm, SpecError> {
        specialize(&parse(src).unwrap().equations)
    }

    fn lines(src: &str) -> Vec<String> {
        spec(src).unwrap().items().iter().map(|nf| nf.to_string()).collect()
    }

    #[test]
    fn definitions_are_substituted() {
        assert_eq!(lines("y = 2 * x, x = 3"), ["y = 6", "x = 3"]);
        assert_eq!(lines("a = 2, x' = -a * x"), ["a = 2", "x' = -(2 * x)"]);
    }

    #[test]
    fn families_unroll() {
        let out = lines("q = (x, y), foreach i in 0:length(q) - 1 do (q(i))' = i");
        assert_eq!(out, ["q = (x, y)", "x' = 0", "y' = 1"]);
    }

    #[test]
    fn static_guards_select_a_branch() {
        assert_eq!(lines("a = 1, if a < 2 then b = 1 else b = 2"), ["a = 1", "b = 1"]);
        let out = lines("if x < 2 then y' = 1 else y' = 2");
        assert_eq!(out.len(), 1);
        assert!(out[0].starts_with("if x < 2 then"), "{}", out[0]);
    }

    #[test]
    fn partial_derivatives() {
        assert_eq!(lines("L = x'^2 * x, y = L'[x']"), ["L = x * x' ^ 2", "y = 2 * x * x'"]);
        assert_eq!(lines("y = x''[x]"), ["y = 0"]);
        assert_eq!(lines("y = x'[x]"), ["y = 1"]);
    }

    #[test]
    fn partial_target_must_be_a_variable() {
        let e = spec("y = x'[2]").unwrap_err();
        assert_eq!(e.kind, SpecErrorKind::NonVariablePartialTarget);
        assert_eq!(e.label.unwrap().to_string(), "root.1.2.2");
    }

    #[test]
    fn time_derivative_of_compound_expressions() {
        assert_eq!(lines("y = (x * x)'"), ["y = 2 * x * x'"]);
        assert_eq!(lines("c = 3, y = (c)'"), ["c = 3", "y = 0"]);
    }

    #[test]
    fn cyclic_definitions() {
        assert_eq!(spec("a = b, b = a").unwrap_err().kind, SpecErrorKind::StaticCycle);
        assert_eq!(spec("a = a + 1").unwrap_err().kind, SpecErrorKind::StaticCycle);
        assert_eq!(spec("a = b, b = a, x' = x").unwrap_err().kind, SpecErrorKind::StaticCycle);
    }

    #[test]
    fn dynamic_cycles_stay_residual() {
        let w = spec("z' = z'' - z', d = z'").unwrap();
        assert_eq!(w.items().len(), 2);
        assert_eq!(w.items()[0].to_string(), "z' = -z' + z''");
        let w = spec("a = b + x, b = a * 2, y' = a").unwrap();
        assert_eq!(w.items().len(), 3);
        assert_eq!(w.items()[2].to_string(), "y' = a");
    }

    #[test]
    fn index_errors() {
        assert_eq!(spec("q = (1, 2), y = q(1 + 1)").unwrap_err().kind, SpecErrorKind::IndexOutOfBounds);
    }

    #[test]
    fn vector_equations_split() {
        assert_eq!(lines("(x + 1, y) = (2, z)"), ["x + 1 = 2", "y = z"]);
    }

    #[test]
    fn specialize_closed_expression() {
        let v = specialize_expr(&Expr::binary(Builtin::Mul, Expr::nat(4), Expr::rat(1, 3))).unwrap();
        assert_eq!(v, Value::Static(Constant::rat(4, 3)));
        let v = specialize_expr(&Expr::unary(Builtin::Sin, Expr::nat(1))).unwrap();
        assert_eq!(pretty_expr(&v.to_expr()), "sin(1)");
    }
}
