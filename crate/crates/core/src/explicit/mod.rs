//! Turns a residual program into an explicit hybrid ODE model: the highest
//! derivatives are solved for by symbolic elimination, conditionals with
//! discrete assignments become events, and remaining definitions become
//! auxiliary outputs.

mod gauss;
mod interval;
mod linear;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num::BigRational;

use crate::lang::{free_vars, substitute, Builtin, Constant, Expr, Variable};
use crate::parser::pretty_expr;
use crate::specialize::{simplify, NormalForm, Value};

pub use gauss::gaussian_eliminate;
pub use interval::{interval_eval, Interval, RangeBox};
pub use linear::{collect_unknowns, extract_linear_system, LinearSystem};

#[derive(Debug, Clone, PartialEq)]
pub enum ExplicitError {
    NonlinearInUnknowns { row: usize, unknown: Variable, coefficient: Expr },
    DimensionMismatch { equations: usize, unknowns: usize },
    PivotUncertain { pivot: Expr, interval: Interval },
    MixedMode(String),
    Unsupported(String),
}

impl fmt::Display for ExplicitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExplicitError::NonlinearInUnknowns { row, unknown, coefficient } => {
                write!(f, "equation {} is not linear in `{unknown}` (coefficient `{}`)", row + 1, pretty_expr(coefficient))
            }
            ExplicitError::DimensionMismatch { equations, unknowns } => {
                write!(f, "{equations} continuous equations for {unknowns} unknown derivatives")
            }
            ExplicitError::PivotUncertain { pivot, interval } => write!(
                f,
                "cannot show that pivot `{}` is nonzero (it ranges over {interval}); tighten the variable ranges",
                pretty_expr(pivot)
            ),
            ExplicitError::MixedMode(detail) => write!(f, "mode-dependent dynamics are not supported: {detail}"),
            ExplicitError::Unsupported(detail) => f.write_str(detail),
        }
    }
}

impl std::error::Error for ExplicitError {}

/// A guarded set of simultaneous discrete assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub guard: Expr,
    pub resets: Vec<(Variable, Expr)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExplicitModel {
    pub params: Vec<(Variable, BigRational)>,
    /// Definitions evaluated in order before the derivatives.
    pub aux: Vec<(Variable, Expr)>,
    /// Highest derivative of each state variable and its right-hand side.
    pub odes: Vec<(Variable, Expr)>,
    pub events: Vec<Event>,
    /// Every state variable at each order below its highest derivative.
    pub states: Vec<Variable>,
}

impl fmt::Display for ExplicitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (x, q) in &self.params {
            writeln!(f, "{x} = {}", pretty_expr(&Expr::rational(q.clone())))?;
        }
        for (x, e) in &self.aux {
            writeln!(f, "{x} = {}", pretty_expr(e))?;
        }
        for (x, e) in &self.odes {
            writeln!(f, "{x} = {}", pretty_expr(e))?;
        }
        for ev in &self.events {
            let resets: Vec<String> = ev.resets.iter().map(|(x, e)| format!("{x} += {}", pretty_expr(e))).collect();
            writeln!(f, "if {} then {} noelse", pretty_expr(&ev.guard), resets.join(", "))?;
        }
        Ok(())
    }
}

fn scalar(v: &Value) -> Option<Expr> {
    match v {
        Value::Vector(_) => None,
        other => Some(other.to_expr()),
    }
}

fn conj(a: Option<&Expr>, b: Expr) -> Expr {
    match a {
        Some(a) => Expr::binary(Builtin::And, a.clone(), b),
        None => b,
    }
}

/// Collects events from the branches of a dynamic conditional.
fn events_of(nf: &NormalForm, guard: Option<&Expr>, out: &mut Vec<Event>) -> Result<(), ExplicitError> {
    let mut resets = Vec::new();
    let mut items = Vec::new();
    linear::flatten(nf, &mut items);
    for item in items {
        match item {
            NormalForm::Reset { lhs, rhs } => match (guard, scalar(rhs)) {
                (Some(_), Some(e)) => resets.push((lhs.clone(), e)),
                (None, _) => return Err(ExplicitError::MixedMode(format!("assignment to `{lhs}` outside a conditional"))),
                (_, None) => return Err(ExplicitError::Unsupported(format!("vector-valued assignment to `{lhs}`"))),
            },
            NormalForm::Cond { guard: g, then_nf, else_nf } => {
                let g = g.to_expr();
                let not_g = Expr::binary(Builtin::Eq, g.clone(), Expr::boolean(false));
                events_of(then_nf, Some(&conj(guard, g)), out)?;
                events_of(else_nf, Some(&conj(guard, not_g)), out)?;
            }
            NormalForm::Directed { lhs, .. } => {
                return Err(ExplicitError::MixedMode(format!("`{lhs}` is defined under a dynamic condition")));
            }
            NormalForm::Undirected { .. } => {
                return Err(ExplicitError::MixedMode("an equation holds only under a dynamic condition".into()));
            }
            NormalForm::Set(_) => unreachable!("flattened"),
        }
    }
    if let (Some(g), false) = (guard, resets.is_empty()) {
        out.push(Event { guard: g.clone(), resets });
    }
    Ok(())
}

fn all_names(w: &NormalForm, m: &ExplicitModel) -> BTreeSet<String> {
    let mut names = Vec::new();
    linear::appearance_order(w, &mut names);
    let mut names: BTreeSet<String> = names.into_iter().collect();
    let mut add = |e: &Expr| names.extend(free_vars(e).into_iter().map(|v| v.base));
    for (_, e) in m.aux.iter().chain(&m.odes) {
        add(e);
    }
    for ev in &m.events {
        add(&ev.guard);
        ev.resets.iter().for_each(|(_, e)| add(e));
    }
    names
}

fn let_names(taken: &BTreeSet<String>) -> impl Iterator<Item = String> + '_ {
    let letters = || (b'A'..=b'Z').map(|c| (c as char).to_string());
    letters().chain((1..).flat_map(move |k| letters().map(move |l| format!("{l}{k}")))).filter(|n| !taken.contains(n))
}

/// Names every sine or cosine that occurs at least twice, smallest first.
fn insert_lets(m: &mut ExplicitModel, taken: BTreeSet<String>) {
    let mut counts: BTreeMap<Expr, usize> = BTreeMap::new();
    let mut count = |e: &Expr| {
        e.visit(&mut |n| {
            if matches!(n, Expr::Apply(Builtin::Sin | Builtin::Cos, _)) {
                *counts.entry(n.clone()).or_insert(0) += 1;
            }
        })
    };
    for (_, e) in m.aux.iter().chain(&m.odes) {
        count(e);
    }
    for ev in &m.events {
        count(&ev.guard);
        ev.resets.iter().for_each(|(_, e)| count(e));
    }
    let mut repeated: Vec<Expr> = counts.into_iter().filter(|(_, k)| *k >= 2).map(|(e, _)| e).collect();
    if repeated.is_empty() {
        return;
    }
    repeated.sort_by(|a, b| (a.size(), a).cmp(&(b.size(), b)));
    let mut table: HashMap<Expr, Expr> = HashMap::new();
    let rewrite = |e: &Expr, table: &HashMap<Expr, Expr>| e.map_bottom_up(&mut |n| table.get(&n).cloned().unwrap_or(n));
    let mut lets = Vec::new();
    for (e, name) in repeated.into_iter().zip(let_names(&taken)) {
        let def = rewrite(&e, &table);
        let x = Variable::new(name);
        table.insert(def.clone(), Expr::Var(x.clone()));
        lets.push((x, def));
    }
    for (_, e) in m.aux.iter_mut().chain(m.odes.iter_mut()) {
        *e = rewrite(e, &table);
    }
    for ev in &mut m.events {
        ev.guard = rewrite(&ev.guard, &table);
        for (_, e) in &mut ev.resets {
            *e = rewrite(e, &table);
        }
    }
    lets.append(&mut m.aux);
    m.aux = lets;
}

/// Builds the explicit model of a residual program, checking pivots over `bx`.
pub fn build_explicit_model(w: &NormalForm, bx: &RangeBox) -> Result<ExplicitModel, ExplicitError> {
    let mut items = Vec::new();
    linear::flatten(w, &mut items);
    let mut m = ExplicitModel::default();
    for item in &items {
        match item {
            NormalForm::Directed { lhs, rhs } if !lhs.is_primed() => match rhs {
                Value::Static(Constant::Bool(_)) | Value::Vector(_) => {}
                Value::Static(k) => m.params.push((lhs.clone(), k.as_rational().expect("numeric"))),
                Value::Residual(e) => m.aux.push((lhs.clone(), e.clone())),
            },
            NormalForm::Cond { .. } => events_of(item, None, &mut m.events)?,
            NormalForm::Reset { .. } => events_of(item, None, &mut m.events)?,
            _ => {}
        }
    }

    let unknowns = collect_unknowns(w);
    let rows = linear::continuous_rows(&items);
    let sys = extract_linear_system(&rows, &unknowns)?;
    m.odes = gaussian_eliminate(&sys, bx)?;

    let solve = |e: &Expr| {
        let mut out = e.clone();
        for (u, rhs) in &m.odes {
            out = substitute(&out, u, rhs);
        }
        if out == *e {
            out
        } else {
            simplify(&out)
        }
    };
    let aux: Vec<_> = m.aux.iter().map(|(x, e)| (x.clone(), solve(e))).collect();
    let events: Vec<_> = m
        .events
        .iter()
        .map(|ev| Event { guard: solve(&ev.guard), resets: ev.resets.iter().map(|(x, e)| (x.clone(), solve(e))).collect() })
        .collect();
    m.aux = aux;
    m.events = events;

    for u in &unknowns {
        for k in 0..u.primes {
            m.states.push(Variable::with_primes(u.base.clone(), k));
        }
    }
    let taken = all_names(w, &m);
    insert_lets(&mut m, taken);
    Ok(m)
}
