use std::collections::BTreeSet;

use super::{Equation, Expr, Variable};

/// Free variables of an expression. Every variable occurrence is free at the
/// expression level; only `foreach` binds names.
pub fn free_vars(e: &Expr) -> BTreeSet<Variable> {
    let mut out = BTreeSet::new();
    e.visit(&mut |node| {
        if let Expr::Var(v) = node {
            out.insert(v.clone());
        }
    });
    out
}

/// Free variables of every expression inside an equation, minus the names
/// bound by enclosing families. Left-hand sides of definitions are not
/// included.
pub fn free_vars_eqn(s: &Equation) -> BTreeSet<Variable> {
    match s {
        Equation::Directed { rhs, .. } | Equation::Reset { rhs, .. } => free_vars(rhs),
        Equation::Undirected { lhs, rhs } => {
            let mut out = free_vars(lhs);
            out.extend(free_vars(rhs));
            out
        }
        Equation::Cond { guard, then_eq, else_eq } => {
            let mut out = free_vars(guard);
            out.extend(free_vars_eqn(then_eq));
            out.extend(free_vars_eqn(else_eq));
            out
        }
        Equation::Family { binder, range, body } => {
            let bound = Variable::new(binder.clone());
            let mut out: BTreeSet<_> = free_vars_eqn(body).into_iter().filter(|v| *v != bound).collect();
            out.extend(free_vars(range));
            out
        }
        Equation::Set(es) => es.iter().flat_map(free_vars_eqn).collect(),
    }
}

/// Variables defined by directed equations, looking through sets, both
/// branches of conditionals, and family bodies.
pub fn left_vars(s: &Equation) -> BTreeSet<Variable> {
    match s {
        Equation::Directed { lhs, .. } => BTreeSet::from([lhs.clone()]),
        Equation::Undirected { .. } | Equation::Reset { .. } => BTreeSet::new(),
        Equation::Cond { then_eq, else_eq, .. } => {
            let mut out = left_vars(then_eq);
            out.extend(left_vars(else_eq));
            out
        }
        Equation::Family { body, .. } => left_vars(body),
        Equation::Set(es) => es.iter().flat_map(left_vars).collect(),
    }
}

/// Replaces every occurrence of `x` in `e` by `v`.
pub fn substitute(e: &Expr, x: &Variable, v: &Expr) -> Expr {
    e.map_bottom_up(&mut |node| match node {
        Expr::Var(ref y) if y == x => v.clone(),
        other => other,
    })
}

/// Capture-avoiding substitution into an equation. Family binders shadow `x`;
/// a binder that would capture a free variable of `v` is renamed first.
pub fn substitute_eqn(s: &Equation, x: &Variable, v: &Expr) -> Equation {
    match s {
        Equation::Directed { lhs, rhs } => Equation::Directed { lhs: lhs.clone(), rhs: substitute(rhs, x, v) },
        Equation::Reset { lhs, rhs } => Equation::Reset { lhs: lhs.clone(), rhs: substitute(rhs, x, v) },
        Equation::Undirected { lhs, rhs } => Equation::Undirected { lhs: substitute(lhs, x, v), rhs: substitute(rhs, x, v) },
        Equation::Cond { guard, then_eq, else_eq } => {
            Equation::cond(substitute(guard, x, v), substitute_eqn(then_eq, x, v), substitute_eqn(else_eq, x, v))
        }
        Equation::Family { binder, range, body } => {
            let range = substitute(range, x, v);
            let bound = Variable::new(binder.clone());
            if bound == *x {
                return Equation::family(binder.clone(), range, (**body).clone());
            }
            let captured = free_vars(v).iter().any(|fv| fv.base == *binder);
            if captured {
                let fresh = fresh_name(binder, &|name| {
                    free_vars(v).iter().any(|fv| fv.base == name)
                        || free_vars_eqn(body).iter().any(|fv| fv.base == name)
                        || left_vars(body).iter().any(|lv| lv.base == name)
                });
                let renamed = substitute_eqn(body, &bound, &Expr::var(&fresh));
                Equation::family(fresh, range, substitute_eqn(&renamed, x, v))
            } else {
                Equation::family(binder.clone(), range, substitute_eqn(body, x, v))
            }
        }
        Equation::Set(es) => Equation::Set(es.iter().map(|e| substitute_eqn(e, x, v)).collect()),
    }
}

fn fresh_name(base: &str, taken: &dyn Fn(&str) -> bool) -> String {
    (1..).map(|k| format!("{base}_{k}")).find(|name| !taken(name)).expect("unbounded supply of names")
}
