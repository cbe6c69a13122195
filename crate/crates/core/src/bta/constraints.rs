use std::collections::HashMap;

use super::{BtExpr, Constraint, ConstraintSet, GlobalEnv};
use crate::label::Label;
use crate::lang::{Builtin, Equation, Expr, Variable};

/// The constraints of a program together with the node that produced each.
#[derive(Debug, Clone, Default)]
pub struct GeneratedConstraints {
    pub set: ConstraintSet,
    pub origins: HashMap<Constraint, Label>,
}

struct Gen<'a> {
    rho: &'a GlobalEnv,
    /// Family binders in effect: (scope, name, binder label), innermost last.
    binders: Vec<(Label, String, Label)>,
    out: GeneratedConstraints,
}

impl Gen<'_> {
    fn emit(&mut self, at: &Label, lhs: impl Into<BtExpr>, rhs: impl Into<BtExpr>) {
        let c = Constraint::new(lhs, rhs);
        self.out.origins.entry(c.clone()).or_insert_with(|| at.clone());
        self.out.set.insert(c);
    }

    /// `ρ(κ, x)`; unbound variables are dynamic.
    fn lookup(&self, scope: &Label, x: &Variable) -> BtExpr {
        for a in scope.ancestors() {
            if x.primes == 0 {
                if let Some((_, _, l)) = self.binders.iter().rev().find(|(s, n, _)| *s == a && *n == x.base) {
                    return l.into();
                }
            }
            if let Some(l) = self.rho.scope(&a).and_then(|env| env.get(x)) {
                return l.into();
            }
        }
        BtExpr::D
    }

    fn var(&mut self, x: &Variable, scope: &Label, l: &Label) {
        let def = self.lookup(scope, x);
        match x.unprimed() {
            None => {
                self.emit(l, def.clone(), l);
                self.emit(l, l, def);
            }
            Some(lower) => {
                let l1 = l.child(1);
                self.var(&lower, scope, &l1);
                self.emit(l, def, l);
                self.emit(l, BtExpr::D, &l1);
            }
        }
    }

    fn children_flow(&mut self, l: &Label, n: usize) {
        for k in 1..=n {
            self.emit(l, l.child(k as u32), l);
        }
    }

    fn expr(&mut self, e: &Expr, scope: &Label, l: &Label) {
        match e {
            Expr::Const(_) => self.emit(l, l, BtExpr::S),
            Expr::Var(x) => self.var(x, scope, l),
            Expr::Apply(Builtin::Length, args) => {
                // The length of a vector is fixed by its shape, which is
                // always known before simulation.
                self.expr(&args[0], scope, &l.child(1));
            }
            _ => {
                let children = e.children();
                for (k, c) in children.iter().enumerate() {
                    self.expr(c, scope, &l.child(k as u32 + 1));
                }
                self.children_flow(l, children.len());
            }
        }
    }

    fn eqn(&mut self, s: &Equation, scope: &Label, l: &Label) {
        let (l1, l2, l3) = (l.child(1), l.child(2), l.child(3));
        match s {
            Equation::Directed { lhs, rhs } => {
                self.var(lhs, scope, &l1);
                self.expr(rhs, scope, &l2);
                self.emit(l, &l1, l);
                self.emit(l, &l2, l);
                self.emit(l, &l2, &l1);
            }
            Equation::Reset { rhs, .. } => {
                self.expr(rhs, scope, &l2);
                self.emit(l, &l2, l);
            }
            Equation::Undirected { lhs, rhs } => {
                self.expr(lhs, scope, &l1);
                self.expr(rhs, scope, &l2);
                self.children_flow(l, 2);
            }
            Equation::Cond { guard, then_eq, else_eq } => {
                self.expr(guard, scope, &l1);
                self.eqn(then_eq, &l2, &l2);
                self.eqn(else_eq, &l3, &l3);
                self.children_flow(l, 3);
            }
            Equation::Family { binder, range, body } => {
                self.binders.push((scope.clone(), binder.clone(), l1.clone()));
                self.var(&Variable::new(binder.as_str()), scope, &l1);
                self.eqn(body, scope, &l3);
                self.binders.pop();
                self.expr(range, scope, &l2);
                self.emit(l, &l2, &l1);
                self.emit(l, &l3, l);
            }
            Equation::Set(es) => {
                for (k, e) in es.iter().enumerate() {
                    self.eqn(e, scope, &l.child(k as u32 + 1));
                }
                self.children_flow(l, es.len());
            }
        }
    }
}

/// Constraints for expression `e` labeled `l` in `scope`.
pub fn gen_constraints_expr(e: &Expr, scope: &Label, l: &Label, rho: &GlobalEnv) -> ConstraintSet {
    let mut g = Gen { rho, binders: Vec::new(), out: GeneratedConstraints::default() };
    g.expr(e, scope, l);
    g.out.set
}

/// Constraints for equation `s` labeled `l` in `scope`.
pub fn gen_constraints_eqn(s: &Equation, scope: &Label, l: &Label, rho: &GlobalEnv) -> ConstraintSet {
    let mut g = Gen { rho, binders: Vec::new(), out: GeneratedConstraints::default() };
    g.eqn(s, scope, l);
    g.out.set
}

/// Constraints for a whole program, remembering which node emitted each.
pub fn gen_constraints(program: &Equation, rho: &GlobalEnv) -> GeneratedConstraints {
    let mut g = Gen { rho, binders: Vec::new(), out: GeneratedConstraints::default() };
    let root = Label::root();
    g.eqn(program, &root, &root);
    g.out
}
