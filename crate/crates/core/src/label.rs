//! Node labels: paths from the program root, one 1-based child index per
//! step. The top-level equation set is `root`; child `k` of node `l` is `l.k`.
//!
//! Child numbering, shared by every pass that walks labeled trees:
//!
//! | node            | children                              |
//! |-----------------|---------------------------------------|
//! | `x'` (primed)   | 1 = `x` (one prime fewer)             |
//! | vector          | 1..m = elements                       |
//! | `e1(e2)`        | 1 = `e1`, 2 = `e2`                    |
//! | `f(e1..en)`     | 1..n = arguments                      |
//! | `(e)'`          | 1 = `e`                               |
//! | `e1'[e2]`       | 1 = `e1`, 2 = `e2`                    |
//! | `x = e`, `x += e` | 1 = `x`, 2 = `e`                    |
//! | `e1 = e2`       | 1 = `e1`, 2 = `e2`                    |
//! | `if e then s1 else s2` | 1 = `e`, 2 = `s1`, 3 = `s2`    |
//! | `foreach n in e do s`  | 1 = `n`, 2 = `e`, 3 = `s`      |
//! | `{s1, .., sm}`  | 1..m                                  |

use std::fmt;

use crate::lang::{Equation, Expr, Variable};

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(Vec<u32>);

impl Label {
    pub fn root() -> Label {
        Label(Vec::new())
    }

    pub fn from_path(path: Vec<u32>) -> Label {
        debug_assert!(path.iter().all(|&k| k >= 1), "child indices are 1-based");
        Label(path)
    }

    /// The `k`-th child (1-based).
    pub fn child(&self, k: u32) -> Label {
        let mut path = self.0.clone();
        path.push(k);
        Label(path)
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Option<Label> {
        (!self.0.is_empty()).then(|| Label(self.0[..self.0.len() - 1].to_vec()))
    }

    /// This label followed by every proper ancestor, ending at root.
    pub fn ancestors(&self) -> impl Iterator<Item = Label> + '_ {
        (0..=self.0.len()).rev().map(move |n| Label(self.0[..n].to_vec()))
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("root")?;
        for k in &self.0 {
            write!(f, ".{k}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s.strip_prefix("root").ok_or_else(|| format!("label must start with `root`: {s}"))?;
        let mut path = Vec::new();
        for part in rest.split('.').skip(1) {
            let k: u32 = part.parse().map_err(|_| format!("bad label component `{part}`"))?;
            if k == 0 {
                return Err("label components are 1-based".into());
            }
            path.push(k);
        }
        if !rest.is_empty() && !rest.starts_with('.') {
            return Err(format!("bad label `{s}`"));
        }
        Ok(Label(path))
    }
}

/// A labeled program node. Variables are owned because a primed variable's
/// lower-order children exist only implicitly in the tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node<'a> {
    Expr(&'a Expr),
    /// A variable occurrence (an equation's left-hand side, or the implicit
    /// lower-order part of a primed variable).
    Var(Variable),
    Binder(&'a str),
    Eqn(&'a Equation),
}

/// Every node of `s` with its label, parents before children.
pub fn label_program(s: &Equation) -> Vec<(Label, Node<'_>)> {
    let mut out = Vec::new();
    label_eqn(s, Label::root(), &mut out);
    out
}

fn label_var<'a>(v: &Variable, l: Label, out: &mut Vec<(Label, Node<'a>)>) {
    let lower = v.unprimed();
    let child = l.child(1);
    out.push((l, Node::Var(v.clone())));
    if let Some(lower) = lower {
        label_var(&lower, child, out);
    }
}

fn label_expr<'a>(e: &'a Expr, l: Label, out: &mut Vec<(Label, Node<'a>)>) {
    if let Expr::Var(v) = e {
        if let Some(lower) = v.unprimed() {
            out.push((l.clone(), Node::Expr(e)));
            label_var(&lower, l.child(1), out);
            return;
        }
    }
    out.push((l.clone(), Node::Expr(e)));
    for (k, c) in e.children().into_iter().enumerate() {
        label_expr(c, l.child(k as u32 + 1), out);
    }
}

fn label_eqn<'a>(s: &'a Equation, l: Label, out: &mut Vec<(Label, Node<'a>)>) {
    out.push((l.clone(), Node::Eqn(s)));
    match s {
        Equation::Directed { lhs, rhs } | Equation::Reset { lhs, rhs } => {
            label_var(lhs, l.child(1), out);
            label_expr(rhs, l.child(2), out);
        }
        Equation::Undirected { lhs, rhs } => {
            label_expr(lhs, l.child(1), out);
            label_expr(rhs, l.child(2), out);
        }
        Equation::Cond { guard, then_eq, else_eq } => {
            label_expr(guard, l.child(1), out);
            label_eqn(then_eq, l.child(2), out);
            label_eqn(else_eq, l.child(3), out);
        }
        Equation::Family { binder, range, body } => {
            out.push((l.child(1), Node::Binder(binder)));
            label_expr(range, l.child(2), out);
            label_eqn(body, l.child(3), out);
        }
        Equation::Set(es) => {
            for (k, e) in es.iter().enumerate() {
                label_eqn(e, l.child(k as u32 + 1), out);
            }
        }
    }
}
