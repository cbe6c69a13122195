use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ExplicitError;
use crate::lang::{eval_real, free_vars, substitute, Builtin, Expr, Variable};
use crate::specialize::{partial_derivative, simplify, NormalForm};

/// `A·u + b = 0`, row by row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSystem {
    pub unknowns: Vec<Variable>,
    pub a: Vec<Vec<Expr>>,
    pub b: Vec<Expr>,
}

/// Equations that constrain the continuous dynamics: undirected equations
/// and definitions of derivatives. Each is returned as `lhs - rhs`.
pub(crate) fn continuous_rows(items: &[&NormalForm]) -> Vec<Expr> {
    let mut rows = Vec::new();
    for nf in items {
        match nf {
            NormalForm::Undirected { lhs, rhs } => rows.push(simplify(&Expr::binary(Builtin::Sub, lhs.to_expr(), rhs.to_expr()))),
            NormalForm::Directed { lhs, rhs } if lhs.is_primed() => {
                rows.push(simplify(&Expr::binary(Builtin::Sub, Expr::Var(lhs.clone()), rhs.to_expr())))
            }
            _ => {}
        }
    }
    rows
}

pub(crate) fn flatten<'a>(w: &'a NormalForm, out: &mut Vec<&'a NormalForm>) {
    match w {
        NormalForm::Set(items) => items.iter().for_each(|i| flatten(i, out)),
        other => out.push(other),
    }
}

fn see(name: &str, out: &mut Vec<String>) {
    if !out.iter().any(|n| n == name) {
        out.push(name.to_string());
    }
}

fn see_expr(e: &Expr, out: &mut Vec<String>) {
    e.visit(&mut |n| {
        if let Expr::Var(v) = n {
            see(&v.base, out);
        }
    })
}

pub(crate) fn appearance_order(w: &NormalForm, out: &mut Vec<String>) {
    match w {
        NormalForm::Directed { lhs, rhs } | NormalForm::Reset { lhs, rhs } => {
            see(&lhs.base, out);
            see_expr(&rhs.to_expr(), out);
        }
        NormalForm::Undirected { lhs, rhs } => {
            see_expr(&lhs.to_expr(), out);
            see_expr(&rhs.to_expr(), out);
        }
        NormalForm::Cond { guard, then_nf, else_nf } => {
            see_expr(&guard.to_expr(), out);
            appearance_order(then_nf, out);
            appearance_order(else_nf, out);
        }
        NormalForm::Set(items) => items.iter().for_each(|i| appearance_order(i, out)),
    }
}

/// The highest-order derivative of each state variable, in order of first
/// appearance in the program.
pub fn collect_unknowns(w: &NormalForm) -> Vec<Variable> {
    let mut items = Vec::new();
    flatten(w, &mut items);
    let mut order: BTreeMap<String, u32> = BTreeMap::new();
    for row in continuous_rows(&items) {
        for v in free_vars(&row) {
            let k = order.entry(v.base.clone()).or_insert(0);
            *k = (*k).max(v.primes);
        }
    }
    let mut names = Vec::new();
    appearance_order(w, &mut names);
    names
        .into_iter()
        .filter_map(|n| match order.get(&n) {
            Some(&k) if k > 0 => Some(Variable::with_primes(n, k)),
            _ => None,
        })
        .collect()
}

fn mentions_any(e: &Expr, xs: &[Variable]) -> Option<Variable> {
    let fv = free_vars(e);
    xs.iter().find(|x| fv.contains(x)).cloned()
}

/// Splits each row into coefficients of the unknowns and a remainder.
pub fn extract_linear_system(rows: &[Expr], unknowns: &[Variable]) -> Result<LinearSystem, ExplicitError> {
    if rows.len() != unknowns.len() {
        return Err(ExplicitError::DimensionMismatch { equations: rows.len(), unknowns: unknowns.len() });
    }
    let mut a = Vec::with_capacity(rows.len());
    let mut b = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let mut coeffs = Vec::with_capacity(unknowns.len());
        for u in unknowns {
            let c = partial_derivative(row, u).map_err(|e| ExplicitError::Unsupported(e.to_string()))?;
            if mentions_any(&c, unknowns).is_some() {
                return Err(ExplicitError::NonlinearInUnknowns { row: i, unknown: u.clone(), coefficient: c });
            }
            coeffs.push(c);
        }
        let mut rest = row.clone();
        for u in unknowns {
            rest = substitute(&rest, u, &Expr::nat(0));
        }
        let rest = simplify(&rest);
        check_reconstruction(i, row, &coeffs, &rest, unknowns)?;
        a.push(coeffs);
        b.push(rest);
    }
    Ok(LinearSystem { unknowns: unknowns.to_vec(), a, b })
}

/// Compares `row` against `Σ a_j u_j + b` at random points. Catches rows
/// whose dependence on an unknown hides inside an opaque atom.
fn check_reconstruction(i: usize, row: &Expr, coeffs: &[Expr], rest: &Expr, unknowns: &[Variable]) -> Result<(), ExplicitError> {
    let mut vars: BTreeSet<Variable> = free_vars(row);
    vars.extend(free_vars(rest));
    for c in coeffs {
        vars.extend(free_vars(c));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
    for _ in 0..16 {
        let point: BTreeMap<Variable, f64> = vars.iter().map(|v| (v.clone(), rng.gen_range(-2.0..2.0))).collect();
        let Ok(direct) = eval_real(row, &point) else { continue };
        let Ok(mut rebuilt) = eval_real(rest, &point) else { continue };
        let mut scale = direct.abs().max(rebuilt.abs()).max(1.0);
        for (c, u) in coeffs.iter().zip(unknowns) {
            let Ok(cv) = eval_real(c, &point) else { return Ok(()) };
            let term = cv * point.get(u).copied().unwrap_or(0.0);
            scale = scale.max(term.abs());
            rebuilt += term;
        }
        if (direct - rebuilt).abs() > 1e-9 * scale {
            let unknown = mentions_any(row, unknowns).unwrap_or_else(|| unknowns[0].clone());
            return Err(ExplicitError::NonlinearInUnknowns { row: i, unknown, coefficient: row.clone() });
        }
    }
    Ok(())
}
