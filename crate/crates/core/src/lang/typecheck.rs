use thiserror::Error;

use super::{left_vars, Builtin, Constant, Equation, Expr, Type, TypeEnv, Variable};
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeErrorKind {
    #[error("unbound variable `{0}`")]
    UnboundVariable(Variable),
    #[error("index {index} out of bounds for vector of length {len}")]
    IndexOutOfBounds { index: u64, len: usize },
    #[error("`{name}` expects {expected} argument(s), got {got}")]
    ArityMismatch { name: &'static str, expected: usize, got: usize },
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch { expected: String, found: String },
    #[error("primed variable `{0}` needs `{0}` and its unprimed form bound at real")]
    MissingUnprimedBinding(Variable),
    #[error("guard has type {0}, expected bool")]
    GuardNotBool(Type),
}

/// A typing failure at the node with the given label (relative to the root
/// of the checked term).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} (at {label})")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub label: Label,
}

type TResult<T> = Result<T, TypeError>;

fn err<T>(kind: TypeErrorKind, label: &Label) -> TResult<T> {
    Err(TypeError { kind, label: label.clone() })
}

fn mismatch<T>(expected: &str, found: &Type, label: &Label) -> TResult<T> {
    err(TypeErrorKind::TypeMismatch { expected: expected.to_string(), found: found.to_string() }, label)
}

/// `Γ ⊢ e : τ`.
pub fn type_check_expr(env: &TypeEnv, e: &Expr) -> Result<Type, TypeError> {
    check_expr(env, e, &Label::root())
}

/// `Γ ⊢ s`.
pub fn type_check_eqn(env: &TypeEnv, s: &Equation) -> Result<(), TypeError> {
    check_eqn(env, s, &Label::root())
}

fn check_var(env: &TypeEnv, x: &Variable, label: &Label) -> TResult<Type> {
    let Some(ty) = env.get(x) else {
        return err(TypeErrorKind::UnboundVariable(x.clone()), label);
    };
    if let Some(lower) = x.unprimed() {
        if *ty != Type::Real {
            return mismatch("real", ty, label);
        }
        if env.get(&lower) != Some(&Type::Real) {
            return err(TypeErrorKind::MissingUnprimedBinding(x.clone()), label);
        }
    }
    Ok(ty.clone())
}

pub(crate) fn check_expr(env: &TypeEnv, e: &Expr, label: &Label) -> TResult<Type> {
    match e {
        Expr::Const(k) => Ok(k.ty()),
        Expr::Var(x) => check_var(env, x, label),
        Expr::Vector(es) => {
            if es.is_empty() {
                return err(TypeErrorKind::TypeMismatch { expected: "nonempty vector".into(), found: "()".into() }, label);
            }
            let tys = es
                .iter()
                .enumerate()
                .map(|(j, c)| check_expr(env, c, &label.child(j as u32 + 1)))
                .collect::<TResult<Vec<_>>>()?;
            Ok(Type::Vector(tys))
        }
        Expr::Index(target, index) => {
            let tt = check_expr(env, target, &label.child(1))?;
            if let Expr::Const(Constant::Nat(i)) = **index {
                return match tt {
                    Type::Vector(ts) => match ts.get(i as usize) {
                        Some(t) => Ok(t.clone()),
                        None => err(TypeErrorKind::IndexOutOfBounds { index: i, len: ts.len() }, label),
                    },
                    Type::Seq(t) => Ok(*t),
                    other => mismatch("vector", &other, &label.child(1)),
                };
            }
            let it = check_expr(env, index, &label.child(2))?;
            if it != Type::Nat {
                return mismatch("nat", &it, &label.child(2));
            }
            match &tt {
                Type::Vector(ts) => homogeneous(ts).map_or_else(|| mismatch("homogeneous vector", &tt, &label.child(1)), Ok),
                Type::Seq(t) => Ok((**t).clone()),
                other => mismatch("vector", other, &label.child(1)),
            }
        }
        Expr::Apply(f, args) => {
            if args.len() != f.arity() {
                return err(TypeErrorKind::ArityMismatch { name: f.symbol(), expected: f.arity(), got: args.len() }, label);
            }
            let tys = args
                .iter()
                .enumerate()
                .map(|(j, c)| check_expr(env, c, &label.child(j as u32 + 1)))
                .collect::<TResult<Vec<_>>>()?;
            apply_type(*f, &tys, label)
        }
        Expr::TimeDer(inner) => {
            let t = check_expr(env, inner, &label.child(1))?;
            if t.is_numeric() {
                Ok(Type::Real)
            } else {
                mismatch("real", &t, &label.child(1))
            }
        }
        Expr::PartialDer(of, wrt) => {
            for (k, c) in [(1, of), (2, wrt)] {
                let t = check_expr(env, c, &label.child(k))?;
                if !t.is_numeric() {
                    return mismatch("real", &t, &label.child(k));
                }
            }
            Ok(Type::Real)
        }
    }
}

/// Element type of a homogeneous vector; naturals and reals unify to real.
pub(crate) fn homogeneous(ts: &[Type]) -> Option<Type> {
    let first = ts.first()?;
    if ts.iter().all(|t| t == first) {
        Some(first.clone())
    } else if ts.iter().all(Type::is_numeric) {
        Some(Type::Real)
    } else {
        None
    }
}

pub(crate) fn compatible(a: &Type, b: &Type) -> bool {
    match (a, b) {
        _ if a.is_numeric() && b.is_numeric() => true,
        (Type::Vector(xs), Type::Vector(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| compatible(x, y)),
        (Type::Seq(x), Type::Seq(y)) => compatible(x, y),
        _ => a == b,
    }
}

/// Rows and columns of a numeric matrix (vector of equal-length numeric vectors).
fn matrix_shape(t: &Type) -> Option<(usize, usize)> {
    let Type::Vector(rows) = t else { return None };
    let mut cols = None;
    for row in rows {
        let n = numeric_vector_len(row)?;
        if *cols.get_or_insert(n) != n {
            return None;
        }
    }
    Some((rows.len(), cols?))
}

fn numeric_vector_len(t: &Type) -> Option<usize> {
    match t {
        Type::Vector(xs) if xs.iter().all(Type::is_numeric) => Some(xs.len()),
        _ => None,
    }
}

fn real_matrix(rows: usize, cols: usize) -> Type {
    Type::Vector(vec![Type::Vector(vec![Type::Real; cols]); rows])
}

fn apply_type(f: Builtin, tys: &[Type], label: &Label) -> TResult<Type> {
    use Builtin::*;
    let numeric = |j: usize| -> TResult<()> {
        if tys[j].is_numeric() {
            Ok(())
        } else {
            mismatch("nat or real", &tys[j], &label.child(j as u32 + 1))
        }
    };
    let boolean = |j: usize| -> TResult<()> {
        if tys[j] == Type::Bool {
            Ok(())
        } else {
            mismatch("bool", &tys[j], &label.child(j as u32 + 1))
        }
    };
    let both_nat = || tys.iter().all(|t| *t == Type::Nat);
    match f {
        Mul if tys.iter().any(|t| matches!(t, Type::Vector(_))) => {
            let (a, b) = (&tys[0], &tys[1]);
            match (matrix_shape(a), matrix_shape(b), numeric_vector_len(b)) {
                (Some((r, k)), Some((k2, c)), _) if k == k2 => Ok(real_matrix(r, c)),
                (Some((r, k)), None, Some(n)) if k == n => Ok(Type::Vector(vec![Type::Real; r])),
                _ => err(
                    TypeErrorKind::TypeMismatch { expected: "conformable matrix operands".into(), found: format!("{a} * {b}") },
                    label,
                ),
            }
        }
        Add | Sub | Mul | Pow => {
            numeric(0)?;
            numeric(1)?;
            Ok(if both_nat() { Type::Nat } else { Type::Real })
        }
        Div => {
            numeric(0)?;
            numeric(1)?;
            Ok(Type::Real)
        }
        Neg | Sin | Cos => {
            numeric(0)?;
            Ok(Type::Real)
        }
        Pi => Ok(Type::Real),
        And | Or => {
            boolean(0)?;
            boolean(1)?;
            Ok(Type::Bool)
        }
        Lt | Le | Gt | Ge => {
            numeric(0)?;
            numeric(1)?;
            Ok(Type::Bool)
        }
        Eq | Ne => {
            let ok = (tys[0].is_numeric() && tys[1].is_numeric()) || (tys[0] == Type::Bool && tys[1] == Type::Bool);
            if ok {
                Ok(Type::Bool)
            } else {
                mismatch(&format!("{} operand", tys[0]), &tys[1], &label.child(2))
            }
        }
        Length => match &tys[0] {
            Type::Vector(_) | Type::Seq(_) => Ok(Type::Nat),
            other => mismatch("vector", other, &label.child(1)),
        },
        Inv => match matrix_shape(&tys[0]) {
            Some((2, 2)) => Ok(real_matrix(2, 2)),
            _ => mismatch("2x2 matrix", &tys[0], &label.child(1)),
        },
        Trans => match (matrix_shape(&tys[0]), numeric_vector_len(&tys[0])) {
            (Some((r, c)), _) => Ok(real_matrix(c, r)),
            (None, Some(n)) => Ok(Type::Vector(vec![Type::Real; n])),
            _ => mismatch("matrix or numeric vector", &tys[0], &label.child(1)),
        },
        Range => {
            for (j, t) in tys.iter().enumerate().take(2) {
                if *t != Type::Nat {
                    return mismatch("nat", t, &label.child(j as u32 + 1));
                }
            }
            Ok(Type::Seq(Box::new(Type::Nat)))
        }
    }
}

pub(crate) fn check_eqn(env: &TypeEnv, s: &Equation, label: &Label) -> TResult<()> {
    match s {
        Equation::Directed { lhs, rhs } | Equation::Reset { lhs, rhs } => {
            let lt = check_var(env, lhs, &label.child(1))?;
            let rt = check_expr(env, rhs, &label.child(2))?;
            if compatible(&lt, &rt) {
                Ok(())
            } else {
                mismatch(&lt.to_string(), &rt, &label.child(2))
            }
        }
        Equation::Undirected { lhs, rhs } => {
            let lt = check_expr(env, lhs, &label.child(1))?;
            let rt = check_expr(env, rhs, &label.child(2))?;
            if compatible(&lt, &rt) {
                Ok(())
            } else {
                mismatch(&lt.to_string(), &rt, &label.child(2))
            }
        }
        Equation::Cond { guard, then_eq, else_eq } => {
            let gt = check_expr(env, guard, &label.child(1))?;
            if gt != Type::Bool {
                return err(TypeErrorKind::GuardNotBool(gt), &label.child(1));
            }
            check_eqn(env, then_eq, &label.child(2))?;
            check_eqn(env, else_eq, &label.child(3))
        }
        Equation::Family { binder, range, body } => {
            let elem = family_element_type(env, range, &label.child(2))?;
            check_eqn(&env.extend(Variable::new(binder.clone()), elem), body, &label.child(3))
        }
        Equation::Set(es) => {
            for (j, e) in es.iter().enumerate() {
                check_eqn(env, e, &label.child(j as u32 + 1))?;
            }
            Ok(())
        }
    }
}

fn family_element_type(env: &TypeEnv, range: &Expr, label: &Label) -> TResult<Type> {
    let rt = check_expr(env, range, label)?;
    match &rt {
        Type::Vector(ts) => homogeneous(ts).map_or_else(|| mismatch("homogeneous vector", &rt, label), Ok),
        Type::Seq(t) => Ok((**t).clone()),
        other => mismatch("vector", other, label),
    }
}

/// The natural typing environment of a program: variables never defined by
/// a directed equation are real-valued state (together with all their lower
/// derivatives); defined variables get the type of their right-hand side.
pub fn infer_env(s: &Equation) -> TypeEnv {
    let defined = left_vars(s);
    let mut env = TypeEnv::new();
    let mut occurring = Vec::new();
    collect_occurrences(s, &mut Vec::new(), &mut occurring);
    for v in defined.iter().filter(|v| v.is_primed()) {
        occurring.push(v.clone());
    }
    for v in occurring {
        let mut cur = Some(v);
        while let Some(x) = cur {
            if x.is_primed() || !defined.contains(&x) {
                env.insert(x.clone(), Type::Real);
            }
            cur = x.unprimed();
        }
    }
    for _ in 0..32 {
        let mut changed = false;
        infer_pass(s, &env.clone(), &mut env, &mut changed);
        if !changed {
            break;
        }
    }
    env
}

fn collect_occurrences(s: &Equation, bound: &mut Vec<String>, out: &mut Vec<Variable>) {
    let take = |e: &Expr, bound: &Vec<String>, out: &mut Vec<Variable>| {
        for v in super::free_vars(e) {
            if !(v.primes == 0 && bound.contains(&v.base)) {
                out.push(v);
            }
        }
    };
    match s {
        Equation::Directed { lhs, rhs } | Equation::Reset { lhs, rhs } => {
            out.push(lhs.clone());
            take(rhs, bound, out);
        }
        Equation::Undirected { lhs, rhs } => {
            take(lhs, bound, out);
            take(rhs, bound, out);
        }
        Equation::Cond { guard, then_eq, else_eq } => {
            take(guard, bound, out);
            collect_occurrences(then_eq, bound, out);
            collect_occurrences(else_eq, bound, out);
        }
        Equation::Family { binder, range, body } => {
            take(range, bound, out);
            bound.push(binder.clone());
            collect_occurrences(body, bound, out);
            bound.pop();
        }
        Equation::Set(es) => es.iter().for_each(|e| collect_occurrences(e, bound, out)),
    }
}

fn infer_pass(s: &Equation, scope: &TypeEnv, env: &mut TypeEnv, changed: &mut bool) {
    match s {
        Equation::Directed { lhs, rhs } if !lhs.is_primed() => {
            if let Ok(t) = check_expr(scope, rhs, &Label::root()) {
                if env.get(lhs) != Some(&t) {
                    env.insert(lhs.clone(), t);
                    *changed = true;
                }
            }
        }
        Equation::Cond { then_eq, else_eq, .. } => {
            infer_pass(then_eq, scope, env, changed);
            infer_pass(else_eq, scope, env, changed);
        }
        Equation::Family { binder, range, body } => {
            if let Ok(elem) = family_element_type(scope, range, &Label::root()) {
                let inner = scope.extend(Variable::new(binder.clone()), elem);
                infer_pass(body, &inner, env, changed);
            }
        }
        Equation::Set(es) => es.iter().for_each(|e| infer_pass(e, scope, env, changed)),
        _ => {}
    }
}
