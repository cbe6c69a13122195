//! Builtins over specialization values: exact arithmetic on constants,
//! residual applications otherwise, and the structural vector builtins.

use num::{BigRational, Signed, ToPrimitive, Zero};

use super::{SpecError, SpecErrorKind, Value};
use crate::lang::{Builtin, Constant, Expr};

/// Exponents beyond this are left symbolic rather than computed exactly.
const MAX_STATIC_EXPONENT: i64 = 4096;

fn fail<T>(kind: SpecErrorKind, detail: impl Into<String>) -> Result<T, SpecError> {
    Err(SpecError::new(kind, detail))
}

fn rat_or_nat(q: BigRational, nat: bool) -> Constant {
    if nat && q.is_integer() && !q.is_negative() {
        if let Some(n) = q.numer().to_u64() {
            return Constant::Nat(n);
        }
    }
    Constant::Rat(q)
}

/// Applies a scalar builtin to constants. `Ok(None)` means the result is not
/// an exact rational (sines, cosines, pi, irrational powers) and must stay
/// symbolic.
pub fn static_scalar(f: Builtin, args: &[&Constant]) -> Result<Option<Constant>, SpecError> {
    use Builtin::*;
    if args.len() != f.arity() {
        return fail(SpecErrorKind::ArityError, format!("`{}` takes {} arguments, got {}", f.symbol(), f.arity(), args.len()));
    }
    let q = |j: usize| -> Result<BigRational, SpecError> {
        args[j].as_rational().ok_or_else(|| {
            SpecError::new(SpecErrorKind::Unsupported, format!("`{}` needs a number, got {}", f.symbol(), args[j]))
        })
    };
    let b = |j: usize| -> Result<bool, SpecError> {
        match args[j] {
            Constant::Bool(v) => Ok(*v),
            other => fail(SpecErrorKind::Unsupported, format!("`{}` needs a boolean, got {other}", f.symbol())),
        }
    };
    let nats = args.iter().all(|k| matches!(k, Constant::Nat(_)));
    Ok(Some(match f {
        Add => rat_or_nat(q(0)? + q(1)?, nats),
        Sub => rat_or_nat(q(0)? - q(1)?, nats),
        Mul => rat_or_nat(q(0)? * q(1)?, nats),
        Div => {
            let d = q(1)?;
            if d.is_zero() {
                return fail(SpecErrorKind::DivisionByZero, format!("{} / 0", args[0]));
            }
            Constant::Rat(q(0)? / d)
        }
        Pow => {
            let (base, exp) = (q(0)?, q(1)?);
            let k = match exp.to_integer().to_i64() {
                Some(k) if exp.is_integer() && k.abs() <= MAX_STATIC_EXPONENT => k,
                _ => return Ok(None),
            };
            if k < 0 && base.is_zero() {
                return fail(SpecErrorKind::DivisionByZero, format!("0 ^ {k}"));
            }
            let p = num::pow(base, k.unsigned_abs() as usize);
            if k < 0 {
                Constant::Rat(p.recip())
            } else {
                rat_or_nat(p, nats)
            }
        }
        Neg => Constant::Rat(-q(0)?),
        And => Constant::Bool(b(0)? && b(1)?),
        Or => Constant::Bool(b(0)? || b(1)?),
        Lt => Constant::Bool(q(0)? < q(1)?),
        Le => Constant::Bool(q(0)? <= q(1)?),
        Gt => Constant::Bool(q(0)? > q(1)?),
        Ge => Constant::Bool(q(0)? >= q(1)?),
        Eq | Ne => {
            let same = match (args[0].as_rational(), args[1].as_rational()) {
                (Some(x), Some(y)) => x == y,
                _ => args[0] == args[1],
            };
            Constant::Bool(same == (f == Eq))
        }
        Sin | Cos => {
            if !q(0)?.is_zero() {
                return Ok(None);
            }
            Constant::Nat(if f == Sin { 0 } else { 1 })
        }
        Pi => return Ok(None),
        Length | Inv | Trans | Range => {
            return fail(SpecErrorKind::Unsupported, format!("`{}` needs a vector argument", f.symbol()))
        }
    }))
}

/// Applies a builtin to constants, residualizing results that are not exact.
pub fn static_apply(f: Builtin, args: &[Constant]) -> Result<Value, SpecError> {
    let refs: Vec<&Constant> = args.iter().collect();
    Ok(match static_scalar(f, &refs)? {
        Some(k) => Value::Static(k),
        None => Value::Residual(Expr::Apply(f, args.iter().cloned().map(Expr::Const).collect())),
    })
}

fn scalar(f: Builtin, args: Vec<Value>) -> Result<Value, SpecError> {
    let consts: Option<Vec<&Constant>> = args.iter().map(Value::as_constant).collect();
    if let Some(ks) = consts {
        if let Some(k) = static_scalar(f, &ks)? {
            return Ok(Value::Static(k));
        }
    }
    Ok(Value::Residual(Expr::Apply(f, args.iter().map(Value::to_expr).collect())))
}

fn add(a: Value, b: Value) -> Result<Value, SpecError> {
    scalar(Builtin::Add, vec![a, b])
}

fn mul(a: Value, b: Value) -> Result<Value, SpecError> {
    scalar(Builtin::Mul, vec![a, b])
}

/// Rows of a rectangular matrix value.
fn matrix(v: &Value) -> Option<Vec<&[Value]>> {
    let Value::Vector(rows) = v else { return None };
    let rows: Option<Vec<&[Value]>> = rows
        .iter()
        .map(|r| match r {
            Value::Vector(items) => Some(items.as_slice()),
            _ => None,
        })
        .collect();
    let rows = rows?;
    let width = rows.first().map(|r| r.len())?;
    rows.iter().all(|r| r.len() == width).then_some(rows)
}

fn dot(a: &[Value], b: &[Value]) -> Result<Value, SpecError> {
    let mut acc: Option<Value> = None;
    for (x, y) in a.iter().zip(b) {
        let p = mul(x.clone(), y.clone())?;
        acc = Some(match acc {
            None => p,
            Some(s) => add(s, p)?,
        });
    }
    Ok(acc.unwrap_or(Value::Static(Constant::Nat(0))))
}

fn matmul(a: &Value, b: &Value) -> Result<Value, SpecError> {
    let Some(rows) = matrix(a) else {
        return fail(SpecErrorKind::Unsupported, "vector product needs a matrix on the left");
    };
    if let Some(cols_of_b) = matrix(b) {
        if rows[0].len() != cols_of_b.len() {
            return fail(SpecErrorKind::Unsupported, "matrix shapes do not conform");
        }
        let width = cols_of_b[0].len();
        let mut out = Vec::with_capacity(rows.len());
        for r in &rows {
            let mut row = Vec::with_capacity(width);
            for j in 0..width {
                let col: Vec<Value> = cols_of_b.iter().map(|br| br[j].clone()).collect();
                row.push(dot(r, &col)?);
            }
            out.push(Value::Vector(row));
        }
        return Ok(Value::Vector(out));
    }
    match b {
        Value::Vector(v) if v.len() == rows[0].len() => {
            Ok(Value::Vector(rows.iter().map(|r| dot(r, v)).collect::<Result<_, _>>()?))
        }
        _ => fail(SpecErrorKind::Unsupported, "matrix and vector shapes do not conform"),
    }
}

fn transpose(v: &Value) -> Result<Value, SpecError> {
    if let Some(rows) = matrix(v) {
        let width = rows[0].len();
        return Ok(Value::Vector((0..width).map(|j| Value::Vector(rows.iter().map(|r| r[j].clone()).collect())).collect()));
    }
    match v {
        // a flat vector is already a column
        Value::Vector(_) => Ok(v.clone()),
        _ => fail(SpecErrorKind::Unsupported, "`trans` needs a vector or matrix"),
    }
}

fn inverse(v: &Value) -> Result<Value, SpecError> {
    let rows = match matrix(v) {
        Some(rows) if rows.len() == 2 && rows[0].len() == 2 => rows,
        _ => return fail(SpecErrorKind::Unsupported, "`inv` is only defined for 2x2 matrices"),
    };
    let (a, b, c, d) = (rows[0][0].clone(), rows[0][1].clone(), rows[1][0].clone(), rows[1][1].clone());
    let det = scalar(Builtin::Sub, vec![mul(a.clone(), d.clone())?, mul(b.clone(), c.clone())?])?;
    if det.as_constant().is_some_and(|k| k.is_zero()) {
        return fail(SpecErrorKind::DivisionByZero, "singular matrix in `inv`");
    }
    let over = |x: Value| scalar(Builtin::Div, vec![x, det.clone()]);
    let neg = |x: Value| scalar(Builtin::Neg, vec![x]);
    Ok(Value::Vector(vec![Value::Vector(vec![over(d)?, over(neg(b)?)?]), Value::Vector(vec![over(neg(c)?)?, over(a)?])]))
}

fn natural(v: &Value) -> Option<u64> {
    let q = v.as_constant()?.as_rational()?;
    (q.is_integer() && !q.is_negative()).then(|| q.numer().to_u64()).flatten()
}

fn elementwise(f: Builtin, args: Vec<Value>) -> Result<Value, SpecError> {
    use Value::Vector as V;
    match (f, args.as_slice()) {
        (Builtin::Neg, [V(a)]) => Ok(V(a.iter().map(|x| scalar(f, vec![x.clone()])).collect::<Result<_, _>>()?)),
        (Builtin::Add | Builtin::Sub, [V(a), V(b)]) if a.len() == b.len() => {
            Ok(V(a.iter().zip(b).map(|(x, y)| apply_values(f, vec![x.clone(), y.clone()])).collect::<Result<_, _>>()?))
        }
        (Builtin::Mul, [s, V(b)]) if !matches!(s, V(_)) => {
            Ok(V(b.iter().map(|y| apply_values(f, vec![s.clone(), y.clone()])).collect::<Result<_, _>>()?))
        }
        (Builtin::Mul | Builtin::Div, [V(a), s]) if !matches!(s, V(_)) => {
            Ok(V(a.iter().map(|x| apply_values(f, vec![x.clone(), s.clone()])).collect::<Result<_, _>>()?))
        }
        (Builtin::Mul, [a @ V(_), b @ V(_)]) => matmul(a, b),
        _ => fail(SpecErrorKind::Unsupported, format!("`{}` is not defined on these vector operands", f.symbol())),
    }
}

/// Applies `f` to specialized arguments.
pub fn apply_values(f: Builtin, args: Vec<Value>) -> Result<Value, SpecError> {
    use Builtin::*;
    if args.len() != f.arity() {
        return fail(SpecErrorKind::ArityError, format!("`{}` takes {} arguments, got {}", f.symbol(), f.arity(), args.len()));
    }
    match f {
        Length => match &args[0] {
            Value::Vector(items) => Ok(Value::Static(Constant::Nat(items.len() as u64))),
            _ => fail(SpecErrorKind::Unsupported, "`length` needs a vector of known shape"),
        },
        Range => match (natural(&args[0]), natural(&args[1])) {
            (Some(a), Some(b)) => Ok(Value::Vector((a..=b).map(|n| Value::Static(Constant::Nat(n))).collect())),
            _ => fail(SpecErrorKind::Unsupported, "range bounds must be static naturals"),
        },
        Trans => transpose(&args[0]),
        Inv => inverse(&args[0]),
        _ if args.iter().any(|a| matches!(a, Value::Vector(_))) => elementwise(f, args),
        _ => scalar(f, args),
    }
}
