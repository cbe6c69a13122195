//! Symbolic differentiation of residual expressions by the chain rule.

use num::{BigRational, One};

use super::simplify::{number, simplify};
use super::{SpecError, SpecErrorKind};
use crate::lang::{Builtin, Expr, Variable};

fn derive(e: &Expr, leaf: &dyn Fn(&Variable) -> Expr) -> Result<Expr, SpecError> {
    use Builtin::*;
    let d = |x: &Expr| derive(x, leaf);
    let bin = Expr::binary;
    Ok(match e {
        Expr::Const(k) if k.as_rational().is_some() => Expr::nat(0),
        Expr::Var(v) => leaf(v),
        Expr::Vector(items) => Expr::Vector(items.iter().map(d).collect::<Result<_, _>>()?),
        Expr::Apply(f, args) => match f {
            Add | Sub => bin(*f, d(&args[0])?, d(&args[1])?),
            Neg => Expr::unary(Neg, d(&args[0])?),
            Mul => bin(Add, bin(Mul, d(&args[0])?, args[1].clone()), bin(Mul, args[0].clone(), d(&args[1])?)),
            Div => bin(
                Div,
                bin(Sub, bin(Mul, d(&args[0])?, args[1].clone()), bin(Mul, args[0].clone(), d(&args[1])?)),
                bin(Pow, args[1].clone(), Expr::nat(2)),
            ),
            Pow => {
                let k = match simplify(&args[1]).as_const().and_then(|k| k.as_rational()) {
                    Some(k) => k,
                    None => {
                        return Err(SpecError::new(SpecErrorKind::NonDifferentiable, "power with a non-constant exponent"));
                    }
                };
                let lowered = number(&(k.clone() - BigRational::one()));
                bin(Mul, bin(Mul, number(&k), bin(Pow, args[0].clone(), lowered)), d(&args[0])?)
            }
            Sin => bin(Mul, Expr::unary(Cos, args[0].clone()), d(&args[0])?),
            Cos => Expr::unary(Neg, bin(Mul, Expr::unary(Sin, args[0].clone()), d(&args[0])?)),
            Pi => Expr::nat(0),
            _ => return Err(SpecError::new(SpecErrorKind::NonDifferentiable, format!("`{}` has no derivative", f.symbol()))),
        },
        Expr::Const(_) | Expr::Index(..) => {
            return Err(SpecError::new(SpecErrorKind::NonDifferentiable, format!("cannot differentiate {e:?}")))
        }
        Expr::TimeDer(_) | Expr::PartialDer(..) => {
            return Err(SpecError::new(SpecErrorKind::Unsupported, "derivative operator in a residual expression"))
        }
    })
}

/// `D_f`: the derivative with respect to time. Each variable contributes one
/// more prime.
pub fn time_derivative(e: &Expr) -> Result<Expr, SpecError> {
    Ok(simplify(&derive(e, &|v| Expr::Var(v.primed()))?))
}

/// `P_f`: the partial derivative with respect to `x`. Variables that differ
/// from `x`, including in their number of primes, are held constant.
pub fn partial_derivative(e: &Expr, x: &Variable) -> Result<Expr, SpecError> {
    Ok(simplify(&derive(e, &|v| Expr::nat(u64::from(v == x)))?))
}
