use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::{Builtin, Constant, Expr, Variable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no value for variable `{0}`")]
    Unbound(Variable),
    #[error("cannot evaluate {0} numerically")]
    Unsupported(String),
    #[error("type error during evaluation: {0}")]
    Type(String),
}

/// Numeric values for variables.
pub trait Valuation {
    fn value(&self, x: &Variable) -> Option<f64>;
}

impl Valuation for HashMap<Variable, f64> {
    fn value(&self, x: &Variable) -> Option<f64> {
        self.get(x).copied()
    }
}

impl Valuation for BTreeMap<Variable, f64> {
    fn value(&self, x: &Variable) -> Option<f64> {
        self.get(x).copied()
    }
}

impl<F: Fn(&Variable) -> Option<f64>> Valuation for F {
    fn value(&self, x: &Variable) -> Option<f64> {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Num {
    Real(f64),
    Bool(bool),
    Vector(Vec<Num>),
}

/// Evaluates a real-valued expression in double precision.
pub fn eval_real(e: &Expr, env: &impl Valuation) -> Result<f64, EvalError> {
    match eval(e, env)? {
        Num::Real(x) => Ok(x),
        other => Err(EvalError::Type(format!("expected a real, got {other:?}"))),
    }
}

/// Evaluates a boolean expression (guards).
pub fn eval_bool(e: &Expr, env: &impl Valuation) -> Result<bool, EvalError> {
    match eval(e, env)? {
        Num::Bool(b) => Ok(b),
        other => Err(EvalError::Type(format!("expected a boolean, got {other:?}"))),
    }
}

fn real(n: Num) -> Result<f64, EvalError> {
    match n {
        Num::Real(x) => Ok(x),
        other => Err(EvalError::Type(format!("expected a real, got {other:?}"))),
    }
}

fn boolean(n: Num) -> Result<bool, EvalError> {
    match n {
        Num::Bool(b) => Ok(b),
        other => Err(EvalError::Type(format!("expected a boolean, got {other:?}"))),
    }
}

fn eval(e: &Expr, env: &impl Valuation) -> Result<Num, EvalError> {
    Ok(match e {
        Expr::Const(Constant::Bool(b)) => Num::Bool(*b),
        Expr::Const(k) => Num::Real(k.as_f64().expect("numeric constant")),
        Expr::Var(x) => Num::Real(env.value(x).ok_or_else(|| EvalError::Unbound(x.clone()))?),
        Expr::Vector(es) => Num::Vector(es.iter().map(|c| eval(c, env)).collect::<Result<_, _>>()?),
        Expr::Index(t, i) => {
            let idx = real(eval(i, env)?)?;
            match eval(t, env)? {
                Num::Vector(items) if idx >= 0.0 && (idx as usize) < items.len() && idx.fract() == 0.0 => {
                    items[idx as usize].clone()
                }
                other => return Err(EvalError::Type(format!("cannot index {other:?} at {idx}"))),
            }
        }
        Expr::Apply(f, args) => {
            use Builtin::*;
            let mut vals = args.iter().map(|a| eval(a, env)).collect::<Result<Vec<_>, _>>()?.into_iter();
            let mut next = || vals.next().expect("arity checked");
            match f {
                Add => Num::Real(real(next())? + real(next())?),
                Sub => Num::Real(real(next())? - real(next())?),
                Mul => Num::Real(real(next())? * real(next())?),
                Div => Num::Real(real(next())? / real(next())?),
                Pow => {
                    let (b, x) = (real(next())?, real(next())?);
                    if x.fract() == 0.0 && x.abs() < 1024.0 {
                        Num::Real(b.powi(x as i32))
                    } else {
                        Num::Real(b.powf(x))
                    }
                }
                Neg => Num::Real(-real(next())?),
                Sin => Num::Real(real(next())?.sin()),
                Cos => Num::Real(real(next())?.cos()),
                Pi => Num::Real(std::f64::consts::PI),
                And => {
                    let (a, b) = (boolean(next())?, boolean(next())?);
                    Num::Bool(a && b)
                }
                Or => {
                    let (a, b) = (boolean(next())?, boolean(next())?);
                    Num::Bool(a || b)
                }
                Lt | Le | Gt | Ge => {
                    let (a, b) = (real(next())?, real(next())?);
                    Num::Bool(match f {
                        Lt => a < b,
                        Le => a <= b,
                        Gt => a > b,
                        _ => a >= b,
                    })
                }
                Eq | Ne => {
                    let (a, b) = (next(), next());
                    let same = a == b;
                    Num::Bool(if *f == Eq { same } else { !same })
                }
                Length | Inv | Trans | Range => return Err(EvalError::Unsupported(f.symbol().to_string())),
            }
        }
        Expr::TimeDer(_) | Expr::PartialDer(..) => {
            return Err(EvalError::Unsupported("a derivative operator".to_string()));
        }
    })
}
