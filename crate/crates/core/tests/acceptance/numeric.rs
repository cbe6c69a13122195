//! A plain double evaluator, kept apart from the simulator so that the two
//! can check each other.

use std::collections::HashMap;

use coredel::lang::rational_to_f64;
use coredel::{Builtin, Constant, Expr, Variable};

pub type Env = HashMap<Variable, f64>;

pub fn var(name: &str) -> Variable {
    Variable::parse(name).expect("variable name")
}

pub fn eval(e: &Expr, env: &Env) -> f64 {
    match e {
        Expr::Const(Constant::Bool(_)) => panic!("boolean in a real expression"),
        Expr::Const(k) => rational_to_f64(&k.as_rational().expect("numeric")),
        Expr::Var(x) => *env.get(x).unwrap_or_else(|| panic!("unbound `{x}`")),
        Expr::Apply(f, args) => {
            let a: Vec<f64> = args.iter().map(|x| eval(x, env)).collect();
            match f {
                Builtin::Add => a[0] + a[1],
                Builtin::Sub => a[0] - a[1],
                Builtin::Mul => a[0] * a[1],
                Builtin::Div => a[0] / a[1],
                Builtin::Pow => a[0].powf(a[1]),
                Builtin::Neg => -a[0],
                Builtin::Sin => a[0].sin(),
                Builtin::Cos => a[0].cos(),
                Builtin::Pi => std::f64::consts::PI,
                other => panic!("`{}` in a real expression", other.symbol()),
            }
        }
        other => panic!("cannot evaluate {other:?}"),
    }
}

/// Sum of the absolute values of the additive terms, a scale for relative
/// comparisons of expressions that may cancel to zero.
pub fn magnitude(e: &Expr, env: &Env) -> f64 {
    match e {
        Expr::Apply(Builtin::Add | Builtin::Sub, args) => magnitude(&args[0], env) + magnitude(&args[1], env),
        Expr::Apply(Builtin::Neg, args) => magnitude(&args[0], env),
        Expr::Apply(Builtin::Mul, args) => magnitude(&args[0], env) * magnitude(&args[1], env),
        Expr::Apply(Builtin::Div, args) => magnitude(&args[0], env) / eval(&args[1], env).abs(),
        _ => eval(e, env).abs(),
    }
}

/// `|got - want| <= rel * scale`, with the scale floored away from zero.
pub fn close(got: f64, want: f64, scale: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * scale.max(1e-12)
}
