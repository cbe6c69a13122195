//! Symbolic derivatives of corpus expressions against central differences.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use coredel::lang::free_vars;
use coredel::parser::pretty_expr;
use coredel::specialize::{partial_derivative, time_derivative, NormalForm};
use coredel::{corpus, pipeline, Builtin, Equation, Expr, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numeric::{eval, Env};

pub const EXPRESSIONS: usize = 50;
pub const POINTS: usize = 100;
const H: f64 = 1e-5;
const REL: f64 = 1e-6;

fn is_real_arithmetic(e: &Expr) -> bool {
    match e {
        Expr::Const(k) => k.as_rational().is_some(),
        Expr::Var(_) => true,
        Expr::Apply(f, args) => {
            matches!(
                f,
                Builtin::Add
                    | Builtin::Sub
                    | Builtin::Mul
                    | Builtin::Div
                    | Builtin::Pow
                    | Builtin::Neg
                    | Builtin::Sin
                    | Builtin::Cos
                    | Builtin::Pi
            ) && args.iter().all(is_real_arithmetic)
        }
        _ => false,
    }
}

fn subexpressions<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    out.push(e);
    match e {
        Expr::Vector(items) | Expr::Apply(_, items) => items.iter().for_each(|x| subexpressions(x, out)),
        Expr::Index(a, b) | Expr::PartialDer(a, b) => {
            subexpressions(a, out);
            subexpressions(b, out);
        }
        Expr::TimeDer(a) => subexpressions(a, out),
        Expr::Const(_) | Expr::Var(_) => {}
    }
}

fn equation_exprs<'a>(s: &'a Equation, out: &mut Vec<&'a Expr>) {
    match s {
        Equation::Directed { rhs, .. } | Equation::Reset { rhs, .. } => subexpressions(rhs, out),
        Equation::Undirected { lhs, rhs } => {
            subexpressions(lhs, out);
            subexpressions(rhs, out);
        }
        Equation::Cond { guard, then_eq, else_eq } => {
            subexpressions(guard, out);
            equation_exprs(then_eq, out);
            equation_exprs(else_eq, out);
        }
        Equation::Family { body, .. } => equation_exprs(body, out),
        Equation::Set(items) => items.iter().for_each(|x| equation_exprs(x, out)),
    }
}

/// Distinct non-trivial real subexpressions of each residual, taken from
/// the models in turn.
pub fn corpus_expressions() -> Result<Vec<Expr>, String> {
    let mut per_model: Vec<Vec<Expr>> = Vec::new();
    for (name, src) in corpus::ALL {
        let a = pipeline::analyze(name, src).map_err(|e| e.to_string())?;
        let w: NormalForm = pipeline::residual(&a, src).map_err(|e| e.to_string())?;
        let eq = w.to_equation();
        let mut all = Vec::new();
        equation_exprs(&eq, &mut all);
        let mut seen = BTreeSet::new();
        per_model.push(
            all.into_iter()
                .filter(|e| e.size() >= 3 && is_real_arithmetic(e) && !free_vars(e).is_empty())
                .filter(|e| seen.insert(pretty_expr(e)))
                .cloned()
                .collect(),
        );
    }
    let mut picked = Vec::new();
    for k in 0.. {
        if picked.len() == EXPRESSIONS || per_model.iter().all(|m| k >= m.len()) {
            break;
        }
        for m in &per_model {
            if let Some(e) = m.get(k) {
                if picked.len() < EXPRESSIONS {
                    picked.push(e.clone());
                }
            }
        }
    }
    if picked.len() < EXPRESSIONS {
        return Err(format!("only {} distinct expressions in the corpus", picked.len()));
    }
    Ok(picked)
}

/// Values for the variables of `e` and one more derivative of each.
fn random_env(vars: &BTreeSet<Variable>, rng: &mut ChaCha8Rng) -> Env {
    let mut env = Env::new();
    for v in vars {
        for x in [v.clone(), v.primed()] {
            let value = if x.primes == 0 { rng.gen_range(-PI..=PI) } else { rng.gen_range(-2.0..=2.0) };
            env.entry(x).or_insert(value);
        }
    }
    env
}

fn agree(symbolic: f64, numeric: f64) -> bool {
    (symbolic - numeric).abs() <= REL * symbolic.abs().max(numeric.abs()).max(1.0)
}

fn shifted(env: &Env, dirs: &[(Variable, f64)], step: f64) -> Env {
    let mut out = env.clone();
    for (v, slope) in dirs {
        *out.get_mut(v).expect("bound") += step * slope;
    }
    out
}

fn central(e: &Expr, env: &Env, dirs: &[(Variable, f64)]) -> f64 {
    (eval(e, &shifted(env, dirs, H)) - eval(e, &shifted(env, dirs, -H))) / (2.0 * H)
}

/// Criterion 6. The time derivative is checked along the straight path on
/// which every variable moves at the rate of its primed successor.
pub fn oracle(seed: u64) -> Result<String, String> {
    let exprs = corpus_expressions()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checks, mut rejected) = (0usize, 0usize);
    for e in &exprs {
        let vars = free_vars(e);
        let dt = time_derivative(e).map_err(|err| format!("{}: {err}", pretty_expr(e)))?;
        let partials: Vec<(Variable, Expr)> = vars
            .iter()
            .map(|x| partial_derivative(e, x).map(|d| (x.clone(), d)))
            .collect::<Result<_, _>>()
            .map_err(|err| format!("{}: {err}", pretty_expr(e)))?;
        let mut points = 0;
        while points < POINTS {
            let env = random_env(&vars, &mut rng);
            let path: Vec<(Variable, f64)> = vars.iter().map(|v| (v.clone(), env[&v.primed()])).collect();
            let symbolic = eval(&dt, &env);
            let numeric = central(e, &env, &path);
            if !symbolic.is_finite() || !numeric.is_finite() {
                rejected += 1;
                continue;
            }
            if !agree(symbolic, numeric) {
                return Err(format!("d/dt of {} is {symbolic}, differences give {numeric}", pretty_expr(e)));
            }
            for (x, d) in &partials {
                let symbolic = eval(d, &env);
                let numeric = central(e, &env, &[(x.clone(), 1.0)]);
                if !agree(symbolic, numeric) {
                    return Err(format!("d/d{x} of {} is {symbolic}, differences give {numeric}", pretty_expr(e)));
                }
                checks += 1;
            }
            checks += 1;
            points += 1;
        }
    }
    Ok(format!("{} expressions, {checks} derivative values checked, {rejected} non-finite points resampled", exprs.len()))
}
