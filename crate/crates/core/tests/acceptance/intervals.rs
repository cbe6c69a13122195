//! Interval enclosures against point sampling, and the pendulum pivot.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use coredel::explicit::{interval_eval, Interval, RangeBox};
use coredel::lang::free_vars;
use coredel::parser::pretty_expr;
use coredel::{corpus, parse, pipeline, Builtin, Equation, Expr, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::differentiation::corpus_expressions;
use crate::numeric::{eval, var, Env};

pub const SAMPLES: usize = 1000;
const BOX_EVERY: usize = 100;

fn random_box(vars: &BTreeSet<Variable>, rng: &mut ChaCha8Rng) -> RangeBox {
    let mut b = RangeBox::new();
    for v in vars {
        let lo = rng.gen_range(-4.0..=3.0);
        b.insert(v.clone(), Interval::new(lo, lo + rng.gen_range(0.0..=2.0)));
    }
    b
}

/// A point of `b`, sometimes on its faces.
fn sample(vars: &BTreeSet<Variable>, b: &RangeBox, rng: &mut ChaCha8Rng) -> Env {
    vars.iter()
        .map(|v| {
            let r = b.get(v);
            let x = match rng.gen_range(0..10) {
                0 => r.lo,
                1 => r.hi,
                _ => rng.gen_range(r.lo..=r.hi),
            };
            (v.clone(), x)
        })
        .collect()
}

fn pivot() -> Expr {
    match parse("p = 56/3 - 4*cos(theta)^2").expect("parses").equations {
        Equation::Set(mut items) => match items.remove(0) {
            Equation::Directed { rhs, .. } => rhs,
            other => panic!("unexpected {other:?}"),
        },
        other => panic!("unexpected {other:?}"),
    }
}

fn denominators<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    if let Expr::Apply(f, args) = e {
        if *f == Builtin::Div {
            out.push(&args[1]);
        }
        args.iter().for_each(|a| denominators(a, out));
    }
}

/// Criterion 8.
pub fn soundness(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exprs = corpus_expressions()?;
    let mut checked = 0;
    for e in &exprs {
        let vars = free_vars(e);
        let mut b = random_box(&vars, &mut rng);
        let mut enclosure = interval_eval(e, &b);
        for k in 0..SAMPLES {
            if k > 0 && k % BOX_EVERY == 0 {
                b = random_box(&vars, &mut rng);
                enclosure = interval_eval(e, &b);
            }
            let x = eval(e, &sample(&vars, &b, &mut rng));
            if x.is_nan() {
                continue;
            }
            if !enclosure.contains(x) {
                return Err(format!("{} = {x} escapes {enclosure:?} on {b:?}", pretty_expr(e)));
            }
            checked += 1;
        }
    }

    let p = pivot();
    let theta = var("theta");
    let boxes = [RangeBox::new().with(theta.clone(), Interval::new(-PI, PI)), RangeBox::new()];
    for b in &boxes {
        let r = interval_eval(&p, b);
        if r.contains_zero() {
            return Err(format!("pivot enclosure {r:?} contains zero on {b:?}"));
        }
    }
    let certified = interval_eval(&p, &boxes[0]);

    let m = pipeline::compile("pendulum.cdl", corpus::PENDULUM, &RangeBox::new()).map_err(|e| e.to_string())?;
    let mut dens = Vec::new();
    for (_, rhs) in &m.odes {
        denominators(rhs, &mut dens);
    }
    if dens.is_empty() {
        return Err("the compiled pendulum divides by nothing".into());
    }
    for k in 0..100 {
        let th = -PI + 2.0 * PI * k as f64 / 99.0;
        let mut env: Env = [(theta.clone(), th), (var("theta'"), 0.0), (var("x"), 0.0), (var("x'"), 0.0)].into();
        for (x, e) in &m.aux {
            let v = eval(e, &env);
            env.insert(x.clone(), v);
        }
        let want = eval(&p, &env);
        for d in &dens {
            let got = eval(d, &env);
            if (got - want).abs() > 1e-12 * want.abs() {
                return Err(format!("denominator {} is {got} at theta = {th}, pivot is {want}", pretty_expr(d)));
            }
        }
    }
    Ok(format!(
        "{checked} samples over {} expressions inside their enclosures; pivot in [{:.4}, {:.4}]; {} denominators equal the pivot",
        exprs.len(),
        certified.lo,
        certified.hi,
        dens.len()
    ))
}
