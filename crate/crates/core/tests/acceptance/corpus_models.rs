//! Whole-corpus properties: annotation erasure, residual purity and
//! byte-stable output.

use coredel::bta::{annotate, gen_constraints, global_env, minimal_solution, verify_annotation, BindingTime, BtEnv};
use coredel::explicit::RangeBox;
use coredel::model_json::emit_model;
use coredel::{corpus, parse, pipeline, Equation, Expr};

#[derive(Default, Debug, Clone, Copy)]
struct Counts {
    partial: usize,
    family: usize,
}

fn count_expr(e: &Expr, c: &mut Counts) {
    match e {
        Expr::Const(_) | Expr::Var(_) => {}
        Expr::Vector(items) | Expr::Apply(_, items) => items.iter().for_each(|x| count_expr(x, c)),
        Expr::Index(a, b) => {
            count_expr(a, c);
            count_expr(b, c);
        }
        Expr::TimeDer(a) => count_expr(a, c),
        Expr::PartialDer(a, b) => {
            c.partial += 1;
            count_expr(a, c);
            count_expr(b, c);
        }
    }
}

fn count_eqn(s: &Equation, c: &mut Counts) {
    match s {
        Equation::Directed { rhs, .. } | Equation::Reset { rhs, .. } => count_expr(rhs, c),
        Equation::Undirected { lhs, rhs } => {
            count_expr(lhs, c);
            count_expr(rhs, c);
        }
        Equation::Cond { guard, then_eq, else_eq } => {
            count_expr(guard, c);
            count_eqn(then_eq, c);
            count_eqn(else_eq, c);
        }
        Equation::Family { range, body, .. } => {
            c.family += 1;
            count_expr(range, c);
            count_eqn(body, c);
        }
        Equation::Set(items) => items.iter().for_each(|x| count_eqn(x, c)),
    }
}

/// Criterion 4: annotating with the minimal solution and erasing gives the
/// program back, and the annotation passes the consistency check.
pub fn erasure() -> Result<String, String> {
    let mut nodes = 0;
    let mut dynamic = 0;
    for (name, src) in corpus::ALL {
        let p = parse(src).map_err(|e| format!("{name}: {e}"))?.equations;
        let env = global_env(&p).map_err(|e| format!("{name}: {e}"))?;
        let sigma = minimal_solution(&gen_constraints(&p, &env).set).map_err(|e| format!("{name}: {e}"))?;
        let a = annotate(&p, &env, &sigma);
        if *a.erase() != p {
            return Err(format!("{name}: erasing the annotation changes the program"));
        }
        if let Err(v) = verify_annotation(&BtEnv::new(), &a) {
            return Err(format!("{name}: {} violations, first: {}", v.len(), v[0]));
        }
        nodes += a.times().len();
        dynamic += a.times().values().filter(|b| **b == BindingTime::D).count();
    }
    Ok(format!("{} models, {nodes} annotated nodes ({dynamic} dynamic), 0 violations", corpus::ALL.len()))
}

/// Criterion 7: no partial derivative and no family survives specialization.
pub fn purity() -> Result<String, String> {
    let mut before = Counts::default();
    for (name, src) in corpus::ALL {
        let a = pipeline::analyze(name, src).map_err(|e| e.to_string())?;
        count_eqn(&a.parsed.equations, &mut before);
        let w = pipeline::residual(&a, src).map_err(|e| e.to_string())?;
        let mut after = Counts::default();
        count_eqn(&w.to_equation(), &mut after);
        if after.partial + after.family > 0 {
            return Err(format!("{name}: residual keeps {} partial derivatives and {} families", after.partial, after.family));
        }
    }
    Ok(format!("{} partial derivatives and {} families in the sources, none in the residuals", before.partial, before.family))
}

fn compile_all() -> Result<Vec<String>, String> {
    corpus::ALL
        .iter()
        .map(|(name, src)| pipeline::compile(name, src, &RangeBox::new()).map(|m| emit_model(&m)).map_err(|e| e.to_string()))
        .collect()
}

/// Criterion 11: compiling the corpus twice gives the same bytes. The second
/// pass runs on another thread so hash maps start from fresh seeds.
pub fn determinism() -> Result<String, String> {
    let first = compile_all()?;
    let second = std::thread::spawn(compile_all).join().map_err(|_| "second compilation panicked".to_string())??;
    for ((name, _), (a, b)) in corpus::ALL.iter().zip(first.iter().zip(&second)) {
        if a != b {
            return Err(format!("{name}: the two model files differ"));
        }
    }
    Ok(format!("{} models, {} bytes, identical", first.len(), first.iter().map(String::len).sum::<usize>()))
}
