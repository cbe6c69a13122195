//! The cart pendulum against its hand-derived equations of motion.

use std::f64::consts::PI;

use coredel::corpus;
use coredel::explicit::{ExplicitModel, RangeBox};
use coredel::pipeline;
use coredel::specialize::NormalForm;
use num::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numeric::{close, eval, magnitude, var, Env};

pub const STATES: usize = 200;
const REL: f64 = 1e-9;

/// Hand-derived residuals and their term scales, from
/// L = 7/2 x'^2 + 2 x' θ' cos θ + 4/3 θ'^2 - x^2 + 19.6 cos θ - 19.6.
struct Point {
    x: f64,
    dx: f64,
    ddx: f64,
    th: f64,
    dth: f64,
    ddth: f64,
}

impl Point {
    fn random(rng: &mut ChaCha8Rng) -> Point {
        let mut d = || rng.gen_range(-10.0..=10.0);
        let (dx, ddx, dth, ddth) = (d(), d(), d(), d());
        Point { x: rng.gen_range(-5.0..=5.0), dx, ddx, th: rng.gen_range(-PI..=PI), dth, ddth }
    }

    fn env(&self) -> Env {
        [("x", self.x), ("x'", self.dx), ("x''", self.ddx), ("theta", self.th), ("theta'", self.dth), ("theta''", self.ddth)]
            .into_iter()
            .map(|(n, v)| (var(n), v))
            .collect()
    }

    fn f1_terms(&self) -> [f64; 4] {
        let (s, c) = self.th.sin_cos();
        [2.0 * c * self.ddth, -2.0 * s * self.dth * self.dth, 7.0 * self.ddx, 2.0 * self.x]
    }

    fn f2_terms(&self) -> [f64; 3] {
        let (s, c) = self.th.sin_cos();
        [98.0 / 5.0 * s, 2.0 * c * self.ddx, 8.0 / 3.0 * self.ddth]
    }
}

fn sum_and_scale(terms: &[f64]) -> (f64, f64) {
    (terms.iter().sum(), terms.iter().map(|t| t.abs()).sum())
}

/// `θ''` in closed form, with A = sin θ and B = cos θ.
fn closed_form_theta_acc(p: &Point) -> f64 {
    let (a, b) = p.th.sin_cos();
    (-686.0 / 5.0 * a - 4.0 * b * (a * p.dth * p.dth - p.x)) / (56.0 / 3.0 - 4.0 * b * b)
}

fn residual_rows(w: &NormalForm) -> Vec<coredel::Expr> {
    w.items()
        .iter()
        .filter_map(|nf| match nf {
            NormalForm::Undirected { lhs, rhs } => {
                Some(coredel::Expr::apply(coredel::Builtin::Sub, vec![lhs.to_expr(), rhs.to_expr()]))
            }
            _ => None,
        })
        .collect()
}

/// Second derivatives from the compiled model at a state.
fn accelerations(m: &ExplicitModel, p: &Point) -> (f64, f64) {
    let mut env: Env = m.params.iter().map(|(x, q)| (x.clone(), coredel::lang::rational_to_f64(q))).collect();
    env.extend([(var("x"), p.x), (var("x'"), p.dx), (var("theta"), p.th), (var("theta'"), p.dth)]);
    for (x, e) in &m.aux {
        let v = eval(e, &env);
        env.insert(x.clone(), v);
    }
    let ode = |name: &str| {
        let (_, e) = m.odes.iter().find(|(x, _)| *x == var(name)).unwrap_or_else(|| panic!("no ODE for {name}"));
        eval(e, &env)
    };
    (ode("x''"), ode("theta''"))
}

pub fn end_to_end(seed: u64) -> Result<String, String> {
    let text = corpus::PENDULUM;
    let a = pipeline::analyze("pendulum.cdl", text).map_err(|e| e.to_string())?;
    let w = pipeline::residual(&a, text).map_err(|e| e.to_string())?;
    let m = pipeline::explicit(&w, &RangeBox::new()).map_err(|e| e.to_string())?;

    let inertia = m.params.iter().find(|(x, _)| *x == var("I")).map(|(_, q)| q.clone());
    if inertia != Some(BigRational::new(8.into(), 3.into())) {
        return Err(format!("I = {inertia:?}, expected exactly 8/3"));
    }

    let rows = residual_rows(&w);
    if rows.len() != 2 {
        return Err(format!("{} implicit equations, expected 2", rows.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_implicit: f64 = 0.0;
    let mut worst_explicit: f64 = 0.0;
    for k in 0..STATES {
        let p = Point::random(&mut rng);
        let env = p.env();
        let oracle = [sum_and_scale(&p.f1_terms()), sum_and_scale(&p.f2_terms())];
        for (i, (row, (want, scale))) in rows.iter().zip(oracle).enumerate() {
            let got = eval(row, &env);
            let scale = scale.max(magnitude(row, &env));
            if !close(got, want, scale, REL) {
                return Err(format!("state {k}: implicit row {i} is {got}, hand derivation gives {want}"));
            }
            worst_implicit = worst_implicit.max((got - want).abs() / scale);
        }

        let (ddx, ddth) = accelerations(&m, &p);
        let solved = Point { ddx, ddth, ..p };
        for (i, terms) in [solved.f1_terms().to_vec(), solved.f2_terms().to_vec()].into_iter().enumerate() {
            let (r, scale) = sum_and_scale(&terms);
            if !close(r, 0.0, scale, REL) {
                return Err(format!("state {k}: explicit solution leaves residual {r} in equation {i}"));
            }
            worst_explicit = worst_explicit.max(r.abs() / scale);
        }
        let want = closed_form_theta_acc(&solved);
        if !close(ddth, want, want.abs() + 1.0, REL) {
            return Err(format!("state {k}: theta'' = {ddth}, closed form gives {want}"));
        }
    }
    Ok(format!(
        "I = 8/3; {STATES} states, worst relative implicit error {worst_implicit:.1e}, worst back-substitution residual {worst_explicit:.1e}"
    ))
}
