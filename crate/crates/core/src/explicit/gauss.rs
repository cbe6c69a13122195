use super::interval::{interval_eval, Interval, RangeBox};
use super::{ExplicitError, LinearSystem};
use crate::lang::{Builtin, Expr, Variable};
use crate::specialize::simplify;

fn is_zero(e: &Expr) -> bool {
    e.as_const().is_some_and(|k| k.is_zero())
}

fn mul(a: &Expr, b: &Expr) -> Expr {
    Expr::binary(Builtin::Mul, a.clone(), b.clone())
}

/// Solves `A·u + b = 0` symbolically. Rows are combined without division
/// (`row_r := p·row_r − a_r·row_k`), so the only divisions are by the pivots
/// during back substitution. Every pivot is chosen to be provably nonzero
/// over `bx`.
pub fn gaussian_eliminate(sys: &LinearSystem, bx: &RangeBox) -> Result<Vec<(Variable, Expr)>, ExplicitError> {
    let n = sys.unknowns.len();
    let mut a = sys.a.clone();
    let mut b = sys.b.clone();
    let mut rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut steps: Vec<(usize, usize)> = Vec::with_capacity(n);

    while !rows.is_empty() {
        let mut best: Option<(f64, usize, usize)> = None;
        let mut fallback: Option<(Expr, Interval)> = None;
        for &r in &rows {
            for &c in &cols {
                if is_zero(&a[r][c]) {
                    continue;
                }
                let iv = interval_eval(&a[r][c], bx);
                fallback.get_or_insert_with(|| (a[r][c].clone(), iv));
                let m = iv.mignitude();
                if m > 0.0 && best.is_none_or(|(bm, _, _)| m > bm) {
                    best = Some((m, r, c));
                }
            }
        }
        let Some((_, pr, pc)) = best else {
            let (pivot, interval) = fallback.unwrap_or((Expr::nat(0), Interval::point(0.0)));
            return Err(ExplicitError::PivotUncertain { pivot, interval });
        };
        rows.retain(|&r| r != pr);
        cols.retain(|&c| c != pc);
        let p = a[pr][pc].clone();
        for &r in &rows {
            let f = a[r][pc].clone();
            if is_zero(&f) {
                continue;
            }
            for c in cols.iter().copied().chain([pc]) {
                a[r][c] = simplify(&Expr::binary(Builtin::Sub, mul(&p, &a[r][c]), mul(&f, &a[pr][c])));
            }
            b[r] = simplify(&Expr::binary(Builtin::Sub, mul(&p, &b[r]), mul(&f, &b[pr])));
        }
        steps.push((pr, pc));
    }

    let mut solution: Vec<Option<Expr>> = vec![None; n];
    for &(pr, pc) in steps.iter().rev() {
        let mut acc = b[pr].clone();
        for (c, s) in solution.iter().enumerate() {
            if let Some(s) = s {
                if !is_zero(&a[pr][c]) {
                    acc = Expr::binary(Builtin::Add, acc, mul(&a[pr][c], s));
                }
            }
        }
        let value = Expr::binary(Builtin::Div, Expr::unary(Builtin::Neg, acc), a[pr][pc].clone());
        solution[pc] = Some(simplify(&value));
    }
    Ok(sys.unknowns.iter().cloned().zip(solution.into_iter().map(|s| s.expect("every column pivoted"))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::eval_real;
    use num::BigRational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unknowns(n: usize) -> Vec<Variable> {
        (0..n).map(|k| Variable::with_primes(format!("u{k}"), 1)).collect()
    }

    #[test]
    fn identity_gives_negated_rhs() {
        let sys = LinearSystem {
            unknowns: unknowns(2),
            a: vec![vec![Expr::nat(1), Expr::nat(0)], vec![Expr::nat(0), Expr::nat(1)]],
            b: vec![Expr::var("p"), Expr::nat(3)],
        };
        let sol = gaussian_eliminate(&sys, &RangeBox::new()).unwrap();
        assert_eq!(sol[0].1, simplify(&Expr::unary(Builtin::Neg, Expr::var("p"))));
        assert_eq!(sol[1].1, Expr::rational(BigRational::from_integer((-3).into())));
    }

    #[test]
    fn random_constant_systems_match_numeric_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut solved = 0;
        while solved < 50 {
            let k: Vec<i64> = (0..6).map(|_| rng.gen_range(-9..=9)).collect();
            let det = (k[0] * k[3] - k[1] * k[2]) as f64;
            if det.abs() < 1.0 {
                continue;
            }
            let c = |v: i64| Expr::rational(BigRational::from_integer(v.into()));
            let sys = LinearSystem {
                unknowns: unknowns(2),
                a: vec![vec![c(k[0]), c(k[1])], vec![c(k[2]), c(k[3])]],
                b: vec![c(k[4]), c(k[5])],
            };
            let sol = gaussian_eliminate(&sys, &RangeBox::new()).unwrap();
            let (r0, r1) = (-(k[4] as f64), -(k[5] as f64));
            let x = (r0 * k[3] as f64 - k[1] as f64 * r1) / det;
            let y = (k[0] as f64 * r1 - k[2] as f64 * r0) / det;
            let none = |_: &Variable| None;
            assert!((eval_real(&sol[0].1, &none).unwrap() - x).abs() < 1e-12);
            assert!((eval_real(&sol[1].1, &none).unwrap() - y).abs() < 1e-12);
            solved += 1;
        }
    }

    #[test]
    fn uncertain_pivot() {
        let sys = LinearSystem { unknowns: unknowns(1), a: vec![vec![Expr::var("z")]], b: vec![Expr::nat(1)] };
        let err = gaussian_eliminate(&sys, &RangeBox::new()).unwrap_err();
        assert!(matches!(err, ExplicitError::PivotUncertain { .. }), "{err:?}");
        let bx = RangeBox::new().with(Variable::new("z"), Interval::new(1.0, 2.0));
        assert!(gaussian_eliminate(&sys, &bx).is_ok());
    }
}
