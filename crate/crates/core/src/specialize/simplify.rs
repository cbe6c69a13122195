//! Algebraic simplification by conversion to a sum of monomials with exact
//! rational coefficients. Anything that is not polynomial arithmetic (trig
//! applications, sums under non-integer powers, comparisons, ...) becomes an
//! opaque atom whose own arguments are simplified first, so equal
//! subexpressions reached along different paths end up syntactically equal.

use std::collections::BTreeMap;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::lang::{Builtin, Constant, Expr};

/// Above this many terms a product is no longer expanded.
const EXPANSION_LIMIT: usize = 4096;
/// Largest power of a sum that is expanded.
const MAX_EXPANDED_POWER: i64 = 4;

/// Atoms raised to nonzero integer exponents, sorted by atom.
type Monomial = Vec<(Expr, i64)>;

#[derive(Debug, Clone, Default, PartialEq)]
struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut merged: BTreeMap<Expr, i64> = a.iter().cloned().collect();
    for (atom, k) in b {
        *merged.entry(atom.clone()).or_insert(0) += k;
    }
    merged.into_iter().filter(|(_, k)| *k != 0).collect()
}

impl Poly {
    fn constant(q: BigRational) -> Poly {
        let mut p = Poly::default();
        if !q.is_zero() {
            p.terms.insert(Vec::new(), q);
        }
        p
    }

    fn atom(e: Expr, k: i64) -> Poly {
        let mut p = Poly::default();
        p.terms.insert(vec![(e, k)], BigRational::one());
        p
    }

    fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    fn single_term(&self) -> Option<(&Monomial, &BigRational)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        let entry = self.terms.entry(m).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, c| !c.is_zero());
        }
    }

    fn add(mut self, other: Poly) -> Poly {
        for (m, c) in other.terms {
            self.add_term(m, c);
        }
        self
    }

    fn scale(mut self, q: &BigRational) -> Poly {
        if q.is_zero() {
            return Poly::default();
        }
        for c in self.terms.values_mut() {
            *c *= q;
        }
        self
    }

    fn mul(self, other: Poly) -> Poly {
        if self.terms.len() * other.terms.len() > EXPANSION_LIMIT {
            let (small, big) = if self.terms.len() <= other.terms.len() { (self, other) } else { (other, self) };
            return small.mul(Poly::atom(big.to_expr(), 1));
        }
        let mut out = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(mul_monomials(ma, mb), ca * cb);
            }
        }
        out
    }

    /// `1 / self`, exact when `self` is a single term.
    fn recip(self) -> Poly {
        match self.single_term() {
            Some((m, c)) => {
                let m: Monomial = m.iter().map(|(a, k)| (a.clone(), -k)).collect();
                let mut p = Poly::default();
                p.terms.insert(m, c.recip());
                p
            }
            None => Poly::atom(self.to_expr(), -1),
        }
    }

    fn pow(self, k: i64) -> Poly {
        if k == 0 {
            return Poly::constant(BigRational::one());
        }
        if let Some((m, c)) = self.single_term() {
            let m: Monomial = m.iter().map(|(a, e)| (a.clone(), e * k)).collect();
            let c = num::pow(c.clone(), k.unsigned_abs() as usize);
            let c = if k < 0 { c.recip() } else { c };
            let mut p = Poly::default();
            p.terms.insert(m.into_iter().filter(|(_, e)| *e != 0).collect(), c);
            return p;
        }
        if (1..=MAX_EXPANDED_POWER).contains(&k) {
            let mut acc = self.clone();
            for _ in 1..k {
                acc = acc.mul(self.clone());
            }
            return acc;
        }
        Poly::atom(self.to_expr(), k)
    }

    /// Rewrites `c·m·sin(u)^2 + d·m·cos(u)^2` as `d·m + (c - d)·m·sin(u)^2`
    /// until no such pair is left.
    fn pythagorean(&self) -> Poly {
        let mut p = self.clone();
        'outer: loop {
            for (m, c) in &p.terms {
                for (atom, k) in m {
                    let Expr::Apply(Builtin::Sin, u) = atom else { continue };
                    if *k < 2 {
                        continue;
                    }
                    let cos = Expr::Apply(Builtin::Cos, u.clone());
                    let reduced = mul_monomials(m, &vec![(atom.clone(), -2)]);
                    let partner = mul_monomials(&reduced, &vec![(cos, 2)]);
                    if let Some(d) = p.terms.get(&partner).cloned() {
                        let (m, c) = (m.clone(), c.clone());
                        p.terms.remove(&partner);
                        p.terms.remove(&m);
                        p.add_term(reduced, d.clone());
                        p.add_term(m, c - d);
                        continue 'outer;
                    }
                }
            }
            return p;
        }
    }

    fn to_expr(&self) -> Expr {
        let reduced = self.pythagorean();
        reduced.render()
    }

    fn render(&self) -> Expr {
        if self.terms.is_empty() {
            return Expr::nat(0);
        }
        // constant term last
        let mut ordered: Vec<(&Monomial, &BigRational)> = self.terms.iter().filter(|(m, _)| !m.is_empty()).collect();
        ordered.extend(self.terms.iter().filter(|(m, _)| m.is_empty()));
        let mut acc: Option<Expr> = None;
        for (m, c) in ordered {
            let term = term_expr(m, &c.abs());
            acc = Some(match (acc, c.is_negative()) {
                (None, false) => term,
                (None, true) => match term {
                    Expr::Const(Constant::Nat(n)) => Expr::rational(-BigRational::from_integer(BigInt::from(n))),
                    Expr::Const(Constant::Rat(q)) => Expr::rational(-q),
                    other => Expr::unary(Builtin::Neg, other),
                },
                (Some(a), false) => Expr::binary(Builtin::Add, a, term),
                (Some(a), true) => Expr::binary(Builtin::Sub, a, term),
            });
        }
        acc.expect("nonempty")
    }
}

/// A numeric constant expression; naturals for nonnegative integers.
pub(crate) fn number(q: &BigRational) -> Expr {
    if q.is_integer() && !q.is_negative() {
        if let Some(n) = q.numer().to_u64() {
            return Expr::nat(n);
        }
    }
    Expr::rational(q.clone())
}

fn power(atom: &Expr, k: i64) -> Expr {
    if k == 1 {
        atom.clone()
    } else {
        Expr::binary(Builtin::Pow, atom.clone(), Expr::nat(k as u64))
    }
}

fn product(factors: Vec<Expr>) -> Option<Expr> {
    factors.into_iter().reduce(|a, b| Expr::binary(Builtin::Mul, a, b))
}

fn term_expr(m: &Monomial, c: &BigRational) -> Expr {
    let mut num = Vec::new();
    if !c.is_one() || m.iter().all(|(_, k)| *k < 0) {
        num.push(number(c));
    }
    num.extend(m.iter().filter(|(_, k)| *k > 0).map(|(a, k)| power(a, *k)));
    let den: Vec<Expr> = m.iter().filter(|(_, k)| *k < 0).map(|(a, k)| power(a, -k)).collect();
    let num = product(num).expect("coefficient or factor present");
    match product(den) {
        Some(d) => Expr::binary(Builtin::Div, num, d),
        None => num,
    }
}

fn constant_of(p: &Poly) -> Option<BigRational> {
    p.as_constant()
}

/// Rebuilds `e` with simplified children, leaving the node itself alone.
fn simplify_children(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Vector(items) => Expr::Vector(items.iter().map(simplify).collect()),
        Expr::Index(t, i) => Expr::index(simplify(t), simplify(i)),
        Expr::Apply(f, args) => Expr::Apply(*f, args.iter().map(simplify).collect()),
        Expr::TimeDer(inner) => Expr::time_der(simplify(inner)),
        Expr::PartialDer(a, b) => Expr::partial_der(simplify(a), simplify(b)),
    }
}

fn to_poly(e: &Expr) -> Poly {
    use Builtin::*;
    match e {
        Expr::Const(k) => match k.as_rational() {
            Some(q) => Poly::constant(q),
            None => Poly::atom(e.clone(), 1),
        },
        Expr::Var(_) => Poly::atom(e.clone(), 1),
        Expr::Apply(Add, args) => to_poly(&args[0]).add(to_poly(&args[1])),
        Expr::Apply(Sub, args) => to_poly(&args[0]).add(to_poly(&args[1]).scale(&-BigRational::one())),
        Expr::Apply(Neg, args) => to_poly(&args[0]).scale(&-BigRational::one()),
        Expr::Apply(Mul, args) => to_poly(&args[0]).mul(to_poly(&args[1])),
        Expr::Apply(Div, args) => {
            let den = to_poly(&args[1]);
            if constant_of(&den).is_some_and(|q| q.is_zero()) {
                return Poly::atom(Expr::binary(Div, simplify(&args[0]), Expr::nat(0)), 1);
            }
            to_poly(&args[0]).mul(den.recip())
        }
        Expr::Apply(Pow, args) => {
            let base = to_poly(&args[0]);
            let exp = simplify(&args[1]);
            let int_exp =
                exp.as_const().and_then(|k| k.as_rational()).filter(|q| q.is_integer()).and_then(|q| q.numer().to_i64());
            match int_exp {
                Some(k) if !(k < 0 && constant_of(&base).is_some_and(|q| q.is_zero())) => base.pow(k),
                _ => Poly::atom(Expr::binary(Pow, base.to_expr(), exp), 1),
            }
        }
        Expr::Apply(f @ (Sin | Cos), args) => {
            let arg = simplify(&args[0]);
            if arg.as_const().is_some_and(|k| k.is_zero()) {
                return Poly::constant(if *f == Sin { BigRational::zero() } else { BigRational::one() });
            }
            Poly::atom(Expr::unary(*f, arg), 1)
        }
        Expr::Index(t, i) => {
            let (t, i) = (simplify(t), simplify(i));
            if let (Expr::Vector(items), Some(Constant::Nat(n))) = (&t, i.as_const()) {
                if let Some(item) = items.get(*n as usize) {
                    return to_poly(item);
                }
            }
            Poly::atom(Expr::index(t, i), 1)
        }
        other => Poly::atom(simplify_children(other), 1),
    }
}

/// Simplifies an expression to a canonical polynomial form. Semantics are
/// preserved wherever the input is defined.
pub fn simplify(e: &Expr) -> Expr {
    use Builtin::*;
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Vector(items) => Expr::Vector(items.iter().map(simplify).collect()),
        Expr::Apply(f, args) if matches!(f, And | Or) || f.is_comparison() || f.is_structural() => {
            let args: Vec<Expr> = args.iter().map(simplify).collect();
            let folded = match (f, args.iter().map(|a| a.as_const()).collect::<Option<Vec<_>>>()) {
                (_, Some(ks)) if !f.is_structural() => super::builtins::static_scalar(*f, &ks).ok().flatten(),
                _ => None,
            };
            folded.map_or_else(|| Expr::Apply(*f, args), Expr::Const)
        }
        _ => to_poly(e).to_expr(),
    }
}
