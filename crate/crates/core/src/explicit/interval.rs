//! Conservative interval evaluation of expressions.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::{BigRational, Signed, ToPrimitive};

use crate::lang::{rational_to_f64, Builtin, Constant, Expr, Variable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

/// `a * b` with `0 * inf = 0`.
fn mul0(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl Interval {
    pub const ENTIRE: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
    pub const UNIT: Interval = Interval { lo: -1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Interval {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Interval {
        Interval { lo: x, hi: x }
    }

    /// Widens both endpoints by one unit in the last place.
    fn widen(lo: f64, hi: f64) -> Interval {
        if lo.is_nan() || hi.is_nan() {
            return Interval::ENTIRE;
        }
        Interval { lo: down(lo), hi: up(hi) }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    /// Smallest absolute value in the interval.
    pub fn mignitude(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn intersect(self, other: Interval) -> Interval {
        let (lo, hi) = (self.lo.max(other.lo), self.hi.min(other.hi));
        if lo <= hi {
            Interval { lo, hi }
        } else {
            self
        }
    }

    pub fn recip(self) -> Interval {
        if self.contains_zero() {
            return Interval::ENTIRE;
        }
        Interval::widen(1.0 / self.hi, 1.0 / self.lo)
    }

    pub fn powi(self, k: i64) -> Interval {
        if k < 0 {
            return self.powi(-k).recip();
        }
        if k == 0 {
            return Interval::point(1.0);
        }
        let n = k.min(i32::MAX as i64) as i32;
        let (a, b) = (self.lo.powi(n), self.hi.powi(n));
        // powi may be off by a few ulps; widen generously
        let pad = |x: f64| x.abs() * 1e-15 * f64::from(n.min(1000));
        if k % 2 == 1 {
            return Interval::widen(a - pad(a), b + pad(b));
        }
        let hi = a.max(b);
        let lo = if self.contains_zero() { 0.0 } else { a.min(b) };
        Interval::widen(lo - pad(lo), hi + pad(hi)).intersect(Interval { lo: 0.0, hi: f64::INFINITY })
    }

    pub fn sin(self) -> Interval {
        self.trig(f64::sin, FRAC_PI_2, -FRAC_PI_2)
    }

    pub fn cos(self) -> Interval {
        self.trig(f64::cos, 0.0, PI)
    }

    /// Periodic function with maxima at `max_at + 2kπ` and minima at
    /// `min_at + 2kπ`.
    fn trig(self, f: fn(f64) -> f64, max_at: f64, min_at: f64) -> Interval {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.width() >= TAU {
            return Interval::UNIT;
        }
        // rounding in the period count only ever makes the test more
        // inclusive, which widens the result
        let hits = |c: f64| {
            let first = ((self.lo - c) / TAU - 1e-9).ceil();
            let last = ((self.hi - c) / TAU + 1e-9).floor();
            first <= last
        };
        let (a, b) = (f(self.lo), f(self.hi));
        let pad = 4.0 * f64::EPSILON;
        let hi = if hits(max_at) { 1.0 } else { a.max(b) + pad };
        let lo = if hits(min_at) { -1.0 } else { a.min(b) - pad };
        Interval::widen(lo, hi).intersect(Interval::UNIT)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval::widen(self.lo + o.lo, self.hi + o.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval::widen(self.lo - o.hi, self.hi - o.lo)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let ps = [mul0(self.lo, o.lo), mul0(self.lo, o.hi), mul0(self.hi, o.lo), mul0(self.hi, o.hi)];
        let lo = ps.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::widen(lo, hi)
    }
}

impl Div for Interval {
    type Output = Interval;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Interval) -> Interval {
        if o.contains_zero() {
            return Interval::ENTIRE;
        }
        self * o.recip()
    }
}

/// Ranges for variables. Variables not listed range over the default
/// interval `[-1e6, 1e6]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeBox {
    ranges: BTreeMap<Variable, Interval>,
    default: Interval,
}

impl Default for RangeBox {
    fn default() -> Self {
        RangeBox { ranges: BTreeMap::new(), default: Interval { lo: -1e6, hi: 1e6 } }
    }
}

impl RangeBox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, x: Variable, range: Interval) -> Self {
        self.ranges.insert(x, range);
        self
    }

    pub fn insert(&mut self, x: Variable, range: Interval) {
        self.ranges.insert(x, range);
    }

    pub fn get(&self, x: &Variable) -> Interval {
        self.ranges.get(x).copied().unwrap_or(self.default)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Interval)> {
        self.ranges.iter()
    }
}

fn rational(q: &BigRational) -> Interval {
    if q.is_integer() && q.abs() < BigRational::from_integer((1u64 << 53).into()) {
        return Interval::point(q.to_f64().expect("small integer"));
    }
    let x = rational_to_f64(q);
    Interval::widen(x, x)
}

/// Encloses the values `e` takes for variables ranging over `b`.
pub fn interval_eval(e: &Expr, b: &RangeBox) -> Interval {
    use Builtin::*;
    let ev = |x: &Expr| interval_eval(x, b);
    match e {
        Expr::Const(Constant::Bool(_)) => Interval::ENTIRE,
        Expr::Const(k) => rational(&k.as_rational().expect("numeric")),
        Expr::Var(x) => b.get(x),
        Expr::Apply(f, args) => match f {
            Add => ev(&args[0]) + ev(&args[1]),
            Sub => ev(&args[0]) - ev(&args[1]),
            Mul => ev(&args[0]) * ev(&args[1]),
            Div => ev(&args[0]) / ev(&args[1]),
            Neg => -ev(&args[0]),
            Pow => {
                let exp = args[1].as_const().and_then(|k| k.as_rational()).filter(|q| q.is_integer());
                match exp.and_then(|q| q.numer().to_i64()) {
                    Some(k) => ev(&args[0]).powi(k),
                    None => Interval::ENTIRE,
                }
            }
            Sin => ev(&args[0]).sin(),
            Cos => ev(&args[0]).cos(),
            Pi => Interval::widen(PI, PI),
            _ => Interval::ENTIRE,
        },
        _ => Interval::ENTIRE,
    }
}
