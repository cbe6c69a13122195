//! Abstract syntax of the equation language, its type system and the
//! structural utilities (free variables, substitution, numeric evaluation)
//! shared by every later stage.

mod eval;
mod typecheck;
mod vars;

use std::collections::BTreeMap;
use std::fmt;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

pub use eval::{eval_bool, eval_real, EvalError, Valuation};
pub use typecheck::{infer_env, type_check_eqn, type_check_expr, TypeError, TypeErrorKind};
pub use vars::{free_vars, free_vars_eqn, left_vars, substitute, substitute_eqn};

/// A possibly primed variable. `x` with `primes = 2` is `x''`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variable {
    pub base: String,
    pub primes: u32,
}

impl Variable {
    pub fn new(base: impl Into<String>) -> Self {
        Self::with_primes(base, 0)
    }

    pub fn with_primes(base: impl Into<String>, primes: u32) -> Self {
        let base = base.into();
        debug_assert!(!base.is_empty(), "variable names are nonempty");
        Variable { base, primes }
    }

    /// The variable with one more prime.
    pub fn primed(&self) -> Variable {
        Variable::with_primes(self.base.clone(), self.primes + 1)
    }

    /// The variable with one prime removed, if it has any.
    pub fn unprimed(&self) -> Option<Variable> {
        (self.primes > 0).then(|| Variable::with_primes(self.base.clone(), self.primes - 1))
    }

    pub fn is_primed(&self) -> bool {
        self.primes > 0
    }

    /// Reads the printed form, e.g. `theta''`.
    pub fn parse(s: &str) -> Option<Variable> {
        let base = s.trim_end_matches('\'');
        let mut chars = base.chars();
        let ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        ok.then(|| Variable::with_primes(base, (s.len() - base.len()) as u32))
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base)?;
        for _ in 0..self.primes {
            f.write_str("'")?;
        }
        Ok(())
    }
}

/// Literal constants. Rationals are exact and always in lowest terms
/// (guaranteed by `BigRational`'s normalizing constructors).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Nat(u64),
    Rat(BigRational),
    Bool(bool),
}

impl Constant {
    pub fn rat(numer: i64, denom: i64) -> Constant {
        Constant::Rat(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn ty(&self) -> Type {
        match self {
            Constant::Nat(_) => Type::Nat,
            Constant::Rat(_) => Type::Real,
            Constant::Bool(_) => Type::Bool,
        }
    }

    /// Numeric view; naturals promote to rationals.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self {
            Constant::Nat(n) => Some(BigRational::from_integer(BigInt::from(*n))),
            Constant::Rat(q) => Some(q.clone()),
            Constant::Bool(_) => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        self.as_rational().map(|q| rational_to_f64(&q))
    }

    pub fn is_zero(&self) -> bool {
        self.as_rational().is_some_and(|q| q.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_rational().is_some_and(|q| q.is_one())
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Nat(n) => write!(f, "{n}"),
            Constant::Bool(b) => write!(f, "{b}"),
            Constant::Rat(q) => {
                if q.is_integer() {
                    write!(f, "{}", q.numer())
                } else {
                    write!(f, "{}/{}", q.numer(), q.denom())
                }
            }
        }
    }
}

/// Converts an exact rational to the nearest double (up to a final rounding).
pub fn rational_to_f64(q: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (q.numer().to_f64(), q.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && n.abs() < 9.0e15 && d < 9.0e15 {
            return n / d;
        }
    }
    // Large operands: scale down before converting.
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    let mut num = q.numer().abs();
    let mut den = q.denom().clone();
    let mut exp: i32 = 0;
    let limit = BigInt::from(1u64 << 62);
    while num > limit {
        num >>= 1;
        exp += 1;
    }
    while den > limit {
        den >>= 1;
        exp -= 1;
    }
    sign * num.to_f64().unwrap_or(f64::INFINITY) / den.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(exp)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Nat,
    Bool,
    Real,
    /// A vector with a statically known element list (possibly heterogeneous).
    Vector(Vec<Type>),
    /// A homogeneous vector whose length is only known after specialization
    /// (produced by ranges `a:b`).
    Seq(Box<Type>),
}

impl Type {
    pub fn is_numeric(&self) -> bool {
        matches!(self, Type::Nat | Type::Real)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Nat => f.write_str("nat"),
            Type::Bool => f.write_str("bool"),
            Type::Real => f.write_str("real"),
            Type::Vector(ts) => {
                f.write_str("<")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(">")
            }
            Type::Seq(t) => write!(f, "<{t}...>"),
        }
    }
}

/// Finite map from variables to types; each variable is bound at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeEnv {
    bindings: BTreeMap<Variable, Type>,
}

impl TypeEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, x: &Variable) -> Option<&Type> {
        self.bindings.get(x)
    }

    /// Environment extension `Γ, x:τ`: the new binding replaces any old one.
    pub fn extend(&self, x: Variable, ty: Type) -> TypeEnv {
        let mut next = self.clone();
        next.bindings.insert(x, ty);
        next
    }

    pub fn insert(&mut self, x: Variable, ty: Type) {
        self.bindings.insert(x, ty);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Type)> {
        self.bindings.iter()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}

impl FromIterator<(Variable, Type)> for TypeEnv {
    fn from_iter<I: IntoIterator<Item = (Variable, Type)>>(iter: I) -> Self {
        TypeEnv { bindings: iter.into_iter().collect() }
    }
}

/// Built-in functions. The declaration order doubles as the canonical term
/// order used by the simplifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Builtin {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    And,
    Or,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    Sin,
    Cos,
    Pi,
    Length,
    Inv,
    Trans,
    Range,
}

impl Builtin {
    pub fn arity(self) -> usize {
        use Builtin::*;
        match self {
            Pi => 0,
            Neg | Sin | Cos | Length | Inv | Trans => 1,
            _ => 2,
        }
    }

    /// Surface name: the infix symbol for operators, the call name otherwise.
    pub fn symbol(self) -> &'static str {
        use Builtin::*;
        match self {
            Add => "+",
            Sub => "-",
            Mul => "*",
            Div => "/",
            Pow => "^",
            Neg => "neg",
            And => "&&",
            Or => "||",
            Lt => "<",
            Le => "<=",
            Gt => ">",
            Ge => ">=",
            Eq => "==",
            Ne => "!=",
            Sin => "sin",
            Cos => "cos",
            Pi => "pi",
            Length => "length",
            Inv => "inv",
            Trans => "trans",
            Range => ":",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Builtin> {
        use Builtin::*;
        Some(match s {
            "+" => Add,
            "-" => Sub,
            "*" => Mul,
            "/" => Div,
            "^" => Pow,
            "neg" => Neg,
            "&&" => And,
            "||" => Or,
            "<" => Lt,
            "<=" => Le,
            ">" => Gt,
            ">=" => Ge,
            "==" => Eq,
            "!=" => Ne,
            "sin" => Sin,
            "cos" => Cos,
            "pi" => Pi,
            "length" => Length,
            "inv" => Inv,
            "trans" => Trans,
            ":" => Range,
            _ => return None,
        })
    }

    /// Builtins written as `name(arg)` in the concrete syntax.
    pub fn from_call_name(s: &str) -> Option<Builtin> {
        match s {
            "sin" => Some(Builtin::Sin),
            "cos" => Some(Builtin::Cos),
            "length" => Some(Builtin::Length),
            "inv" => Some(Builtin::Inv),
            "trans" => Some(Builtin::Trans),
            _ => None,
        }
    }

    pub fn is_comparison(self) -> bool {
        use Builtin::*;
        matches!(self, Lt | Le | Gt | Ge | Eq | Ne)
    }

    /// Builtins that operate on vector shapes rather than scalars.
    pub fn is_structural(self) -> bool {
        matches!(self, Builtin::Length | Builtin::Inv | Builtin::Trans | Builtin::Range)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Const(Constant),
    Var(Variable),
    Vector(Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Apply(Builtin, Vec<Expr>),
    TimeDer(Box<Expr>),
    PartialDer(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(Variable::new(name))
    }

    pub fn primed_var(name: &str, primes: u32) -> Expr {
        Expr::Var(Variable::with_primes(name, primes))
    }

    pub fn nat(n: u64) -> Expr {
        Expr::Const(Constant::Nat(n))
    }

    pub fn rat(numer: i64, denom: i64) -> Expr {
        Expr::Const(Constant::rat(numer, denom))
    }

    pub fn rational(q: BigRational) -> Expr {
        Expr::Const(Constant::Rat(q))
    }

    pub fn boolean(b: bool) -> Expr {
        Expr::Const(Constant::Bool(b))
    }

    pub fn apply(f: Builtin, args: Vec<Expr>) -> Expr {
        Expr::Apply(f, args)
    }

    pub fn binary(f: Builtin, a: Expr, b: Expr) -> Expr {
        Expr::Apply(f, vec![a, b])
    }

    pub fn unary(f: Builtin, a: Expr) -> Expr {
        Expr::Apply(f, vec![a])
    }

    pub fn index(target: Expr, index: Expr) -> Expr {
        Expr::Index(Box::new(target), Box::new(index))
    }

    pub fn time_der(e: Expr) -> Expr {
        Expr::TimeDer(Box::new(e))
    }

    pub fn partial_der(of: Expr, wrt: Expr) -> Expr {
        Expr::PartialDer(Box::new(of), Box::new(wrt))
    }

    pub fn as_const(&self) -> Option<&Constant> {
        match self {
            Expr::Const(k) => Some(k),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&Variable> {
        match self {
            Expr::Var(v) => Some(v),
            _ => None,
        }
    }

    /// Direct subexpressions, in label order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => vec![],
            Expr::Vector(es) | Expr::Apply(_, es) => es.iter().collect(),
            Expr::Index(a, b) | Expr::PartialDer(a, b) => vec![a, b],
            Expr::TimeDer(e) => vec![e],
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Calls `f` on every node, parents before children.
    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn mentions(&self, x: &Variable) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                found |= v == x;
            }
        });
        found
    }

    /// Rebuilds the tree bottom-up, letting `f` replace each node.
    pub fn map_bottom_up(&self, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
        let rebuilt = match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Vector(es) => Expr::Vector(es.iter().map(|e| e.map_bottom_up(f)).collect()),
            Expr::Apply(g, es) => Expr::Apply(*g, es.iter().map(|e| e.map_bottom_up(f)).collect()),
            Expr::Index(a, b) => Expr::index(a.map_bottom_up(f), b.map_bottom_up(f)),
            Expr::PartialDer(a, b) => Expr::partial_der(a.map_bottom_up(f), b.map_bottom_up(f)),
            Expr::TimeDer(e) => Expr::time_der(e.map_bottom_up(f)),
        };
        f(rebuilt)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Equation {
    /// `x = e`, a definition of `x`.
    Directed {
        lhs: Variable,
        rhs: Expr,
    },
    /// `e1 = e2` with `e1` not a bare variable.
    Undirected {
        lhs: Expr,
        rhs: Expr,
    },
    /// `x += e`, a discrete assignment.
    Reset {
        lhs: Variable,
        rhs: Expr,
    },
    Cond {
        guard: Expr,
        then_eq: Box<Equation>,
        else_eq: Box<Equation>,
    },
    /// `foreach n in e do s`; the binder is an unprimed name.
    Family {
        binder: String,
        range: Expr,
        body: Box<Equation>,
    },
    Set(Vec<Equation>),
}

impl Equation {
    pub fn directed(lhs: Variable, rhs: Expr) -> Equation {
        Equation::Directed { lhs, rhs }
    }

    pub fn undirected(lhs: Expr, rhs: Expr) -> Equation {
        debug_assert!(!matches!(lhs, Expr::Var(_)), "undirected lhs must not be a bare variable");
        Equation::Undirected { lhs, rhs }
    }

    pub fn reset(lhs: Variable, rhs: Expr) -> Equation {
        Equation::Reset { lhs, rhs }
    }

    pub fn cond(guard: Expr, then_eq: Equation, else_eq: Equation) -> Equation {
        Equation::Cond { guard, then_eq: Box::new(then_eq), else_eq: Box::new(else_eq) }
    }

    pub fn family(binder: impl Into<String>, range: Expr, body: Equation) -> Equation {
        Equation::Family { binder: binder.into(), range, body: Box::new(body) }
    }

    pub fn empty() -> Equation {
        Equation::Set(Vec::new())
    }

    /// Builds `lhs = rhs`, choosing the directed form when `lhs` is a bare variable.
    pub fn equate(lhs: Expr, rhs: Expr) -> Equation {
        match lhs {
            Expr::Var(v) => Equation::Directed { lhs: v, rhs },
            other => Equation::Undirected { lhs: other, rhs },
        }
    }

    /// Calls `f` on every expression embedded in this equation (not recursing
    /// into the expressions themselves).
    pub fn for_each_expr(&self, f: &mut impl FnMut(&Expr)) {
        match self {
            Equation::Directed { rhs, .. } | Equation::Reset { rhs, .. } => f(rhs),
            Equation::Undirected { lhs, rhs } => {
                f(lhs);
                f(rhs);
            }
            Equation::Cond { guard, then_eq, else_eq } => {
                f(guard);
                then_eq.for_each_expr(f);
                else_eq.for_each_expr(f);
            }
            Equation::Family { range, body, .. } => {
                f(range);
                body.for_each_expr(f);
            }
            Equation::Set(es) => es.iter().for_each(|e| e.for_each_expr(f)),
        }
    }
}
