use num::{BigInt, BigRational, Signed, Zero};

use crate::label::Label;
use crate::lang::{Builtin, Constant, Equation, Expr, Variable};

const RANGE: u8 = 1;
const OR: u8 = 2;
const AND: u8 = 3;
const CMP: u8 = 4;
const ADD: u8 = 5;
const MUL: u8 = 6;
const UNARY: u8 = 7;
const POW: u8 = 8;
const POSTFIX: u8 = 9;
const ATOM: u8 = 10;

/// Renders a whole program: top-level equations one per line.
pub fn pretty(s: &Equation) -> String {
    Printer { marked: None }.program(s)
}

pub fn pretty_eqn(s: &Equation) -> String {
    Printer { marked: None }.eqn(s, &Label::root())
}

pub fn pretty_expr(e: &Expr) -> String {
    Printer { marked: None }.render(e, &Label::root()).0
}

/// Like [`pretty`], but wraps every maximal expression subtree whose label
/// satisfies `marked` in `⟦…⟧`.
pub(crate) fn pretty_marked(s: &Equation, marked: &dyn Fn(&Label) -> bool) -> String {
    Printer { marked: Some(marked) }.program(s)
}

struct Printer<'a> {
    marked: Option<&'a dyn Fn(&Label) -> bool>,
}

impl Printer<'_> {
    fn program(&self, s: &Equation) -> String {
        let root = Label::root();
        match s {
            Equation::Set(es) => {
                es.iter().enumerate().map(|(k, e)| self.eqn(e, &root.child(k as u32 + 1))).collect::<Vec<_>>().join(",\n")
            }
            other => self.eqn(other, &root),
        }
    }

    fn list(&self, es: &[Equation], l: &Label, sep: &str) -> String {
        es.iter().enumerate().map(|(k, e)| self.eqn(e, &l.child(k as u32 + 1))).collect::<Vec<_>>().join(sep)
    }

    fn var(&self, v: &Variable, l: &Label) -> String {
        match self.marked {
            Some(m) if m(l) => format!("⟦{v}⟧"),
            _ => v.to_string(),
        }
    }

    fn expr(&self, e: &Expr, l: &Label) -> String {
        self.render(e, l).0
    }

    fn eqn(&self, s: &Equation, l: &Label) -> String {
        let (l1, l2, l3) = (l.child(1), l.child(2), l.child(3));
        match s {
            Equation::Directed { lhs, rhs } => format!("{} = {}", self.var(lhs, &l1), self.expr(rhs, &l2)),
            Equation::Undirected { lhs, rhs } => format!("{} = {}", self.expr(lhs, &l1), self.expr(rhs, &l2)),
            Equation::Reset { lhs, rhs } => format!("{} += {}", self.var(lhs, &l1), self.expr(rhs, &l2)),
            Equation::Cond { guard, then_eq, else_eq } => {
                let then_part = match &**then_eq {
                    Equation::Set(es) if es.len() >= 2 => self.list(es, &l2, ", "),
                    other => self.eqn(other, &l2),
                };
                let else_part = match &**else_eq {
                    Equation::Set(es) if es.is_empty() => "noelse".to_string(),
                    other => format!("else {}", self.eqn(other, &l3)),
                };
                format!("if {} then {then_part} {else_part}", self.expr(guard, &l1))
            }
            Equation::Family { binder, range, body } => {
                let binder = self.var(&Variable::new(binder.as_str()), &l1);
                format!("foreach {binder} in {} do {}", self.expr(range, &l2), self.eqn(body, &l3))
            }
            Equation::Set(es) if es.is_empty() => "{}".to_string(),
            Equation::Set(es) => format!("{{ {} }}", self.list(es, l, ", ")),
        }
    }

    fn at(&self, e: &Expr, l: &Label, min: u8) -> String {
        let (s, p) = self.render(e, l);
        if p < min {
            format!("({s})")
        } else {
            s
        }
    }

    fn render(&self, e: &Expr, l: &Label) -> (String, u8) {
        if let Some(m) = self.marked {
            if m(l) {
                return (format!("⟦{}⟧", pretty_expr(e)), ATOM);
            }
        }
        let c = |k: usize| l.child(k as u32 + 1);
        match e {
            Expr::Const(k) => render_const(k),
            Expr::Var(v) => (v.to_string(), ATOM),
            Expr::Vector(items) => {
                let parts: Vec<String> = items.iter().enumerate().map(|(k, i)| self.at(i, &c(k), RANGE)).collect();
                let s = if parts.len() == 1 { format!("({},)", parts[0]) } else { format!("({})", parts.join(", ")) };
                (s, ATOM)
            }
            Expr::Index(t, i) => (format!("{}({})", self.at(t, &c(0), POSTFIX), self.at(i, &c(1), RANGE)), POSTFIX),
            Expr::TimeDer(inner) => (format!("({})'", self.expr(inner, &c(0))), POSTFIX),
            Expr::PartialDer(of, wrt) => match &**of {
                Expr::Var(v) => (format!("{}'[{}]", v, self.expr(wrt, &c(1))), POSTFIX),
                other => (format!("({})'[{}]", self.expr(other, &c(0)), self.expr(wrt, &c(1))), POSTFIX),
            },
            Expr::Apply(Builtin::Pi, _) => ("pi".to_string(), ATOM),
            Expr::Apply(Builtin::Neg, args) => {
                let operand = match &args[0] {
                    // keep `-1.5` from reading back as a negative literal
                    Expr::Const(Constant::Rat(q)) if !q.is_negative() => format!("({})", render_const_plain(q)),
                    other => self.at(other, &c(0), UNARY),
                };
                (format!("-{operand}"), UNARY)
            }
            Expr::Apply(f, args) if args.len() == 2 && binary_prec(*f).is_some() => {
                let p = binary_prec(*f).unwrap();
                let (lmin, rmin) = match f {
                    Builtin::Pow => (POSTFIX, UNARY),
                    Builtin::Range => (OR, OR),
                    f if f.is_comparison() => (ADD, ADD),
                    _ => (p, p + 1),
                };
                (format!("{} {} {}", self.at(&args[0], &c(0), lmin), f.symbol(), self.at(&args[1], &c(1), rmin)), p)
            }
            Expr::Apply(f, args) => {
                let parts: Vec<String> = args.iter().enumerate().map(|(k, a)| self.at(a, &c(k), RANGE)).collect();
                (format!("{}({})", f.symbol(), parts.join(", ")), ATOM)
            }
        }
    }
}

fn binary_prec(f: Builtin) -> Option<u8> {
    use Builtin::*;
    Some(match f {
        Range => RANGE,
        Or => OR,
        And => AND,
        Lt | Le | Gt | Ge | Eq | Ne => CMP,
        Add | Sub => ADD,
        Mul | Div => MUL,
        Pow => POW,
        _ => return None,
    })
}

fn render_const(k: &Constant) -> (String, u8) {
    match k {
        Constant::Nat(n) => (n.to_string(), ATOM),
        Constant::Bool(b) => (b.to_string(), ATOM),
        Constant::Rat(q) if q.is_negative() => (format!("({})", render_const_plain(q)), ATOM),
        Constant::Rat(q) => {
            let s = render_const_plain(q);
            let p = if s.contains('/') { MUL } else { ATOM };
            (s, p)
        }
    }
}

/// Decimal notation when the expansion terminates, `p/q` otherwise.
fn render_const_plain(q: &BigRational) -> String {
    match decimal(q) {
        Some(s) => s,
        None => format!("{}/{}", q.numer(), q.denom()),
    }
}

fn decimal(q: &BigRational) -> Option<String> {
    let mut d = q.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if d != BigInt::from(1) {
        return None;
    }
    let digits = twos.max(fives).max(1);
    let scaled = (q * BigRational::from_integer(num::pow(BigInt::from(10), digits))).to_integer();
    let neg = scaled.is_negative();
    let mut body = scaled.abs().to_string();
    while body.len() <= digits {
        body.insert(0, '0');
    }
    let (int_part, frac) = body.split_at(body.len() - digits);
    Some(format!("{}{int_part}.{frac}", if neg { "-" } else { "" }))
}
