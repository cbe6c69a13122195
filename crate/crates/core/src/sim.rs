//! Fixed-step RK4 simulation of explicit models with guard detection.
//!
//! Plain doubles throughout; this is a numerical check of compiled models
//! and gives no enclosure guarantees.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::explicit::ExplicitModel;
use crate::lang::{rational_to_f64, Builtin, Constant, Expr, Variable};
use crate::parser::pretty_expr;

/// Variable bound to simulation time when the model does not define it.
pub const TIME: &str = "t";

const EVENT_TOLERANCE: f64 = 1e-9;
const MAX_EVENTS_PER_STEP: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("no initial value for `{0}`")]
    MissingInit(Variable),
    #[error("`{var}` is not finite at t = {time}")]
    NonFiniteState { time: f64, var: Variable },
    #[error("cannot evaluate `{var}`: {detail}")]
    Eval { var: String, detail: String },
    #[error("more than {MAX_EVENTS_PER_STEP} events in the step ending at t = {0}")]
    TooManyEvents(f64),
    #[error("step size must be positive and the end time nonnegative")]
    BadStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub time: f64,
    /// Indexed like [`ExplicitModel::states`].
    pub values: Vec<f64>,
}

impl SimState {
    /// Initial state from named values; every model state must be present.
    pub fn from_map(m: &ExplicitModel, time: f64, init: &HashMap<Variable, f64>) -> Result<SimState, SimError> {
        let values = m
            .states
            .iter()
            .map(|x| init.get(x).copied().ok_or_else(|| SimError::MissingInit(x.clone())))
            .collect::<Result<_, _>>()?;
        Ok(SimState { time, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Variable>,
    /// One row per grid point, starting at the initial state.
    pub rows: Vec<SimState>,
    /// Times at which an event fired.
    pub events: Vec<f64>,
}

impl Trajectory {
    /// `t` followed by each state, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for x in &self.states {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            write!(out, "{:.16e}", row.time).unwrap();
            for v in &row.values {
                write!(out, ",{v:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn column(&self, x: &Variable) -> Option<Vec<f64>> {
        let i = self.states.iter().position(|s| s == x)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }
}

/// An expression with variables resolved to slots.
#[derive(Debug, Clone)]
enum Code {
    Num(f64),
    Bool(bool),
    Slot(usize),
    Unary(Builtin, Box<Code>),
    Binary(Builtin, Box<Code>, Box<Code>),
}

impl Code {
    fn compile(e: &Expr, slots: &HashMap<Variable, usize>) -> Result<Code, String> {
        Ok(match e {
            Expr::Const(Constant::Bool(b)) => Code::Bool(*b),
            Expr::Const(k) => Code::Num(k.as_f64().expect("numeric")),
            Expr::Var(x) => Code::Slot(*slots.get(x).ok_or_else(|| format!("`{x}` is not defined"))?),
            Expr::Apply(Builtin::Pi, _) => Code::Num(std::f64::consts::PI),
            Expr::Apply(f, args) if args.len() == 1 => Code::Unary(*f, Box::new(Code::compile(&args[0], slots)?)),
            Expr::Apply(f, args) if args.len() == 2 => {
                Code::Binary(*f, Box::new(Code::compile(&args[0], slots)?), Box::new(Code::compile(&args[1], slots)?))
            }
            other => return Err(format!("cannot evaluate `{}`", pretty_expr(other))),
        })
    }

    fn is_bool(&self) -> bool {
        match self {
            Code::Bool(_) => true,
            Code::Binary(f, ..) => matches!(f, Builtin::And | Builtin::Or) || f.is_comparison(),
            _ => false,
        }
    }

    fn real(&self, s: &[f64]) -> f64 {
        match self {
            Code::Num(x) => *x,
            Code::Slot(i) => s[*i],
            Code::Unary(f, a) => {
                let a = a.real(s);
                match f {
                    Builtin::Neg => -a,
                    Builtin::Sin => a.sin(),
                    Builtin::Cos => a.cos(),
                    _ => f64::NAN,
                }
            }
            Code::Binary(f, a, b) => {
                let (a, b) = (a.real(s), b.real(s));
                match f {
                    Builtin::Add => a + b,
                    Builtin::Sub => a - b,
                    Builtin::Mul => a * b,
                    Builtin::Div => a / b,
                    Builtin::Pow if b.fract() == 0.0 && b.abs() < 1024.0 => a.powi(b as i32),
                    Builtin::Pow => a.powf(b),
                    _ => f64::NAN,
                }
            }
            Code::Bool(_) => f64::NAN,
        }
    }

    fn truth(&self, s: &[f64]) -> bool {
        match self {
            Code::Bool(b) => *b,
            Code::Binary(f, a, b) => match f {
                Builtin::And => a.truth(s) && b.truth(s),
                Builtin::Or => a.truth(s) || b.truth(s),
                Builtin::Eq | Builtin::Ne if a.is_bool() => (a.truth(s) == b.truth(s)) == (*f == Builtin::Eq),
                _ => {
                    let (x, y) = (a.real(s), b.real(s));
                    match f {
                        Builtin::Lt => x < y,
                        Builtin::Le => x <= y,
                        Builtin::Gt => x > y,
                        Builtin::Ge => x >= y,
                        Builtin::Eq => x == y,
                        Builtin::Ne => x != y,
                        _ => false,
                    }
                }
            },
            _ => false,
        }
    }
}

/// A model prepared for repeated evaluation. Slots hold the states, then
/// the parameters, time, and the aux values in order.
pub struct Simulator<'a> {
    model: &'a ExplicitModel,
    base: Vec<f64>,
    time_slot: Option<usize>,
    aux: Vec<Code>,
    odes: Vec<Code>,
    guards: Vec<Code>,
    resets: Vec<Vec<(usize, Code)>>,
    /// For each state, where its derivative comes from.
    derivs: Vec<Source>,
}

enum Source {
    State(usize),
    Ode(usize),
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a ExplicitModel) -> Result<Simulator<'a>, SimError> {
        let mut slots: HashMap<Variable, usize> = HashMap::new();
        let mut base = Vec::new();
        for x in &model.states {
            slots.insert(x.clone(), base.len());
            base.push(0.0);
        }
        for (x, q) in &model.params {
            slots.insert(x.clone(), base.len());
            base.push(rational_to_f64(q));
        }
        let time = Variable::new(TIME);
        let time_slot = match slots.entry(time) {
            Entry::Occupied(_) => None,
            Entry::Vacant(v) => {
                v.insert(base.len());
                base.push(0.0);
                Some(base.len() - 1)
            }
        };
        let compile = |x: &dyn std::fmt::Display, e: &Expr, slots: &HashMap<Variable, usize>| {
            Code::compile(e, slots).map_err(|detail| SimError::Eval { var: x.to_string(), detail })
        };
        let mut aux = Vec::new();
        for (x, e) in &model.aux {
            aux.push(compile(x, e, &slots)?);
            slots.insert(x.clone(), base.len());
            base.push(0.0);
        }
        let odes = model.odes.iter().map(|(x, e)| compile(x, e, &slots)).collect::<Result<_, _>>()?;
        let guards = model.events.iter().map(|ev| compile(&"guard", &ev.guard, &slots)).collect::<Result<_, _>>()?;
        let resets = model
            .events
            .iter()
            .map(|ev| {
                ev.resets
                    .iter()
                    .filter_map(|(x, e)| {
                        let i = model.states.iter().position(|s| s == x)?;
                        Some(compile(x, e, &slots).map(|c| (i, c)))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        let derivs = model
            .states
            .iter()
            .map(|x| {
                let d = x.primed();
                match model.states.iter().position(|s| *s == d) {
                    Some(i) => Source::State(i),
                    None => Source::Ode(model.odes.iter().position(|(u, _)| *u == d).expect("state without ode")),
                }
            })
            .collect();
        Ok(Simulator { model, base, time_slot, aux, odes, guards, resets, derivs })
    }

    fn slots(&self, s: &SimState) -> Vec<f64> {
        let mut slots = self.base.clone();
        slots[..s.values.len()].copy_from_slice(&s.values);
        if let Some(i) = self.time_slot {
            slots[i] = s.time;
        }
        let first = slots.len() - self.aux.len();
        for (k, c) in self.aux.iter().enumerate() {
            slots[first + k] = c.real(&slots);
        }
        slots
    }

    /// Values of the aux definitions at `s`.
    pub fn aux(&self, s: &SimState) -> Vec<f64> {
        let slots = self.slots(s);
        slots[slots.len() - self.aux.len()..].to_vec()
    }

    /// Values of the highest derivatives at `s`.
    pub fn odes(&self, s: &SimState) -> Vec<f64> {
        let slots = self.slots(s);
        self.odes.iter().map(|c| c.real(&slots)).collect()
    }

    fn derivative(&self, s: &SimState) -> Vec<f64> {
        let odes = self.odes(s);
        self.derivs
            .iter()
            .map(|d| match d {
                Source::State(i) => s.values[*i],
                Source::Ode(i) => odes[*i],
            })
            .collect()
    }

    fn rk4(&self, s: &SimState, h: f64) -> Result<SimState, SimError> {
        let shift = |k: &[f64], c: f64| SimState {
            time: s.time + c * h,
            values: s.values.iter().zip(k).map(|(v, d)| v + c * h * d).collect(),
        };
        let k1 = self.derivative(s);
        let k2 = self.derivative(&shift(&k1, 0.5));
        let k3 = self.derivative(&shift(&k2, 0.5));
        let k4 = self.derivative(&shift(&k3, 1.0));
        let values = (0..s.values.len()).map(|i| s.values[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        let next = SimState { time: s.time + h, values };
        self.check_finite(&next)?;
        Ok(next)
    }

    fn check_finite(&self, s: &SimState) -> Result<(), SimError> {
        match s.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(SimError::NonFiniteState { time: s.time, var: self.model.states[i].clone() }),
            None => Ok(()),
        }
    }

    pub fn guards(&self, s: &SimState) -> Vec<bool> {
        let slots = self.slots(s);
        self.guards.iter().map(|g| g.truth(&slots)).collect()
    }

    /// Applies the resets of event `k`, all evaluated on `s`.
    fn fire(&self, k: usize, s: &SimState) -> Result<SimState, SimError> {
        let slots = self.slots(s);
        let mut next = s.clone();
        for (i, c) in &self.resets[k] {
            next.values[*i] = c.real(&slots);
        }
        self.check_finite(&next)?;
        Ok(next)
    }

    fn rising(before: &[bool], after: &[bool]) -> bool {
        before.iter().zip(after).any(|(b, a)| !b && *a)
    }

    /// Advances `s` by `h`, stopping at the first guard that turns true.
    /// Returns the new state and whether it ends on an event.
    fn advance(&self, s: &SimState, h: f64, before: &[bool]) -> Result<(SimState, bool), SimError> {
        let end = self.rk4(s, h)?;
        if !Self::rising(before, &self.guards(&end)) {
            return Ok((end, false));
        }
        let (mut lo, mut hi) = (0.0, h);
        let mut at = end;
        while hi - lo > EVENT_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            let probe = self.rk4(s, mid)?;
            if Self::rising(before, &self.guards(&probe)) {
                hi = mid;
                at = probe;
            } else {
                lo = mid;
            }
        }
        Ok((at, true))
    }

    pub fn run(&self, init: &SimState, dt: f64, end: f64) -> Result<Trajectory, SimError> {
        // Written to reject NaN as well.
        if !(dt > 0.0 && end >= 0.0) {
            return Err(SimError::BadStep);
        }
        self.check_finite(init)?;
        let steps = (end / dt).round() as u64;
        let mut rows = vec![init.clone()];
        let mut events = Vec::new();
        let mut s = init.clone();
        let mut before = self.guards(&s);
        for k in 1..=steps {
            let target = init.time + k as f64 * dt;
            let mut fired = 0;
            loop {
                let h = target - s.time;
                if h <= 0.0 {
                    break;
                }
                let (next, hit) = self.advance(&s, h, &before)?;
                s = next;
                if !hit {
                    break;
                }
                fired += 1;
                if fired > MAX_EVENTS_PER_STEP {
                    return Err(SimError::TooManyEvents(target));
                }
                let now = self.guards(&s);
                for i in 0..now.len() {
                    if !before[i] && now[i] {
                        s = self.fire(i, &s)?;
                        events.push(s.time);
                    }
                }
                before = self.guards(&s);
            }
            s.time = target;
            before = self.guards(&s);
            rows.push(s.clone());
        }
        Ok(Trajectory { states: self.model.states.clone(), rows, events })
    }
}

pub fn simulate(m: &ExplicitModel, init: &SimState, dt: f64, end: f64) -> Result<Trajectory, SimError> {
    Simulator::new(m)?.run(init, dt, end)
}
