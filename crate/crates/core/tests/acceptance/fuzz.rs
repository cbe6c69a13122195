//! Random source programs for the type-safety fuzz.

use coredel::lang::{infer_env, type_check_eqn};
use coredel::specialize::{specialize_program, SpecErrorKind};
use coredel::{bta, parse};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PROGRAMS: usize = 1000;

struct Gen {
    rng: ChaCha8Rng,
    statics: Vec<String>,
    dynamics: Vec<String>,
    /// Family binder in scope, if any.
    binder: Option<String>,
}

const STATES: [&str; 3] = ["x", "y", "z"];

impl Gen {
    fn pick<'a>(&mut self, xs: &'a [String]) -> Option<&'a String> {
        xs.choose(&mut self.rng)
    }

    fn literal(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => self.rng.gen_range(1..10).to_string(),
            1 => format!("{}.{}", self.rng.gen_range(0..5), self.rng.gen_range(1..10)),
            2 => format!("{}/{}", self.rng.gen_range(1..9), self.rng.gen_range(1..9)),
            _ => "pi".into(),
        }
    }

    fn state(&mut self) -> String {
        let x = STATES.choose(&mut self.rng).unwrap();
        format!("{x}{}", "'".repeat(self.rng.gen_range(0..3)))
    }

    /// An expression over literals and earlier static definitions.
    fn static_expr(&mut self, depth: u32) -> String {
        if depth == 0 || self.rng.gen_bool(0.3) {
            let statics = self.statics.clone();
            return match self.pick(&statics) {
                Some(s) if self.rng.gen_bool(0.5) => s.clone(),
                _ => self.literal(),
            };
        }
        let (a, b) = (self.static_expr(depth - 1), self.static_expr(depth - 1));
        match self.rng.gen_range(0..6) {
            0 => format!("{a} + {b}"),
            1 => format!("({a}) - {b}"),
            2 => format!("({a}) * ({b})"),
            3 => format!("({a}) / {}", self.rng.gen_range(1..9)),
            4 => format!("({a}) ^ {}", self.rng.gen_range(0..4)),
            _ => format!("-({a})"),
        }
    }

    /// A real-valued expression that may mention state.
    fn expr(&mut self, depth: u32) -> String {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return match self.rng.gen_range(0..6) {
                0 | 1 => self.state(),
                2 => self.literal(),
                3 => {
                    let statics = self.statics.clone();
                    self.pick(&statics).cloned().unwrap_or_else(|| self.literal())
                }
                4 => {
                    let dynamics = self.dynamics.clone();
                    self.pick(&dynamics).cloned().unwrap_or_else(|| self.state())
                }
                _ => match &self.binder {
                    Some(i) => format!("q({i})"),
                    None => format!("q({})", self.rng.gen_range(0..2)),
                },
            };
        }
        let a = self.expr(depth - 1);
        match self.rng.gen_range(0..12) {
            0 => format!("{a} + {}", self.expr(depth - 1)),
            1 => format!("({a}) - ({})", self.expr(depth - 1)),
            2 => format!("({a}) * ({})", self.expr(depth - 1)),
            3 => format!("({a}) / ({})", self.static_nonzero()),
            4 => format!("({a}) / (2 + ({})^2)", self.expr(depth - 1)),
            5 => format!("({a}) ^ {}", self.rng.gen_range(1..4)),
            6 => format!("sin({a})"),
            7 => format!("cos({a})"),
            8 => format!("({a})'"),
            9 => format!("({a})'[{}]", self.partial_target()),
            10 => format!("-({a})"),
            _ => format!("({a}) * {}", self.static_expr(1)),
        }
    }

    fn static_nonzero(&mut self) -> String {
        format!("{}", self.rng.gen_range(1..9))
    }

    /// Mostly variables; sometimes something that is not one.
    fn partial_target(&mut self) -> String {
        match self.rng.gen_range(0..10) {
            0 => self.literal(),
            1 => {
                let statics = self.statics.clone();
                self.pick(&statics).cloned().unwrap_or_else(|| "x".into())
            }
            2 => format!("q({})", self.rng.gen_range(0..2)),
            _ => self.state(),
        }
    }

    fn guard(&mut self) -> String {
        let op = ["<", "<=", ">", ">="].choose(&mut self.rng).unwrap().to_string();
        let g = if self.rng.gen_bool(0.3) {
            format!("{} {op} {}", self.static_expr(2), self.static_expr(1))
        } else {
            format!("{} {op} {}", self.expr(2), self.literal())
        };
        if self.rng.gen_bool(0.2) {
            format!("{g} && {} > 0", self.state())
        } else {
            g
        }
    }

    /// One equation that defines nothing.
    fn plain_equation(&mut self, depth: u32) -> String {
        match self.rng.gen_range(0..3) {
            0 => {
                let x = STATES.choose(&mut self.rng).unwrap();
                format!("{x} += {}", self.expr(depth))
            }
            _ => format!("{} = {}", self.lhs_expr(depth), self.expr(depth)),
        }
    }

    /// Left-hand sides that are never bare variables.
    fn lhs_expr(&mut self, depth: u32) -> String {
        format!("({})'", self.expr(depth))
    }

    fn equation(&mut self) -> String {
        match self.rng.gen_range(0..5) {
            0 => {
                let g = self.guard();
                let then_eq = self.plain_equation(2);
                if self.rng.gen_bool(0.5) {
                    format!("if {g} then {then_eq} noelse")
                } else {
                    format!("if {g} then {then_eq} else {}", self.plain_equation(2))
                }
            }
            1 => {
                let range = if self.rng.gen_bool(0.5) { "0:length(q) - 1".to_string() } else { "0:1".to_string() };
                self.binder = Some("i".into());
                let body = format!("(q(i))'' = {}", self.expr(2));
                self.binder = None;
                format!("foreach i in {range} do {body}")
            }
            _ => self.plain_equation(3),
        }
    }

    fn program(&mut self) -> String {
        let mut eqs = vec!["q = (x, y)".to_string()];
        for k in 0..self.rng.gen_range(0..4) {
            let e = self.static_expr(2);
            eqs.push(format!("s{k} = {e}"));
            self.statics.push(format!("s{k}"));
        }
        for k in 0..self.rng.gen_range(0..3) {
            let e = self.expr(2);
            eqs.push(format!("d{k} = {e}"));
            self.dynamics.push(format!("d{k}"));
        }
        if self.rng.gen_bool(0.4) {
            let e = self.expr(2);
            eqs.push(format!("z' = {e}"));
        }
        for _ in 0..self.rng.gen_range(1..4) {
            let e = self.equation();
            eqs.push(e);
        }
        eqs.shuffle(&mut self.rng);
        eqs.join(",\n")
    }
}

pub struct Report {
    pub specialized: usize,
    pub excluded: usize,
    pub ill_typed: usize,
    pub bta_rejected: usize,
}

/// Criterion 5: well-typed programs specialize, except for non-variable
/// partial derivative targets.
pub fn type_safety(seed: u64) -> Result<Report, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report { specialized: 0, excluded: 0, ill_typed: 0, bta_rejected: 0 };
    let mut attempts = 0;
    while report.specialized + report.excluded < PROGRAMS {
        attempts += 1;
        if attempts > 50 * PROGRAMS {
            return Err(format!("only {} well-typed programs in {attempts} attempts", report.specialized + report.excluded));
        }
        let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(rng.gen()), statics: vec![], dynamics: vec![], binder: None };
        let src = g.program();
        let p = parse(&src).map_err(|e| format!("generator wrote unparsable text: {e}\n{src}"))?.equations;
        if type_check_eqn(&infer_env(&p), &p).is_err() {
            report.ill_typed += 1;
            continue;
        }
        let Ok(analysis) = bta::analyze(&p) else {
            report.bta_rejected += 1;
            continue;
        };
        match specialize_program(&analysis.annotated) {
            Ok(_) => report.specialized += 1,
            Err(e) if e.kind == SpecErrorKind::NonVariablePartialTarget => report.excluded += 1,
            Err(e) => return Err(format!("{e}\n{src}")),
        }
    }
    Ok(report)
}
