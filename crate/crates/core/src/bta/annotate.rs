use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::{global_env, BindingTime, GlobalEnv, Substitution};
use crate::label::{label_program, Label, Node};
use crate::lang::{Builtin, Equation, Expr, Variable};

/// Binding times of variables the program itself does not define.
pub type BtEnv = BTreeMap<Variable, BindingTime>;

/// A program together with a binding time for each of its nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedProgram {
    program: Equation,
    times: BTreeMap<Label, BindingTime>,
}

impl AnnotatedProgram {
    /// Pairs a program with explicit annotations; labels missing from
    /// `times` read as static.
    pub fn new(program: Equation, times: BTreeMap<Label, BindingTime>) -> Self {
        AnnotatedProgram { program, times }
    }

    pub fn binding_time(&self, l: &Label) -> BindingTime {
        self.times.get(l).copied().unwrap_or(BindingTime::S)
    }

    pub fn times(&self) -> &BTreeMap<Label, BindingTime> {
        &self.times
    }

    pub fn set_binding_time(&mut self, l: Label, b: BindingTime) {
        self.times.insert(l, b);
    }

    /// The underlying program with annotations dropped.
    pub fn erase(&self) -> &Equation {
        &self.program
    }

    pub fn into_program(self) -> Equation {
        self.program
    }
}

/// Finds the definition a variable occurrence refers to by walking outwards
/// through family binders and conditional scopes.
pub(crate) struct Resolver<'a> {
    env: &'a GlobalEnv,
    nodes: HashMap<Label, Node<'a>>,
}

impl<'a> Resolver<'a> {
    pub fn new(program: &'a Equation, env: &'a GlobalEnv) -> Self {
        Resolver { env, nodes: label_program(program).into_iter().collect() }
    }

    pub fn node(&self, l: &Label) -> Option<&Node<'a>> {
        self.nodes.get(l)
    }

    fn is_scope(&self, l: &Label) -> bool {
        match (l.parent(), l.path().last()) {
            (None, _) => true,
            (Some(p), Some(&k)) => matches!(self.nodes.get(&p), Some(Node::Eqn(Equation::Cond { .. }))) && k >= 2,
            _ => false,
        }
    }

    pub fn resolve(&self, at: &Label, x: &Variable) -> Option<Label> {
        let mut below: Option<Label> = None;
        for a in at.ancestors() {
            if let Some(Node::Eqn(Equation::Family { binder, .. })) = self.nodes.get(&a) {
                if x.primes == 0 && *binder == x.base && below.as_ref() == Some(&a.child(3)) {
                    return Some(a.child(1));
                }
            }
            if self.is_scope(&a) {
                if let Some(l) = self.env.scope(&a).and_then(|e| e.get(x)) {
                    return Some(l.clone());
                }
            }
            below = Some(a);
        }
        None
    }
}

/// Annotates every node of `program` with its binding time under `sigma`.
/// Labels outside the domain of `sigma` are unconstrained and read as
/// static, except the targets of discrete assignments, which take the
/// binding time of the variable they assign.
pub fn annotate(program: &Equation, env: &GlobalEnv, sigma: &Substitution) -> AnnotatedProgram {
    let resolver = Resolver::new(program, env);
    let mut times = BTreeMap::new();
    let nodes = label_program(program);
    for (l, _) in &nodes {
        times.insert(l.clone(), sigma.get(l).unwrap_or(BindingTime::S));
    }
    for (l, node) in nodes {
        if let Node::Eqn(Equation::Reset { lhs, .. }) = node {
            let target = match resolver.resolve(&l, lhs) {
                Some(def) => sigma.get(&def).unwrap_or(BindingTime::S),
                None => BindingTime::D,
            };
            let mut at = l.child(1);
            times.insert(at.clone(), target);
            for _ in 0..lhs.primes {
                at = at.child(1);
                times.insert(at.clone(), BindingTime::D);
            }
        }
    }
    AnnotatedProgram { program: program.clone(), times }
}

/// A node whose annotation breaks one of the binding-time rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub label: Label,
    pub rule: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} rule: {}", self.label, self.rule, self.message)
    }
}

/// Checks an annotation against the declarative binding-time rules. `free`
/// gives binding times for variables the program does not define; any
/// variable missing there is dynamic.
pub fn verify_annotation(free: &BtEnv, a: &AnnotatedProgram) -> Result<(), Vec<Violation>> {
    let env = match global_env(&a.program) {
        Ok(env) => env,
        Err(e) => {
            let label = e.label().cloned().unwrap_or_default();
            return Err(vec![Violation { label, rule: "environment", message: e.to_string() }]);
        }
    };
    let resolver = Resolver::new(&a.program, &env);
    let bt = |l: &Label| a.binding_time(l);
    let env_bt = |at: &Label, x: &Variable| match resolver.resolve(at, x) {
        Some(def) => bt(&def),
        None => free.get(x).copied().unwrap_or(BindingTime::D),
    };
    let join = |l: &Label, n: usize| BindingTime::join_all((1..=n).map(|k| bt(&l.child(k as u32))));
    let mut out = Vec::new();
    let expect = |out: &mut Vec<Violation>, l: &Label, rule: &'static str, want: BindingTime| {
        if bt(l) != want {
            out.push(Violation {
                label: l.clone(),
                rule,
                message: format!("annotated {} but the rule requires {}", bt(l), want),
            });
        }
    };

    for (l, node) in label_program(&a.program) {
        match node {
            Node::Expr(Expr::Const(_)) => {}
            Node::Expr(Expr::Var(_)) | Node::Var(_) => {
                let x = match &node {
                    Node::Expr(Expr::Var(x)) => (*x).clone(),
                    Node::Var(x) => x.clone(),
                    _ => unreachable!(),
                };
                let lower_part = l
                    .parent()
                    .and_then(|p| resolver.node(&p).cloned())
                    .is_some_and(|p| matches!(p, Node::Var(_) | Node::Expr(Expr::Var(_))));
                if lower_part {
                    expect(&mut out, &l, "primed variable", BindingTime::D);
                    if env_bt(&l, &x) != BindingTime::D {
                        out.push(Violation {
                            label: l.clone(),
                            rule: "primed variable",
                            message: format!("`{x}` has a derivative in use and must be dynamic"),
                        });
                    }
                } else {
                    expect(&mut out, &l, "variable", env_bt(&l, &x));
                }
            }
            Node::Expr(Expr::Apply(Builtin::Length, _)) => expect(&mut out, &l, "length", BindingTime::S),
            Node::Expr(e) => expect(&mut out, &l, "join", join(&l, e.children().len())),
            Node::Binder(_) => {
                let range = l.parent().expect("binders sit under a family").child(2);
                expect(&mut out, &l, "family binder", bt(&range));
            }
            Node::Eqn(s) => match s {
                Equation::Directed { .. } => {
                    let (l1, l2) = (l.child(1), l.child(2));
                    if !bt(&l2).leq(bt(&l1)) {
                        out.push(Violation {
                            label: l.clone(),
                            rule: "directed equation",
                            message: format!("right-hand side is {} but the defined variable is {}", bt(&l2), bt(&l1)),
                        });
                    }
                    expect(&mut out, &l, "directed equation", bt(&l1));
                }
                Equation::Reset { .. } => expect(&mut out, &l, "discrete assignment", bt(&l.child(2))),
                Equation::Undirected { .. } => expect(&mut out, &l, "equation", join(&l, 2)),
                Equation::Cond { .. } => expect(&mut out, &l, "conditional", join(&l, 3)),
                Equation::Family { .. } => expect(&mut out, &l, "family", bt(&l.child(3))),
                Equation::Set(es) => expect(&mut out, &l, "set", join(&l, es.len())),
            },
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
