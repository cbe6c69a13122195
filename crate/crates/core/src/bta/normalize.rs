use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::{BindingTime, BtExpr, Constraint, ConstraintSet, Substitution};
use crate::label::Label;

/// The five normalization rewrite rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    /// drop `S ⊑ S`
    A,
    /// drop `S ⊑ D`
    B,
    /// drop `D ⊑ D`
    C,
    /// `l ⊑ S` forces `l ↦ S`
    D,
    /// `D ⊑ l` forces `l ↦ D`
    E,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Rule::A => "a",
            Rule::B => "b",
            Rule::C => "c",
            Rule::D => "d",
            Rule::E => "e",
        };
        f.write_str(name)
    }
}

/// One rewrite: the rule, the constraint it consumed (as it stood at that
/// moment) and the binding it introduced, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub rule: Rule,
    pub removed: Constraint,
    pub binding: Option<(Label, BindingTime)>,
    /// Index of the input constraint `removed` descends from.
    pub origin: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalization {
    /// Composition of the per-step substitutions.
    pub substitution: Substitution,
    /// What is left: normal form or error form.
    pub residual: ConstraintSet,
    pub steps: Vec<Step>,
}

/// How a label came to be fixed during normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fix {
    pub label: Label,
    pub value: BindingTime,
    /// The input constraint whose rewrite fixed the label.
    pub cause: Constraint,
    /// Program node that generated `cause`, when known.
    pub origin: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictReport {
    /// The input constraint that ended up as `D ⊑ S`.
    pub constraint: Constraint,
    pub origin: Option<Label>,
    pub fixed_by: Vec<Fix>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct BtaConflict {
    pub reports: Vec<ConflictReport>,
}

impl fmt::Display for BtaConflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "binding-time conflict: a static value is required where a dynamic one flows")?;
        for r in &self.reports {
            write!(f, "\n  constraint {}", r.constraint)?;
            if let Some(o) = &r.origin {
                write!(f, " (from node {o})")?;
            }
            for fix in &r.fixed_by {
                write!(f, "\n    {} ↦ {} because of {}", fix.label, fix.value, fix.cause)?;
                if let Some(o) = &fix.origin {
                    write!(f, " (from node {o})")?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Atom {
    S,
    D,
    L(u32),
}

fn rule_of(lhs: Atom, rhs: Atom) -> Option<Rule> {
    use Atom::*;
    match (lhs, rhs) {
        (S, S) => Some(Rule::A),
        (S, D) => Some(Rule::B),
        (D, D) => Some(Rule::C),
        (L(_), S) => Some(Rule::D),
        (D, L(_)) => Some(Rule::E),
        _ => None,
    }
}

const RULES: [Rule; 5] = [Rule::A, Rule::B, Rule::C, Rule::D, Rule::E];

/// Exhaustively rewrites `c`. At each step the first applicable rule (in
/// order a–e) fires on the earliest constraint, by insertion order, it
/// matches.
pub fn normalize(c: &ConstraintSet) -> Normalization {
    let mut labels: Vec<Label> = Vec::new();
    let mut ids: HashMap<Label, u32> = HashMap::new();
    let mut atom = |b: &BtExpr| match b {
        BtExpr::Bt(BindingTime::S) => Atom::S,
        BtExpr::Bt(BindingTime::D) => Atom::D,
        BtExpr::Label(l) => Atom::L(*ids.entry(l.clone()).or_insert_with(|| {
            labels.push(l.clone());
            labels.len() as u32 - 1
        })),
    };
    let mut work: Vec<Option<(Atom, Atom)>> = Vec::with_capacity(c.len());
    for k in c.iter() {
        work.push(Some((atom(&k.lhs), atom(&k.rhs))));
    }
    let to_expr = |a: Atom| match a {
        Atom::S => BtExpr::S,
        Atom::D => BtExpr::D,
        Atom::L(i) => BtExpr::Label(labels[i as usize].clone()),
    };

    let mut alive: HashSet<(Atom, Atom)> = HashSet::new();
    let mut queues: [BTreeSet<usize>; 5] = Default::default();
    let mut uses: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, slot) in work.iter_mut().enumerate() {
        let (l, r) = slot.expect("fresh");
        if !alive.insert((l, r)) {
            *slot = None;
            continue;
        }
        if let Some(rule) = rule_of(l, r) {
            queues[rule as usize].insert(i);
        }
        for a in [l, r] {
            if let Atom::L(id) = a {
                uses.entry(id).or_default().push(i);
            }
        }
    }

    let mut steps = Vec::new();
    let mut sigma = Substitution::new();
    while let Some((rule, idx)) = RULES.iter().find_map(|r| queues[*r as usize].first().map(|i| (*r, *i))) {
        queues[rule as usize].remove(&idx);
        let (l, r) = work[idx].take().expect("queued constraints are alive");
        alive.remove(&(l, r));
        let removed = Constraint { lhs: to_expr(l), rhs: to_expr(r) };
        let binding = match (rule, l, r) {
            (Rule::D, Atom::L(id), _) => Some((id, Atom::S)),
            (Rule::E, _, Atom::L(id)) => Some((id, Atom::D)),
            _ => None,
        };
        let mut step_binding = None;
        if let Some((id, value)) = binding {
            let bt = if value == Atom::S { BindingTime::S } else { BindingTime::D };
            sigma.insert(labels[id as usize].clone(), bt);
            step_binding = Some((labels[id as usize].clone(), bt));
            for j in uses.remove(&id).unwrap_or_default() {
                let Some((a, b)) = work[j] else { continue };
                if let Some(old) = rule_of(a, b) {
                    queues[old as usize].remove(&j);
                }
                alive.remove(&(a, b));
                let sub = |x: Atom| if x == Atom::L(id) { value } else { x };
                let (a2, b2) = (sub(a), sub(b));
                if !alive.insert((a2, b2)) {
                    work[j] = None;
                    continue;
                }
                work[j] = Some((a2, b2));
                if let Some(new) = rule_of(a2, b2) {
                    queues[new as usize].insert(j);
                }
            }
        }
        steps.push(Step { rule, removed, binding: step_binding, origin: idx });
    }

    let residual = work.iter().flatten().map(|&(l, r)| Constraint { lhs: to_expr(l), rhs: to_expr(r) }).collect();
    Normalization { substitution: sigma, residual, steps }
}

/// The least assignment satisfying `c`, defined exactly on the labels of
/// `c`, or the constraints that make it unsatisfiable.
pub fn minimal_solution(c: &ConstraintSet) -> Result<Substitution, BtaConflict> {
    let n = normalize(c);
    if n.residual.is_error_form() {
        return Err(conflict(c, &n));
    }
    let rest: Substitution = n.residual.labels().into_iter().map(|l| (l, BindingTime::S)).collect();
    Ok(n.substitution.extend_with(&rest))
}

fn conflict(c: &ConstraintSet, n: &Normalization) -> BtaConflict {
    let input: Vec<&Constraint> = c.iter().collect();
    // The residual keeps the input order, so re-derive each residual entry's
    // source by replaying the substitution over the inputs.
    let reports = input
        .iter()
        .filter(|k| k.substitute(&n.substitution).is_error())
        .map(|k| {
            let fixed_by = k
                .labels()
                .filter_map(|l| {
                    n.steps.iter().find(|s| s.binding.as_ref().is_some_and(|(bl, _)| bl == l)).map(|s| Fix {
                        label: l.clone(),
                        value: s.binding.as_ref().unwrap().1,
                        cause: input[s.origin].clone(),
                        origin: None,
                    })
                })
                .collect();
            ConflictReport { constraint: (*k).clone(), origin: None, fixed_by }
        })
        .collect();
    BtaConflict { reports }
}
