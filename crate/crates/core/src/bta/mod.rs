//! Binding-time analysis: every node of a program is classified static
//! (computable at compile time) or dynamic (left for simulation).
//!
//! The analysis generates subtyping-style constraints between node labels,
//! rewrites them to normal form and reads off the unique minimal solution.

mod annotate;
mod constraints;
mod dump;
mod env;
mod normalize;

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexSet;
use thiserror::Error;

use crate::label::Label;
use crate::lang::{Equation, Variable};

pub use annotate::{annotate, verify_annotation, AnnotatedProgram, BtEnv, Violation};
pub use constraints::{gen_constraints, gen_constraints_eqn, gen_constraints_expr, GeneratedConstraints};
pub use dump::dump_bta;
pub use env::{build_global_env, global_env, GlobalEnv, LocalEnv};
pub use normalize::{minimal_solution, normalize, BtaConflict, ConflictReport, Fix, Normalization, Rule, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BindingTime {
    S,
    D,
}

impl BindingTime {
    pub fn join(self, other: BindingTime) -> BindingTime {
        self.max(other)
    }

    /// `self ⊑ other`.
    pub fn leq(self, other: BindingTime) -> bool {
        self <= other
    }

    pub fn join_all(it: impl IntoIterator<Item = BindingTime>) -> BindingTime {
        it.into_iter().fold(BindingTime::S, BindingTime::join)
    }
}

impl fmt::Display for BindingTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BindingTime::S => "S",
            BindingTime::D => "D",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BtExpr {
    Bt(BindingTime),
    Label(Label),
}

impl BtExpr {
    pub const S: BtExpr = BtExpr::Bt(BindingTime::S);
    pub const D: BtExpr = BtExpr::Bt(BindingTime::D);

    pub fn as_label(&self) -> Option<&Label> {
        match self {
            BtExpr::Label(l) => Some(l),
            BtExpr::Bt(_) => None,
        }
    }
}

impl From<BindingTime> for BtExpr {
    fn from(b: BindingTime) -> Self {
        BtExpr::Bt(b)
    }
}

impl From<Label> for BtExpr {
    fn from(l: Label) -> Self {
        BtExpr::Label(l)
    }
}

impl From<&Label> for BtExpr {
    fn from(l: &Label) -> Self {
        BtExpr::Label(l.clone())
    }
}

impl fmt::Display for BtExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BtExpr::Bt(b) => b.fmt(f),
            BtExpr::Label(l) => l.fmt(f),
        }
    }
}

/// `lhs ⊑ rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub lhs: BtExpr,
    pub rhs: BtExpr,
}

impl Constraint {
    pub fn new(lhs: impl Into<BtExpr>, rhs: impl Into<BtExpr>) -> Constraint {
        Constraint { lhs: lhs.into(), rhs: rhs.into() }
    }

    /// `S ⊑ l`, `l ⊑ D` or `l ⊑ l'`.
    pub fn is_normal(&self) -> bool {
        matches!(
            (&self.lhs, &self.rhs),
            (BtExpr::Bt(BindingTime::S), BtExpr::Label(_))
                | (BtExpr::Label(_), BtExpr::Bt(BindingTime::D))
                | (BtExpr::Label(_), BtExpr::Label(_))
        )
    }

    pub fn is_error(&self) -> bool {
        self.lhs == BtExpr::D && self.rhs == BtExpr::S
    }

    pub fn substitute(&self, sigma: &Substitution) -> Constraint {
        Constraint { lhs: sigma.apply(&self.lhs), rhs: sigma.apply(&self.rhs) }
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.lhs.as_label().into_iter().chain(self.rhs.as_label())
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ⊑ {}", self.lhs, self.rhs)
    }
}

/// A deduplicated, insertion-ordered set of constraints.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    items: IndexSet<Constraint>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the constraint was already present.
    pub fn insert(&mut self, c: Constraint) -> bool {
        self.items.insert(c)
    }

    pub fn extend(&mut self, other: ConstraintSet) {
        self.items.extend(other.items);
    }

    pub fn contains(&self, c: &Constraint) -> bool {
        self.items.contains(c)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> IndexSet<Label> {
        self.items.iter().flat_map(|c| c.labels().cloned()).collect()
    }

    pub fn is_normal_form(&self) -> bool {
        self.items.iter().all(Constraint::is_normal)
    }

    pub fn is_error_form(&self) -> bool {
        self.items.iter().any(Constraint::is_error)
    }
}

impl FromIterator<Constraint> for ConstraintSet {
    fn from_iter<I: IntoIterator<Item = Constraint>>(iter: I) -> Self {
        ConstraintSet { items: iter.into_iter().collect() }
    }
}

impl<'a> IntoIterator for &'a ConstraintSet {
    type Item = &'a Constraint;
    type IntoIter = indexmap::set::Iter<'a, Constraint>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

/// A finite map from labels to binding times; the identity elsewhere.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<Label, BindingTime>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(l: Label, b: BindingTime) -> Self {
        Substitution { map: BTreeMap::from([(l, b)]) }
    }

    pub fn get(&self, l: &Label) -> Option<BindingTime> {
        self.map.get(l).copied()
    }

    pub fn insert(&mut self, l: Label, b: BindingTime) {
        self.map.insert(l, b);
    }

    pub fn domain(&self) -> impl Iterator<Item = &Label> {
        self.map.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, BindingTime)> {
        self.map.iter().map(|(l, b)| (l, *b))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, b: &BtExpr) -> BtExpr {
        match b {
            BtExpr::Label(l) => self.get(l).map_or_else(|| b.clone(), BtExpr::Bt),
            other => other.clone(),
        }
    }

    /// The extension `self ⊕ other`: `self` wins where both are defined.
    pub fn extend_with(&self, other: &Substitution) -> Substitution {
        let mut map = other.map.clone();
        map.extend(self.map.iter().map(|(l, b)| (l.clone(), *b)));
        Substitution { map }
    }

    /// Whether every constraint becomes a satisfied `b ⊑ b'` under `self`.
    pub fn solves(&self, c: &ConstraintSet) -> bool {
        c.iter().all(|c| match (self.apply(&c.lhs), self.apply(&c.rhs)) {
            (BtExpr::Bt(a), BtExpr::Bt(b)) => a.leq(b),
            _ => false,
        })
    }
}

impl FromIterator<(Label, BindingTime)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (Label, BindingTime)>>(iter: I) -> Self {
        Substitution { map: iter.into_iter().collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BtaError {
    #[error("`{var}` is defined twice in the same scope (at {first} and {second})")]
    DuplicateDefinition { var: Variable, first: Label, second: Label },
    #[error(transparent)]
    Conflict(#[from] BtaConflict),
}

impl BtaError {
    /// The program node most responsible for the error.
    pub fn label(&self) -> Option<&Label> {
        match self {
            BtaError::DuplicateDefinition { second, .. } => Some(second),
            BtaError::Conflict(c) => c.reports.first().and_then(|r| r.origin.as_ref()),
        }
    }
}

/// Everything the analysis computed for one program.
#[derive(Debug, Clone)]
pub struct BtaResult {
    pub env: GlobalEnv,
    pub constraints: GeneratedConstraints,
    pub solution: Substitution,
    pub annotated: AnnotatedProgram,
}

/// Runs the whole analysis on a program whose top level is `program`.
pub fn analyze(program: &Equation) -> Result<BtaResult, BtaError> {
    let env = global_env(program)?;
    let constraints = gen_constraints(program, &env);
    let solution = match minimal_solution(&constraints.set) {
        Ok(s) => s,
        Err(mut conflict) => {
            for r in &mut conflict.reports {
                r.origin = constraints.origins.get(&r.constraint).cloned();
                for fix in &mut r.fixed_by {
                    fix.origin = constraints.origins.get(&fix.cause).cloned();
                }
            }
            return Err(conflict.into());
        }
    };
    let annotated = annotate(program, &env, &solution);
    Ok(BtaResult { env, constraints, solution, annotated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn bt_of(r: &BtaResult, path: &str) -> BindingTime {
        r.annotated.binding_time(&path.parse().unwrap())
    }

    #[test]
    fn constant_definition_is_static() {
        let r = analyze(&parse("x = 1").unwrap().equations).unwrap();
        for l in ["root", "root.1", "root.1.1", "root.1.2"] {
            assert_eq!(bt_of(&r, l), BindingTime::S, "{l}");
        }
    }

    #[test]
    fn derivatives_force_dynamic() {
        let r = analyze(&parse("x = 1, y = x'").unwrap().equations).unwrap();
        assert_eq!(bt_of(&r, "root.1.1"), BindingTime::D);
        assert_eq!(bt_of(&r, "root.1.2"), BindingTime::S);
        assert_eq!(bt_of(&r, "root.2"), BindingTime::D);
    }

    #[test]
    fn duplicate_definitions_are_rejected() {
        let err = analyze(&parse("x = 1, x = 2").unwrap().equations).unwrap_err();
        assert!(matches!(err, BtaError::DuplicateDefinition { .. }));
    }

    #[test]
    fn substitution_extension_prefers_left() {
        let l = Label::root();
        let a = Substitution::single(l.clone(), BindingTime::S);
        let b = Substitution::single(l.clone(), BindingTime::D);
        assert_eq!(a.extend_with(&b).get(&l), Some(BindingTime::S));
    }
}
