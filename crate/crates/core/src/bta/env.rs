use std::collections::BTreeMap;

use super::BtaError;
use crate::label::Label;
use crate::lang::{Equation, Variable};

/// Where each variable of one scope is defined.
pub type LocalEnv = BTreeMap<Variable, Label>;

/// Local environments keyed by scope label. Scopes are the root and the two
/// branches of every conditional.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GlobalEnv {
    scopes: BTreeMap<Label, LocalEnv>,
}

impl GlobalEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scope(&self, scope: &Label) -> Option<&LocalEnv> {
        self.scopes.get(scope)
    }

    pub fn scopes(&self) -> impl Iterator<Item = (&Label, &LocalEnv)> {
        self.scopes.iter()
    }

    /// Looks `x` up in `scope`, then in each enclosing scope.
    pub fn lookup(&self, scope: &Label, x: &Variable) -> Option<&Label> {
        scope.ancestors().find_map(|a| self.scopes.get(&a).and_then(|env| env.get(x)))
    }

    pub fn define(&mut self, scope: &Label, x: Variable, at: Label) -> Result<(), BtaError> {
        let env = self.scopes.entry(scope.clone()).or_default();
        if let Some(first) = env.get(&x) {
            return Err(BtaError::DuplicateDefinition { var: x, first: first.clone(), second: at });
        }
        env.insert(x, at);
        Ok(())
    }
}

/// Adds the definitions made by `s` (labeled `label`) in `scope` to `rho`.
pub fn build_global_env(scope: &Label, s: &Equation, label: &Label, mut rho: GlobalEnv) -> Result<GlobalEnv, BtaError> {
    rho.scopes.entry(scope.clone()).or_default();
    match s {
        Equation::Directed { lhs, .. } => rho.define(scope, lhs.clone(), label.child(1))?,
        Equation::Undirected { .. } | Equation::Reset { .. } => {}
        Equation::Cond { then_eq, else_eq, .. } => {
            let (l2, l3) = (label.child(2), label.child(3));
            rho = build_global_env(&l2, then_eq, &l2, rho)?;
            rho = build_global_env(&l3, else_eq, &l3, rho)?;
        }
        Equation::Family { body, .. } => rho = build_global_env(scope, body, &label.child(3), rho)?,
        Equation::Set(es) => {
            for (k, e) in es.iter().enumerate() {
                rho = build_global_env(scope, e, &label.child(k as u32 + 1), rho)?;
            }
        }
    }
    Ok(rho)
}

/// The environment of a whole program.
pub fn global_env(program: &Equation) -> Result<GlobalEnv, BtaError> {
    build_global_env(&Label::root(), program, &Label::root(), GlobalEnv::new())
}
