//! Random constraint sets checked against exhaustive enumeration.

use coredel::bta::{minimal_solution, normalize, BindingTime, BtExpr, Constraint, ConstraintSet, Substitution};
use coredel::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SETS: usize = 500;

fn label(k: u32) -> Label {
    Label::root().child(k + 1)
}

fn atom(rng: &mut impl Rng, labels: u32) -> BtExpr {
    match rng.gen_range(0..10) {
        0 => BtExpr::S,
        1 => BtExpr::D,
        _ => BtExpr::Label(label(rng.gen_range(0..labels))),
    }
}

/// `SETS` sets of at most 12 constraints over at most 6 labels.
pub fn random_sets(seed: u64) -> Vec<ConstraintSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..SETS)
        .map(|_| {
            let labels = rng.gen_range(1..=6);
            let n = rng.gen_range(0..=12);
            let mut c = ConstraintSet::new();
            for _ in 0..n {
                let (l, r) = (atom(&mut rng, labels), atom(&mut rng, labels));
                c.insert(Constraint::new(l, r));
            }
            c
        })
        .collect()
}

fn bt(bit: bool) -> BindingTime {
    if bit {
        BindingTime::D
    } else {
        BindingTime::S
    }
}

/// Every assignment of the labels of `c` that satisfies it.
fn all_solutions(c: &ConstraintSet) -> Vec<Substitution> {
    let labels: Vec<Label> = c.labels().into_iter().collect();
    (0u32..1 << labels.len())
        .map(|mask| labels.iter().enumerate().map(|(i, l)| (l.clone(), bt(mask >> i & 1 == 1))).collect::<Substitution>())
        .filter(|s| s.solves(c))
        .collect()
}

fn leq(a: &Substitution, b: &Substitution) -> bool {
    a.iter().all(|(l, x)| x.leq(b.get(l).expect("same domain")))
}

/// Criterion 2: same verdict and same least solution as enumeration.
pub fn oracle_equivalence(sets: &[ConstraintSet]) -> Result<String, String> {
    let mut solvable = 0;
    for (i, c) in sets.iter().enumerate() {
        let sols = all_solutions(c);
        let least = sols.iter().find(|s| sols.iter().all(|t| leq(s, t)));
        if !sols.is_empty() && least.is_none() {
            return Err(format!("set {i}: solutions have no least element"));
        }
        match (minimal_solution(c), least) {
            (Ok(got), Some(want)) if got == *want => solvable += 1,
            (Err(_), None) => {}
            (got, want) => return Err(format!("set {i} {c:?}: solver {got:?}, enumeration {want:?}")),
        }
    }
    Ok(format!("{} sets, {solvable} solvable, 0 mismatches", sets.len()))
}

/// `σ` applied to every constraint of `c`.
fn apply(c: &ConstraintSet, sigma: &Substitution) -> ConstraintSet {
    c.iter().map(|k| k.substitute(sigma)).collect()
}

/// Criterion 3: at most one step per constraint, and every prefix of the
/// trace composes with the solution of what remains.
pub fn normalization_trace(sets: &[ConstraintSet]) -> Result<String, String> {
    let mut prefixes = 0;
    for (i, c) in sets.iter().enumerate() {
        let n = normalize(c);
        if n.steps.len() > c.len() {
            return Err(format!("set {i}: {} steps for {} constraints", n.steps.len(), c.len()));
        }
        if n.residual.is_error_form() {
            if !all_solutions(c).is_empty() {
                return Err(format!("set {i}: error form but a solution exists"));
            }
            continue;
        }
        if !n.residual.is_normal_form() {
            return Err(format!("set {i}: residual {:?} is neither normal nor error form", n.residual));
        }
        let full = minimal_solution(c).map_err(|e| format!("set {i}: {e}"))?;
        for k in 0..=n.steps.len() {
            let prefix: Substitution = n.steps[..k].iter().filter_map(|s| s.binding.clone()).collect();
            let remaining = apply(c, &prefix);
            let suffix: Substitution =
                full.iter().filter(|(l, _)| prefix.get(l).is_none()).map(|(l, b)| (l.clone(), b)).collect();
            if !suffix.solves(&remaining) {
                return Err(format!("set {i}: suffix solution fails the set after {k} steps"));
            }
            if !prefix.extend_with(&suffix).solves(c) {
                return Err(format!("set {i}: prefix {k} composed with the suffix solution fails the original set"));
            }
            prefixes += 1;
        }
    }
    Ok(format!("{} sets, {prefixes} trace prefixes replayed, 0 violations", sets.len()))
}
