use super::{AnnotatedProgram, BindingTime};
use crate::parser::pretty_marked;

/// Text form of an annotated program: the program with maximal dynamic
/// subexpressions bracketed `⟦…⟧`, a blank line, then one `label → S|D`
/// line per node.
pub fn dump_bta(a: &AnnotatedProgram) -> String {
    let mut out = pretty_marked(a.erase(), &|l| a.binding_time(l) == BindingTime::D);
    out.push_str("\n\n");
    for (l, b) in a.times() {
        out.push_str(&format!("{l} → {b}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::analyze;
    use super::*;
    use crate::parser::parse;

    #[test]
    fn brackets_dynamic_parts() {
        let r = analyze(&parse("k = 2, x' = k * x").unwrap().equations).unwrap();
        let text = dump_bta(&r.annotated);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k = 2,"));
        assert_eq!(lines.next(), Some("⟦x'⟧ = ⟦k * x⟧"));
        assert!(text.contains("root.1 → S\n"));
        assert!(text.contains("root.2.1 → D\n"));
    }
}
