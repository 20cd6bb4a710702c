//! Small named sheaves used by tests, examples and the CLI.

use std::collections::HashMap;
use std::sync::Arc;

use crate::finspace::FiniteSpace;
use crate::metric::{PseudometricSpace, StalkMap, Value};
use crate::sheaf::{Assignment, MetricSheaf, COMMUTATIVITY_TOL};

/// Points `A, B, C` with opens `∅, {A}, {A,B}, {A,C}, X`.
pub fn abc_space() -> FiniteSpace {
    FiniteSpace::explicit(
        &["A", "B", "C"],
        &[vec![], vec!["A"], vec!["A", "B"], vec!["A", "C"], vec!["A", "B", "C"]],
    )
    .expect("valid topology")
}

/// Real-line stalks on `abc_space` with restrictions
/// `X→{A,B}: ×2r`, `X→{A,C}: ×r`, `{A,B}→{A}: ×½`, `{A,C}→{A}: ×1`.
pub fn fix_abc(r: f64) -> MetricSheaf {
    let x = Arc::new(abc_space());
    let id = |l: &[&str]| x.open_by_labels(l).expect("open");
    let (a, ab, ac, top) = (id(&["A"]), id(&["A", "B"]), id(&["A", "C"]), x.whole());
    let stalks = x
        .open_ids()
        .map(|o| if o == x.empty() { PseudometricSpace::OnePoint } else { PseudometricSpace::real_line() })
        .collect();
    let generators = HashMap::from([
        ((ab, top), StalkMap::scalar(2.0 * r)),
        ((ac, top), StalkMap::scalar(r)),
        ((a, ab), StalkMap::scalar(0.5)),
        ((a, ac), StalkMap::scalar(1.0)),
    ]);
    MetricSheaf::new(x, stalks, generators, COMMUTATIVITY_TOL).expect("commuting restrictions")
}

/// The partial assignment `{A,B} ↦ 0`, `{A,C} ↦ 1`.
pub fn fix_abc_partial(sheaf: &MetricSheaf) -> Assignment {
    let x = sheaf.space();
    Assignment::partial(
        sheaf,
        [
            (x.open_by_labels(&["A", "B"]).expect("open"), Value::scalar(0.0)),
            (x.open_by_labels(&["A", "C"]).expect("open"), Value::scalar(1.0)),
        ],
    )
    .expect("values fit")
}

/// The optimal extension of `fix_abc_partial`: `{A} ↦ ½`, `X ↦ 1/(3r)`.
pub fn fix_abc_assignment(sheaf: &MetricSheaf, r: f64) -> Assignment {
    let mut a = fix_abc_partial(sheaf);
    let x = sheaf.space();
    a.set(sheaf, x.open_by_labels(&["A"]).expect("open"), Value::scalar(0.5)).expect("fits");
    a.set(sheaf, x.whole(), Value::scalar(1.0 / (3.0 * r))).expect("fits");
    a
}

/// Constant real-line sheaf on the chain `∅ ⊂ {p} ⊂ {p,q}` with the
/// assignment `{p} ↦ low`, `{p,q} ↦ high`.
pub fn two_chain(low: f64, high: f64) -> (MetricSheaf, Assignment) {
    let x = Arc::new(
        FiniteSpace::explicit(&["p", "q"], &[vec![], vec!["p"], vec!["p", "q"]]).expect("valid"),
    );
    let p = x.open_by_labels(&["p"]).expect("open");
    let top = x.whole();
    let s = MetricSheaf::constant(x, PseudometricSpace::real_line()).expect("valid");
    let a = Assignment::partial(&s, [(p, Value::scalar(low)), (top, Value::scalar(high))]).expect("fits");
    (s, a)
}
