mod common;

use std::collections::BTreeSet;

use common::arb_formula;
use proptest::prelude::*;
use slq::formula::v;
use slq::semantics::{enumerate_states, ModelChecker};
use slq::*;

fn only_primitives(f: &Formula) -> bool {
    use Formula::*;
    match f {
        Emp | True | False | Eq(..) | PointsTo(..) => true,
        Not(a) => only_primitives(a),
        And(a, b) | Star(a, b) | Wand(a, b) => only_primitives(a) && only_primitives(b),
        _ => false,
    }
}

fn max_bounds(a: EnumerationBounds, b: EnumerationBounds) -> EnumerationBounds {
    EnumerationBounds {
        max_heap_size: a.max_heap_size.max(b.max_heap_size),
        location_universe: a.location_universe.max(b.location_universe),
        wand_extension_budget: a.wand_extension_budget.max(b.wand_extension_budget),
        fresh_locations: a.fresh_locations.max(b.fresh_locations),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn print_parse_round_trip(f in arb_formula(3, 4, 5)) {
        let text = print(&f);
        prop_assert_eq!(parse(&text).unwrap(), f, "{}", text);
    }

    #[test]
    fn expansion_uses_primitives_only(f in arb_formula(3, 4, 5)) {
        let e = expand_shortcuts(&f);
        prop_assert!(only_primitives(&e), "{}", e);
        prop_assert_eq!(expand_shortcuts(&e), e.clone());
        prop_assert!(free_vars(&e).is_subset(&free_vars(&f)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn expansion_preserves_satisfaction(f in arb_formula(2, 2, 3)) {
        let e = expand_shortcuts(&f);
        let vars: BTreeSet<Var> = [v("x"), v("y")].into();
        let b = max_bounds(EnumerationBounds::exact_for(&f), EnumerationBounds::exact_for(&e));
        let grid = EnumerationBounds { max_heap_size: 2, location_universe: 3, ..b };
        let (mut cf, mut ce) = (ModelChecker::new(&f, b), ModelChecker::new(&e, b));
        for s in enumerate_states(&vars, &grid) {
            prop_assert_eq!(cf.check(&s).unwrap(), ce.check(&s).unwrap(), "{} at {}", e, s);
        }
    }
}

#[test]
fn grammar_examples() {
    let f = parse("x |-> y * y |-> x -* false").unwrap();
    let (x, y) = (v("x"), v("y"));
    assert_eq!(f, Formula::pto(&x, &y).star(Formula::pto(&y, &x)).wand(Formula::False));
    assert_eq!(parse(&print(&f)).unwrap(), f);

    let g = Formula::alloc(&x).and(Formula::size_eq(1)).wand(Formula::size(2).not());
    assert_eq!(print(&g), "alloc(x) /\\ size = 1 -* not size >= 2");
    assert_eq!(print(&Formula::Emp.star(Formula::Emp)), "emp * emp");
    assert_eq!(print(&Formula::pto(&x, &y)), "x |-> y");
}

#[test]
fn size_three_expansion_is_equivalent() {
    let e = expand_shortcuts(&Formula::size(3));
    let ne = Formula::Emp.not();
    assert_eq!(e, ne.clone().star(ne.clone().star(ne)));
    // Equivalent on every heap of at most four cells.
    let b = EnumerationBounds { max_heap_size: 4, location_universe: 4, wand_extension_budget: 0, fresh_locations: 1 };
    for s in enumerate_states(&BTreeSet::new(), &b) {
        assert_eq!(satisfies(&s, &e, &b).unwrap(), s.heap.len() >= 3);
    }
}
