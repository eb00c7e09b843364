mod common;

use std::collections::BTreeSet;

use common::{arb_formula, naive_sat, pool_for};
use proptest::prelude::*;
use slq::formula::v;
use slq::semantics::{enumerate_states, ModelChecker};
use slq::*;

fn p(s: &str) -> Formula {
    parse(s).unwrap()
}

fn all_types(vars: &[&str], alpha: u32) -> Vec<CoreType> {
    let basis = CoreBasis::new(vars.iter().map(|x| v(x)), alpha);
    to_core_type_dnf(&NormalizedForm { basis, body: CoreBool::True }).unwrap()
}

fn vars_of(n: usize) -> BTreeSet<Var> {
    common::VARS[..n].iter().map(|x| v(x)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    // The normal form agrees with the formula on a grid of small states.
    #[test]
    fn normalization_is_sound(f in arb_formula(2, 2, 3)) {
        let n = normalize(&f);
        let g = n.to_formula();
        prop_assert!(free_vars(&g).is_subset(&n.basis.vars.iter().cloned().collect()));
        let bf = EnumerationBounds::exact_for(&f);
        let grid = EnumerationBounds { max_heap_size: bf.max_heap_size.min(3), location_universe: 4, ..bf };
        let (mut cf, mut cg) = (ModelChecker::new(&f, bf), ModelChecker::new(&g, EnumerationBounds::exact_for(&g)));
        for s in enumerate_states(&vars_of(2), &grid) {
            prop_assert_eq!(cf.check(&s).unwrap(), cg.check(&s).unwrap(), "{} vs {} at {}", f, g, s);
        }
    }

    #[test]
    fn decide_sat_agrees_with_brute_force(f in arb_formula(3, 2, 4)) {
        let d = decide_sat(&f).unwrap();
        let b = brute_sat(&f, &EnumerationBounds::exact_for(&f));
        prop_assert!(b.exact);
        prop_assert_eq!(matches!(d, SatResult::Sat(_)), b.witness.is_some(), "{}", f);
    }

    // Witnesses are re-checked with the independent evaluator.
    #[test]
    fn witnesses_satisfy(f in arb_formula(2, 1, 3).prop_filter("alpha <= 2", |f| compute_basis(f).alpha <= 2)) {
        if let SatResult::Sat(m) = decide_sat(&f).unwrap() {
            let b = EnumerationBounds::exact_for(&f);
            let pool = pool_for(&m.store, &m.heap, b.fresh_locations as usize);
            let mut store = m.store.clone();
            for x in vars_of(2) {
                store.entry(x).or_insert(0);
            }
            prop_assert!(naive_sat(&store, &m.heap, &f, &pool, b.wand_extension_budget as usize), "{} at {}", f, m);
        }
    }

    #[test]
    fn adjunction_coherence(f in arb_formula(2, 1, 2), g in arb_formula(2, 1, 2), h in arb_formula(2, 1, 2)) {
        let star = decide_valid(&f.clone().star(g.clone()).implies(h.clone())).unwrap();
        let wand = decide_valid(&f.implies(g.wand(h))).unwrap();
        prop_assert_eq!(star == ValidResult::Valid, wand == ValidResult::Valid);
    }
}

#[test]
fn types_have_models() {
    for (vars, alpha) in [(&["x"][..], 1), (&["x"][..], 2), (&["x", "y"][..], 2), (&["x", "y"][..], 3)] {
        let types = all_types(vars, alpha);
        assert!(!types.is_empty());
        for t in types {
            assert!(core_type_sat(&t).unwrap());
            let m = core_type_model(&t).unwrap();
            let f = t.to_formula();
            assert!(satisfies(&m, &f, &EnumerationBounds::exact_for(&f)).unwrap(), "{m}");
        }
    }
}

#[test]
fn emp_types_match_abstract_oracle() {
    let basis = CoreBasis::new([v("x")], 1);
    let emp = NormalizedForm {
        basis: basis.clone(),
        body: CoreBool::lit(CoreFormula::SizeGeq(1), false),
    };
    let got: BTreeSet<Vec<CoreLiteral>> = to_core_type_dnf(&emp).unwrap().iter().map(|t| t.literals()).collect();
    let expected: BTreeSet<Vec<CoreLiteral>> = all_types(&["x"], 1)
        .iter()
        .filter(|t| {
            let g = CoreBool::And(vec![CoreBool::from_formula(&t.to_formula()).unwrap(), emp.body.clone()]);
            core_abstract_sat(&g, &basis).unwrap()
        })
        .map(|t| t.literals())
        .collect();
    assert_eq!(got, expected);
    for lits in &got {
        assert!(lits.contains(&CoreLiteral::new(CoreFormula::Alloc(v("x")), false)));
        assert!(lits.contains(&CoreLiteral::new(CoreFormula::PointsTo(v("x"), v("x")), false)));
    }
}

#[test]
fn star_of_sizes_adds_up() {
    let n = eliminate_star(&normalize(&Formula::size(2)), &normalize(&Formula::size(3))).unwrap();
    let g = n.to_formula();
    let b = EnumerationBounds { max_heap_size: 6, location_universe: 6, wand_extension_budget: 0, fresh_locations: 1 };
    for s in enumerate_states(&BTreeSet::new(), &b).filter(|s| s.heap.values().all(|v| *v == 0)) {
        assert_eq!(satisfies(&s, &g, &b).unwrap(), s.heap.len() >= 5, "{s}");
    }
}

#[test]
fn septraction_elimination_examples() {
    let r = eliminate_septraction(&normalize(&Formula::False), &normalize(&p("x |-> y"))).unwrap();
    assert_eq!(decide_sat(&r.to_formula()).unwrap(), SatResult::Unsat);
    let one = normalize(&p("size = 1 /\\ not alloc(x)"));
    let r = eliminate_septraction(&one, &normalize(&Formula::True)).unwrap();
    assert_eq!(decide_valid(&r.to_formula()).unwrap(), ValidResult::Valid);
    let g = p("x |-> y /\\ size = 1");
    let r = eliminate_septraction(&normalize(&Formula::Emp), &normalize(&g)).unwrap();
    assert_eq!(decide_valid(&r.to_formula().iff(g)).unwrap(), ValidResult::Valid);
}

#[test]
fn decision_examples() {
    assert_eq!(decide_sat(&p("alloc(x) * alloc(x)")).unwrap(), SatResult::Unsat);
    match decide_sat(&p("x |-> y /\\ size = 1")).unwrap() {
        SatResult::Sat(m) => assert_eq!(m.heap.len(), 1),
        r => panic!("{r:?}"),
    }
    match decide_sat(&Formula::True).unwrap() {
        SatResult::Sat(m) => assert!(m.heap.is_empty()),
        r => panic!("{r:?}"),
    }
    for f in ["emp -> (alloc(x) /\\ size = 1 -* not size >= 2)", "emp -> (alloc(x) /\\ size = 1 -* size = 1)"] {
        assert_eq!(decide_valid(&p(f)).unwrap(), ValidResult::Valid, "{f}");
    }
    match decide_valid(&p("x |-> y -> alloc(y)")).unwrap() {
        ValidResult::Invalid(m) => {
            let (x, y) = (m.store[&v("x")], m.store[&v("y")]);
            assert_eq!(m.heap.get(&x), Some(&y));
            assert!(!m.heap.contains_key(&y));
        }
        r => panic!("{r:?}"),
    }
    assert_eq!(normalize(&Formula::Emp).to_formula(), p("not size >= 1"));
    let mono = normalize(&p("x |-> y * true")).to_formula();
    assert_eq!(decide_valid(&mono.iff(p("x |-> y"))).unwrap(), ValidResult::Valid);
}

#[test]
fn entailment_examples() {
    assert_eq!(entails(&p("x |-> y /\\ x |-> z"), &p("y = z")).unwrap(), ValidResult::Valid);
    assert_eq!(entails(&p("not size >= 2 * not size >= 3"), &p("not size >= 4")).unwrap(), ValidResult::Valid);
    assert!(matches!(entails(&p("size >= 1"), &p("alloc(x)")).unwrap(), ValidResult::Invalid(_)));
}

#[test]
fn basis_examples() {
    assert_eq!(compute_basis(&Formula::Emp), CoreBasis::new([], 1));
    assert_eq!(compute_basis(&p("size >= 2 * size >= 3")).alpha, 5);
    assert_eq!(compute_basis(&p("alloc(x) -* alloc(y)")), CoreBasis::new([v("x"), v("y")], 2));
}
