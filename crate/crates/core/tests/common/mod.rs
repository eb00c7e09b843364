#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::Rng;
use slq::formula::{v, Formula, Var};

pub const VARS: [&str; 3] = ["x", "y", "z"];

pub fn random_atom(rng: &mut impl Rng, nvars: usize, max_k: u32) -> Formula {
    match rng.random_range(0..8) {
        0 => Formula::Emp,
        1 => Formula::True,
        2 => Formula::False,
        3 => Formula::eq(&var(rng, nvars), &var(rng, nvars)),
        4 | 5 => Formula::pto(&var(rng, nvars), &var(rng, nvars)),
        6 => Formula::alloc(&var(rng, nvars)),
        _ => Formula::size(rng.random_range(0..=max_k)),
    }
}

/// Random formula with exactly `conn` connectives.
pub fn random_formula(rng: &mut impl Rng, nvars: usize, conn: usize, max_k: u32) -> Formula {
    if conn == 0 {
        return random_atom(rng, nvars, max_k);
    }
    let op = rng.random_range(0..10);
    if op == 0 {
        return random_formula(rng, nvars, conn - 1, max_k).not();
    }
    let left = rng.random_range(0..conn);
    let a = random_formula(rng, nvars, left, max_k);
    let b = random_formula(rng, nvars, conn - 1 - left, max_k);
    match op {
        1 => a.and(b),
        2 => a.or(b),
        3 => a.implies(b),
        4 => a.iff(b),
        5 | 6 => a.star(b),
        7 | 8 => a.wand(b),
        _ => a.septraction(b),
    }
}

fn var(rng: &mut impl Rng, nvars: usize) -> slq::formula::Var {
    v(VARS[rng.random_range(0..nvars)])
}

/// Formulas over the first `nvars` of [`VARS`] with size indices up to `max_k`.
pub fn arb_formula(nvars: usize, max_k: u32, depth: u32) -> impl Strategy<Value = Formula> {
    let var = proptest::sample::select(VARS[..nvars].to_vec()).prop_map(v);
    let leaf = prop_oneof![
        Just(Formula::Emp),
        Just(Formula::True),
        Just(Formula::False),
        (var.clone(), var.clone()).prop_map(|(a, b)| Formula::eq(&a, &b)),
        (var.clone(), var.clone()).prop_map(|(a, b)| Formula::pto(&a, &b)),
        var.prop_map(|a| Formula::alloc(&a)),
        (0..=max_k).prop_map(Formula::size),
    ];
    leaf.prop_recursive(depth, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.or(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.implies(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.iff(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.star(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.wand(b)),
            (inner.clone(), inner).prop_map(|(a, b)| a.septraction(b)),
        ]
    })
}

pub type Store = BTreeMap<Var, u32>;
pub type Heap = BTreeMap<u32, u32>;

/// Textbook satisfaction relation, written independently of the library.
/// `-*` and `-o` range over every disjoint heap with at most `budget` cells
/// whose addresses and contents are drawn from `pool`.
pub fn naive_sat(s: &Store, h: &Heap, f: &Formula, pool: &[u32], budget: usize) -> bool {
    use Formula::*;
    let go = |g: &Formula, h: &Heap| naive_sat(s, h, g, pool, budget);
    match f {
        Emp => h.is_empty(),
        True => true,
        False => false,
        Eq(x, y) => s[x] == s[y],
        PointsTo(x, y) => h.get(&s[x]) == Some(&s[y]),
        Alloc(x) => h.contains_key(&s[x]),
        SizeGeq(k) => h.len() >= *k as usize,
        Not(a) => !go(a, h),
        And(a, b) => go(a, h) && go(b, h),
        Or(a, b) => go(a, h) || go(b, h),
        Implies(a, b) => !go(a, h) || go(b, h),
        Iff(a, b) => go(a, h) == go(b, h),
        Star(a, b) => {
            let cells: Vec<(u32, u32)> = h.iter().map(|(k, v)| (*k, *v)).collect();
            (0u64..1 << cells.len()).any(|m| {
                let (l, r): (Vec<_>, Vec<_>) =
                    cells.iter().enumerate().partition(|(i, _)| m >> i & 1 == 1);
                let l: Heap = l.into_iter().map(|(_, c)| *c).collect();
                let r: Heap = r.into_iter().map(|(_, c)| *c).collect();
                go(a, &l) && go(b, &r)
            })
        }
        Wand(a, b) => !extensions(h, pool, budget)
            .iter()
            .any(|e| go(a, e) && !go(b, &union(h, e))),
        Septraction(a, b) => extensions(h, pool, budget)
            .iter()
            .any(|e| go(a, e) && go(b, &union(h, e))),
    }
}

fn union(a: &Heap, b: &Heap) -> Heap {
    a.iter().chain(b).map(|(k, v)| (*k, *v)).collect()
}

fn extensions(h: &Heap, pool: &[u32], budget: usize) -> Vec<Heap> {
    let free: Vec<u32> = pool.iter().copied().filter(|l| !h.contains_key(l)).collect();
    let mut out = vec![Heap::new()];
    fn grow(free: &[u32], pool: &[u32], budget: usize, cur: &mut Heap, out: &mut Vec<Heap>) {
        if cur.len() == budget {
            return;
        }
        for (i, a) in free.iter().enumerate() {
            for b in pool {
                cur.insert(*a, *b);
                out.push(cur.clone());
                grow(&free[i + 1..], pool, budget, cur, out);
                cur.remove(a);
            }
        }
    }
    grow(&free, pool, budget, &mut Heap::new(), &mut out);
    out
}

/// Locations used by the state followed by `fresh` unused ones.
pub fn pool_for(s: &Store, h: &Heap, fresh: usize) -> Vec<u32> {
    let mut used: BTreeSet<u32> = s.values().copied().collect();
    used.extend(h.keys());
    used.extend(h.values());
    let mut next = 0;
    let mut pool: Vec<u32> = used.iter().copied().collect();
    let mut added = 0;
    while added < fresh {
        if !used.contains(&next) {
            pool.push(next);
            added += 1;
        }
        next += 1;
    }
    pool
}

/// Instances of every axiom schema over variables from `{x, y, z}`, size
/// indices up to 3, and a small pool of formulas. Instances rejected by a
/// side condition are skipped.
pub fn axiom_instances() -> Vec<(String, Formula)> {
    use slq::hilbert::{axiom_instance, Binding, Bindings, ParamKind, SCHEMAS};
    let vars: Vec<Var> = VARS.iter().map(|x| v(x)).collect();
    let formulas: Vec<Formula> = ["emp", "alloc(x)", "x = y", "x |-> y", "size >= 1", "not size >= 2", "not emp"]
        .iter()
        .map(|s| slq::parse(s).unwrap())
        .collect();
    let sets: Vec<Vec<Var>> = (0u32..8)
        .map(|m| vars.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, x)| x.clone()).collect())
        .collect();
    let mut out = Vec::new();
    for sc in SCHEMAS {
        let choices: Vec<Vec<Binding>> = sc
            .params
            .iter()
            .map(|(_, k)| match k {
                ParamKind::Variable => vars.iter().cloned().map(Binding::Var).collect(),
                ParamKind::Natural => (0..=3).map(Binding::Nat).collect(),
                ParamKind::VariableSet => sets.iter().cloned().map(Binding::Set).collect(),
                ParamKind::Formula => formulas.iter().cloned().map(Binding::Formula).collect(),
            })
            .collect();
        let mut idx = vec![0usize; choices.len()];
        loop {
            let b: Bindings = sc
                .params
                .iter()
                .zip(&idx)
                .enumerate()
                .map(|(j, ((p, _), i))| (p.to_string(), choices[j][*i].clone()))
                .collect();
            if let Ok(f) = axiom_instance(sc.id, &b) {
                let args: Vec<String> = b.iter().map(|(k, v)| format!("{k}={v}")).collect();
                out.push((format!("{}[{}]", sc.name, args.join(",")), f));
            }
            let mut j = 0;
            loop {
                if j == idx.len() {
                    break;
                }
                idx[j] += 1;
                if idx[j] < choices[j].len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == idx.len() {
                break;
            }
        }
    }
    out
}

/// Random formula with `conn` connectives whose variables come from `vars`.
pub fn random_formula_over(rng: &mut impl Rng, vars: &[Var], conn: usize, max_k: u32) -> Formula {
    if conn == 0 {
        let pick = |rng: &mut dyn rand::RngCore| vars[rng.random_range(0..vars.len())].clone();
        let roll = if vars.is_empty() { rng.random_range(0..4) } else { rng.random_range(0..8) };
        return match roll {
            0 => Formula::Emp,
            1 => Formula::True,
            2 => Formula::False,
            3 => Formula::size(rng.random_range(0..=max_k)),
            4 => Formula::eq(&pick(rng), &pick(rng)),
            5 | 6 => Formula::pto(&pick(rng), &pick(rng)),
            _ => Formula::alloc(&pick(rng)),
        };
    }
    let left = rng.random_range(0..conn);
    let a = random_formula_over(rng, vars, left, max_k);
    let b = random_formula_over(rng, vars, conn - 1 - left, max_k);
    match rng.random_range(0..9) {
        0 => random_formula_over(rng, vars, conn - 1, max_k).not(),
        1 => a.and(b),
        2 => a.or(b),
        3 | 4 => a.implies(b),
        5 => a.iff(b),
        6 => a.star(b),
        7 => a.wand(b),
        _ => a.septraction(b),
    }
}
