//! Concrete heaplet semantics: memory states, the satisfaction relation with
//! bounded quantification for `-*` and `-o`, state enumeration and the two
//! brute-force oracles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{compute_basis, CoreBool, CoreFormula, CoreLiteral};
use crate::formula::{free_vars, CoreBasis, Formula, Var};

pub type Loc = u32;

/// A store together with a finite heap.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MemoryState {
    pub store: BTreeMap<Var, Loc>,
    pub heap: BTreeMap<Loc, Loc>,
}

impl MemoryState {
    pub fn new(
        store: impl IntoIterator<Item = (Var, Loc)>,
        heap: impl IntoIterator<Item = (Loc, Loc)>,
    ) -> MemoryState {
        MemoryState {
            store: store.into_iter().collect(),
            heap: heap.into_iter().collect(),
        }
    }

    pub fn to_record(&self) -> StateRecord {
        StateRecord {
            store: self
                .store
                .iter()
                .map(|(x, l)| (x.name().to_string(), *l))
                .collect(),
            heap: self.heap.iter().map(|(a, b)| (*a, *b)).collect(),
        }
    }
}

impl fmt::Display for MemoryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let store: Vec<String> = self.store.iter().map(|(x, l)| format!("{x}->{l}")).collect();
        let heap: Vec<String> = self.heap.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        write!(f, "store: {} ; heap: {}", store.join(", "), heap.join(", "))
    }
}

/// Machine-readable form of a [`MemoryState`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRecord {
    pub store: BTreeMap<String, Loc>,
    pub heap: Vec<(Loc, Loc)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationBounds {
    pub max_heap_size: u32,
    /// Enumerated locations are drawn from `[0, location_universe)`.
    pub location_universe: u32,
    pub wand_extension_budget: u32,
    pub fresh_locations: u32,
}

impl EnumerationBounds {
    /// Bounds under which [`brute_sat`] and [`satisfies`] are exact for `f`.
    pub fn exact_for(f: &Formula) -> EnumerationBounds {
        let basis = compute_basis(f);
        let n = basis.vars.len() as u32;
        EnumerationBounds {
            max_heap_size: basis.alpha,
            location_universe: n + basis.alpha + 1,
            wand_extension_budget: basis.alpha,
            fresh_locations: basis.alpha + n + 1,
        }
    }

    /// Whether the wand quantifiers are evaluated exactly for `f`.
    pub fn wand_exact_for(&self, f: &Formula) -> bool {
        let e = EnumerationBounds::exact_for(f);
        self.wand_extension_budget >= e.wand_extension_budget
            && self.fresh_locations >= e.fresh_locations
    }

    /// Whether a negative [`brute_sat`] answer is conclusive for `f`.
    pub fn is_exact_for(&self, f: &Formula) -> bool {
        let e = EnumerationBounds::exact_for(f);
        self.wand_exact_for(f)
            && self.max_heap_size >= e.max_heap_size
            && self.location_universe >= e.location_universe
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("store does not define variable `{0}`")]
    MissingVar(Var),
    #[error("state uses more than {MAX_LOCS} locations")]
    PoolExhausted,
    #[error("literal {0} lies outside the basis")]
    OutsideBasis(String),
}

// ---------------------------------------------------------------------------
// Evaluator

const MAX_LOCS: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Heap {
    mask: u64,
    vals: [u8; MAX_LOCS],
}

impl Heap {
    const EMPTY: Heap = Heap {
        mask: 0,
        vals: [0; MAX_LOCS],
    };

    fn has(&self, l: u8) -> bool {
        self.mask & (1 << l) != 0
    }

    fn set(&mut self, l: u8, v: u8) {
        self.mask |= 1 << l;
        self.vals[l as usize] = v;
    }

    fn restrict(&self, mask: u64) -> Heap {
        let mut h = Heap::EMPTY;
        h.mask = mask;
        for l in bits(mask) {
            h.vals[l as usize] = self.vals[l as usize];
        }
        h
    }
}

fn bits(mut m: u64) -> impl Iterator<Item = u8> {
    std::iter::from_fn(move || {
        if m == 0 {
            return None;
        }
        let b = m.trailing_zeros() as u8;
        m &= m - 1;
        Some(b)
    })
}

#[derive(Clone, Copy, Debug)]
enum Node {
    Emp,
    True,
    False,
    Eq(u8, u8),
    Pto(u8, u8),
    Alloc(u8),
    Size(u32),
    Not(u32),
    And(u32, u32),
    Or(u32, u32),
    Imp(u32, u32),
    Iff(u32, u32),
    Star(u32, u32),
    Wand(u32, u32),
    Sept(u32, u32),
}

struct Program {
    nodes: Vec<Node>,
    root: u32,
}

fn compile(f: &Formula, loc: &dyn Fn(&Var) -> Option<u8>) -> Result<Program, SemanticsError> {
    fn go(
        f: &Formula,
        loc: &dyn Fn(&Var) -> Option<u8>,
        nodes: &mut Vec<Node>,
    ) -> Result<u32, SemanticsError> {
        let l = |x: &Var| loc(x).ok_or_else(|| SemanticsError::MissingVar(x.clone()));
        let bin = |a: &Formula, b: &Formula, nodes: &mut Vec<Node>| {
            Ok::<_, SemanticsError>((go(a, loc, nodes)?, go(b, loc, nodes)?))
        };
        let node = match f {
            Formula::Emp => Node::Emp,
            Formula::True => Node::True,
            Formula::False => Node::False,
            Formula::Eq(x, y) => Node::Eq(l(x)?, l(y)?),
            Formula::PointsTo(x, y) => Node::Pto(l(x)?, l(y)?),
            Formula::Alloc(x) => Node::Alloc(l(x)?),
            Formula::SizeGeq(k) => Node::Size(*k),
            Formula::Not(a) => Node::Not(go(a, loc, nodes)?),
            Formula::And(a, b) => {
                let (a, b) = bin(a, b, nodes)?;
                Node::And(a, b)
            }
            Formula::Or(a, b) => {
                let (a, b) = bin(a, b, nodes)?;
                Node::Or(a, b)
            }
            Formula::Implies(a, b) => {
                let (a, b) = bin(a, b, nodes)?;
                Node::Imp(a, b)
            }
            Formula::Iff(a, b) => {
                let (a, b) = bin(a, b, nodes)?;
                Node::Iff(a, b)
            }
            Formula::Star(a, b) => {
                let (a, b) = bin(a, b, nodes)?;
                Node::Star(a, b)
            }
            Formula::Wand(a, b) => {
                let (a, b) = bin(a, b, nodes)?;
                Node::Wand(a, b)
            }
            Formula::Septraction(a, b) => {
                let (a, b) = bin(a, b, nodes)?;
                Node::Sept(a, b)
            }
        };
        nodes.push(node);
        Ok(nodes.len() as u32 - 1)
    }
    let mut nodes = Vec::new();
    let root = go(f, loc, &mut nodes)?;
    Ok(Program { nodes, root })
}

// Locations outside the store's image are observable only through the heap
// size: moving such a cell, changing its contents, or redirecting a pointer
// from one such location to another preserves satisfaction. Heaps are
// therefore kept in a canonical form where those cells sit at the lowest
// free locations and every pointer leaving the store's image targets the
// lowest location outside it.

struct Evaluator<'p> {
    prog: &'p Program,
    store_mask: u64,
    store_locs: Vec<u8>,
    /// Lowest location outside the store's image.
    other: u8,
    budget: u32,
    fresh: u32,
    memo: FxHashMap<(u32, Heap), bool>,
    exhausted: bool,
}

type ExtPred<'a, 'p> = dyn FnMut(&mut Evaluator<'p>, &Heap, &Heap) -> bool + 'a;

fn lowest_outside(mask: u64) -> u8 {
    (!mask).trailing_zeros().min(MAX_LOCS as u32 - 1) as u8
}

impl<'p> Evaluator<'p> {
    fn new(prog: &'p Program, store_mask: u64, b: &EnumerationBounds) -> Evaluator<'p> {
        Evaluator {
            prog,
            store_mask,
            store_locs: bits(store_mask).collect(),
            other: lowest_outside(store_mask),
            budget: b.wand_extension_budget,
            fresh: b.fresh_locations,
            memo: FxHashMap::default(),
            exhausted: false,
        }
    }

    fn canonical(&self, h: &Heap) -> Heap {
        let mut c = Heap::EMPTY;
        for l in bits(h.mask & self.store_mask) {
            let v = h.vals[l as usize];
            c.set(l, if self.store_mask & 1 << v != 0 { v } else { self.other });
        }
        let garbage = (h.mask & !self.store_mask).count_ones();
        self.add_garbage(&mut c, garbage);
        c
    }

    /// Adds `k` cells at the lowest locations outside the store and `h`.
    fn add_garbage(&self, h: &mut Heap, k: u32) -> bool {
        for _ in 0..k {
            let used = h.mask | self.store_mask;
            if used == u64::MAX {
                return false;
            }
            h.set(lowest_outside(used), self.other);
        }
        true
    }

    fn sat(&mut self, n: u32, h: &Heap) -> bool {
        match self.prog.nodes[n as usize] {
            Node::Emp => h.mask == 0,
            Node::True => true,
            Node::False => false,
            Node::Eq(a, b) => a == b,
            Node::Pto(a, b) => h.has(a) && h.vals[a as usize] == b,
            Node::Alloc(a) => h.has(a),
            Node::Size(k) => h.mask.count_ones() >= k,
            Node::Not(a) => !self.sat(a, h),
            Node::And(a, b) => self.sat(a, h) && self.sat(b, h),
            Node::Or(a, b) => self.sat(a, h) || self.sat(b, h),
            Node::Imp(a, b) => !self.sat(a, h) || self.sat(b, h),
            Node::Iff(a, b) => self.sat(a, h) == self.sat(b, h),
            Node::Star(a, b) => self.memoized(n, h, |ev, h| {
                let m = h.mask;
                let mut sub = m;
                loop {
                    if ev.sat(a, &h.restrict(sub)) && ev.sat(b, &h.restrict(m ^ sub)) {
                        return true;
                    }
                    if sub == 0 {
                        return false;
                    }
                    sub = (sub - 1) & m;
                }
            }),
            Node::Wand(a, b) => self.memoized(n, h, |ev, h| {
                !ev.exists_extension(h, &mut |ev, ext, comb| ev.sat(a, ext) && !ev.sat(b, comb))
            }),
            Node::Sept(a, b) => self.memoized(n, h, |ev, h| {
                ev.exists_extension(h, &mut |ev, ext, comb| ev.sat(a, ext) && ev.sat(b, comb))
            }),
        }
    }

    fn memoized(&mut self, n: u32, h: &Heap, run: impl FnOnce(&mut Self, &Heap) -> bool) -> bool {
        let h = self.canonical(h);
        if let Some(&r) = self.memo.get(&(n, h)) {
            return r;
        }
        let r = run(self, &h);
        self.memo.insert((n, h), r);
        r
    }

    /// Searches the disjoint extensions of `h` with at most `budget` cells,
    /// of which at most `fresh` lie outside the store, for one satisfying
    /// `pred(extension, h + extension)`.
    fn exists_extension(&mut self, h: &Heap, pred: &mut ExtPred<'_, 'p>) -> bool {
        let named: Vec<u8> = bits(self.store_mask & !h.mask).collect();
        self.ext_step(&named, 0, pred, &Heap::EMPTY, h)
    }

    fn ext_step(
        &mut self,
        named: &[u8],
        pos: usize,
        pred: &mut ExtPred<'_, 'p>,
        ext: &Heap,
        comb: &Heap,
    ) -> bool {
        if pos == named.len() {
            let room = self.budget.saturating_sub(ext.mask.count_ones()).min(self.fresh);
            for k in 0..=room {
                let (mut e, mut c) = (*ext, *comb);
                // Garbage goes where neither heap has cells.
                let mut placed = true;
                for _ in 0..k {
                    let used = c.mask | self.store_mask;
                    if used == u64::MAX {
                        placed = false;
                        break;
                    }
                    let l = lowest_outside(used);
                    e.set(l, self.other);
                    c.set(l, self.other);
                }
                if !placed {
                    self.exhausted = true;
                    return false;
                }
                if pred(self, &e, &c) {
                    return true;
                }
            }
            return false;
        }
        if self.ext_step(named, pos + 1, pred, ext, comb) {
            return true;
        }
        if ext.mask.count_ones() >= self.budget {
            return false;
        }
        let addr = named[pos];
        let targets: Vec<u8> = self.store_locs.iter().copied().chain([self.other]).collect();
        for t in targets {
            let (mut e, mut c) = (*ext, *comb);
            e.set(addr, t);
            c.set(addr, t);
            if self.ext_step(named, pos + 1, pred, &e, &c) {
                return true;
            }
        }
        false
    }
}

/// Reusable satisfaction checker for a single formula.
///
/// Results for heaps seen under the same store are cached, which makes
/// checking many states with a shared store much cheaper.
pub struct ModelChecker {
    formula: Formula,
    bounds: EnumerationBounds,
    cache: Option<(BTreeMap<Var, Loc>, CachedEval)>,
}

struct CachedEval {
    prog: Program,
    memo: FxHashMap<(u32, Heap), bool>,
    store_mask: u64,
}

impl ModelChecker {
    pub fn new(f: &Formula, bounds: EnumerationBounds) -> ModelChecker {
        ModelChecker {
            formula: f.clone(),
            bounds,
            cache: None,
        }
    }

    pub fn check(&mut self, s: &MemoryState) -> Result<bool, SemanticsError> {
        let needed = free_vars(&self.formula);
        if let Some(x) = needed.iter().find(|x| !s.store.contains_key(*x)) {
            return Err(SemanticsError::MissingVar(x.clone()));
        }
        let max_loc = s
            .store
            .values()
            .chain(s.heap.keys())
            .chain(s.heap.values())
            .copied()
            .max()
            .unwrap_or(0) as usize;
        if max_loc + 1 + self.bounds.fresh_locations as usize > MAX_LOCS {
            return check_compacted(&self.formula, s, &self.bounds);
        }
        let store: BTreeMap<Var, Loc> = s
            .store
            .iter()
            .filter(|(x, _)| needed.contains(*x))
            .map(|(x, l)| (x.clone(), *l))
            .collect();
        if self.cache.as_ref().map(|(st, _)| st) != Some(&store) {
            let prog = compile(&self.formula, &|x| store.get(x).map(|l| *l as u8))?;
            let store_mask = store.values().fold(0u64, |m, l| m | 1 << l);
            self.cache = Some((
                store.clone(),
                CachedEval {
                    prog,
                    memo: FxHashMap::default(),
                    store_mask,
                },
            ));
        }
        let (_, cached) = self.cache.as_mut().expect("cache filled above");
        let mut h = Heap::EMPTY;
        for (a, b) in &s.heap {
            h.set(*a as u8, *b as u8);
        }
        let mut ev = Evaluator::new(&cached.prog, cached.store_mask, &self.bounds);
        ev.memo = std::mem::take(&mut cached.memo);
        let r = ev.sat(cached.prog.root, &h);
        let exhausted = ev.exhausted;
        let mut memo = std::mem::take(&mut ev.memo);
        if memo.len() > 4_000_000 {
            memo.clear();
        }
        cached.memo = memo;
        if exhausted {
            return Err(SemanticsError::PoolExhausted);
        }
        Ok(r)
    }
}

// Renames locations to 0..n first; satisfaction is invariant under renaming.
fn check_compacted(
    f: &Formula,
    s: &MemoryState,
    b: &EnumerationBounds,
) -> Result<bool, SemanticsError> {
    let locs: BTreeSet<Loc> = s
        .store
        .values()
        .chain(s.heap.keys())
        .chain(s.heap.values())
        .copied()
        .collect();
    if locs.len() + b.fresh_locations as usize > MAX_LOCS {
        return Err(SemanticsError::PoolExhausted);
    }
    let idx: BTreeMap<Loc, Loc> = locs.iter().enumerate().map(|(i, l)| (*l, i as Loc)).collect();
    let renamed = MemoryState {
        store: s.store.iter().map(|(x, l)| (x.clone(), idx[l])).collect(),
        heap: s.heap.iter().map(|(a, v)| (idx[a], idx[v])).collect(),
    };
    ModelChecker::new(f, *b).check(&renamed)
}

/// The satisfaction relation `s |= f`.
///
/// `-*` and `-o` quantify over disjoint extensions of at most
/// `wand_extension_budget` cells, at most `fresh_locations` of them at
/// addresses outside the store's image.
pub fn satisfies(
    s: &MemoryState,
    f: &Formula,
    b: &EnumerationBounds,
) -> Result<bool, SemanticsError> {
    ModelChecker::new(f, *b).check(s)
}

// ---------------------------------------------------------------------------
// Enumeration

/// Every state over `vars` with locations in `[0, location_universe)` and at
/// most `max_heap_size` cells. Stores vary slowest; heaps are ordered by size,
/// then domain, then contents.
pub fn enumerate_states(
    vars: &BTreeSet<Var>,
    b: &EnumerationBounds,
) -> impl Iterator<Item = MemoryState> {
    let vars: Vec<Var> = vars.iter().cloned().collect();
    let u = b.location_universe;
    let max = b.max_heap_size.min(u);
    let stores = Odometer::new(vars.len(), u);
    stores.flat_map(move |vals| {
        let store: BTreeMap<Var, Loc> = vars.iter().cloned().zip(vals).collect();
        (0..=max).flat_map(move |k| {
            let store = store.clone();
            Combinations::new(u, k).flat_map(move |dom| {
                let store = store.clone();
                Odometer::new(dom.len(), u).map(move |vals| MemoryState {
                    store: store.clone(),
                    heap: dom.iter().copied().zip(vals).collect(),
                })
            })
        })
    })
}

/// All vectors in `[0, base)^len`, lexicographically.
struct Odometer {
    cur: Option<Vec<Loc>>,
    base: Loc,
}

impl Odometer {
    fn new(len: usize, base: Loc) -> Odometer {
        Odometer {
            cur: (base > 0 || len == 0).then(|| vec![0; len]),
            base,
        }
    }
}

impl Iterator for Odometer {
    type Item = Vec<Loc>;
    fn next(&mut self) -> Option<Vec<Loc>> {
        let out = self.cur.clone()?;
        let cur = self.cur.as_mut().expect("checked above");
        let mut i = cur.len();
        loop {
            if i == 0 {
                self.cur = None;
                break;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < self.base {
                break;
            }
            cur[i] = 0;
        }
        Some(out)
    }
}

/// `k`-subsets of `[0, n)` in lexicographic order.
struct Combinations {
    cur: Option<Vec<Loc>>,
    n: Loc,
}

impl Combinations {
    fn new(n: Loc, k: Loc) -> Combinations {
        Combinations {
            cur: (k <= n).then(|| (0..k).collect()),
            n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<Loc>;
    fn next(&mut self) -> Option<Vec<Loc>> {
        let out = self.cur.clone()?;
        let cur = self.cur.as_mut().expect("checked above");
        let k = cur.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.cur = None;
                break;
            }
            i -= 1;
            if cur[i] < self.n - (k - i) as Loc {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

// ---------------------------------------------------------------------------
// Brute-force satisfiability

/// Outcome of [`brute_sat`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BruteResult {
    pub witness: Option<MemoryState>,
    /// True when the bounds are large enough for a negative answer to be conclusive.
    pub exact: bool,
}

/// Searches for a state satisfying `f` within the bounds.
///
/// Stores use locations in first-occurrence order. A heap is determined up
/// to satisfaction by its cells at store locations, whether each of those
/// points into the store or elsewhere, and how many cells lie outside the
/// store, so only one heap per such description is visited. Every state
/// within the bounds agrees with a visited one that has no more cells and
/// no more locations.
pub fn brute_sat(f: &Formula, b: &EnumerationBounds) -> BruteResult {
    let exact = b.is_exact_for(f);
    let vars: Vec<Var> = free_vars(f).into_iter().collect();
    let u = b.location_universe.min(MAX_LOCS as u32 - b.fresh_locations.min(MAX_LOCS as u32));
    let mut witness = None;
    for_each_store(vars.len(), u, &mut |labels| {
        let store: BTreeMap<Var, Loc> = vars.iter().cloned().zip(labels.iter().copied()).collect();
        let prog = match compile(f, &|x| store.get(x).map(|l| *l as u8)) {
            Ok(p) => p,
            Err(_) => return true,
        };
        let distinct = labels.iter().copied().max().map_or(0, |m| m + 1);
        let store_mask = labels.iter().fold(0u64, |m, l| m | 1 << l);
        let mut ev = Evaluator::new(&prog, store_mask, b);
        let mut gen = HeapGen {
            distinct: distinct as u8,
            universe: u,
            max: b.max_heap_size,
            found: None,
        };
        gen.step(&mut ev, prog.root, 0, &Heap::EMPTY);
        if let Some(h) = gen.found {
            witness = Some(MemoryState {
                store: store.clone(),
                heap: bits(h.mask)
                    .map(|l| (Loc::from(l), Loc::from(h.vals[l as usize])))
                    .collect(),
            });
            return false;
        }
        true
    });
    BruteResult { witness, exact }
}

/// Restricted-growth assignments of `n` variables to locations below `u`.
fn for_each_store(n: usize, u: Loc, visit: &mut dyn FnMut(&[Loc]) -> bool) {
    fn go(cur: &mut Vec<Loc>, n: usize, u: Loc, visit: &mut dyn FnMut(&[Loc]) -> bool) -> bool {
        if cur.len() == n {
            return visit(cur);
        }
        let next = cur.iter().copied().max().map_or(0, |m| m + 1);
        for l in 0..=next.min(u.saturating_sub(1)) {
            cur.push(l);
            let go_on = go(cur, n, u, visit);
            cur.pop();
            if !go_on {
                return false;
            }
        }
        true
    }
    if n > 0 && u == 0 {
        return;
    }
    go(&mut Vec::new(), n, u, visit);
}

/// Heaps over a store occupying locations `0..distinct`: each store
/// location is free or points at a store location or at `distinct`, and
/// any remaining cells sit at `distinct, distinct + 1, ...`.
struct HeapGen {
    distinct: u8,
    universe: Loc,
    max: u32,
    found: Option<Heap>,
}

impl HeapGen {
    fn step(&mut self, ev: &mut Evaluator<'_>, root: u32, pos: u8, h: &Heap) -> bool {
        if pos == self.distinct {
            let named = h.mask.count_ones();
            let slots = self.universe.saturating_sub(Loc::from(self.distinct));
            let extra = self.max.saturating_sub(named).min(slots);
            let mut g = *h;
            for k in 0..=extra {
                if k > 0 {
                    g.set(self.distinct + (k - 1) as u8, self.distinct);
                }
                if ev.sat(root, &g) {
                    self.found = Some(g);
                    return true;
                }
            }
            return false;
        }
        if self.step(ev, root, pos + 1, h) {
            return true;
        }
        if h.mask.count_ones() >= self.max {
            return false;
        }
        let top = if Loc::from(self.distinct) < self.universe {
            self.distinct
        } else {
            self.distinct - 1
        };
        for t in 0..=top {
            let mut h2 = *h;
            h2.set(pos, t);
            if self.step(ev, root, pos + 1, &h2) {
                return true;
            }
        }
        false
    }
}

// ---------------------------------------------------------------------------
// Abstract core oracle

/// Decides a Boolean combination of core literals by trying every abstract
/// heap: an equivalence on `X`, a partial successor map on its classes, a set
/// of allocated classes containing the successor map's domain, and a heap
/// size `N` in `[0, alpha + |X|]` with `N >= |allocated|`.
pub fn core_abstract_sat(g: &CoreBool, basis: &CoreBasis) -> Result<bool, SemanticsError> {
    check_in_basis(g, basis)?;
    let n = basis.vars.len();
    let pos = |x: &Var| basis.vars.iter().position(|y| y == x).expect("checked");
    let mut found = false;
    for_each_partition(n, &mut |class: &[usize], classes: usize| {
        // alloc[c] and succ[c]: c allocated, and its successor class if any.
        let mut alloc = vec![false; classes];
        let mut succ: Vec<Option<usize>> = vec![None; classes];
        loop {
            let d = alloc.iter().filter(|a| **a).count() as u32;
            for size in d..=basis.alpha + n as u32 {
                let holds = |lit: &CoreLiteral| {
                    let v = match &lit.atom {
                        CoreFormula::Eq(x, y) => class[pos(x)] == class[pos(y)],
                        CoreFormula::Alloc(x) => alloc[class[pos(x)]],
                        CoreFormula::PointsTo(x, y) => succ[class[pos(x)]] == Some(class[pos(y)]),
                        CoreFormula::SizeGeq(k) => size >= *k,
                    };
                    v == lit.positive
                };
                if g.eval(&holds) {
                    found = true;
                    return false;
                }
            }
            if !next_abstract_heap(&mut alloc, &mut succ, classes) {
                return true;
            }
        }
    });
    Ok(found)
}

// Odometer over (alloc, succ) per class: unallocated, allocated with no
// variable successor, or allocated pointing to class j.
fn next_abstract_heap(alloc: &mut [bool], succ: &mut [Option<usize>], classes: usize) -> bool {
    for c in 0..classes {
        match (alloc[c], succ[c]) {
            (false, _) => {
                alloc[c] = true;
                return true;
            }
            (true, None) if classes > 0 => {
                succ[c] = Some(0);
                return true;
            }
            (true, Some(j)) if j + 1 < classes => {
                succ[c] = Some(j + 1);
                return true;
            }
            _ => {
                alloc[c] = false;
                succ[c] = None;
            }
        }
    }
    false
}

fn for_each_partition(n: usize, visit: &mut dyn FnMut(&[usize], usize) -> bool) {
    fn go(cur: &mut Vec<usize>, n: usize, visit: &mut dyn FnMut(&[usize], usize) -> bool) -> bool {
        let classes = cur.iter().copied().max().map_or(0, |m| m + 1);
        if cur.len() == n {
            return visit(cur, classes);
        }
        for c in 0..=classes {
            cur.push(c);
            let go_on = go(cur, n, visit);
            cur.pop();
            if !go_on {
                return false;
            }
        }
        true
    }
    go(&mut Vec::new(), n, visit);
}

fn check_in_basis(g: &CoreBool, basis: &CoreBasis) -> Result<(), SemanticsError> {
    let mut bad = None;
    g.for_each_literal(&mut |lit: &CoreLiteral| {
        if bad.is_none() && !lit.atom.in_basis(basis) {
            bad = Some(lit.to_string());
        }
    });
    match bad {
        Some(s) => Err(SemanticsError::OutsideBasis(s)),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, v};

    fn bounds(max_heap: u32, universe: u32, budget: u32, fresh: u32) -> EnumerationBounds {
        EnumerationBounds {
            max_heap_size: max_heap,
            location_universe: universe,
            wand_extension_budget: budget,
            fresh_locations: fresh,
        }
    }

    fn vars(names: &[&str]) -> BTreeSet<Var> {
        names.iter().map(|n| v(n)).collect()
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_states(&vars(&["x"]), &bounds(0, 1, 0, 1)).count(), 1);
        assert_eq!(enumerate_states(&vars(&["x"]), &bounds(0, 2, 0, 1)).count(), 2);
        assert_eq!(enumerate_states(&vars(&[]), &bounds(1, 2, 0, 1)).count(), 5);
        // 3 stores times (1 + 3*3 + 3*9 + 27) heaps.
        assert_eq!(enumerate_states(&vars(&["x"]), &bounds(3, 3, 0, 1)).count(), 3 * 64);
    }

    #[test]
    fn basic_clauses() {
        let b = bounds(2, 3, 2, 3);
        let s = MemoryState::new([(v("x"), 0)], []);
        assert!(satisfies(&s, &Formula::Emp, &b).unwrap());
        let s = MemoryState::new([(v("x"), 0), (v("y"), 1)], [(0, 1)]);
        let f = parse("x |-> y /\\ size >= 1 /\\ not size >= 2").unwrap();
        assert!(satisfies(&s, &f, &b).unwrap());
        assert!(!satisfies(&s, &parse("y |-> x").unwrap(), &b).unwrap());
        assert!(!satisfies(&s, &parse("alloc(y)").unwrap(), &b).unwrap());
    }

    #[test]
    fn septraction_finds_fresh_cell() {
        let s = MemoryState::new([(v("x"), 0)], []);
        let f = parse("(alloc(x) /\\ size = 1) -o true").unwrap();
        assert!(satisfies(&s, &f, &bounds(0, 1, 1, 2)).unwrap());
        let s = MemoryState::new([(v("x"), 0)], [(0, 0)]);
        assert!(!satisfies(&s, &f, &bounds(0, 1, 1, 2)).unwrap());
    }

    #[test]
    fn wand_with_false_is_alloc() {
        let b = bounds(2, 3, 2, 4);
        let f = parse("x |-> x -* false").unwrap();
        for s in enumerate_states(&vars(&["x"]), &b) {
            let alloc = s.heap.contains_key(&s.store[&v("x")]);
            assert_eq!(satisfies(&s, &f, &b).unwrap(), alloc, "{s}");
        }
    }

    #[test]
    fn missing_variable_is_an_error() {
        let s = MemoryState::default();
        let e = satisfies(&s, &parse("alloc(x)").unwrap(), &bounds(0, 1, 0, 1)).unwrap_err();
        assert_eq!(e, SemanticsError::MissingVar(v("x")));
    }

    #[test]
    fn large_locations_are_renamed() {
        let s = MemoryState::new([(v("x"), 1000), (v("y"), 7)], [(1000, 7)]);
        let b = bounds(1, 3, 1, 3);
        assert!(satisfies(&s, &parse("x |-> y /\\ size = 1").unwrap(), &b).unwrap());
        assert!(satisfies(&s, &parse("not (y |-> x -* false)").unwrap(), &b).unwrap());
    }

    #[test]
    fn brute_sat_examples() {
        let f = parse("alloc(x) /\\ not alloc(x)").unwrap();
        assert_eq!(brute_sat(&f, &EnumerationBounds::exact_for(&f)).witness, None);
        let f = parse("x |-> y").unwrap();
        let r = brute_sat(&f, &EnumerationBounds::exact_for(&f));
        let w = r.witness.unwrap();
        assert!(r.exact);
        assert!(satisfies(&w, &f, &EnumerationBounds::exact_for(&f)).unwrap());
        let f = parse("alloc(x) * alloc(x)").unwrap();
        assert_eq!(brute_sat(&f, &bounds(4, 6, 2, 4)).witness, None);
    }

    #[test]
    fn display_and_record() {
        let s = MemoryState::new([(v("x"), 0), (v("y"), 1)], [(0, 1), (3, 3)]);
        assert_eq!(s.to_string(), "store: x->0, y->1 ; heap: 0->1, 3->3");
        let json = serde_json::to_string(&s.to_record()).unwrap();
        assert_eq!(json, r#"{"store":{"x":0,"y":1},"heap":[[0,1],[3,3]]}"#);
    }

    #[test]
    fn abstract_oracle_examples() {
        let g = |s: &str| CoreBool::from_formula(&parse(s).unwrap()).unwrap();
        let b2 = CoreBasis::new([v("x"), v("y")], 2);
        assert!(!core_abstract_sat(&g("alloc(x) /\\ alloc(y) /\\ x != y /\\ not size >= 2"), &b2).unwrap());
        assert!(core_abstract_sat(&g("size >= 0"), &CoreBasis::new([], 1)).unwrap());
        let b3 = CoreBasis::new([v("x"), v("y"), v("z")], 3);
        assert!(!core_abstract_sat(&g("x |-> y /\\ x |-> z /\\ y != z"), &b3).unwrap());
        assert!(core_abstract_sat(&g("alloc(x)"), &CoreBasis::new([], 1)).is_err());
        assert!(core_abstract_sat(&g("size >= 3"), &b2).is_err());
    }
}
