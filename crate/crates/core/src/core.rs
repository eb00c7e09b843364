//! Core formulae, core types, and the translation of arbitrary formulae into
//! Boolean combinations of core formulae.
//!
//! Internally a satisfiable core type over `(X, alpha)` is kept as a [`Shape`]:
//! a partition of `X`, which classes are allocated, where each allocated class
//! points (another class or somewhere else), and the largest `k <= alpha` with
//! `size >= k`. Sets of types are bitsets over the enumerated shapes of a basis.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{free_vars, print, CoreBasis, Formula, Var};
use crate::semantics::{satisfies, EnumerationBounds, MemoryState, SemanticsError};

// ---------------------------------------------------------------------------
// Public data types

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoreFormula {
    Eq(Var, Var),
    Alloc(Var),
    PointsTo(Var, Var),
    SizeGeq(u32),
}

impl CoreFormula {
    pub fn in_basis(&self, b: &CoreBasis) -> bool {
        let has = |x: &Var| b.vars.contains(x);
        match self {
            CoreFormula::Eq(x, y) | CoreFormula::PointsTo(x, y) => has(x) && has(y),
            CoreFormula::Alloc(x) => has(x),
            CoreFormula::SizeGeq(k) => *k <= b.alpha,
        }
    }

    pub fn to_formula(&self) -> Formula {
        match self {
            CoreFormula::Eq(x, y) => Formula::eq(x, y),
            CoreFormula::Alloc(x) => Formula::alloc(x),
            CoreFormula::PointsTo(x, y) => Formula::pto(x, y),
            CoreFormula::SizeGeq(k) => Formula::size(*k),
        }
    }

    /// Every core formula of `Core(X, alpha)`, in canonical order.
    pub fn all_in(b: &CoreBasis) -> Vec<CoreFormula> {
        let mut out = Vec::new();
        for x in &b.vars {
            for y in &b.vars {
                out.push(CoreFormula::Eq(x.clone(), y.clone()));
            }
        }
        for x in &b.vars {
            out.push(CoreFormula::Alloc(x.clone()));
        }
        for x in &b.vars {
            for y in &b.vars {
                out.push(CoreFormula::PointsTo(x.clone(), y.clone()));
            }
        }
        out.extend((0..=b.alpha).map(CoreFormula::SizeGeq));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoreLiteral {
    pub atom: CoreFormula,
    pub positive: bool,
}

impl CoreLiteral {
    pub fn new(atom: CoreFormula, positive: bool) -> CoreLiteral {
        CoreLiteral { atom, positive }
    }

    pub fn to_formula(&self) -> Formula {
        let f = self.atom.to_formula();
        if self.positive {
            f
        } else {
            f.not()
        }
    }

    /// Position in the canonical literal order: `=`, `!=`, `alloc`, `not
    /// alloc`, `|->`, `not |->`, positive sizes, negative sizes.
    fn group(&self) -> u8 {
        let base = match self.atom {
            CoreFormula::Eq(..) => 0,
            CoreFormula::Alloc(_) => 2,
            CoreFormula::PointsTo(..) => 4,
            CoreFormula::SizeGeq(_) => 6,
        };
        base + u8::from(!self.positive)
    }

    pub fn to_record(&self) -> LiteralRecord {
        let (kind, args, k) = match &self.atom {
            CoreFormula::Eq(x, y) => ("eq", vec![x.name().into(), y.name().into()], None),
            CoreFormula::Alloc(x) => ("alloc", vec![x.name().into()], None),
            CoreFormula::PointsTo(x, y) => ("points_to", vec![x.name().into(), y.name().into()], None),
            CoreFormula::SizeGeq(k) => ("size_geq", vec![], Some(*k)),
        };
        LiteralRecord {
            kind: kind.into(),
            args,
            k,
            positive: self.positive,
        }
    }
}

impl fmt::Display for CoreLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(&self.to_formula()))
    }
}

/// Machine-readable literal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteralRecord {
    pub kind: String,
    pub args: Vec<String>,
    pub k: Option<u32>,
    pub positive: bool,
}

/// Sorts literals canonically and drops duplicates.
pub fn canonical_order(lits: &mut Vec<CoreLiteral>) {
    lits.sort_by(|a, b| (a.group(), &a.atom).cmp(&(b.group(), &b.atom)));
    lits.dedup();
}

/// Boolean combination of core literals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CoreBool {
    True,
    False,
    Lit(CoreLiteral),
    Not(Box<CoreBool>),
    And(Vec<CoreBool>),
    Or(Vec<CoreBool>),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("basis violation: {0}")]
    Basis(String),
    #[error("core type is unsatisfiable")]
    Unsatisfiable,
    #[error("literal {0} lies outside the basis")]
    OutsideBasis(String),
    #[error("`{0}` is not a Boolean combination of core formulae")]
    NotCore(String),
    #[error("internal error: witness {0} does not satisfy the formula")]
    WitnessRejected(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

impl CoreBool {
    pub fn lit(atom: CoreFormula, positive: bool) -> CoreBool {
        CoreBool::Lit(CoreLiteral::new(atom, positive))
    }

    pub fn eval(&self, holds: &dyn Fn(&CoreLiteral) -> bool) -> bool {
        match self {
            CoreBool::True => true,
            CoreBool::False => false,
            CoreBool::Lit(l) => holds(l),
            CoreBool::Not(a) => !a.eval(holds),
            CoreBool::And(xs) => xs.iter().all(|x| x.eval(holds)),
            CoreBool::Or(xs) => xs.iter().any(|x| x.eval(holds)),
        }
    }

    pub fn for_each_literal(&self, visit: &mut dyn FnMut(&CoreLiteral)) {
        match self {
            CoreBool::True | CoreBool::False => {}
            CoreBool::Lit(l) => visit(l),
            CoreBool::Not(a) => a.for_each_literal(visit),
            CoreBool::And(xs) | CoreBool::Or(xs) => {
                xs.iter().for_each(|x| x.for_each_literal(visit))
            }
        }
    }

    /// Rendering as an ordinary formula; n-ary nodes nest to the left.
    pub fn to_formula(&self) -> Formula {
        match self {
            CoreBool::True => Formula::True,
            CoreBool::False => Formula::False,
            CoreBool::Lit(l) => l.to_formula(),
            CoreBool::Not(a) => a.to_formula().not(),
            CoreBool::And(xs) => Formula::conj(xs.iter().map(CoreBool::to_formula)),
            CoreBool::Or(xs) => Formula::disj(xs.iter().map(CoreBool::to_formula)),
        }
    }

    /// Reads a formula built only from core atoms, `true`, `false` and the
    /// classical connectives.
    pub fn from_formula(f: &Formula) -> Result<CoreBool, CoreError> {
        let bin = |a: &Formula, b: &Formula| -> Result<_, CoreError> { Ok((CoreBool::from_formula(a)?, CoreBool::from_formula(b)?)) };
        Ok(match f {
            Formula::True => CoreBool::True,
            Formula::False => CoreBool::False,
            Formula::Eq(x, y) => CoreBool::lit(CoreFormula::Eq(x.clone(), y.clone()), true),
            Formula::Alloc(x) => CoreBool::lit(CoreFormula::Alloc(x.clone()), true),
            Formula::PointsTo(x, y) => {
                CoreBool::lit(CoreFormula::PointsTo(x.clone(), y.clone()), true)
            }
            Formula::SizeGeq(k) => CoreBool::lit(CoreFormula::SizeGeq(*k), true),
            Formula::Not(a) => match CoreBool::from_formula(a)? {
                CoreBool::Lit(l) => CoreBool::Lit(CoreLiteral::new(l.atom, !l.positive)),
                g => CoreBool::Not(Box::new(g)),
            },
            Formula::And(a, b) => {
                let (a, b) = bin(a, b)?;
                CoreBool::And(vec![a, b])
            }
            Formula::Or(a, b) => {
                let (a, b) = bin(a, b)?;
                CoreBool::Or(vec![a, b])
            }
            Formula::Implies(a, b) => {
                let (a, b) = bin(a, b)?;
                CoreBool::Or(vec![CoreBool::Not(Box::new(a)), b])
            }
            Formula::Iff(a, b) => {
                let (a, b) = bin(a, b)?;
                let (na, nb) = (CoreBool::Not(Box::new(a.clone())), CoreBool::Not(Box::new(b.clone())));
                CoreBool::Or(vec![CoreBool::And(vec![a, b]), CoreBool::And(vec![na, nb])])
            }
            _ => return Err(CoreError::NotCore(print(f))),
        })
    }

    fn mentioned(&self) -> (BTreeSet<Var>, u32) {
        let mut vars = BTreeSet::new();
        let mut k = 0;
        self.for_each_literal(&mut |l| match &l.atom {
            CoreFormula::Eq(x, y) | CoreFormula::PointsTo(x, y) => {
                vars.insert(x.clone());
                vars.insert(y.clone());
            }
            CoreFormula::Alloc(x) => {
                vars.insert(x.clone());
            }
            CoreFormula::SizeGeq(j) => k = k.max(*j),
        });
        (vars, k)
    }

    /// The smallest padded basis containing every literal.
    pub fn basis(&self) -> CoreBasis {
        let (vars, k) = self.mentioned();
        CoreBasis::new(vars, k).padded()
    }
}

/// A complete polarity assignment over `Core(X, alpha)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoreType {
    pub basis: CoreBasis,
    pub polarity: BTreeMap<CoreFormula, bool>,
}

impl CoreType {
    /// Largest `k` with `size >= k` positive.
    pub fn maxsize(&self) -> u32 {
        self.polarity
            .iter()
            .filter_map(|(a, p)| match a {
                CoreFormula::SizeGeq(k) if *p => Some(*k),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn holds(&self, atom: &CoreFormula) -> Option<bool> {
        self.polarity.get(atom).copied()
    }

    /// All literals of the type, canonically ordered.
    pub fn literals(&self) -> Vec<CoreLiteral> {
        let mut out: Vec<CoreLiteral> = self
            .polarity
            .iter()
            .map(|(a, p)| CoreLiteral::new(a.clone(), *p))
            .collect();
        canonical_order(&mut out);
        out
    }

    pub fn to_formula(&self) -> Formula {
        Formula::conj(self.literals().iter().map(CoreLiteral::to_formula))
    }

    fn check_total(&self) -> Result<(), CoreError> {
        if self.basis.alpha < 1 {
            return Err(CoreError::Basis("alpha must be at least 1".into()));
        }
        let all = CoreFormula::all_in(&self.basis);
        if let Some(a) = all.iter().find(|a| !self.polarity.contains_key(*a)) {
            return Err(CoreError::Basis(format!("no polarity for {}", print(&a.to_formula()))));
        }
        if self.polarity.len() != all.len() {
            return Err(CoreError::Basis("polarity mentions formulae outside the basis".into()));
        }
        Ok(())
    }
}

/// The target of normalization: a Boolean combination over a core basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizedForm {
    pub basis: CoreBasis,
    pub body: CoreBool,
}

impl NormalizedForm {
    pub fn to_formula(&self) -> Formula {
        self.body.to_formula()
    }

    /// The body as a list of cubes when it is in disjunctive normal form.
    pub fn cubes(&self) -> Option<Vec<Vec<CoreLiteral>>> {
        fn cube(g: &CoreBool) -> Option<Vec<CoreLiteral>> {
            match g {
                CoreBool::True => Some(vec![]),
                CoreBool::Lit(l) => Some(vec![l.clone()]),
                CoreBool::And(xs) => xs
                    .iter()
                    .map(|x| match x {
                        CoreBool::Lit(l) => Some(l.clone()),
                        _ => None,
                    })
                    .collect(),
                _ => None,
            }
        }
        match &self.body {
            CoreBool::False => Some(vec![]),
            CoreBool::Or(xs) => xs.iter().map(cube).collect(),
            g => cube(g).map(|c| vec![c]),
        }
    }
}

// ---------------------------------------------------------------------------
// Basis computation

/// Garbage threshold: how many cells outside the variables' locations `f` can
/// count before adding more makes no difference.
fn garbage_threshold(f: &Formula) -> u32 {
    use Formula::*;
    match f {
        Emp => 1,
        SizeGeq(k) => *k,
        True | False | Eq(..) | PointsTo(..) | Alloc(_) => 0,
        Not(a) => garbage_threshold(a),
        Star(a, b) => garbage_threshold(a) + garbage_threshold(b),
        And(a, b) | Or(a, b) | Implies(a, b) | Iff(a, b) | Wand(a, b) | Septraction(a, b) => {
            garbage_threshold(a).max(garbage_threshold(b))
        }
    }
}

/// Variables of `f` and a size bound `alpha` such that `f` has a model with
/// at most `alpha` cells whenever it is satisfiable.
///
/// `alpha` is the garbage threshold (sizes summed under `*`, maximized
/// elsewhere, `emp` counting one) plus the number of variables.
pub fn compute_basis(f: &Formula) -> CoreBasis {
    let vars = free_vars(f);
    let alpha = (garbage_threshold(f) + vars.len() as u32).max(1);
    CoreBasis::new(vars, alpha)
}

// ---------------------------------------------------------------------------
// Shapes and universes

/// Index-based core atom, relative to the variable order of a basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum IAtom {
    Eq(u8, u8),
    Alloc(u8),
    Pto(u8, u8),
    Size(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct ILit {
    atom: IAtom,
    pos: bool,
}

fn ilit(atom: IAtom, pos: bool) -> ILit {
    ILit { atom, pos }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Shape {
    /// Class of each variable, as a restricted growth string.
    class: Vec<u8>,
    alloc: Vec<bool>,
    /// Successor class of each allocated class; `None` points outside.
    ptr: Vec<Option<u8>>,
    m: u32,
}

impl Shape {
    fn allocated(&self) -> u32 {
        self.alloc.iter().filter(|a| **a).count() as u32
    }

    fn holds(&self, a: IAtom) -> bool {
        match a {
            IAtom::Eq(i, j) => self.class[i as usize] == self.class[j as usize],
            IAtom::Alloc(i) => self.alloc[self.class[i as usize] as usize],
            IAtom::Pto(i, j) => {
                let c = self.class[i as usize] as usize;
                self.alloc[c] && self.ptr[c] == Some(self.class[j as usize])
            }
            IAtom::Size(k) => k <= self.m,
        }
    }
}

/// Read access to a core type, either a [`Shape`] or a polarity map.
trait TypeView {
    fn nvars(&self) -> u8;
    fn alpha(&self) -> u32;
    fn holds(&self, a: IAtom) -> bool;
}

struct ShapeView<'a>(&'a Shape, u32);

impl TypeView for ShapeView<'_> {
    fn nvars(&self) -> u8 {
        self.0.class.len() as u8
    }
    fn alpha(&self) -> u32 {
        self.1
    }
    fn holds(&self, a: IAtom) -> bool {
        self.0.holds(a)
    }
}

impl TypeView for CoreType {
    fn nvars(&self) -> u8 {
        self.basis.vars.len() as u8
    }
    fn alpha(&self) -> u32 {
        self.basis.alpha
    }
    fn holds(&self, a: IAtom) -> bool {
        self.polarity[&to_core_formula(&self.basis.vars, a)]
    }
}

fn to_core_formula(vars: &[Var], a: IAtom) -> CoreFormula {
    let v = |i: u8| vars[i as usize].clone();
    match a {
        IAtom::Eq(i, j) => CoreFormula::Eq(v(i), v(j)),
        IAtom::Alloc(i) => CoreFormula::Alloc(v(i)),
        IAtom::Pto(i, j) => CoreFormula::PointsTo(v(i), v(j)),
        IAtom::Size(k) => CoreFormula::SizeGeq(k),
    }
}

fn to_core_literal(vars: &[Var], l: ILit) -> CoreLiteral {
    CoreLiteral::new(to_core_formula(vars, l.atom), l.pos)
}

fn from_core_formula(vars: &[Var], a: &CoreFormula) -> Option<IAtom> {
    let idx = |x: &Var| vars.iter().position(|y| y == x).map(|i| i as u8);
    Some(match a {
        CoreFormula::Eq(x, y) => IAtom::Eq(idx(x)?, idx(y)?),
        CoreFormula::Alloc(x) => IAtom::Alloc(idx(x)?),
        CoreFormula::PointsTo(x, y) => IAtom::Pto(idx(x)?, idx(y)?),
        CoreFormula::SizeGeq(k) => IAtom::Size(*k),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Bits(Vec<u64>);

impl Bits {
    fn empty(len: usize) -> Bits {
        Bits(vec![0; len.div_ceil(64)])
    }
    fn full(len: usize) -> Bits {
        let mut b = Bits(vec![!0; len.div_ceil(64)]);
        b.trim(len);
        b
    }
    fn trim(&mut self, len: usize) {
        if !len.is_multiple_of(64) {
            if let Some(last) = self.0.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn and_with(&mut self, o: &Bits) {
        self.0.iter_mut().zip(&o.0).for_each(|(a, b)| *a &= b);
    }
    fn or_with(&mut self, o: &Bits) {
        self.0.iter_mut().zip(&o.0).for_each(|(a, b)| *a |= b);
    }
    fn not(&self, len: usize) -> Bits {
        let mut b = Bits(self.0.iter().map(|w| !w).collect());
        b.trim(len);
        b
    }
    fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }
    fn subset_of(&self, o: &Bits) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a & !b == 0)
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(wi, w)| {
            let mut w = *w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }
}

/// All satisfiable core types of one basis.
struct Universe {
    basis: CoreBasis,
    shapes: Vec<Shape>,
    index: FxHashMap<Shape, usize>,
    atom_bits: Vec<Bits>,
    /// Contiguous shape ranges sharing a partition.
    partitions: Vec<std::ops::Range<usize>>,
}

impl Universe {
    fn build(basis: &CoreBasis) -> Universe {
        let n = basis.vars.len();
        let alpha = basis.alpha;
        let mut shapes = Vec::new();
        let mut partitions = Vec::new();
        for class in rgs(n) {
            let start = shapes.len();
            let classes = class.iter().copied().max().map_or(0, |m| m as usize + 1);
            // Per class: 0 unallocated, 1 allocated pointing outside, 2+j to class j.
            let mut code = vec![0usize; classes];
            loop {
                let alloc: Vec<bool> = code.iter().map(|c| *c > 0).collect();
                let ptr: Vec<Option<u8>> = code
                    .iter()
                    .map(|c| (*c >= 2).then(|| (*c - 2) as u8))
                    .collect();
                let d = alloc.iter().filter(|a| **a).count() as u32;
                for m in 0..=alpha {
                    if m >= d || m == alpha {
                        shapes.push(Shape {
                            class: class.clone(),
                            alloc: alloc.clone(),
                            ptr: ptr.clone(),
                            m,
                        });
                    }
                }
                if !odometer(&mut code, classes + 2) {
                    break;
                }
            }
            partitions.push(start..shapes.len());
        }
        let index = shapes.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut u = Universe {
            basis: basis.clone(),
            shapes,
            index,
            atom_bits: Vec::new(),
            partitions,
        };
        u.atom_bits = u
            .atoms()
            .into_iter()
            .map(|a| {
                let mut b = Bits::empty(u.len());
                for (i, s) in u.shapes.iter().enumerate() {
                    if s.holds(a) {
                        b.set(i);
                    }
                }
                b
            })
            .collect();
        u
    }

    fn len(&self) -> usize {
        self.shapes.len()
    }

    fn n(&self) -> u8 {
        self.basis.vars.len() as u8
    }

    fn atoms(&self) -> Vec<IAtom> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                out.push(IAtom::Eq(i, j));
            }
        }
        out.extend((0..n).map(IAtom::Alloc));
        for i in 0..n {
            for j in 0..n {
                out.push(IAtom::Pto(i, j));
            }
        }
        out.extend((0..=self.basis.alpha).map(IAtom::Size));
        out
    }

    fn atom_id(&self, a: IAtom) -> Option<usize> {
        let n = self.n() as usize;
        match a {
            IAtom::Eq(i, j) => Some(i as usize * n + j as usize),
            IAtom::Alloc(i) => Some(n * n + i as usize),
            IAtom::Pto(i, j) => Some(n * n + n + i as usize * n + j as usize),
            IAtom::Size(k) => (k <= self.basis.alpha).then(|| 2 * n * n + n + k as usize),
        }
    }

    fn lit_bits(&self, l: ILit) -> Bits {
        match self.atom_id(l.atom) {
            Some(id) if l.pos => self.atom_bits[id].clone(),
            Some(id) => self.atom_bits[id].not(self.len()),
            // size >= k beyond alpha only matters in negated form here.
            None => {
                if l.pos {
                    Bits::empty(self.len())
                } else {
                    Bits::full(self.len())
                }
            }
        }
    }

    fn cube_bits(&self, cube: &[ILit]) -> Bits {
        let mut b = Bits::full(self.len());
        for l in cube {
            match self.atom_id(l.atom) {
                Some(id) if l.pos => b.and_with(&self.atom_bits[id]),
                Some(id) => {
                    for (w, a) in b.0.iter_mut().zip(&self.atom_bits[id].0) {
                        *w &= !a;
                    }
                }
                None if l.pos => return Bits::empty(self.len()),
                None => {}
            }
            if b.is_empty() {
                break;
            }
        }
        b
    }

    /// Every literal of a shape, cheapest to drop first.
    fn shape_literals(&self, s: &Shape) -> Vec<ILit> {
        let n = self.n();
        let mut out = Vec::new();
        for k in 1..=self.basis.alpha {
            out.push(ilit(IAtom::Size(k), s.holds(IAtom::Size(k))));
        }
        for i in 0..n {
            for j in 0..n {
                out.push(ilit(IAtom::Pto(i, j), s.holds(IAtom::Pto(i, j))));
            }
        }
        for i in 0..n {
            out.push(ilit(IAtom::Alloc(i), s.holds(IAtom::Alloc(i))));
        }
        for i in 0..n {
            for j in i + 1..n {
                out.push(ilit(IAtom::Eq(i, j), s.holds(IAtom::Eq(i, j))));
            }
        }
        out
    }

    fn to_core_type(&self, s: &Shape) -> CoreType {
        let polarity = self
            .atoms()
            .into_iter()
            .map(|a| (to_core_formula(&self.basis.vars, a), s.holds(a)))
            .collect();
        CoreType {
            basis: self.basis.clone(),
            polarity,
        }
    }
}

/// Restricted growth strings of length `n`.
fn rgs(n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    fn go(cur: &mut Vec<u8>, n: usize, out: &mut Vec<Vec<u8>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        let next = cur.iter().copied().max().map_or(0, |m| m + 1);
        for c in 0..=next {
            cur.push(c);
            go(cur, n, out);
            cur.pop();
        }
    }
    go(&mut Vec::new(), n, &mut out);
    out
}

fn odometer(code: &mut [usize], base: usize) -> bool {
    for c in code.iter_mut() {
        *c += 1;
        if *c < base {
            return true;
        }
        *c = 0;
    }
    false
}

thread_local! {
    static UNIVERSES: RefCell<FxHashMap<CoreBasis, Rc<Universe>>> = RefCell::new(FxHashMap::default());
}

fn universe(basis: &CoreBasis) -> Rc<Universe> {
    UNIVERSES.with(|c| {
        c.borrow_mut()
            .entry(basis.clone())
            .or_insert_with(|| Rc::new(Universe::build(basis)))
            .clone()
    })
}

/// A set of satisfiable core types over one basis.
#[derive(Clone)]
struct TypeSet {
    u: Rc<Universe>,
    bits: Bits,
}

impl TypeSet {
    fn empty(basis: &CoreBasis) -> TypeSet {
        let u = universe(basis);
        let bits = Bits::empty(u.len());
        TypeSet { u, bits }
    }

    fn full(basis: &CoreBasis) -> TypeSet {
        let u = universe(basis);
        let bits = Bits::full(u.len());
        TypeSet { u, bits }
    }

    fn of_lit(basis: &CoreBasis, atom: &CoreFormula, pos: bool) -> TypeSet {
        let u = universe(basis);
        let a = from_core_formula(&u.basis.vars, atom).expect("atom inside basis");
        let bits = u.lit_bits(ilit(a, pos));
        TypeSet { u, bits }
    }

    fn basis(&self) -> &CoreBasis {
        &self.u.basis
    }

    fn complement(&self) -> TypeSet {
        TypeSet {
            u: self.u.clone(),
            bits: self.bits.not(self.u.len()),
        }
    }

    /// The same set of heaps described over a larger basis.
    fn lift(&self, to: &CoreBasis) -> TypeSet {
        if to == self.basis() {
            return self.clone();
        }
        let big = universe(to);
        let map = restriction_map(&big, &self.u);
        let mut bits = Bits::empty(big.len());
        for (i, j) in map.iter().enumerate() {
            if self.bits.get(*j) {
                bits.set(i);
            }
        }
        TypeSet { u: big, bits }
    }

    /// Re-expresses the set over the smallest alpha (at least `max(1, |X|)`)
    /// that describes it exactly.
    fn shrink(&self) -> TypeSet {
        let n = self.basis().vars.len() as u32;
        for alpha in n.max(1)..self.basis().alpha {
            let small = universe(&CoreBasis {
                vars: self.basis().vars.clone(),
                alpha,
            });
            let map = restriction_map(&self.u, &small);
            let mut image = Bits::empty(small.len());
            for i in self.bits.iter() {
                image.set(map[i]);
            }
            if map.iter().enumerate().all(|(i, j)| self.bits.get(i) == image.get(*j)) {
                return TypeSet { u: small, bits: image };
            }
        }
        self.clone()
    }

    fn combine(&self, other: &TypeSet, op: impl Fn(&mut Bits, &Bits)) -> TypeSet {
        let basis = self.basis().join(other.basis());
        let mut a = self.lift(&basis);
        let b = other.lift(&basis);
        op(&mut a.bits, &b.bits);
        a
    }

    fn shapes(&self) -> impl Iterator<Item = &Shape> {
        self.bits.iter().map(|i| &self.u.shapes[i])
    }

    fn count(&self) -> usize {
        self.bits.count()
    }
}

/// For each shape of `big`, the index of its restriction in `small`. The
/// variables of `small` must be a subset, and its alpha at most `big`'s.
fn restriction_map(big: &Universe, small: &Universe) -> Vec<usize> {
    let pos: Vec<usize> = small
        .basis
        .vars
        .iter()
        .map(|x| big.basis.vars.iter().position(|y| y == x).expect("subset basis"))
        .collect();
    big.shapes
        .iter()
        .map(|s| {
            let mut renumber: Vec<Option<u8>> = vec![None; s.alloc.len()];
            let mut class = Vec::with_capacity(pos.len());
            let mut next = 0u8;
            for &p in &pos {
                let c = s.class[p] as usize;
                let r = *renumber[c].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                });
                class.push(r);
            }
            let mut alloc = vec![false; next as usize];
            let mut ptr = vec![None; next as usize];
            for (old, new) in renumber.iter().enumerate() {
                if let Some(new) = new {
                    alloc[*new as usize] = s.alloc[old];
                    ptr[*new as usize] = s.ptr[old].and_then(|t| renumber[t as usize]);
                }
            }
            let shape = Shape {
                class,
                alloc,
                ptr,
                m: s.m.min(small.basis.alpha),
            };
            small.index[&shape]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Core types

fn view_nvars_check(t1: &CoreType, t2: &CoreType) -> Result<(), CoreError> {
    if t1.basis != t2.basis {
        return Err(CoreError::Basis("core types over different bases".into()));
    }
    if (t1.basis.alpha as usize) < t1.basis.vars.len().max(1) {
        return Err(CoreError::Basis("alpha must be at least max(1, |X|)".into()));
    }
    for t in [t1, t2] {
        if !core_type_sat(t)? {
            return Err(CoreError::Unsatisfiable);
        }
    }
    Ok(())
}

/// Decides satisfiability of a core type by checking that equality is an
/// equivalence, that allocation and points-to respect it, that points-to
/// implies allocation and is functional, and that some heap size fits.
pub fn core_type_sat(t: &CoreType) -> Result<bool, CoreError> {
    t.check_total()?;
    let vars = &t.basis.vars;
    let p = |a: CoreFormula| t.polarity[&a];
    let eq = |x: &Var, y: &Var| p(CoreFormula::Eq(x.clone(), y.clone()));
    let alloc = |x: &Var| p(CoreFormula::Alloc(x.clone()));
    let pto = |x: &Var, y: &Var| p(CoreFormula::PointsTo(x.clone(), y.clone()));
    for x in vars {
        if !eq(x, x) {
            return Ok(false);
        }
        for y in vars {
            if eq(x, y) != eq(y, x) {
                return Ok(false);
            }
            for z in vars {
                if eq(x, y) && eq(y, z) && !eq(x, z) {
                    return Ok(false);
                }
            }
        }
    }
    for x in vars {
        for x2 in vars {
            if !eq(x, x2) {
                continue;
            }
            if alloc(x) != alloc(x2) {
                return Ok(false);
            }
            for y in vars {
                for y2 in vars {
                    if eq(y, y2) && pto(x, y) != pto(x2, y2) {
                        return Ok(false);
                    }
                }
            }
        }
    }
    for x in vars {
        for y in vars {
            if pto(x, y) && !alloc(x) {
                return Ok(false);
            }
            for z in vars {
                if pto(x, y) && pto(x, z) && !eq(y, z) {
                    return Ok(false);
                }
            }
        }
    }
    // Allocated classes: count variables allocated with no smaller equal one.
    let d = vars
        .iter()
        .enumerate()
        .filter(|(i, x)| alloc(x) && !vars[..*i].iter().any(|y| eq(x, y)))
        .count() as u32;
    let mut lo = d;
    let mut hi = u32::MAX;
    for (a, pol) in &t.polarity {
        if let CoreFormula::SizeGeq(k) = a {
            if *pol {
                lo = lo.max(*k);
            } else {
                hi = hi.min(*k);
            }
        }
    }
    Ok(lo < hi)
}

fn shape_of_type(t: &CoreType) -> Shape {
    let n = t.basis.vars.len();
    let h = |a: IAtom| TypeView::holds(t, a);
    let mut class = Vec::with_capacity(n);
    let mut reps: Vec<u8> = Vec::new();
    for i in 0..n as u8 {
        match reps.iter().position(|&r| h(IAtom::Eq(r, i))) {
            Some(c) => class.push(c as u8),
            None => {
                class.push(reps.len() as u8);
                reps.push(i);
            }
        }
    }
    let alloc: Vec<bool> = reps.iter().map(|&r| h(IAtom::Alloc(r))).collect();
    let ptr = reps
        .iter()
        .map(|&r| {
            (0..n as u8)
                .find(|&j| h(IAtom::Pto(r, j)))
                .map(|j| class[j as usize])
        })
        .collect();
    Shape {
        class,
        alloc,
        ptr,
        m: t.maxsize(),
    }
}

/// Builds a state satisfying every literal of a satisfiable core type.
///
/// Location 0 is a sink that no variable uses. Allocated classes come next,
/// then unallocated classes, then garbage cells pointing to the sink until
/// the heap has `max(maxsize, allocated classes)` cells.
pub fn core_type_model(t: &CoreType) -> Result<MemoryState, CoreError> {
    if !core_type_sat(t)? {
        return Err(CoreError::Unsatisfiable);
    }
    Ok(shape_model(&t.basis.vars, &shape_of_type(t)))
}

fn shape_model(vars: &[Var], s: &Shape) -> MemoryState {
    let classes = s.alloc.len();
    let mut loc = vec![0u32; classes];
    let mut next = 1;
    for pass in [true, false] {
        for c in 0..classes {
            if s.alloc[c] == pass {
                loc[c] = next;
                next += 1;
            }
        }
    }
    let d = s.allocated();
    let mut heap: BTreeMap<u32, u32> = (0..classes)
        .filter(|&c| s.alloc[c])
        .map(|c| (loc[c], s.ptr[c].map_or(0, |t| loc[t as usize])))
        .collect();
    for g in 0..s.m.max(d) - d {
        heap.insert(next + g, 0);
    }
    MemoryState {
        store: vars
            .iter()
            .zip(&s.class)
            .map(|(x, c)| (x.clone(), loc[*c as usize]))
            .collect(),
        heap,
    }
}

/// All satisfiable core types over `g.basis` whose literals entail `g`.
pub fn to_core_type_dnf(g: &NormalizedForm) -> Result<Vec<CoreType>, CoreError> {
    let set = eval_core_bool(&g.body, &g.basis)?;
    Ok(set.shapes().map(|s| set.u.to_core_type(s)).collect())
}

fn eval_core_bool(g: &CoreBool, basis: &CoreBasis) -> Result<TypeSet, CoreError> {
    if basis.alpha < 1 {
        return Err(CoreError::Basis("alpha must be at least 1".into()));
    }
    let mut bad = None;
    g.for_each_literal(&mut |l| {
        if bad.is_none() && !l.atom.in_basis(basis) {
            bad = Some(l.to_string());
        }
    });
    if let Some(l) = bad {
        return Err(CoreError::OutsideBasis(l));
    }
    fn go(g: &CoreBool, basis: &CoreBasis) -> TypeSet {
        match g {
            CoreBool::True => TypeSet::full(basis),
            CoreBool::False => TypeSet::empty(basis),
            CoreBool::Lit(l) => TypeSet::of_lit(basis, &l.atom, l.positive),
            CoreBool::Not(a) => go(a, basis).complement(),
            CoreBool::And(xs) => xs.iter().fold(TypeSet::full(basis), |acc, x| {
                acc.combine(&go(x, basis), Bits::and_with)
            }),
            CoreBool::Or(xs) => xs.iter().fold(TypeSet::empty(basis), |acc, x| {
                acc.combine(&go(x, basis), Bits::or_with)
            }),
        }
    }
    Ok(go(g, basis))
}

// ---------------------------------------------------------------------------
// The elimination conjunctions

fn star_literals(t1: &dyn TypeView, t2: &dyn TypeView) -> Vec<ILit> {
    let n = t1.nvars();
    let c = t1.alpha();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let a = IAtom::Eq(i, j);
            out.push(ilit(a, t1.holds(a)));
            out.push(ilit(a, t2.holds(a)));
        }
    }
    for i in 0..n {
        let (a1, a2) = (t1.holds(IAtom::Alloc(i)), t2.holds(IAtom::Alloc(i)));
        if a1 || a2 {
            out.push(ilit(IAtom::Alloc(i), true));
        }
        if !a1 && !a2 {
            out.push(ilit(IAtom::Alloc(i), false));
        }
        if a1 && a2 {
            out.push(ilit(IAtom::Eq(i, i), false));
        }
        for j in 0..n {
            let p = IAtom::Pto(i, j);
            let (p1, p2) = (t1.holds(p), t2.holds(p));
            if (a1 && !p1) || (a2 && !p2) {
                out.push(ilit(p, false));
            }
            if p1 || p2 {
                out.push(ilit(p, true));
            }
        }
    }
    for b1 in 0..=c {
        for b2 in 0..=c {
            let (s1, s2) = (t1.holds(IAtom::Size(b1)), t2.holds(IAtom::Size(b2)));
            if s1 && s2 {
                out.push(ilit(IAtom::Size(b1 + b2), true));
            }
            if !s1 && !s2 {
                out.push(ilit(IAtom::Size((b1 + b2).saturating_sub(1)), false));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn septraction_literals(t1: &dyn TypeView, t2: &dyn TypeView) -> Vec<ILit> {
    let n = t1.nvars();
    let c = t1.alpha();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let a = IAtom::Eq(i, j);
            out.push(ilit(a, t1.holds(a)));
            out.push(ilit(a, t2.holds(a)));
        }
    }
    for i in 0..n {
        let (a1, a2) = (t1.holds(IAtom::Alloc(i)), t2.holds(IAtom::Alloc(i)));
        if !a1 && a2 {
            out.push(ilit(IAtom::Alloc(i), true));
        }
        if !a2 || a1 {
            out.push(ilit(IAtom::Alloc(i), false));
        }
        if a1 && !a2 {
            out.push(ilit(IAtom::Eq(i, i), false));
        }
        for j in 0..n {
            let p = IAtom::Pto(i, j);
            let (p1, p2) = (t1.holds(p), t2.holds(p));
            if !p2 {
                out.push(ilit(p, false));
            }
            if !a1 && p2 {
                out.push(ilit(p, true));
            }
            if (a1 && !p1 && p2) || (p1 && !p2) {
                out.push(ilit(IAtom::Eq(i, i), false));
            }
        }
    }
    for b1 in 0..=c {
        for b2 in 0..=c {
            let (s1, s2) = (t1.holds(IAtom::Size(b1)), t2.holds(IAtom::Size(b2)));
            if !s1 && s2 {
                out.push(ilit(IAtom::Size((b2 + 1).saturating_sub(b1)), true));
            }
            if s1 && !s2 {
                out.push(ilit(IAtom::Size(b2.saturating_sub(b1)), false));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn public_literals(vars: &[Var], lits: Vec<ILit>) -> Vec<CoreLiteral> {
    let mut out: Vec<CoreLiteral> = lits.into_iter().map(|l| to_core_literal(vars, l)).collect();
    canonical_order(&mut out);
    out
}

/// The conjunction equivalent to `t1 * t2`, over `Core(X, 2 alpha)`.
pub fn boxstar(t1: &CoreType, t2: &CoreType) -> Result<Vec<CoreLiteral>, CoreError> {
    view_nvars_check(t1, t2)?;
    Ok(public_literals(&t1.basis.vars, star_literals(t1, t2)))
}

/// The conjunction equivalent to `t1 -o t2`, over `Core(X, alpha)`.
pub fn boxseptra(t1: &CoreType, t2: &CoreType) -> Result<Vec<CoreLiteral>, CoreError> {
    view_nvars_check(t1, t2)?;
    Ok(public_literals(&t1.basis.vars, septraction_literals(t1, t2)))
}

// ---------------------------------------------------------------------------
// Elimination on type sets

/// Counts reported for each elimination step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub op: &'static str,
    pub left_types: usize,
    pub right_types: usize,
    pub pairs: usize,
    pub result_types: usize,
    pub basis: String,
}

type Tracer<'a> = Option<&'a mut dyn FnMut(TraceEvent)>;

enum Elim {
    Star,
    Septraction,
}

/// Pairwise elimination. Returns the result over the unshrunk basis and the
/// distinct cubes produced.
fn eliminate(a: &TypeSet, b: &TypeSet, op: Elim, tracer: &mut Tracer<'_>) -> (TypeSet, Vec<Vec<ILit>>) {
    let vars: BTreeSet<Var> = a.basis().vars.iter().chain(&b.basis().vars).cloned().collect();
    let c = (vars.len() as u32).max(a.basis().alpha).max(b.basis().alpha).max(1);
    let common = CoreBasis::new(vars, c);
    let (a, b) = (a.lift(&common), b.lift(&common));
    let out_basis = match op {
        Elim::Star => CoreBasis { alpha: 2 * c, ..common.clone() },
        Elim::Septraction => common.clone(),
    };
    let mut out = TypeSet::empty(&out_basis);
    let mut seen: FxHashSet<Vec<ILit>> = FxHashSet::default();
    let mut cubes = Vec::new();
    let mut pairs = 0;
    let u = a.u.clone();
    for range in &u.partitions {
        let left: Vec<usize> = range.clone().filter(|i| a.bits.get(*i)).collect();
        let right: Vec<usize> = range.clone().filter(|i| b.bits.get(*i)).collect();
        for &i in &left {
            let s1 = &u.shapes[i];
            for &j in &right {
                let s2 = &u.shapes[j];
                // Pairs skipped here yield a cube containing `x != x`.
                let compatible = match op {
                    Elim::Star => s1.alloc.iter().zip(&s2.alloc).all(|(p, q)| !(*p && *q)),
                    Elim::Septraction => s1.alloc.iter().zip(&s2.alloc).all(|(p, q)| !*p || *q),
                };
                if !compatible {
                    continue;
                }
                pairs += 1;
                let (v1, v2) = (ShapeView(s1, c), ShapeView(s2, c));
                let cube = match op {
                    Elim::Star => star_literals(&v1, &v2),
                    Elim::Septraction => septraction_literals(&v1, &v2),
                };
                if seen.contains(&cube) {
                    continue;
                }
                let bits = out.u.cube_bits(&cube);
                if !bits.is_empty() {
                    out.bits.or_with(&bits);
                    cubes.push(cube.clone());
                }
                seen.insert(cube);
            }
        }
    }
    if let Some(t) = tracer.as_mut() {
        t(TraceEvent {
            op: match op {
                Elim::Star => "star",
                Elim::Septraction => "septraction",
            },
            left_types: a.count(),
            right_types: b.count(),
            pairs,
            result_types: out.count(),
            basis: out.basis().to_string(),
        });
    }
    (out, cubes)
}

fn eliminate_public(g1: &NormalizedForm, g2: &NormalizedForm, op: Elim) -> Result<NormalizedForm, CoreError> {
    let a = eval_core_bool(&g1.body, &g1.basis)?;
    let b = eval_core_bool(&g2.body, &g2.basis)?;
    let (set, cubes) = eliminate(&a, &b, op, &mut None);
    let vars = &set.basis().vars;
    let mut disjuncts: Vec<Vec<CoreLiteral>> = cubes
        .into_iter()
        .map(|c| public_literals(vars, c))
        .collect();
    disjuncts.sort();
    let body = match disjuncts.len() {
        0 => CoreBool::False,
        _ => CoreBool::Or(
            disjuncts
                .into_iter()
                .map(|c| CoreBool::And(c.into_iter().map(CoreBool::Lit).collect()))
                .collect(),
        ),
    };
    Ok(NormalizedForm {
        basis: set.basis().clone(),
        body,
    })
}

/// `g1 * g2` as a disjunction of [`boxstar`] conjunctions over
/// `(X1 u X2, 2 max(|X1 u X2|, alpha1, alpha2))`.
pub fn eliminate_star(g1: &NormalizedForm, g2: &NormalizedForm) -> Result<NormalizedForm, CoreError> {
    eliminate_public(g1, g2, Elim::Star)
}

/// `g1 -o g2` as a disjunction of [`boxseptra`] conjunctions over
/// `(X1 u X2, max(|X1 u X2|, alpha1, alpha2))`.
pub fn eliminate_septraction(
    g1: &NormalizedForm,
    g2: &NormalizedForm,
) -> Result<NormalizedForm, CoreError> {
    eliminate_public(g1, g2, Elim::Septraction)
}

// ---------------------------------------------------------------------------
// Normalization and decisions

fn atom_set(f: &Formula) -> TypeSet {
    let basis = |vars: Vec<Var>, k: u32| CoreBasis::new(vars, k).padded();
    match f {
        Formula::Emp => TypeSet::of_lit(&basis(vec![], 1), &CoreFormula::SizeGeq(1), false),
        Formula::True => TypeSet::full(&basis(vec![], 1)),
        Formula::False => TypeSet::empty(&basis(vec![], 1)),
        Formula::Eq(x, y) => TypeSet::of_lit(
            &basis(vec![x.clone(), y.clone()], 1),
            &CoreFormula::Eq(x.clone(), y.clone()),
            true,
        ),
        Formula::PointsTo(x, y) => TypeSet::of_lit(
            &basis(vec![x.clone(), y.clone()], 1),
            &CoreFormula::PointsTo(x.clone(), y.clone()),
            true,
        ),
        Formula::Alloc(x) => {
            TypeSet::of_lit(&basis(vec![x.clone()], 1), &CoreFormula::Alloc(x.clone()), true)
        }
        Formula::SizeGeq(k) => TypeSet::of_lit(&basis(vec![], *k), &CoreFormula::SizeGeq(*k), true),
        _ => unreachable!("not an atom"),
    }
}

fn normalize_set(f: &Formula, tracer: &mut Tracer<'_>) -> TypeSet {
    use Formula::*;
    match f {
        Not(a) => normalize_set(a, tracer).complement(),
        And(a, b) => normalize_set(a, tracer).combine(&normalize_set(b, tracer), Bits::and_with),
        Or(a, b) => normalize_set(a, tracer).combine(&normalize_set(b, tracer), Bits::or_with),
        Implies(a, b) => normalize_set(a, tracer)
            .complement()
            .combine(&normalize_set(b, tracer), Bits::or_with),
        Iff(a, b) => {
            let (a, b) = (normalize_set(a, tracer), normalize_set(b, tracer));
            a.combine(&b, |x, y| {
                for (p, q) in x.0.iter_mut().zip(&y.0) {
                    *p = !(*p ^ q);
                }
            })
            .trimmed()
        }
        Star(a, b) => {
            let (a, b) = (normalize_set(a, tracer), normalize_set(b, tracer));
            eliminate(&a, &b, Elim::Star, tracer).0.shrink()
        }
        Septraction(a, b) => {
            let (a, b) = (normalize_set(a, tracer), normalize_set(b, tracer));
            eliminate(&a, &b, Elim::Septraction, tracer).0.shrink()
        }
        // a -* b is not (a -o not b).
        Wand(a, b) => {
            let (a, b) = (normalize_set(a, tracer), normalize_set(b, tracer).complement());
            eliminate(&a, &b, Elim::Septraction, tracer).0.complement().shrink()
        }
        _ => atom_set(f),
    }
}

impl TypeSet {
    // Word-level negation sets the padding bits past the last shape.
    fn trimmed(mut self) -> TypeSet {
        self.bits.trim(self.u.len());
        self
    }
}

/// Greedy cover of a type set by short cubes, each entailing the set.
fn cover(set: &TypeSet) -> CoreBool {
    let u = &set.u;
    if set.bits.is_empty() {
        return CoreBool::False;
    }
    if set.count() == u.len() {
        return CoreBool::True;
    }
    let mut covered = Bits::empty(u.len());
    let mut cubes: Vec<Vec<CoreLiteral>> = Vec::new();
    for i in set.bits.iter() {
        if covered.get(i) {
            continue;
        }
        let mut cube = u.shape_literals(&u.shapes[i]);
        let mut k = 0;
        while k < cube.len() {
            let mut trial = cube.clone();
            trial.remove(k);
            if u.cube_bits(&trial).subset_of(&set.bits) {
                cube = trial;
            } else {
                k += 1;
            }
        }
        covered.or_with(&u.cube_bits(&cube));
        cubes.push(public_literals(&u.basis.vars, cube));
    }
    let mut disjuncts: Vec<CoreBool> = cubes
        .into_iter()
        .map(|c| match c.len() {
            0 => CoreBool::True,
            1 => CoreBool::Lit(c[0].clone()),
            _ => CoreBool::And(c.into_iter().map(CoreBool::Lit).collect()),
        })
        .collect();
    if disjuncts.len() == 1 {
        disjuncts.pop().expect("one disjunct")
    } else {
        CoreBool::Or(disjuncts)
    }
}

/// Translates `f` into an equivalent Boolean combination of core formulae.
pub fn normalize(f: &Formula) -> NormalizedForm {
    normalize_traced(f, None)
}

/// [`normalize`], reporting type counts for every elimination step.
pub fn normalize_traced(f: &Formula, tracer: Option<&mut dyn FnMut(TraceEvent)>) -> NormalizedForm {
    let mut tracer = tracer;
    let set = normalize_set(f, &mut tracer).shrink();
    let set = set.lift(&CoreBasis::new(free_vars(f), set.basis().alpha).padded());
    NormalizedForm {
        basis: set.basis().clone(),
        body: cover(&set),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Sat(MemoryState),
    Unsat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidResult {
    Valid,
    Invalid(MemoryState),
}

/// Satisfiability via normalization. A witness is built from the first
/// satisfiable core type and checked against `f` before it is returned.
pub fn decide_sat(f: &Formula) -> Result<SatResult, CoreError> {
    let set = normalize_set(f, &mut None);
    let Some(shape) = set.shapes().next() else {
        return Ok(SatResult::Unsat);
    };
    let model = shape_model(&set.basis().vars, shape);
    // Variables of f that the basis dropped are unconstrained.
    let mut model = model;
    let fresh = model
        .store
        .values()
        .chain(model.heap.keys())
        .max()
        .map_or(1, |m| m + 1);
    for x in free_vars(f) {
        model.store.entry(x).or_insert(fresh);
    }
    if !satisfies(&model, f, &EnumerationBounds::exact_for(f))? {
        return Err(CoreError::WitnessRejected(model.to_string()));
    }
    Ok(SatResult::Sat(model))
}

pub fn decide_valid(f: &Formula) -> Result<ValidResult, CoreError> {
    Ok(match decide_sat(&f.clone().not())? {
        SatResult::Sat(m) => ValidResult::Invalid(m),
        SatResult::Unsat => ValidResult::Valid,
    })
}

/// Whether `f -> g` is valid.
pub fn entails(f: &Formula, g: &Formula) -> Result<ValidResult, CoreError> {
    decide_valid(&f.clone().implies(g.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, v};

    fn basis(vars: &[&str], alpha: u32) -> CoreBasis {
        CoreBasis::new(vars.iter().map(|n| v(n)), alpha)
    }

    fn ctype(b: &CoreBasis, positive: &[&str]) -> CoreType {
        let pos: BTreeSet<CoreFormula> = positive
            .iter()
            .map(|s| match CoreBool::from_formula(&parse(s).unwrap()).unwrap() {
                CoreBool::Lit(l) => l.atom,
                _ => panic!("not an atom"),
            })
            .collect();
        CoreType {
            basis: b.clone(),
            polarity: CoreFormula::all_in(b)
                .into_iter()
                .map(|a| {
                    let p = pos.contains(&a);
                    (a, p)
                })
                .collect(),
        }
    }

    #[test]
    fn basis_examples() {
        assert_eq!(compute_basis(&Formula::Emp), basis(&[], 1));
        assert_eq!(compute_basis(&parse("size >= 2 * size >= 3").unwrap()).alpha, 5);
        assert_eq!(compute_basis(&parse("alloc(x) -* alloc(y)").unwrap()), basis(&["x", "y"], 2));
    }

    #[test]
    fn core_type_sat_examples() {
        let b = basis(&["x"], 1);
        let t = ctype(&b, &["x = x", "alloc(x)", "x |-> x", "size >= 0", "size >= 1"]);
        assert!(core_type_sat(&t).unwrap());
        assert_eq!(
            core_type_model(&t).unwrap(),
            MemoryState::new([(v("x"), 1)], [(1, 1)])
        );
        let b2 = basis(&["x", "y"], 2);
        let t = ctype(&b2, &["x = x", "y = y", "alloc(x)", "alloc(y)", "size >= 0", "size >= 1"]);
        assert!(!core_type_sat(&t).unwrap());
        let t = ctype(&b, &["size >= 0"]);
        assert!(!core_type_sat(&t).unwrap());
    }

    #[test]
    fn core_type_model_examples() {
        let b = basis(&["x"], 1);
        let t = ctype(&b, &["x = x", "size >= 0"]);
        assert_eq!(core_type_model(&t).unwrap(), MemoryState::new([(v("x"), 1)], []));
        let b = basis(&["x"], 2);
        let t = ctype(&b, &["x = x", "size >= 0", "size >= 1", "size >= 2"]);
        let m = core_type_model(&t).unwrap();
        assert_eq!(m.heap.len(), 2);
        assert!(m.heap.values().all(|l| *l == 0));
        let mut partial = ctype(&b, &["x = x", "size >= 0"]);
        partial.polarity.remove(&CoreFormula::SizeGeq(2));
        assert!(matches!(core_type_sat(&partial), Err(CoreError::Basis(_))));
    }

    #[test]
    fn dnf_examples() {
        let b = basis(&["x"], 1);
        let all = to_core_type_dnf(&NormalizedForm { basis: b.clone(), body: CoreBool::True }).unwrap();
        // unallocated: size 0 or 1; allocated pointing out or to itself: size 1.
        assert_eq!(all.len(), 4);
        assert!(all.iter().all(|t| core_type_sat(t).unwrap()));
        let g = CoreBool::from_formula(&parse("alloc(x) /\\ not alloc(x)").unwrap()).unwrap();
        assert!(to_core_type_dnf(&NormalizedForm { basis: b.clone(), body: g }).unwrap().is_empty());
        let g = CoreBool::from_formula(&parse("not size >= 1").unwrap()).unwrap();
        let ts = to_core_type_dnf(&NormalizedForm { basis: b.clone(), body: g }).unwrap();
        assert_eq!(ts.len(), 1);
        let x = v("x");
        assert_eq!(ts[0].holds(&CoreFormula::Alloc(x.clone())), Some(false));
        assert_eq!(ts[0].holds(&CoreFormula::PointsTo(x.clone(), x)), Some(false));
    }

    #[test]
    fn boxstar_examples() {
        let b = basis(&["x"], 1);
        let t1 = ctype(&b, &["x = x", "alloc(x)", "x |-> x", "size >= 0", "size >= 1"]);
        let t2 = ctype(&b, &["x = x", "size >= 0"]);
        let got: Vec<String> = boxstar(&t1, &t2).unwrap().iter().map(|l| l.to_string()).collect();
        assert_eq!(got, ["x = x", "alloc(x)", "x |-> x", "size >= 0", "size >= 1"]);
        let got = boxstar(&t1, &t1).unwrap();
        assert!(got.contains(&CoreLiteral::new(CoreFormula::Eq(v("x"), v("x")), false)));
        let got: Vec<String> = boxstar(&t2, &t2).unwrap().iter().map(|l| l.to_string()).collect();
        assert!(got.contains(&"not size >= 1".to_string()), "{got:?}");
    }

    #[test]
    fn boxseptra_examples() {
        let b = basis(&["x"], 1);
        let empty = ctype(&b, &["x = x", "size >= 0"]);
        let full = ctype(&b, &["x = x", "alloc(x)", "x |-> x", "size >= 0", "size >= 1"]);
        let got: Vec<String> = boxseptra(&empty, &full).unwrap().iter().map(|l| l.to_string()).collect();
        assert_eq!(got, ["x = x", "alloc(x)", "x |-> x", "size >= 0", "size >= 1"]);
        let xnx = CoreLiteral::new(CoreFormula::Eq(v("x"), v("x")), false);
        assert!(boxseptra(&full, &empty).unwrap().contains(&xnx));
        assert!(boxseptra(&full, &full).unwrap().iter().any(|l| l.atom == CoreFormula::Alloc(v("x")) && !l.positive));
    }

    fn nf(s: &str) -> NormalizedForm {
        normalize(&parse(s).unwrap())
    }

    fn equivalent(a: &NormalizedForm, b: &NormalizedForm) -> bool {
        let basis = a.basis.join(&b.basis);
        let x = eval_core_bool(&a.body, &a.basis).unwrap().lift(&basis);
        let y = eval_core_bool(&b.body, &b.basis).unwrap().lift(&basis);
        x.bits == y.bits
    }

    #[test]
    fn eliminate_examples() {
        let r = eliminate_star(&nf("emp"), &nf("emp")).unwrap();
        assert!(equivalent(&r, &nf("emp")));
        let r = eliminate_star(&nf("alloc(x)"), &nf("alloc(x)")).unwrap();
        assert_eq!(r.body, CoreBool::False);
        let r = eliminate_star(&nf("size >= 2"), &nf("size >= 3")).unwrap();
        assert!(equivalent(&r, &nf("size >= 5")));
        assert_eq!(r.basis.alpha, 6);
        let r = eliminate_septraction(&nf("false"), &nf("x = y")).unwrap();
        assert_eq!(r.body, CoreBool::False);
        let r = eliminate_septraction(&nf("emp"), &nf("x |-> y \\/ size >= 2")).unwrap();
        assert!(equivalent(&r, &nf("x |-> y \\/ size >= 2")));
        let r = eliminate_septraction(&nf("size = 1 /\\ not alloc(x)"), &nf("true")).unwrap();
        assert!(equivalent(&r, &nf("true")));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(print(&nf("emp").to_formula()), "not size >= 1");
        assert_eq!(nf("emp").basis, basis(&[], 1));
        assert!(equivalent(&nf("x |-> y * true"), &nf("x |-> y")));
        assert_eq!(nf("emp -> (alloc(x) /\\ size = 1 -* not size >= 2)").body, CoreBool::True);
        assert_eq!(nf("alloc(x) * alloc(x)").body, CoreBool::False);
    }

    #[test]
    fn decisions() {
        let p = |s: &str| parse(s).unwrap();
        assert_eq!(decide_sat(&p("alloc(x) * alloc(x)")).unwrap(), SatResult::Unsat);
        match decide_sat(&p("x |-> y /\\ size = 1")).unwrap() {
            SatResult::Sat(m) => assert_eq!(m.heap.len(), 1),
            SatResult::Unsat => panic!(),
        }
        assert_eq!(decide_sat(&p("true")).unwrap(), SatResult::Sat(MemoryState::default()));
        assert_eq!(decide_valid(&p("emp -> (alloc(x) /\\ size = 1 -* size = 1)")).unwrap(), ValidResult::Valid);
        assert!(matches!(decide_valid(&p("x |-> y -> alloc(y)")).unwrap(), ValidResult::Invalid(_)));
        assert_eq!(entails(&p("x |-> y /\\ x |-> z"), &p("y = z")).unwrap(), ValidResult::Valid);
        assert_eq!(
            entails(&p("not size >= 2 * not size >= 3"), &p("not size >= 4")).unwrap(),
            ValidResult::Valid
        );
        assert!(matches!(entails(&p("size >= 1"), &p("alloc(x)")).unwrap(), ValidResult::Invalid(_)));
    }

    #[test]
    fn shrink_preserves_meaning() {
        let s = normalize_set(&parse("true * true * true").unwrap(), &mut None);
        assert_eq!(s.basis().alpha, 1);
        assert_eq!(s.count(), s.u.len());
    }
}
