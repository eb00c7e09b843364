//! The Hilbert-style proof system: axiom schemas, inference rules, a
//! derivation checker, and a set of checked derivations.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::formula::{expand_shortcuts, parse, Formula, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Formula,
    Variable,
    Natural,
    VariableSet,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::Formula => "formula",
            ParamKind::Variable => "variable",
            ParamKind::Natural => "natural",
            ParamKind::VariableSet => "finite variable set",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Binding {
    Formula(Formula),
    Var(Var),
    Nat(u32),
    Set(Vec<Var>),
}

impl Binding {
    fn kind(&self) -> ParamKind {
        match self {
            Binding::Formula(_) => ParamKind::Formula,
            Binding::Var(_) => ParamKind::Variable,
            Binding::Nat(_) => ParamKind::Natural,
            Binding::Set(_) => ParamKind::VariableSet,
        }
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::Formula(g) => write!(f, "({g})"),
            Binding::Var(x) => write!(f, "{x}"),
            Binding::Nat(k) => write!(f, "{k}"),
            Binding::Set(xs) => {
                let names: Vec<&str> = xs.iter().map(Var::name).collect();
                write!(f, "{{{}}}", names.join(", "))
            }
        }
    }
}

pub type Bindings = BTreeMap<String, Binding>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxiomSchema {
    pub id: &'static str,
    pub name: &'static str,
    pub params: &'static [(&'static str, ParamKind)],
    /// Schemas stated as `<->` may also justify either implication.
    pub equivalence: bool,
}

use ParamKind::{Formula as F, Natural as N, Variable as V, VariableSet as S};

macro_rules! schema {
    ($id:literal, $name:literal, [$($p:literal : $k:expr),*], $eqv:literal) => {
        AxiomSchema { id: $id, name: $name, params: &[$(($p, $k)),*], equivalence: $eqv }
    };
}

pub const SCHEMAS: &[AxiomSchema] = &[
    schema!("A1", "EqRefl", ["x": V], false),
    schema!("A2", "EqSubst", ["phi": F, "x": V, "y": V], false),
    schema!("A3", "PtoAlloc", ["x": V, "y": V], false),
    schema!("A4", "PtoFun", ["x": V, "y": V, "z": V], false),
    schema!("A7", "Commute", ["phi": F, "psi": F], true),
    schema!("A8", "Assoc", ["phi": F, "psi": F, "chi": F], true),
    schema!("A11", "EmpUnit", ["phi": F], true),
    schema!("A13", "DoubleAlloc", ["x": V], true),
    schema!("A14", "MonoCore", ["phi": F], false),
    schema!("A15", "AllocNeg", ["x": V], false),
    schema!("A16", "SizeNeg", ["b1": N, "b2": N], false),
    schema!("A17", "PointsNeg", ["x": V, "y": V], false),
    schema!("A18", "AllocSizeOne", ["x": V], false),
    schema!("A19", "SizeOne", [], false),
    schema!("A20", "SizeTwo", ["x": V, "y": V], false),
    schema!("A21", "WandSize", ["X": S], false),
    schema!("A22", "WandPointsTo", ["x": V, "y": V], false),
    schema!("A23", "WandAlloc", ["x": V, "X": S], false),
    schema!("I5", "Size", ["b": N], false),
    schema!("I6", "AllocSize", ["X": S], false),
    schema!("I9", "DistrOr", ["phi": F, "psi": F, "chi": F], false),
    schema!("I10", "StarFalse", ["phi": F], true),
    schema!("I12", "StarAlloc", ["x": V], false),
];

/// Looks a schema up by number (`A16`) or name (`SizeNeg`).
pub fn schema(name: &str) -> Option<&'static AxiomSchema> {
    SCHEMAS
        .iter()
        .find(|s| s.id.eq_ignore_ascii_case(name) || s.name.eq_ignore_ascii_case(name))
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HilbertError {
    #[error("unknown axiom schema `{0}`")]
    UnknownSchema(String),
    #[error("{schema}: parameter `{param}` expects a {expected}, got {got}")]
    KindMismatch {
        schema: &'static str,
        param: String,
        expected: ParamKind,
        got: ParamKind,
    },
    #[error("{schema}: no binding for `{param}`")]
    MissingBinding { schema: &'static str, param: String },
    #[error("{schema}: unknown parameter `{param}`")]
    UnknownParam { schema: &'static str, param: String },
    #[error("{schema}: side condition fails: {reason}")]
    SideCondition { schema: &'static str, reason: String },
}

struct Args<'a> {
    schema: &'static AxiomSchema,
    b: &'a Bindings,
}

impl Args<'_> {
    fn get(&self, p: &str) -> Result<&Binding, HilbertError> {
        self.b.get(p).ok_or_else(|| HilbertError::MissingBinding {
            schema: self.schema.id,
            param: p.into(),
        })
    }
    fn f(&self, p: &str) -> Result<Formula, HilbertError> {
        match self.get(p)? {
            Binding::Formula(f) => Ok(f.clone()),
            _ => unreachable!("kinds checked"),
        }
    }
    fn v(&self, p: &str) -> Result<Var, HilbertError> {
        match self.get(p)? {
            Binding::Var(x) => Ok(x.clone()),
            _ => unreachable!("kinds checked"),
        }
    }
    fn n(&self, p: &str) -> Result<u32, HilbertError> {
        match self.get(p)? {
            Binding::Nat(k) => Ok(*k),
            _ => unreachable!("kinds checked"),
        }
    }
    fn set(&self, p: &str) -> Result<Vec<Var>, HilbertError> {
        match self.get(p)? {
            Binding::Set(xs) => Ok(xs.clone()),
            _ => unreachable!("kinds checked"),
        }
    }
}

fn size_eq(k: u32) -> Formula {
    Formula::size_eq(k)
}

/// Replaces every occurrence of `from` by `to`.
pub fn substitute(f: &Formula, from: &Var, to: &Var) -> Formula {
    use Formula::*;
    let r = |x: &Var| if x == from { to.clone() } else { x.clone() };
    let s = |g: &Formula| Box::new(substitute(g, from, to));
    match f {
        Emp | True | False | SizeGeq(_) => f.clone(),
        Eq(x, y) => Eq(r(x), r(y)),
        PointsTo(x, y) => PointsTo(r(x), r(y)),
        Alloc(x) => Alloc(r(x)),
        Not(a) => Not(s(a)),
        And(a, b) => And(s(a), s(b)),
        Or(a, b) => Or(s(a), s(b)),
        Implies(a, b) => Implies(s(a), s(b)),
        Iff(a, b) => Iff(s(a), s(b)),
        Star(a, b) => Star(s(a), s(b)),
        Wand(a, b) => Wand(s(a), s(b)),
        Septraction(a, b) => Septraction(s(a), s(b)),
    }
}

/// Instantiates an axiom schema.
pub fn axiom_instance(name: &str, bindings: &Bindings) -> Result<Formula, HilbertError> {
    let sc = schema(name).ok_or_else(|| HilbertError::UnknownSchema(name.into()))?;
    for (p, b) in bindings {
        let Some((_, kind)) = sc.params.iter().find(|(q, _)| q == p) else {
            return Err(HilbertError::UnknownParam {
                schema: sc.id,
                param: p.clone(),
            });
        };
        if b.kind() != *kind {
            return Err(HilbertError::KindMismatch {
                schema: sc.id,
                param: p.clone(),
                expected: *kind,
                got: b.kind(),
            });
        }
    }
    let a = Args { schema: sc, b: bindings };
    let t = Formula::True;
    Ok(match sc.id {
        "A1" => {
            let x = a.v("x")?;
            Formula::eq(&x, &x)
        }
        "A2" => {
            let (phi, x, y) = (a.f("phi")?, a.v("x")?, a.v("y")?);
            let rhs = substitute(&phi, &y, &x);
            phi.and(Formula::eq(&x, &y)).implies(rhs)
        }
        "A3" => {
            let (x, y) = (a.v("x")?, a.v("y")?);
            Formula::pto(&x, &y).implies(Formula::alloc(&x))
        }
        "A4" => {
            let (x, y, z) = (a.v("x")?, a.v("y")?, a.v("z")?);
            Formula::pto(&x, &y)
                .and(Formula::pto(&x, &z))
                .implies(Formula::eq(&y, &z))
        }
        "A7" => {
            let (p, q) = (a.f("phi")?, a.f("psi")?);
            p.clone().star(q.clone()).iff(q.star(p))
        }
        "A8" => {
            let (p, q, r) = (a.f("phi")?, a.f("psi")?, a.f("chi")?);
            p.clone()
                .star(q.clone())
                .star(r.clone())
                .iff(p.star(q.star(r)))
        }
        "A11" => {
            let p = a.f("phi")?;
            p.clone().iff(p.star(Formula::Emp))
        }
        "A13" => {
            let x = a.v("x")?;
            Formula::alloc(&x).star(Formula::alloc(&x)).iff(Formula::False)
        }
        "A14" => {
            let p = a.f("phi")?;
            let ok = match expand_shortcuts(&p) {
                Formula::Not(e) => matches!(*e, Formula::Emp | Formula::Eq(..)),
                Formula::Eq(..) | Formula::PointsTo(..) => true,
                _ => false,
            };
            if !ok {
                return Err(HilbertError::SideCondition {
                    schema: sc.id,
                    reason: format!("`{p}` is not one of not emp, x = y, x != y, x |-> y"),
                });
            }
            p.clone().star(t).implies(p)
        }
        "A15" => {
            let na = Formula::alloc(&a.v("x")?).not();
            na.clone().star(na.clone()).implies(na)
        }
        "A16" => {
            let (b1, b2) = (a.n("b1")?, a.n("b2")?);
            Formula::size(b1)
                .not()
                .star(Formula::size(b2).not())
                .implies(Formula::size((b1 + b2).saturating_sub(1)).not())
        }
        "A17" => {
            let (x, y) = (a.v("x")?, a.v("y")?);
            Formula::alloc(&x)
                .and(Formula::pto(&x, &y).not())
                .star(t)
                .implies(Formula::pto(&x, &y).not())
        }
        "A18" => {
            let x = a.v("x")?;
            Formula::alloc(&x).implies(Formula::alloc(&x).and(size_eq(1)).star(t))
        }
        "A19" => Formula::Emp.not().implies(size_eq(1).star(t)),
        "A20" => {
            let (x, y) = (a.v("x")?, a.v("y")?);
            Formula::alloc(&x)
                .and(Formula::alloc(&y))
                .and(Formula::neq(&x, &y))
                .implies(Formula::size(2))
        }
        "A21" => {
            let xs = a.set("X")?;
            Formula::conj(std::iter::once(size_eq(1)).chain(xs.iter().map(|x| Formula::alloc(x).not())))
                .septraction(t)
        }
        "A22" => {
            let (x, y) = (a.v("x")?, a.v("y")?);
            Formula::alloc(&x)
                .not()
                .implies(Formula::pto(&x, &y).and(size_eq(1)).septraction(t))
        }
        "A23" => {
            let (x, ys) = (a.v("x")?, a.set("X")?);
            let body = Formula::conj(
                [Formula::alloc(&x), size_eq(1)]
                    .into_iter()
                    .chain(ys.iter().map(|y| Formula::pto(&x, y).not())),
            );
            Formula::alloc(&x).not().implies(body.septraction(t))
        }
        "I5" => {
            let b = a.n("b")?;
            Formula::size(b + 1).implies(Formula::size(b))
        }
        "I6" => {
            let xs = a.set("X")?;
            let lhs = Formula::conj(xs.iter().map(|x| {
                Formula::conj(
                    std::iter::once(Formula::alloc(x))
                        .chain(xs.iter().filter(|y| *y != x).map(|y| Formula::neq(x, y))),
                )
            }));
            lhs.implies(Formula::size(xs.len() as u32))
        }
        "I9" => {
            let (p, q, r) = (a.f("phi")?, a.f("psi")?, a.f("chi")?);
            p.clone()
                .or(q.clone())
                .star(r.clone())
                .implies(p.star(r.clone()).or(q.star(r)))
        }
        "I10" => Formula::False.star(a.f("phi")?).iff(Formula::False),
        "I12" => {
            let x = a.v("x")?;
            Formula::alloc(&x).star(t).implies(Formula::alloc(&x))
        }
        _ => unreachable!("every schema is instantiated"),
    })
}

/// Reads bindings off the shape of a candidate instance. Only structural
/// positions are read; the instance is re-derived and compared afterwards.
fn infer(id: &str, f: &Formula) -> Bindings {
    use Formula::*;
    let mut b = Bindings::new();
    let mut put = |k: &str, v: Binding| {
        b.insert(k.to_string(), v);
    };
    let fv = |x: &Var| Binding::Var(x.clone());
    let ff = |g: &Formula| Binding::Formula(g.clone());
    let neg_alloc = |g: &Formula| match g {
        Not(a) => match a.as_ref() {
            Alloc(x) => Some(x.clone()),
            _ => None,
        },
        _ => None,
    };
    match (id, f) {
        ("A1", Eq(x, _)) => put("x", fv(x)),
        ("A2", Implies(l, _)) => {
            if let And(p, e) = l.as_ref() {
                put("phi", ff(p));
                if let Eq(x, y) = e.as_ref() {
                    put("x", fv(x));
                    put("y", fv(y));
                }
            }
        }
        ("A3" | "A4" | "A17" | "A20" | "A22", _) => {
            let mut vars = Vec::new();
            collect_vars(f, &mut vars);
            // Parameter names in order of first occurrence in the schema.
            let names: &[&str] = match id {
                "A4" => &["x", "y", "x", "z"],
                "A17" | "A22" => &["x", "x", "y"],
                _ => &["x", "y"],
            };
            for (n, x) in names.iter().zip(&vars) {
                put(n, fv(x));
            }
        }
        ("A7" | "A11" | "A14" | "I9", Iff(l, _) | Implies(l, _)) => match (id, l.as_ref()) {
            ("A7", Star(p, q)) => {
                put("phi", ff(p));
                put("psi", ff(q));
            }
            ("A14", Star(p, _)) => put("phi", ff(p)),
            ("A11", p) => put("phi", ff(p)),
            ("I9", Star(pq, r)) => {
                if let Or(p, q) = pq.as_ref() {
                    put("phi", ff(p));
                    put("psi", ff(q));
                }
                put("chi", ff(r));
            }
            _ => {}
        },
        ("A8", Iff(l, _)) => {
            if let Star(pq, r) = l.as_ref() {
                if let Star(p, q) = pq.as_ref() {
                    put("phi", ff(p));
                    put("psi", ff(q));
                }
                put("chi", ff(r));
            }
        }
        ("A13" | "A15" | "A18" | "I12", _) => {
            let mut vars = Vec::new();
            collect_vars(f, &mut vars);
            if let Some(x) = vars.first() {
                put("x", fv(x));
            }
        }
        ("A16", Implies(l, _)) => {
            if let Star(p, q) = l.as_ref() {
                if let (Not(p), Not(q)) = (p.as_ref(), q.as_ref()) {
                    if let (SizeGeq(b1), SizeGeq(b2)) = (p.as_ref(), q.as_ref()) {
                        put("b1", Binding::Nat(*b1));
                        put("b2", Binding::Nat(*b2));
                    }
                }
            }
        }
        ("A21", Septraction(l, _)) => {
            let parts = conjuncts(l);
            let xs = parts.iter().skip(1).filter_map(neg_alloc).collect();
            put("X", Binding::Set(xs));
        }
        ("A23", Implies(l, r)) => {
            if let Some(x) = neg_alloc(l) {
                put("x", fv(&x));
            }
            if let Septraction(body, _) = r.as_ref() {
                let ys = conjuncts(body)
                    .iter()
                    .skip(2)
                    .filter_map(|g| match g {
                        Not(p) => match p.as_ref() {
                            PointsTo(_, y) => Some(y.clone()),
                            _ => None,
                        },
                        _ => None,
                    })
                    .collect();
                put("X", Binding::Set(ys));
            }
        }
        ("I5", Implies(_, r)) => {
            if let SizeGeq(b) = r.as_ref() {
                put("b", Binding::Nat(*b));
            }
        }
        ("I6", Implies(l, _)) => {
            let mut vars = Vec::new();
            collect_allocs(l, &mut vars);
            let mut xs: Vec<Var> = Vec::new();
            for x in vars {
                if !xs.contains(&x) {
                    xs.push(x);
                }
            }
            put("X", Binding::Set(xs));
        }
        ("I10", Iff(l, _)) => {
            if let Star(_, p) = l.as_ref() {
                put("phi", ff(p));
            }
        }
        _ => {}
    }
    b
}

fn collect_allocs(f: &Formula, out: &mut Vec<Var>) {
    match f {
        Formula::Alloc(x) => out.push(x.clone()),
        _ => {
            let (a, b) = f.children();
            a.into_iter().chain(b).for_each(|g| collect_allocs(g, out));
        }
    }
}

fn collect_vars(f: &Formula, out: &mut Vec<Var>) {
    use Formula::*;
    match f {
        Eq(x, y) | PointsTo(x, y) => {
            out.push(x.clone());
            out.push(y.clone());
        }
        Alloc(x) => out.push(x.clone()),
        _ => {
            let (a, b) = f.children();
            a.into_iter().chain(b).for_each(|g| collect_vars(g, out));
        }
    }
}

/// Flattens a left-nested conjunction, keeping `size = k` whole.
fn conjuncts(f: &Formula) -> Vec<Formula> {
    match f {
        Formula::And(a, b) if !is_size_eq(f) => {
            let mut out = conjuncts(a);
            out.push((**b).clone());
            out
        }
        _ => vec![f.clone()],
    }
}

fn is_size_eq(f: &Formula) -> bool {
    matches!(f, Formula::And(a, b) if matches!((a.as_ref(), b.as_ref()),
        (Formula::SizeGeq(k), Formula::Not(n)) if matches!(n.as_ref(), Formula::SizeGeq(j) if Some(*j) == k.checked_add(1))))
}

// ---------------------------------------------------------------------------
// Equality modulo definitions

/// Shortcut expansion followed by flattening and sorting of `*` and `/\`
/// chains, with double negations and negated constants removed.
pub fn canonical(f: &Formula) -> Formula {
    fn ac(f: &Formula) -> Formula {
        use Formula::*;
        match f {
            Star(..) | And(..) => {
                let is_star = matches!(f, Star(..));
                let mut parts = Vec::new();
                flatten(f, is_star, &mut parts);
                let mut parts: Vec<Formula> = parts.iter().map(|g| ac(g)).collect();
                parts.sort();
                let mut it = parts.into_iter().rev();
                let last = it.next().expect("binary node");
                it.fold(last, |acc, g| {
                    if is_star {
                        g.star(acc)
                    } else {
                        g.and(acc)
                    }
                })
            }
            Not(a) => match ac(a) {
                Not(b) => *b,
                True => False,
                False => True,
                b => b.not(),
            },
            Or(a, b) => ac(a).or(ac(b)),
            Implies(a, b) => ac(a).implies(ac(b)),
            Iff(a, b) => ac(a).iff(ac(b)),
            Wand(a, b) => ac(a).wand(ac(b)),
            Septraction(a, b) => ac(a).septraction(ac(b)),
            _ => f.clone(),
        }
    }
    fn flatten<'a>(f: &'a Formula, star: bool, out: &mut Vec<&'a Formula>) {
        match f {
            Formula::Star(a, b) if star => {
                flatten(a, star, out);
                flatten(b, star, out);
            }
            Formula::And(a, b) if !star => {
                flatten(a, star, out);
                flatten(b, star, out);
            }
            _ => out.push(f),
        }
    }
    ac(&expand_shortcuts(f))
}

fn same(a: &Formula, b: &Formula) -> bool {
    a == b || canonical(a) == canonical(b)
}

// ---------------------------------------------------------------------------
// Propositional consequence

fn is_boolean(f: &Formula) -> bool {
    use Formula::*;
    matches!(f, True | False | Not(_) | And(..) | Or(..) | Implies(..) | Iff(..))
}

fn collect_atoms(f: &Formula, atoms: &mut HashMap<Formula, usize>) {
    if is_boolean(f) {
        let (a, b) = f.children();
        a.into_iter().chain(b).for_each(|g| collect_atoms(g, atoms));
    } else {
        let n = atoms.len();
        atoms.entry(f.clone()).or_insert(n);
    }
}

fn eval_prop(f: &Formula, atoms: &HashMap<Formula, usize>, val: u64) -> bool {
    use Formula::*;
    match f {
        True => true,
        False => false,
        Not(a) => !eval_prop(a, atoms, val),
        And(a, b) => eval_prop(a, atoms, val) && eval_prop(b, atoms, val),
        Or(a, b) => eval_prop(a, atoms, val) || eval_prop(b, atoms, val),
        Implies(a, b) => !eval_prop(a, atoms, val) || eval_prop(b, atoms, val),
        Iff(a, b) => eval_prop(a, atoms, val) == eval_prop(b, atoms, val),
        _ => val >> atoms[f] & 1 == 1,
    }
}

/// Largest number of opaque atoms the truth-table check accepts.
pub const MAX_PC_ATOMS: usize = 24;

/// Whether `goal` follows from `premises` by propositional reasoning alone,
/// treating maximal non-Boolean subformulae as atoms. `None` when there are
/// too many atoms to decide.
pub fn propositional_consequence(premises: &[&Formula], goal: &Formula) -> Option<bool> {
    let mut atoms = HashMap::new();
    for f in premises.iter().copied().chain([goal]) {
        collect_atoms(f, &mut atoms);
    }
    if atoms.len() > MAX_PC_ATOMS {
        return None;
    }
    Some((0..1u64 << atoms.len()).all(|val| {
        !premises.iter().all(|p| eval_prop(p, &atoms, val)) || eval_prop(goal, &atoms, val)
    }))
}

// ---------------------------------------------------------------------------
// Derivations

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Mp,
    StarIntro,
    StarAdj,
    WandAdj,
}

impl Rule {
    fn keyword(self) -> &'static str {
        match self {
            Rule::Mp => "mp",
            Rule::StarIntro => "star-intro",
            Rule::StarAdj => "star-adj",
            Rule::WandAdj => "wand-adj",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Justification {
    Axiom { name: String, bindings: Bindings },
    Rule { rule: Rule, premises: Vec<usize> },
    Pc(Vec<usize>),
    Def(usize),
    /// The conclusion of another shipped derivation.
    See(String),
}

impl fmt::Display for Justification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |xs: &[usize]| xs.iter().map(|i| format!(" {i}")).collect::<String>();
        match self {
            Justification::Axiom { name, bindings } => {
                write!(f, "axiom {name}")?;
                if !bindings.is_empty() {
                    let parts: Vec<String> = bindings.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    write!(f, "[{}]", parts.join(","))?;
                }
                Ok(())
            }
            Justification::Rule { rule, premises } => write!(f, "{}{}", rule.keyword(), list(premises)),
            Justification::Pc(ps) => write!(f, "pc{}", list(ps)),
            Justification::Def(p) => write!(f, "def {p}"),
            Justification::See(name) => write!(f, "see {name}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub formula: Formula,
    pub justification: Justification,
}

/// Steps are numbered from 1.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Derivation {
    pub steps: Vec<Step>,
}

impl Derivation {
    pub fn conclusion(&self) -> Option<&Formula> {
        self.steps.last().map(|s| &s.formula)
    }

    fn step(&self, i: usize) -> &Formula {
        &self.steps[i - 1].formula
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(f, "{}. {} ; {}", i + 1, s.formula, s.justification)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct ProofParseError {
    pub line: usize,
    pub msg: String,
}

/// Reads the line format `<n>. <formula> ; <justification>`. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_derivation(text: &str) -> Result<Derivation, ProofParseError> {
    let mut steps = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| ProofParseError { line: ln + 1, msg };
        let (num, rest) = line
            .split_once('.')
            .ok_or_else(|| err("expected `<n>. <formula> ; <justification>`".into()))?;
        let n: usize = num.trim().parse().map_err(|_| err(format!("bad step number `{}`", num.trim())))?;
        if n != steps.len() + 1 {
            return Err(err(format!("expected step {}, found {n}", steps.len() + 1)));
        }
        let (ftext, jtext) = rest
            .rsplit_once(';')
            .ok_or_else(|| err("missing `;` before the justification".into()))?;
        let formula = parse(ftext).map_err(|e| err(e.to_string()))?;
        let justification = parse_justification(jtext.trim()).map_err(err)?;
        steps.push(Step { formula, justification });
    }
    Ok(Derivation { steps })
}

fn parse_justification(text: &str) -> Result<Justification, String> {
    let (head, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
    let rest = rest.trim();
    let indices = || -> Result<Vec<usize>, String> {
        rest.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| format!("bad step index `{s}`")))
            .collect()
    };
    let rule = |rule: Rule, arity: &[usize]| -> Result<Justification, String> {
        let premises = indices()?;
        if !arity.contains(&premises.len()) {
            return Err(format!("`{}` takes {arity:?} premises", rule.keyword()));
        }
        Ok(Justification::Rule { rule, premises })
    };
    match head.to_ascii_lowercase().as_str() {
        "axiom" => {
            let (name, args) = match rest.split_once('[') {
                Some((n, a)) => (
                    n.trim(),
                    a.strip_suffix(']').ok_or("unterminated `[`")?,
                ),
                None => (rest, ""),
            };
            if name.is_empty() {
                return Err("missing axiom name".into());
            }
            Ok(Justification::Axiom {
                name: name.to_string(),
                bindings: parse_bindings(args)?,
            })
        }
        "mp" => rule(Rule::Mp, &[2]),
        "star-intro" => rule(Rule::StarIntro, &[1, 2]),
        "star-adj" => rule(Rule::StarAdj, &[1]),
        "wand-adj" => rule(Rule::WandAdj, &[1]),
        "pc" => Ok(Justification::Pc(indices()?)),
        "def" => match indices()?.as_slice() {
            [p] => Ok(Justification::Def(*p)),
            _ => Err("`def` takes one premise".into()),
        },
        "see" if !rest.is_empty() => Ok(Justification::See(rest.to_string())),
        other => Err(format!("unknown justification `{other}`")),
    }
}

fn parse_bindings(text: &str) -> Result<Bindings, String> {
    let mut out = Bindings::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let (key, after) = rest.split_once('=').ok_or("expected `name=value`")?;
        let after = after.trim_start();
        let (value, tail) = if let Some(set) = after.strip_prefix('{') {
            let (inner, tail) = set.split_once('}').ok_or("unterminated `{`")?;
            let vars = inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| Var::new(s).map_err(|e| e.msg))
                .collect::<Result<Vec<_>, _>>()?;
            (Binding::Set(vars), tail)
        } else {
            let (tok, tail) = after.split_once(',').map_or((after, ""), |(a, b)| (a, b));
            let tok = tok.trim();
            let value = match tok.parse::<u32>() {
                Ok(k) => Binding::Nat(k),
                Err(_) => Binding::Var(Var::new(tok).map_err(|e| e.msg)?),
            };
            (value, tail)
        };
        out.insert(key.trim().to_string(), value);
        rest = tail.trim_start().trim_start_matches(',').trim_start();
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct StepError(pub String);

fn fail<T>(msg: impl Into<String>) -> Result<T, StepError> {
    Err(StepError(msg.into()))
}

/// Checks step `i` (1-based) against its justification.
pub fn check_step(d: &Derivation, i: usize) -> Result<(), StepError> {
    assert!(i >= 1 && i <= d.steps.len(), "step index out of range");
    let step = &d.steps[i - 1];
    let goal = &step.formula;
    let premises: Vec<usize> = match &step.justification {
        Justification::Rule { premises, .. } | Justification::Pc(premises) => premises.clone(),
        Justification::Def(p) => vec![*p],
        Justification::Axiom { .. } | Justification::See(_) => vec![],
    };
    if let Some(p) = premises.iter().find(|p| **p == 0 || **p >= i) {
        return fail(format!("premise {p} does not precede step {i}"));
    }
    match &step.justification {
        Justification::Axiom { name, bindings } => check_axiom(goal, name, bindings),
        Justification::Pc(ps) => {
            let prem: Vec<&Formula> = ps.iter().map(|p| d.step(*p)).collect();
            if propositional_consequence(&prem, goal) == Some(true) {
                return Ok(());
            }
            let canon_prem: Vec<Formula> = prem.iter().map(|f| canonical(f)).collect();
            let refs: Vec<&Formula> = canon_prem.iter().collect();
            match propositional_consequence(&refs, &canonical(goal)) {
                Some(true) => Ok(()),
                Some(false) => fail("pc: not a propositional consequence of the premises"),
                None => fail(format!("pc: more than {MAX_PC_ATOMS} opaque atoms")),
            }
        }
        Justification::Def(p) => {
            if same(goal, d.step(*p)) {
                Ok(())
            } else {
                fail(format!("def: step {i} and step {p} differ after expanding shortcuts"))
            }
        }
        Justification::Rule { rule, premises } => {
            let prem: Vec<&Formula> = premises.iter().map(|p| d.step(*p)).collect();
            check_rule(*rule, &prem, goal)
        }
        Justification::See(name) => check_reference(goal, name),
    }
}

thread_local! {
    static SEE_DEPTH: std::cell::Cell<usize> = const { std::cell::Cell::new(0) };
}

fn check_reference(goal: &Formula, name: &str) -> Result<(), StepError> {
    let Some(text) = builtin_source(name) else {
        return fail(format!("see: no derivation named `{name}`"));
    };
    let d = parse_derivation(text).map_err(|e| StepError(format!("see {name}: {e}")))?;
    if !d.conclusion().is_some_and(|c| same(c, goal)) {
        return fail(format!("see: `{name}` does not conclude this formula"));
    }
    let depth = SEE_DEPTH.with(|c| c.get());
    if depth >= 32 {
        return fail("see: references nest too deeply");
    }
    SEE_DEPTH.with(|c| c.set(depth + 1));
    let report = check_derivation(&d);
    SEE_DEPTH.with(|c| c.set(depth));
    if report.ok {
        Ok(())
    } else {
        fail(format!("see: `{name}` does not check: {report}"))
    }
}

fn check_axiom(goal: &Formula, name: &str, given: &Bindings) -> Result<(), StepError> {
    let sc = schema(name).ok_or_else(|| StepError(format!("unknown axiom schema `{name}`")))?;
    let mut candidates = vec![goal.clone()];
    if sc.equivalence {
        if let Formula::Implies(l, r) = goal {
            candidates = vec![
                (**l).clone().iff((**r).clone()),
                (**r).clone().iff((**l).clone()),
            ];
        }
    }
    let mut last_err = None;
    for cand in &candidates {
        let mut b = infer(sc.id, cand);
        b.extend(given.clone());
        match axiom_instance(sc.id, &b) {
            Ok(inst) if &inst == cand => return Ok(()),
            Ok(inst) => {
                last_err.get_or_insert(format!(
                    "axiom {}: expected an instance such as `{}`",
                    sc.id, inst
                ));
            }
            Err(e) => {
                last_err.get_or_insert(e.to_string());
            }
        }
    }
    fail(last_err.unwrap_or_else(|| format!("axiom {}: no match", sc.id)))
}

fn implication(f: &Formula) -> Option<(&Formula, &Formula)> {
    match f {
        Formula::Implies(a, b) => Some((a, b)),
        _ => None,
    }
}

fn star_parts(f: &Formula) -> Option<(&Formula, &Formula)> {
    match f {
        Formula::Star(a, b) => Some((a, b)),
        _ => None,
    }
}

fn check_rule(rule: Rule, prem: &[&Formula], goal: &Formula) -> Result<(), StepError> {
    let name = rule.keyword();
    if rule == Rule::Mp {
        let (a, b) = (prem[0], prem[1]);
        for (imp, ante) in [(a, b), (b, a)] {
            if let Some((p, q)) = implication(imp) {
                if same(p, ante) && same(q, goal) {
                    return Ok(());
                }
            }
        }
        return fail("mp: antecedent mismatch: no premise is `A -> B` with the other premise `A` and conclusion `B`");
    }
    let Some((lhs, rhs)) = implication(goal) else {
        return fail(format!("{name}: conclusion is not an implication"));
    };
    match rule {
        Rule::Mp => unreachable!(),
        Rule::StarAdj => {
            let Formula::Wand(psi, chi) = rhs else {
                return fail("star-adj: conclusion must be `A -> (B -* C)`");
            };
            let expected = lhs.clone().star((**psi).clone()).implies((**chi).clone());
            if same(prem[0], &expected) {
                Ok(())
            } else {
                fail(format!("star-adj: premise should be `{expected}`"))
            }
        }
        Rule::WandAdj => {
            let Some((phi, psi)) = star_parts(lhs) else {
                return fail("wand-adj: conclusion must be `A * B -> C`");
            };
            let expected = phi.clone().implies(psi.clone().wand(rhs.clone()));
            if same(prem[0], &expected) {
                Ok(())
            } else {
                fail(format!("wand-adj: premise should be `{expected}`"))
            }
        }
        Rule::StarIntro => {
            let (Some((l1, l2)), Some((r1, r2))) = (star_parts(lhs), star_parts(rhs)) else {
                return fail("star-intro: conclusion must be `A * B -> C * D`");
            };
            let imp = |a: &Formula, b: &Formula| a.clone().implies(b.clone());
            // Pairings of conclusion components, the operands of * commuting.
            let pairings = [((l1, r1), (l2, r2)), ((l1, r2), (l2, r1)), ((l2, r1), (l1, r2)), ((l2, r2), (l1, r1))];
            let ok = pairings.iter().any(|((a, b), (c, d))| match prem {
                [p] => same(p, &imp(a, b)) && same(c, d),
                [p, q] => {
                    (same(p, &imp(a, b)) && same(q, &imp(c, d)))
                        || (same(q, &imp(a, b)) && same(p, &imp(c, d)))
                }
                _ => false,
            });
            if ok {
                Ok(())
            } else {
                fail("star-intro: premises do not match the conclusion `A * B -> C * D`")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct CheckReport {
    pub ok: bool,
    pub failing_step: Option<usize>,
    pub reason: String,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.failing_step {
            None => write!(f, "ok: {}", self.reason),
            Some(i) => write!(f, "step {i} fails: {}", self.reason),
        }
    }
}

pub fn check_derivation(d: &Derivation) -> CheckReport {
    if d.steps.is_empty() {
        return CheckReport {
            ok: false,
            failing_step: None,
            reason: "empty derivation".into(),
        };
    }
    for i in 1..=d.steps.len() {
        if let Err(e) = check_step(d, i) {
            return CheckReport {
                ok: false,
                failing_step: Some(i),
                reason: e.0,
            };
        }
    }
    CheckReport {
        ok: true,
        failing_step: None,
        reason: format!("{} steps checked", d.steps.len()),
    }
}

macro_rules! fixtures {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../fixtures/", $name, ".proof")))),*]
    };
}

const FIXTURES: &[(&str, &str)] = fixtures![
    "wand-not-two",
    "magic-sep",
    "wand-size-one",
    "star-ilr",
    "I5",
    "I6",
    "size-split-0",
    "size-split-1",
    "size-split-2",
    "distr-or",
    "star-false",
    "star-alloc",
    "bot-l",
    "bot-r",
    "cut",
    "imp-l",
    "imp-r",
    "curry",
    "or-l",
    "or-r",
    "mix",
];

/// The shipped derivations, by name.
pub fn builtin_derivations() -> Vec<(&'static str, Derivation)> {
    FIXTURES
        .iter()
        .map(|(name, text)| {
            let d = parse_derivation(text).unwrap_or_else(|e| panic!("fixture {name}: {e}"));
            (*name, d)
        })
        .collect()
}

/// The source text of a shipped derivation.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{print, v};

    fn b(pairs: &[(&str, Binding)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn instances() {
        let f = axiom_instance("A1", &b(&[("x", Binding::Var(v("y")))])).unwrap();
        assert_eq!(print(&f), "y = y");
        let f = axiom_instance("A16", &b(&[("b1", Binding::Nat(2)), ("b2", Binding::Nat(3))])).unwrap();
        assert_eq!(f, parse("not size>=2 * not size>=3 -> not size>=4").unwrap());
        let f = axiom_instance("WandSize", &b(&[("X", Binding::Set(vec![v("x"), v("y")]))])).unwrap();
        assert_eq!(f, parse("(size=1 /\\ not alloc(x) /\\ not alloc(y)) -o true").unwrap());
        let f = axiom_instance("A2", &b(&[
            ("phi", Binding::Formula(parse("y |-> z").unwrap())),
            ("x", Binding::Var(v("x"))),
            ("y", Binding::Var(v("y"))),
        ]))
        .unwrap();
        assert_eq!(print(&f), "y |-> z /\\ x = y -> x |-> z");
    }

    #[test]
    fn instance_errors() {
        assert!(matches!(axiom_instance("A99", &Bindings::new()), Err(HilbertError::UnknownSchema(_))));
        assert!(matches!(
            axiom_instance("A1", &b(&[("x", Binding::Nat(1))])),
            Err(HilbertError::KindMismatch { .. })
        ));
        assert!(matches!(
            axiom_instance("A14", &b(&[("phi", Binding::Formula(Formula::Emp))])),
            Err(HilbertError::SideCondition { .. })
        ));
        assert!(axiom_instance("A14", &b(&[("phi", Binding::Formula(parse("size >= 1").unwrap()))])).is_ok());
        assert!(matches!(axiom_instance("A1", &Bindings::new()), Err(HilbertError::MissingBinding { .. })));
    }

    #[test]
    fn mp_direction() {
        let d = parse_derivation("1. x = x ; axiom A1\n2. x = x -> (y = y -> x = x) ; pc\n3. y = y -> x = x ; mp 2 1\n").unwrap();
        assert!(check_derivation(&d).ok);
        let d = parse_derivation("1. y = y ; axiom A1\n2. x = x -> y = y ; pc 1\n3. x = x ; mp 2 1\n").unwrap();
        let r = check_derivation(&d);
        assert_eq!(r.failing_step, Some(3));
        assert!(r.reason.contains("antecedent"), "{}", r.reason);
    }

    #[test]
    fn def_modulo_ac() {
        let d = parse_derivation("1. size >= 1 * size >= 1 -> size >= 1 * size >= 1 ; pc\n2. size >= 1 * size >= 1 -> size >= 2 ; def 1\n").unwrap();
        assert!(check_derivation(&d).ok);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_derivation("1 x = x ; pc").unwrap_err().line, 1);
        assert!(parse_derivation("# c\n\n2. x = x ; pc").is_err());
        assert!(parse_derivation("1. x = ; pc").is_err());
        assert!(parse_derivation("1. x = x ; frobnicate").is_err());
        let d = parse_derivation("1. x = x ; axiom A1[x=x]\n").unwrap();
        assert!(check_derivation(&d).ok);
    }

    #[test]
    fn forward_premise_rejected() {
        let d = parse_derivation("1. x = x ; pc 1\n").unwrap();
        assert_eq!(check_derivation(&d).failing_step, Some(1));
    }

    #[test]
    fn fixtures_check() {
        for (name, d) in builtin_derivations() {
            let r = check_derivation(&d);
            assert!(r.ok, "{name}: {r}");
        }
    }

    #[test]
    fn index_mutation() {
        let mut d = builtin_derivations().into_iter().find(|(n, _)| *n == "wand-not-two").unwrap().1;
        assert_eq!(d.steps.len(), 6);
        assert_eq!(check_step(&d, 6), Ok(()));
        d.steps[3].formula = parse("not size >= 1 * not size >= 2 -> not size >= 3").unwrap();
        assert_eq!(check_derivation(&d).failing_step, Some(4));
    }
}
