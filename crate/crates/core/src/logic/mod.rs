//! Terms, literals and clauses with similarity, equality and repair literals.

mod parse;
mod repair;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::store::Value;

pub use parse::{parse_clause, parse_clauses};
pub use repair::{
    apply_repair_literal, apply_repairs_where, condition_holds, repaired_clauses,
    DEFAULT_REPAIR_CAP,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("body literal {0} is not a repair literal")]
    NotRepair(usize),
    #[error("more than {0} repaired clauses")]
    CapExceeded(usize),
    #[error("clause still contains repair literals")]
    RepairPresent,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(u32),
    Const(Value),
}

impl Term {
    pub fn constant(s: &str) -> Term {
        Term::Const(Arc::from(s))
    }

    pub fn as_var(&self) -> Option<u32> {
        match self {
            Term::Var(v) => Some(*v),
            Term::Const(_) => None,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "V{v}"),
            Term::Const(c) => write!(f, "'{}'", c.replace('\'', "''")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomKind {
    Eq,
    Neq,
    Sim,
}

impl AtomKind {
    pub fn keyword(self) -> &'static str {
        match self {
            AtomKind::Eq => "eq",
            AtomKind::Neq => "neq",
            AtomKind::Sim => "sim",
        }
    }
}

/// A binary comparison inside a repair condition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub kind: AtomKind,
    pub a: Term,
    pub b: Term,
}

impl Atom {
    pub fn new(kind: AtomKind, a: Term, b: Term) -> Self {
        Atom { kind, a, b }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.kind.keyword(), self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Md(usize),
    Cfd(usize),
}

impl Origin {
    pub fn is_md(self) -> bool {
        matches!(self, Origin::Md(_))
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Md(i) => write!(f, "md{i}"),
            Origin::Cfd(i) => write!(f, "cfd{i}"),
        }
    }
}

/// `V_cond(target, replacement)`: replace `target` by `replacement` when `cond` holds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RepairLit {
    pub cond: Vec<Atom>,
    pub target: Term,
    pub replacement: u32,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pred {
    pub rel: Arc<str>,
    pub args: Vec<Term>,
}

impl Pred {
    pub fn new(rel: &str, args: Vec<Term>) -> Self {
        Pred {
            rel: Arc::from(rel),
            args,
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.rel)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Literal {
    Rel(Pred),
    Sim(Term, Term),
    Eq(Term, Term),
    Repair(RepairLit),
}

impl Literal {
    pub fn rel(rel: &str, args: Vec<Term>) -> Self {
        Literal::Rel(Pred::new(rel, args))
    }

    pub fn as_rel(&self) -> Option<&Pred> {
        match self {
            Literal::Rel(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_repair(&self) -> Option<&RepairLit> {
        match self {
            Literal::Repair(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_rel(&self) -> bool {
        matches!(self, Literal::Rel(_))
    }

    pub fn is_repair(&self) -> bool {
        matches!(self, Literal::Repair(_))
    }

    /// Every term mentioned by the literal, repair conditions included.
    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Literal::Rel(p) => p.args.iter().collect(),
            Literal::Sim(a, b) | Literal::Eq(a, b) => vec![a, b],
            Literal::Repair(r) => {
                let mut out = vec![&r.target];
                for at in &r.cond {
                    out.push(&at.a);
                    out.push(&at.b);
                }
                out
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<u32> {
        let mut out: BTreeSet<u32> = self.terms().into_iter().filter_map(Term::as_var).collect();
        if let Literal::Repair(r) = self {
            out.insert(r.replacement);
        }
        out
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Literal {
        match self {
            Literal::Rel(p) => Literal::Rel(Pred {
                rel: p.rel.clone(),
                args: p.args.iter().map(&mut *f).collect(),
            }),
            Literal::Sim(a, b) => Literal::Sim(f(a), f(b)),
            Literal::Eq(a, b) => Literal::Eq(f(a), f(b)),
            Literal::Repair(r) => {
                let cond = r
                    .cond
                    .iter()
                    .map(|at| Atom::new(at.kind, f(&at.a), f(&at.b)))
                    .collect();
                let replacement = match f(&Term::Var(r.replacement)) {
                    Term::Var(v) => v,
                    Term::Const(_) => r.replacement,
                };
                Literal::Repair(RepairLit {
                    cond,
                    target: f(&r.target),
                    replacement,
                    origin: r.origin,
                })
            }
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Rel(p) => write!(f, "{p}"),
            Literal::Sim(a, b) => write!(f, "sim({a},{b})"),
            Literal::Eq(a, b) => write!(f, "eq({a},{b})"),
            Literal::Repair(r) => {
                write!(f, "rep[{}]{{", r.origin)?;
                for (i, at) in r.cond.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{at}")?;
                }
                write!(f, "}}({},V{})", r.target, r.replacement)
            }
        }
    }
}

pub type Substitution = BTreeMap<u32, Term>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause {
    pub head: Pred,
    pub body: Vec<Literal>,
}

impl Clause {
    pub fn new(head: Pred, body: Vec<Literal>) -> Self {
        Clause { head, body }
    }

    pub fn vars(&self) -> BTreeSet<u32> {
        let mut out: BTreeSet<u32> = self.head.args.iter().filter_map(Term::as_var).collect();
        for l in &self.body {
            out.extend(l.vars());
        }
        out
    }

    pub fn next_var(&self) -> u32 {
        self.vars().last().map_or(0, |v| v + 1)
    }

    pub fn has_repairs(&self) -> bool {
        self.body.iter().any(Literal::is_repair)
    }

    pub fn rel_count(&self) -> usize {
        self.body.iter().filter(|l| l.is_rel()).count()
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Clause {
        Clause {
            head: Pred {
                rel: self.head.rel.clone(),
                args: self.head.args.iter().map(&mut *f).collect(),
            },
            body: self.body.iter().map(|l| l.map_terms(f)).collect(),
        }
    }

    /// Variables that occur in the head or in some relation literal.
    pub fn anchored_vars(&self) -> BTreeSet<u32> {
        let mut out: BTreeSet<u32> = self.head.args.iter().filter_map(Term::as_var).collect();
        for l in &self.body {
            if let Literal::Rel(p) = l {
                out.extend(p.args.iter().filter_map(Term::as_var));
            }
        }
        out
    }

    /// Renames variables densely in order of first occurrence.
    pub fn canonical(&self) -> Clause {
        let mut map: HashMap<u32, u32> = HashMap::new();
        let mut order: Vec<u32> = Vec::new();
        let mut visit = |t: &Term| {
            if let Term::Var(v) = t {
                if !map.contains_key(v) {
                    map.insert(*v, order.len() as u32);
                    order.push(*v);
                }
            }
        };
        for t in &self.head.args {
            visit(t);
        }
        for l in &self.body {
            for t in l.terms() {
                visit(t);
            }
            if let Literal::Repair(r) = l {
                visit(&Term::Var(r.replacement));
            }
        }
        self.map_terms(&mut |t| match t {
            Term::Var(v) => Term::Var(map[v]),
            c => c.clone(),
        })
    }

    /// Drops duplicate body literals, keeping first occurrences.
    pub fn dedup_body(&mut self) {
        let mut seen = BTreeSet::new();
        self.body.retain(|l| seen.insert(l.clone()));
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        f.write_str(".")
    }
}

pub fn apply_substitution(c: &Clause, s: &Substitution) -> Clause {
    c.map_terms(&mut |t| match t {
        Term::Var(v) => s.get(v).cloned().unwrap_or_else(|| t.clone()),
        other => other.clone(),
    })
}

/// Reflexive, symmetric, transitive closure of a body's equality literals.
#[derive(Debug, Clone, Default)]
pub struct EqClosure {
    parent: HashMap<Term, Term>,
}

impl EqClosure {
    pub fn of(body: &[Literal]) -> Self {
        let mut c = EqClosure::default();
        for l in body {
            if let Literal::Eq(a, b) = l {
                c.union(a, b);
            }
        }
        c
    }

    pub fn find(&self, t: &Term) -> Term {
        let mut cur = t;
        while let Some(p) = self.parent.get(cur) {
            cur = p;
        }
        cur.clone()
    }

    pub fn union(&mut self, a: &Term, b: &Term) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller term as representative so classes print stably
            if ra < rb {
                self.parent.insert(rb, ra);
            } else {
                self.parent.insert(ra, rb);
            }
        }
    }

    pub fn same(&self, a: &Term, b: &Term) -> bool {
        a == b || self.find(a) == self.find(b)
    }
}

/// Removes body literals that share no variable, directly or transitively,
/// with the head. Repair literals connect through target, replacement and condition.
pub fn prune_disconnected(c: &Clause) -> Clause {
    let mut reached: BTreeSet<u32> = c.head.args.iter().filter_map(Term::as_var).collect();
    let vars: Vec<BTreeSet<u32>> = c.body.iter().map(Literal::vars).collect();
    let mut keep = vec![false; c.body.len()];
    loop {
        let mut changed = false;
        for (i, vs) in vars.iter().enumerate() {
            if !keep[i] && vs.iter().any(|v| reached.contains(v)) {
                keep[i] = true;
                reached.extend(vs.iter().copied());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Clause {
        head: c.head.clone(),
        body: c
            .body
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(l, _)| l.clone())
            .collect(),
    }
}

/// True when the two clauses are equal up to a bijective renaming of variables,
/// comparing bodies as sets.
pub fn isomorphic(a: &Clause, b: &Clause) -> bool {
    let mut a = a.clone();
    let mut b = b.clone();
    a.dedup_body();
    b.dedup_body();
    if a.body.len() != b.body.len()
        || a.head.rel != b.head.rel
        || a.head.args.len() != b.head.args.len()
    {
        return false;
    }
    let mut sig_a: Vec<String> = a.body.iter().map(shape).collect();
    let mut sig_b: Vec<String> = b.body.iter().map(shape).collect();
    sig_a.sort();
    sig_b.sort();
    if sig_a != sig_b {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut bwd = HashMap::new();
    if !bind_all(&a.head.args, &b.head.args, &mut fwd, &mut bwd) {
        return false;
    }
    let mut used = vec![false; b.body.len()];
    iso_search(&a.body, &b.body, 0, &mut used, &mut fwd, &mut bwd)
}

fn shape(l: &Literal) -> String {
    match l {
        Literal::Rel(p) => format!("r:{}:{}", p.rel, p.args.len()),
        Literal::Sim(..) => "s".into(),
        Literal::Eq(..) => "e".into(),
        Literal::Repair(r) => format!("v:{}:{}", r.origin, r.cond.len()),
    }
}

type VarMap = HashMap<u32, u32>;

fn bind(a: &Term, b: &Term, fwd: &mut VarMap, bwd: &mut VarMap) -> bool {
    match (a, b) {
        (Term::Const(x), Term::Const(y)) => x == y,
        (Term::Var(x), Term::Var(y)) => match (fwd.get(x), bwd.get(y)) {
            (Some(m), Some(n)) => m == y && n == x,
            (None, None) => {
                fwd.insert(*x, *y);
                bwd.insert(*y, *x);
                true
            }
            _ => false,
        },
        _ => false,
    }
}

fn bind_all(a: &[Term], b: &[Term], fwd: &mut VarMap, bwd: &mut VarMap) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| bind(x, y, fwd, bwd))
}

fn literal_pairs<'a>(a: &'a Literal, b: &'a Literal) -> Vec<Vec<(&'a Term, &'a Term)>> {
    match (a, b) {
        (Literal::Rel(p), Literal::Rel(q)) if p.rel == q.rel && p.args.len() == q.args.len() => {
            vec![p.args.iter().zip(&q.args).collect()]
        }
        (Literal::Sim(a1, a2), Literal::Sim(b1, b2))
        | (Literal::Eq(a1, a2), Literal::Eq(b1, b2)) => {
            vec![vec![(a1, b1), (a2, b2)], vec![(a1, b2), (a2, b1)]]
        }
        (Literal::Repair(r), Literal::Repair(s))
            if r.origin == s.origin && r.cond.len() == s.cond.len() =>
        {
            let mut options: Vec<Vec<(&Term, &Term)>> = vec![vec![(&r.target, &s.target)]];
            for (x, y) in r.cond.iter().zip(&s.cond) {
                if x.kind != y.kind {
                    return Vec::new();
                }
                let mut next = Vec::new();
                for o in &options {
                    let mut straight = o.clone();
                    straight.extend([(&x.a, &y.a), (&x.b, &y.b)]);
                    let mut swapped = o.clone();
                    swapped.extend([(&x.a, &y.b), (&x.b, &y.a)]);
                    next.push(straight);
                    next.push(swapped);
                }
                options = next;
            }
            options
        }
        _ => Vec::new(),
    }
}

fn iso_search(
    a: &[Literal],
    b: &[Literal],
    i: usize,
    used: &mut [bool],
    fwd: &mut VarMap,
    bwd: &mut VarMap,
) -> bool {
    if i == a.len() {
        return true;
    }
    for j in 0..b.len() {
        if used[j] {
            continue;
        }
        for pairs in literal_pairs(&a[i], &b[j]) {
            let (f0, b0) = (fwd.clone(), bwd.clone());
            let mut ok = pairs.iter().all(|(x, y)| bind(x, y, fwd, bwd));
            if ok {
                if let (Literal::Repair(r), Literal::Repair(s)) = (&a[i], &b[j]) {
                    ok = bind(
                        &Term::Var(r.replacement),
                        &Term::Var(s.replacement),
                        fwd,
                        bwd,
                    );
                }
            }
            if ok {
                used[j] = true;
                if iso_search(a, b, i + 1, used, fwd, bwd) {
                    return true;
                }
                used[j] = false;
            }
            *fwd = f0;
            *bwd = b0;
        }
    }
    false
}

/// Tuples of a clause's canonical database instance plus its seed tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalInstance {
    pub tuples: Vec<(Arc<str>, Vec<Value>)>,
    pub seed: (Arc<str>, Vec<Value>),
}

/// Renders variables as distinct fresh constants `χ<id>`.
pub fn canonical_instance(c: &Clause) -> Result<CanonicalInstance, LogicError> {
    if c.has_repairs() {
        return Err(LogicError::RepairPresent);
    }
    let render = |t: &Term| -> Value {
        match t {
            Term::Var(v) => Arc::from(format!("χ{v}").as_str()),
            Term::Const(s) => s.clone(),
        }
    };
    let tuples = c
        .body
        .iter()
        .filter_map(Literal::as_rel)
        .map(|p| (p.rel.clone(), p.args.iter().map(render).collect()))
        .collect();
    Ok(CanonicalInstance {
        tuples,
        seed: (c.head.rel.clone(), c.head.args.iter().map(render).collect()),
    })
}
