//! θ-subsumption over clauses with equality, similarity and repair literals, and the
//! positive and negative coverage tests built on it.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::OnceLock;

use crate::logic::{
    apply_repairs_where, repaired_clauses, Atom, AtomKind, Clause, EqClosure, Literal, LogicError,
    RepairLit, Substitution, Term, DEFAULT_REPAIR_CAP,
};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsumptionConfig {
    /// Search-node expansions allowed per single subsumption test.
    pub budget: u64,
    /// Maximum number of repaired clauses enumerated per clause.
    pub repair_cap: usize,
}

impl Default for SubsumptionConfig {
    fn default() -> Self {
        SubsumptionConfig {
            budget: DEFAULT_BUDGET,
            repair_cap: DEFAULT_REPAIR_CAP,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Verdict {
    pub covered: bool,
    pub witness: Option<Substitution>,
    pub budget_exhausted: bool,
    pub cap_exceeded: bool,
}

impl Verdict {
    fn no() -> Self {
        Verdict::default()
    }

    fn capped() -> Self {
        Verdict {
            cap_exceeded: true,
            ..Verdict::default()
        }
    }

    fn absorb_flags(&mut self, other: &Verdict) {
        self.budget_exhausted |= other.budget_exhausted;
        self.cap_exceeded |= other.cap_exceeded;
    }
}

/// For each body literal that is not a repair literal, the repair literals connected to it.
///
/// A repair literal is connected to `L` when its target or replacement occurs in `L`, or
/// in the target or replacement of a repair literal already connected to `L`.
pub fn connected_repairs(c: &Clause) -> Vec<Vec<usize>> {
    let repairs: Vec<(usize, &RepairLit)> = c
        .body
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.as_repair().map(|r| (i, r)))
        .collect();
    c.body
        .iter()
        .map(|l| {
            if l.is_repair() {
                return Vec::new();
            }
            let mut reach: HashSet<Term> = l.terms().into_iter().cloned().collect();
            let mut out: Vec<usize> = Vec::new();
            loop {
                let before = out.len();
                for (i, r) in &repairs {
                    let repl = Term::Var(r.replacement);
                    if !out.contains(i) && (reach.contains(&r.target) || reach.contains(&repl)) {
                        out.push(*i);
                        reach.insert(r.target.clone());
                        reach.insert(repl);
                    }
                }
                if out.len() == before {
                    break;
                }
            }
            out.sort_unstable();
            out
        })
        .collect()
}

/// Keeps MD repair literals and the other literals whose connected repairs are all MD.
pub fn md_part(c: &Clause) -> Clause {
    let conn = connected_repairs(c);
    let body = c
        .body
        .iter()
        .enumerate()
        .filter(|(i, l)| match l {
            Literal::Repair(r) => r.origin.is_md(),
            _ => conn[*i]
                .iter()
                .all(|&j| c.body[j].as_repair().is_some_and(|r| r.origin.is_md())),
        })
        .map(|(_, l)| l.clone())
        .collect();
    Clause::new(c.head.clone(), body)
}

fn has_cfd_repairs(c: &Clause) -> bool {
    c.body
        .iter()
        .any(|l| l.as_repair().is_some_and(|r| !r.origin.is_md()))
}

/// A clause prepared as the right-hand side of subsumption tests, with indexes and
/// lazily derived variants cached for reuse across many candidate clauses.
pub struct Target {
    clause: Clause,
    closure: EqClosure,
    members: HashMap<Term, Vec<Term>>,
    all_terms: Vec<Term>,
    rels: HashMap<(std::sync::Arc<str>, usize), Vec<usize>>,
    sims: Vec<usize>,
    sim_classes: HashSet<(Term, Term)>,
    repairs: Vec<usize>,
    connected: Vec<Vec<usize>>,
    /// Equality closure over the equality literals no repair literal is connected to.
    firm: EqClosure,
    firm_sims: HashSet<(Term, Term)>,
    md: OnceLock<Box<Target>>,
    cfd_branches: OnceLock<Result<Vec<Target>, LogicError>>,
    repaired: OnceLock<Result<Vec<Target>, LogicError>>,
}

impl Target {
    pub fn new(clause: Clause) -> Self {
        let closure = EqClosure::of(&clause.body);
        let mut terms: BTreeSet<Term> = clause.head.args.iter().cloned().collect();
        for l in &clause.body {
            terms.extend(l.terms().into_iter().cloned());
            if let Literal::Repair(r) = l {
                terms.insert(Term::Var(r.replacement));
            }
        }
        let all_terms: Vec<Term> = terms.into_iter().collect();
        let mut members: HashMap<Term, Vec<Term>> = HashMap::new();
        for t in &all_terms {
            members.entry(closure.find(t)).or_default().push(t.clone());
        }
        let mut rels: HashMap<_, Vec<usize>> = HashMap::new();
        let mut sims = Vec::new();
        let mut sim_classes = HashSet::new();
        let mut repairs = Vec::new();
        for (i, l) in clause.body.iter().enumerate() {
            match l {
                Literal::Rel(p) => rels
                    .entry((p.rel.clone(), p.args.len()))
                    .or_default()
                    .push(i),
                Literal::Sim(a, b) => {
                    sims.push(i);
                    let (ra, rb) = (closure.find(a), closure.find(b));
                    sim_classes.insert((rb.clone(), ra.clone()));
                    sim_classes.insert((ra, rb));
                }
                Literal::Repair(_) => repairs.push(i),
                Literal::Eq(..) => {}
            }
        }
        let connected = connected_repairs(&clause);
        let firm_eqs: Vec<Literal> = clause
            .body
            .iter()
            .zip(&connected)
            .filter(|(l, c)| matches!(l, Literal::Eq(..)) && c.is_empty())
            .map(|(l, _)| l.clone())
            .collect();
        let firm = EqClosure::of(&firm_eqs);
        let mut firm_sims = HashSet::new();
        for &i in &sims {
            if let Literal::Sim(a, b) = &clause.body[i] {
                let (ra, rb) = (firm.find(a), firm.find(b));
                firm_sims.insert((rb.clone(), ra.clone()));
                firm_sims.insert((ra, rb));
            }
        }
        Target {
            clause,
            closure,
            members,
            all_terms,
            rels,
            sims,
            sim_classes,
            repairs,
            connected,
            firm,
            firm_sims,
            md: OnceLock::new(),
            cfd_branches: OnceLock::new(),
            repaired: OnceLock::new(),
        }
    }

    pub fn clause(&self) -> &Clause {
        &self.clause
    }

    fn class_of(&self, t: &Term) -> &[Term] {
        self.members
            .get(&self.closure.find(t))
            .map_or(&[], Vec::as_slice)
    }

    fn md(&self) -> &Target {
        self.md
            .get_or_init(|| Box::new(Target::new(md_part(&self.clause))))
    }

    fn cfd_branches(&self, cap: usize) -> &Result<Vec<Target>, LogicError> {
        self.cfd_branches.get_or_init(|| {
            apply_repairs_where(&self.clause, |r| !r.origin.is_md(), cap)
                .map(|cs| cs.into_iter().map(Target::new).collect())
        })
    }

    fn repaired(&self, cap: usize) -> &Result<Vec<Target>, LogicError> {
        self.repaired.get_or_init(|| {
            repaired_clauses(&self.clause, cap).map(|cs| cs.into_iter().map(Target::new).collect())
        })
    }
}

#[derive(Debug, Clone, Default)]
struct Cand {
    binds: Vec<(u32, Term)>,
    image: Option<usize>,
}

struct Search<'a> {
    head: &'a [Term],
    body: &'a [Literal],
    /// Eq and Sim literals of `body` mentioning each variable.
    watch: HashMap<u32, Vec<usize>>,
    t: &'a Target,
    side: bool,
    bind: HashMap<u32, Term>,
    done: Vec<bool>,
    image: Vec<Option<usize>>,
    nodes: u64,
    budget: u64,
    exhausted: bool,
}

impl<'a> Search<'a> {
    fn lookup<'b>(&'b self, v: u32, pending: &'b [(u32, Term)]) -> Option<&'b Term> {
        self.bind
            .get(&v)
            .or_else(|| pending.iter().find(|(w, _)| *w == v).map(|(_, t)| t))
    }

    /// Extends `pending` so that `c` maps to `d`; bound terms compare modulo the
    /// target's equalities unless `exact`.
    fn unify(&self, c: &Term, d: &Term, exact: bool, pending: &mut Vec<(u32, Term)>) -> bool {
        let same = |x: &Term| {
            if exact {
                x == d
            } else {
                self.t.closure.same(x, d)
            }
        };
        match c {
            Term::Const(_) => same(c),
            Term::Var(v) => match self.lookup(*v, pending) {
                Some(x) => same(x),
                None => {
                    pending.push((*v, d.clone()));
                    true
                }
            },
        }
    }

    /// Forward check: no pending binding may falsify an Eq or Sim literal whose other
    /// side is already known.
    fn admissible(&self, pending: &[(u32, Term)]) -> bool {
        pending.iter().all(|(v, _)| {
            self.watch.get(v).is_none_or(|ls| {
                ls.iter().all(|&i| {
                    if self.done[i] {
                        return true;
                    }
                    let (Literal::Eq(a, b) | Literal::Sim(a, b)) = &self.body[i] else {
                        return true;
                    };
                    let val = |t: &Term| match t {
                        Term::Var(w) => self.lookup(*w, pending).cloned(),
                        c => Some(c.clone()),
                    };
                    match (val(a), val(b)) {
                        (Some(x), Some(y)) => match self.body[i] {
                            Literal::Sim(..) => self.sim_holds(&x, &y),
                            _ => self.t.closure.same(&x, &y),
                        },
                        _ => true,
                    }
                })
            })
        })
    }

    fn resolved(&self, t: &Term) -> Option<Term> {
        match t {
            Term::Var(v) => self.bind.get(v).cloned(),
            c => Some(c.clone()),
        }
    }

    fn sim_holds(&self, a: &Term, b: &Term) -> bool {
        let cl = &self.t.closure;
        cl.same(a, b) || self.t.sim_classes.contains(&(cl.find(a), cl.find(b)))
    }

    fn exact_image(&self, a: &Term, b: &Term, sim: bool) -> Option<usize> {
        self.t.clause.body.iter().position(|l| match (l, sim) {
            (Literal::Sim(p, q), true) | (Literal::Eq(p, q), false) => {
                (p == a && q == b) || (p == b && q == a)
            }
            _ => false,
        })
    }

    /// Candidate extensions for body literal `i`, or `None` when the literal is deferred.
    fn candidates(&self, i: usize, allow_deferred: bool) -> Option<Vec<Cand>> {
        match &self.body[i] {
            Literal::Rel(p) => {
                let mut out = Vec::new();
                if let Some(js) = self.t.rels.get(&(p.rel.clone(), p.args.len())) {
                    for &j in js {
                        let Literal::Rel(q) = &self.t.clause.body[j] else {
                            continue;
                        };
                        let mut pending = Vec::new();
                        if p.args
                            .iter()
                            .zip(&q.args)
                            .all(|(a, b)| self.unify(a, b, false, &mut pending))
                            && self.admissible(&pending)
                            && (!self.side
                                || p.args.iter().zip(&q.args).all(|(a, b)| {
                                    self.resolved(a).is_none_or(|x| self.firm(&x, b))
                                }))
                        {
                            let loose = p
                                .args
                                .iter()
                                .zip(&q.args)
                                .filter(|(a, b)| self.resolved(a).is_some_and(|x| &x != *b))
                                .count();
                            out.push((
                                loose,
                                Cand {
                                    binds: pending,
                                    image: Some(j),
                                },
                            ));
                        }
                    }
                }
                // syntactic matches first: closure-only matches tend to fail the side condition
                out.sort_by_key(|(loose, _)| *loose);
                Some(out.into_iter().map(|(_, c)| c).collect())
            }
            Literal::Sim(a, b) | Literal::Eq(a, b) => {
                let sim = matches!(self.body[i], Literal::Sim(..));
                match (self.resolved(a), self.resolved(b)) {
                    (Some(x), Some(y)) => {
                        let ok = if sim {
                            self.sim_holds(&x, &y)
                        } else {
                            self.t.closure.same(&x, &y)
                        };
                        Some(if ok {
                            vec![Cand {
                                binds: Vec::new(),
                                image: self.exact_image(&x, &y, sim),
                            }]
                        } else {
                            Vec::new()
                        })
                    }
                    _ if !allow_deferred => None,
                    (xa, xb) => Some(self.open_pair_candidates(a, b, xa, xb, sim)),
                }
            }
            Literal::Repair(r) => {
                let mut out = Vec::new();
                if r.origin.is_md() {
                    match self.settled_match(r) {
                        None if !allow_deferred => return None,
                        Some(Some(target)) => {
                            let mut pending = Vec::new();
                            if self.unify(&Term::Var(r.replacement), &target, false, &mut pending)
                                && self.admissible(&pending)
                            {
                                out.push(Cand {
                                    binds: pending,
                                    image: None,
                                });
                            }
                        }
                        _ => {}
                    }
                }
                for &j in &self.t.repairs {
                    let Literal::Repair(s) = &self.t.clause.body[j] else {
                        continue;
                    };
                    if r.origin.is_md() != s.origin.is_md() || r.cond.len() != s.cond.len() {
                        continue;
                    }
                    let mut pending = Vec::new();
                    if !self.unify(&r.target, &s.target, true, &mut pending)
                        || !self.unify(
                            &Term::Var(r.replacement),
                            &Term::Var(s.replacement),
                            true,
                            &mut pending,
                        )
                    {
                        continue;
                    }
                    self.match_cond(&r.cond, &s.cond, pending, j, &mut out);
                }
                Some(out)
            }
        }
    }

    /// For a matching repair literal whose target and condition are bound: the target's
    /// image when every condition pair is already equal in the target, so the merge
    /// changes nothing there. `None` while something is unbound.
    fn settled_match(&self, r: &RepairLit) -> Option<Option<Term>> {
        let target = self.resolved(&r.target)?;
        let mut trivial = true;
        for at in &r.cond {
            let (a, b) = (self.resolved(&at.a)?, self.resolved(&at.b)?);
            trivial &= at.kind == AtomKind::Sim && self.t.closure.same(&a, &b);
        }
        Some(trivial.then_some(target))
    }

    fn match_cond(
        &self,
        cs: &[Atom],
        ds: &[Atom],
        pending: Vec<(u32, Term)>,
        j: usize,
        out: &mut Vec<Cand>,
    ) {
        let Some((c, rest)) = cs.split_first() else {
            if !self.admissible(&pending) {
                return;
            }
            out.push(Cand {
                binds: pending,
                image: Some(j),
            });
            return;
        };
        let d = &ds[0];
        if c.kind != d.kind {
            return;
        }
        for (x, y) in [(&d.a, &d.b), (&d.b, &d.a)] {
            let mut p = pending.clone();
            if self.unify(&c.a, x, false, &mut p) && self.unify(&c.b, y, false, &mut p) {
                self.match_cond(rest, &ds[1..], p, j, out);
            }
            if d.a == d.b {
                break;
            }
        }
    }

    fn open_pair_candidates(
        &self,
        a: &Term,
        b: &Term,
        xa: Option<Term>,
        xb: Option<Term>,
        sim: bool,
    ) -> Vec<Cand> {
        let mut pairs: BTreeSet<(Term, Term)> = BTreeSet::new();
        match (&xa, &xb) {
            (Some(x), None) | (None, Some(x)) => {
                let mut others: Vec<Term> = self.t.class_of(x).to_vec();
                if others.is_empty() {
                    others.push(x.clone());
                }
                if sim {
                    for &j in &self.t.sims {
                        if let Literal::Sim(p, q) = &self.t.clause.body[j] {
                            if self.t.closure.same(p, x) {
                                others.extend(self.t.class_of(q).iter().cloned());
                            }
                            if self.t.closure.same(q, x) {
                                others.extend(self.t.class_of(p).iter().cloned());
                            }
                        }
                    }
                }
                for o in others {
                    if xa.is_some() {
                        pairs.insert((x.clone(), o));
                    } else {
                        pairs.insert((o, x.clone()));
                    }
                }
            }
            _ => {
                for t in &self.t.all_terms {
                    for m in self.t.class_of(t) {
                        pairs.insert((t.clone(), m.clone()));
                    }
                }
                // a constant of C satisfies the literal reflexively even when D lacks it
                for l in self.body {
                    for k in l.terms().into_iter().filter(|k| !matches!(k, Term::Var(_))) {
                        pairs.insert((k.clone(), k.clone()));
                    }
                }
                if sim {
                    for &j in &self.t.sims {
                        if let Literal::Sim(p, q) = &self.t.clause.body[j] {
                            for x in self.t.class_of(p) {
                                for y in self.t.class_of(q) {
                                    pairs.insert((x.clone(), y.clone()));
                                    pairs.insert((y.clone(), x.clone()));
                                }
                            }
                        }
                    }
                }
            }
        }
        pairs
            .into_iter()
            .filter_map(|(x, y)| {
                let mut pending = Vec::new();
                (self.unify(a, &x, true, &mut pending)
                    && self.unify(b, &y, true, &mut pending)
                    && self.admissible(&pending))
                .then(|| Cand {
                    binds: pending,
                    image: self.exact_image(&x, &y, sim),
                })
            })
            .collect()
    }

    fn pick(&self) -> Option<(usize, Vec<Cand>)> {
        let mut best: Option<(usize, usize, Vec<Cand>)> = None;
        let mut deferred: Option<usize> = None;
        for i in 0..self.body.len() {
            if self.done[i] {
                continue;
            }
            match self.candidates(i, false) {
                None => {
                    deferred.get_or_insert(i);
                }
                Some(cs) => {
                    let n = cs.len();
                    if n <= 1 {
                        return Some((i, cs));
                    }
                    if best.as_ref().is_none_or(|b| n < b.1) {
                        best = Some((i, n, cs));
                    }
                }
            }
        }
        match (best, deferred) {
            (Some((i, _, cs)), _) => Some((i, cs)),
            (None, Some(i)) => self.candidates(i, true).map(|cs| (i, cs)),
            (None, None) => None,
        }
    }

    /// Whether `x` and `y` are identified without relying on an equality literal that a
    /// repair of the target could remove.
    fn firm(&self, x: &Term, y: &Term) -> bool {
        x == y || self.t.firm.same(x, y)
    }

    fn firm_sim(&self, x: &Term, y: &Term) -> bool {
        let f = &self.t.firm;
        self.firm(x, y) || self.t.firm_sims.contains(&(f.find(x), f.find(y)))
    }

    /// Every match the witness makes modulo equality must survive the target's repairs:
    /// it may only use equality literals with no connected repair literal.
    fn firm_ok(&self) -> bool {
        let d = &self.t.clause;
        let firm = |c: &Term, y: &Term| self.resolved(c).is_some_and(|x| self.firm(&x, y));
        let relaxed: OnceLock<EqClosure> = OnceLock::new();
        if !self.head.iter().zip(&d.head.args).all(|(a, b)| firm(a, b)) {
            return false;
        }
        self.body
            .iter()
            .enumerate()
            .all(|(i, l)| match (l, self.image[i].map(|j| &d.body[j])) {
                (Literal::Rel(p), Some(Literal::Rel(q))) => {
                    p.args.iter().zip(&q.args).all(|(a, b)| firm(a, b))
                }
                (Literal::Repair(r), Some(Literal::Repair(s))) => {
                    r.cond.iter().zip(&s.cond).all(|(x, y)| {
                        (firm(&x.a, &y.a) && firm(&x.b, &y.b))
                            || (firm(&x.a, &y.b) && firm(&x.b, &y.a))
                    })
                }
                (Literal::Eq(a, b) | Literal::Sim(a, b), None) => {
                    let sim = matches!(l, Literal::Sim(..));
                    let (Some(x), Some(y)) = (self.resolved(a), self.resolved(b)) else {
                        return true;
                    };
                    let ok = if sim {
                        self.firm_sim(&x, &y)
                    } else {
                        self.firm(&x, &y)
                    };
                    ok || (self.repaired_here(a, b) && {
                        let cl = relaxed.get_or_init(|| self.relaxed_closure());
                        cl.same(&x, &y)
                            || (sim
                                && d.body.iter().any(|m| match m {
                                    Literal::Sim(p, q) => {
                                        (cl.same(p, &x) && cl.same(q, &y))
                                            || (cl.same(p, &y) && cl.same(q, &x))
                                    }
                                    _ => false,
                                }))
                    })
                }
                _ => true,
            })
    }

    /// Whether a mapped repair literal of the pattern targets `a` or `b`, so that an
    /// equality between them disappears wherever the corresponding repair applies.
    fn repaired_here(&self, a: &Term, b: &Term) -> bool {
        self.body.iter().zip(&self.image).any(|(l, im)| {
            im.is_some()
                && l.as_repair()
                    .is_some_and(|r| r.target == *a || r.target == *b)
        })
    }

    /// Closure over the firm equality literals plus those whose connected repair
    /// literals are all mapped.
    fn relaxed_closure(&self) -> EqClosure {
        let mapped: HashSet<usize> = self.image.iter().flatten().copied().collect();
        let eqs: Vec<Literal> = self
            .t
            .clause
            .body
            .iter()
            .zip(&self.t.connected)
            .filter(|(l, c)| matches!(l, Literal::Eq(..)) && c.iter().all(|r| mapped.contains(r)))
            .map(|(l, _)| l.clone())
            .collect();
        EqClosure::of(&eqs)
    }

    fn side_ok(&self) -> bool {
        if !self.side {
            return true;
        }
        if !self.firm_ok() {
            return false;
        }
        let mapped: HashSet<usize> = self.image.iter().flatten().copied().collect();
        mapped
            .iter()
            .all(|&j| self.t.connected[j].iter().all(|r| mapped.contains(r)))
    }

    fn run(&mut self) -> bool {
        let Some((i, cands)) = self.pick() else {
            return self.side_ok();
        };
        for c in cands {
            self.nodes += 1;
            if self.nodes > self.budget {
                self.exhausted = true;
                return false;
            }
            for (v, t) in &c.binds {
                self.bind.insert(*v, t.clone());
            }
            self.done[i] = true;
            self.image[i] = c.image;
            if self.run() {
                return true;
            }
            self.done[i] = false;
            self.image[i] = None;
            for (v, _) in &c.binds {
                self.bind.remove(v);
            }
            if self.exhausted {
                return false;
            }
        }
        false
    }
}

fn search(c: &Clause, t: &Target, side: bool, budget: u64) -> Verdict {
    let d = &t.clause;
    if c.head.rel != d.head.rel || c.head.args.len() != d.head.args.len() {
        return Verdict::no();
    }
    let mut watch: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, l) in c.body.iter().enumerate() {
        if matches!(l, Literal::Eq(..) | Literal::Sim(..)) {
            for v in l.vars() {
                watch.entry(v).or_default().push(i);
            }
        }
    }
    let mut s = Search {
        head: &c.head.args,
        body: &c.body,
        watch,
        t,
        side,
        bind: HashMap::new(),
        done: vec![false; c.body.len()],
        image: vec![None; c.body.len()],
        nodes: 0,
        budget,
        exhausted: false,
    };
    let mut pending = Vec::new();
    if !c
        .head
        .args
        .iter()
        .zip(&d.head.args)
        .all(|(a, b)| s.unify(a, b, false, &mut pending))
    {
        return Verdict::no();
    }
    s.bind.extend(pending);
    let covered = s.run();
    Verdict {
        covered,
        witness: covered.then(|| s.bind.into_iter().collect()),
        budget_exhausted: s.exhausted,
        cap_exceeded: false,
    }
}

/// Plain θ-subsumption: equality literals hold modulo the target's equality closure and
/// similarity literals hold when a target similarity literal relates the two classes or
/// both sides are equal.
pub fn theta_subsumes(c: &Clause, d: &Clause) -> Verdict {
    theta_subsumes_prepared(c, &Target::new(d.clone()), DEFAULT_BUDGET)
}

pub fn theta_subsumes_prepared(c: &Clause, d: &Target, budget: u64) -> Verdict {
    search(c, d, false, budget)
}

/// θ-subsumption with repair literals matched as literals, requiring every repair literal
/// of `d` connected to a mapped literal to be mapped as well.
pub fn subsumes_with_repairs(c: &Clause, d: &Clause) -> Verdict {
    subsumes_with_repairs_prepared(c, &Target::new(d.clone()), DEFAULT_BUDGET)
}

pub fn subsumes_with_repairs_prepared(c: &Clause, d: &Target, budget: u64) -> Verdict {
    search(c, d, true, budget)
}

/// Whether `c` covers the positive example whose ground bottom clause is `g`.
pub fn covers_positive(c: &Clause, g: &Clause) -> Verdict {
    covers_positive_prepared(c, &Target::new(g.clone()), &SubsumptionConfig::default())
}

pub fn covers_positive_prepared(c: &Clause, g: &Target, cfg: &SubsumptionConfig) -> Verdict {
    let first = search(c, g, true, cfg.budget);
    if first.covered || (!has_cfd_repairs(c) && !has_cfd_repairs(&g.clause)) {
        return first;
    }
    let mut flags = first;
    let second = search(&md_part(c), g.md(), true, cfg.budget);
    flags.absorb_flags(&second);
    if !second.covered {
        return Verdict {
            covered: false,
            witness: None,
            ..flags
        };
    }
    let c_branches = match apply_repairs_where(c, |r| !r.origin.is_md(), cfg.repair_cap) {
        Ok(cs) => cs,
        Err(_) => return Verdict::capped(),
    };
    let g_branches = match g.cfd_branches(cfg.repair_cap) {
        Ok(gs) => gs,
        Err(_) => return Verdict::capped(),
    };
    let mut witness = None;
    for cb in &c_branches {
        let mut hit = false;
        for gb in g_branches {
            let v = search(cb, gb, true, cfg.budget);
            flags.absorb_flags(&v);
            if v.covered {
                witness.get_or_insert(v.witness.unwrap_or_default());
                hit = true;
                break;
            }
        }
        if !hit {
            return Verdict {
                covered: false,
                witness: None,
                ..flags
            };
        }
    }
    Verdict {
        covered: true,
        witness,
        ..flags
    }
}

/// Whether `c` covers the negative example whose ground bottom clause is `g`: some repair
/// of `c` θ-subsumes some repair of `g`.
pub fn covers_negative(c: &Clause, g: &Clause) -> Verdict {
    covers_negative_prepared(c, &Target::new(g.clone()), &SubsumptionConfig::default())
}

pub fn covers_negative_prepared(c: &Clause, g: &Target, cfg: &SubsumptionConfig) -> Verdict {
    let Ok(cs) = repaired_clauses(c, cfg.repair_cap) else {
        return Verdict::capped();
    };
    let Ok(gs) = g.repaired(cfg.repair_cap) else {
        return Verdict::capped();
    };
    let mut flags = Verdict::no();
    for r in &cs {
        for gr in gs {
            let v = search(r, gr, false, cfg.budget);
            if v.covered {
                return v;
            }
            flags.absorb_flags(&v);
        }
    }
    flags
}

/// Renders a witness as `V3=V7,V4='a'`.
pub fn format_witness(w: &Substitution) -> String {
    w.iter()
        .map(|(v, t)| format!("V{v}={t}"))
        .collect::<Vec<_>>()
        .join(",")
}
