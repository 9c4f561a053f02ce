//! Bottom-clause construction over dirty data.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::constraints::{find_cfd_violations, Cell, Cfd, ConstraintSet};
use crate::logic::{
    apply_repair_literal, condition_holds, Atom, AtomKind, Clause, EqClosure, Literal, Origin,
    Pred, RepairLit, Term,
};
use crate::store::{Database, Mode, Value};
use crate::textsim::{AttrRef, PairKey, SimilarityIndex};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SaturationError {
    #[error("invalid saturation config: {0}")]
    InvalidConfig(&'static str),
    #[error("CFD repair injection did not reach a fixpoint within {0} rounds")]
    FixpointCap(usize),
    #[error("example has {found} values, target relation has arity {expected}")]
    ExampleArity { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaturationConfig {
    pub d: usize,
    pub sample_size: usize,
    pub rng_seed: u64,
    pub cfd_fixpoint_cap: usize,
}

impl Default for SaturationConfig {
    fn default() -> Self {
        SaturationConfig {
            d: 3,
            sample_size: 10,
            rng_seed: 0,
            cfd_fixpoint_cap: 16,
        }
    }
}

impl SaturationConfig {
    pub fn validate(&self) -> Result<(), SaturationError> {
        if self.d == 0 {
            return Err(SaturationError::InvalidConfig("d must be positive"));
        }
        if self.sample_size == 0 {
            return Err(SaturationError::InvalidConfig(
                "sample_size must be positive",
            ));
        }
        if self.cfd_fixpoint_cap == 0 {
            return Err(SaturationError::InvalidConfig(
                "cfd_fixpoint_cap must be positive",
            ));
        }
        Ok(())
    }
}

/// Relation index and attribute index.
type Position = (usize, usize);

/// Keeps everything when there is room, otherwise a uniform subset of exactly
/// `sample_size` elements in their original order.
pub fn naive_sample<T: Clone, R: Rng + ?Sized>(
    candidates: &[T],
    sample_size: usize,
    rng: &mut R,
) -> Vec<T> {
    if candidates.len() <= sample_size {
        return candidates.to_vec();
    }
    let mut picked = rand::seq::index::sample(rng, candidates.len(), sample_size).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| candidates[i].clone()).collect()
}

/// Independent random stream for one example: the seed mixed with an FNV-1a hash
/// of the example's values.
pub fn example_rng(seed: u64, example: &[Value]) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in example {
        for b in v.bytes().chain([0xff]) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Exact,
    Sim {
        left: Value,
        right: Value,
        md: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gathered {
    pub relation: usize,
    pub row: usize,
    pub provenance: Provenance,
}

/// Tuples reachable from an example, in discovery order, and the known constants.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelevantSet {
    pub tuples: Vec<Gathered>,
    pub constants: BTreeSet<Value>,
}

/// Declared modes, except that free attributes mentioned by a CFD become join attributes.
pub fn effective_modes(db: &Database, cfds: &[Cfd]) -> Vec<Vec<Mode>> {
    let schema = db.schema();
    let mut modes: Vec<Vec<Mode>> = schema
        .relations()
        .iter()
        .map(|r| r.attributes.iter().map(|a| a.mode).collect())
        .collect();
    for cfd in cfds {
        if let Some(r) = schema.index_of(&cfd.relation) {
            for &p in cfd.lhs_pos.iter().chain([&cfd.rhs_pos]) {
                if modes[r][p] == Mode::Free {
                    modes[r][p] = Mode::Join;
                }
            }
        }
    }
    modes
}

struct SimLink {
    key: PairKey,
    me: AttrRef,
    partner: (usize, usize),
}

/// For every (relation, attribute) the MD left-hand pairs it takes part in.
fn sim_links(db: &Database, cs: &ConstraintSet) -> HashMap<(usize, usize), Vec<SimLink>> {
    let schema = db.schema();
    let mut out: HashMap<(usize, usize), Vec<SimLink>> = HashMap::new();
    let mut seen = BTreeSet::new();
    for md in &cs.mds {
        for (l, r) in &md.lhs {
            let key = (l.clone(), r.clone());
            let (Ok(lp), Ok(rp)) = (
                schema.resolve(&l.relation, &l.attribute),
                schema.resolve(&r.relation, &r.attribute),
            ) else {
                continue;
            };
            for (me, mine, partner) in [(r, rp, lp), (l, lp, rp)] {
                if seen.insert((key.clone(), mine)) {
                    out.entry(mine).or_default().push(SimLink {
                        key: key.clone(),
                        me: me.clone(),
                        partner,
                    });
                }
            }
        }
    }
    out
}

fn check_example(db: &Database, e: &[Value]) -> Result<(), SaturationError> {
    let expected = db.target_decl().arity();
    if e.len() != expected {
        return Err(SaturationError::ExampleArity {
            expected,
            found: e.len(),
        });
    }
    Ok(())
}

/// Gathers the tuples connected to `e` by exact joins on join attributes and by
/// similarity matches along MD attribute pairs, for `cfg.d` rounds.
pub fn collect_relevant(
    e: &[Value],
    db: &Database,
    cs: &ConstraintSet,
    idx: &SimilarityIndex,
    cfg: &SaturationConfig,
) -> Result<RelevantSet, SaturationError> {
    cfg.validate()?;
    check_example(db, e)?;
    let mut rng = example_rng(cfg.rng_seed, e);
    let schema = db.schema();
    let modes = effective_modes(db, &cs.cfds);
    let links = sim_links(db, cs);
    let target = db.target();
    let mut values: Vec<Vec<BTreeSet<Value>>> = schema
        .relations()
        .iter()
        .map(|r| vec![BTreeSet::new(); r.arity()])
        .collect();
    let mut set = RelevantSet::default();
    for (a, v) in e.iter().enumerate() {
        values[target][a].insert(v.clone());
        if modes[target][a].shares_values() {
            set.constants.insert(v.clone());
        }
    }
    let mut taken: Vec<Vec<bool>> = (0..schema.relations().len())
        .map(|r| vec![false; db.rows(r).len()])
        .collect();
    for _ in 0..cfg.d {
        for (r, decl) in schema.relations().iter().enumerate() {
            if r == target {
                continue;
            }
            for a in 0..decl.arity() {
                let mut found: BTreeMap<usize, Provenance> = BTreeMap::new();
                if modes[r][a] == Mode::Join {
                    for row in db.select_eq_at(r, a, &set.constants) {
                        found.insert(row, Provenance::Exact);
                    }
                }
                for (li, link) in links.get(&(r, a)).into_iter().flatten().enumerate() {
                    let md = cs
                        .mds
                        .iter()
                        .position(|m| {
                            m.lhs
                                .iter()
                                .any(|(l, rr)| (l, rr) == (&link.key.0, &link.key.1))
                        })
                        .unwrap_or(li);
                    for v in &values[link.partner.0][link.partner.1] {
                        for (right, _) in idx.matches_from(&link.key, &link.me, v) {
                            for row in db.select_eq_at(r, a, &BTreeSet::from([right.clone()])) {
                                found.entry(row).or_insert_with(|| Provenance::Sim {
                                    left: v.clone(),
                                    right: right.clone(),
                                    md,
                                });
                            }
                        }
                    }
                }
                let fresh: Vec<(usize, Provenance)> = found
                    .into_iter()
                    .filter(|(row, _)| !taken[r][*row])
                    .collect();
                for (row, provenance) in naive_sample(&fresh, cfg.sample_size, &mut rng) {
                    taken[r][row] = true;
                    for (b, v) in db.row(r, row).iter().enumerate() {
                        values[r][b].insert(v.clone());
                        if modes[r][b].shares_values() {
                            set.constants.insert(v.clone());
                        }
                    }
                    set.tuples.push(Gathered {
                        relation: r,
                        row,
                        provenance,
                    });
                }
            }
        }
    }
    Ok(set)
}

/// An MD whose left-hand side holds between literals `a` and `b` while the
/// right-hand values still differ.
struct MdMatch {
    md: usize,
    a: usize,
    b: usize,
    lhs: Vec<((usize, usize), (usize, usize))>,
    rhs: (usize, usize),
}

struct Builder<'a> {
    db: &'a Database,
    cs: &'a ConstraintSet,
    idx: &'a SimilarityIndex,
    rels: Vec<usize>,
    vals: Vec<Vec<Value>>,
    terms: Vec<Vec<Term>>,
    next: u32,
}

impl Builder<'_> {
    fn fresh(&mut self) -> u32 {
        self.next += 1;
        self.next - 1
    }

    fn md_matches(&self) -> Vec<MdMatch> {
        let schema = self.db.schema();
        let mut out = Vec::new();
        for (m, md) in self.cs.mds.iter().enumerate() {
            let resolve = |a: &AttrRef| schema.resolve(&a.relation, &a.attribute).ok();
            let lhs: Option<Vec<(Position, Position)>> = md
                .lhs
                .iter()
                .map(|(l, r)| Some((resolve(l)?, resolve(r)?)))
                .collect();
            let (Some(lhs), Some(c), Some(d)) = (lhs, resolve(&md.rhs.0), resolve(&md.rhs.1))
            else {
                continue;
            };
            let (r1, r2) = (c.0, d.0);
            let symmetric = r1 == r2 && c.1 == d.1 && lhs.iter().all(|(l, r)| l.1 == r.1);
            for a in (0..self.rels.len()).filter(|&i| self.rels[i] == r1) {
                for b in (0..self.rels.len()).filter(|&j| self.rels[j] == r2) {
                    if a == b || (symmetric && b < a) || self.vals[a][c.1] == self.vals[b][d.1] {
                        continue;
                    }
                    let similar = md.lhs.iter().zip(&lhs).all(|((kl, kr), (l, r))| {
                        let (va, vb) = (&self.vals[a][l.1], &self.vals[b][r.1]);
                        va == vb || self.idx.score(&(kl.clone(), kr.clone()), va, vb).is_some()
                    });
                    if similar {
                        out.push(MdMatch {
                            md: m,
                            a,
                            b,
                            lhs: lhs.clone(),
                            rhs: (c.1, d.1),
                        });
                    }
                }
            }
        }
        out
    }

    /// Occurrences taking part in a value-level CFD violation: every attribute of
    /// any CFD on the relation, in both literals of each violating pair.
    fn cfd_participants(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        let schema = self.db.schema();
        for cfd in &self.cs.cfds {
            let Some(r) = schema.index_of(&cfd.relation) else {
                continue;
            };
            let positions: BTreeSet<usize> = self
                .cs
                .cfds
                .iter()
                .filter(|o| o.relation == cfd.relation)
                .flat_map(|o| o.lhs_pos.iter().copied().chain([o.rhs_pos]))
                .collect();
            let lits: Vec<usize> = (1..self.rels.len())
                .filter(|&i| self.rels[i] == r)
                .collect();
            for (x, &i) in lits.iter().enumerate() {
                for &j in &lits[x + 1..] {
                    let (a, b) = (&self.vals[i], &self.vals[j]);
                    if cfd.tuples_violate(a, b) && a[cfd.rhs_pos] != b[cfd.rhs_pos] {
                        for &p in &positions {
                            out.insert((i, p));
                            out.insert((j, p));
                        }
                    }
                }
            }
        }
        out
    }

    /// Gives participating occurrences their own variables and links every copy of
    /// a term with induced equality literals.
    fn split(&mut self, participating: &BTreeSet<(usize, usize)>) -> Vec<Literal> {
        let mut occurrences: BTreeMap<Term, Vec<(usize, usize)>> = BTreeMap::new();
        for (i, row) in self.terms.iter().enumerate() {
            for (p, t) in row.iter().enumerate() {
                occurrences.entry(t.clone()).or_default().push((i, p));
            }
        }
        let mut links = Vec::new();
        for (tau, occ) in occurrences {
            if !occ.iter().any(|o| participating.contains(o)) {
                continue;
            }
            let is_const = !tau.is_var();
            if !is_const && occ.len() < 2 {
                continue;
            }
            let head_part = occ.iter().any(|o| o.0 == 0 && participating.contains(o));
            let mut copies: Vec<Term> = Vec::new();
            let mut shared: Option<Term> = None;
            for &(i, p) in &occ {
                if i == 0 {
                    continue;
                }
                if participating.contains(&(i, p)) {
                    let v = Term::Var(self.fresh());
                    copies.push(v.clone());
                    self.terms[i][p] = v;
                } else if head_part {
                    let w = match &shared {
                        Some(w) => w.clone(),
                        None => {
                            let w = Term::Var(self.fresh());
                            copies.push(w.clone());
                            shared = Some(w.clone());
                            w
                        }
                    };
                    self.terms[i][p] = w;
                }
            }
            let keeps_original = self.terms.iter().flatten().any(|t| *t == tau);
            if is_const {
                for v in &copies {
                    links.push(Literal::Eq(v.clone(), tau.clone()));
                }
                if head_part {
                    clique(&copies, &mut links);
                }
            } else {
                let mut all = copies;
                if keeps_original {
                    all.insert(0, tau.clone());
                }
                clique(&all, &mut links);
            }
        }
        links
    }
}

fn clique(terms: &[Term], out: &mut Vec<Literal>) {
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            out.push(Literal::Eq(a.clone(), b.clone()));
        }
    }
}

/// Builds the bottom clause of `e` from its relevant tuples. With `ground` set,
/// constants are kept and only split occurrences become variables.
pub fn build_bottom_clause(
    e: &[Value],
    relevant: &RelevantSet,
    db: &Database,
    cs: &ConstraintSet,
    idx: &SimilarityIndex,
    cfg: &SaturationConfig,
    ground: bool,
) -> Result<Clause, SaturationError> {
    check_example(db, e)?;
    let modes = effective_modes(db, &cs.cfds);
    let mut rels = vec![db.target()];
    let mut vals = vec![e.to_vec()];
    for g in &relevant.tuples {
        rels.push(g.relation);
        vals.push(db.row(g.relation, g.row).to_vec());
    }
    let mut b = Builder {
        db,
        cs,
        idx,
        rels,
        vals,
        terms: Vec::new(),
        next: 0,
    };
    let mut var_of: HashMap<Value, u32> = HashMap::new();
    let mut terms = Vec::with_capacity(b.vals.len());
    for (i, row) in b.vals.iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        for (p, v) in row.iter().enumerate() {
            let t = if ground {
                Term::Const(v.clone())
            } else {
                match modes[b.rels[i]][p] {
                    Mode::Constant => Term::Const(v.clone()),
                    Mode::Join | Mode::Output => {
                        Term::Var(*var_of.entry(v.clone()).or_insert_with(|| {
                            b.next += 1;
                            b.next - 1
                        }))
                    }
                    Mode::Free => {
                        b.next += 1;
                        Term::Var(b.next - 1)
                    }
                }
            };
            out.push(t);
        }
        terms.push(out);
    }
    b.terms = terms;

    let matches = b.md_matches();
    let mut participating = b.cfd_participants();
    for m in &matches {
        participating.insert((m.a, m.rhs.0));
        participating.insert((m.b, m.rhs.1));
    }
    let links = b.split(&participating);

    let schema = db.schema();
    let mut body: Vec<Literal> = (1..b.rels.len())
        .map(|i| {
            Literal::Rel(Pred::new(
                &schema.relations()[b.rels[i]].name,
                b.terms[i].clone(),
            ))
        })
        .collect();
    for m in &matches {
        let cond: Vec<Atom> = m
            .lhs
            .iter()
            .map(|(l, r)| {
                Atom::new(
                    AtomKind::Sim,
                    b.terms[m.a][l.1].clone(),
                    b.terms[m.b][r.1].clone(),
                )
            })
            .collect();
        for at in &cond {
            body.push(Literal::Sim(at.a.clone(), at.b.clone()));
        }
        let (vx, vt) = (b.fresh(), b.fresh());
        for (target, replacement) in [
            (b.terms[m.a][m.rhs.0].clone(), vx),
            (b.terms[m.b][m.rhs.1].clone(), vt),
        ] {
            body.push(Literal::Repair(RepairLit {
                cond: cond.clone(),
                target,
                replacement,
                origin: Origin::Md(m.md),
            }));
        }
        body.push(Literal::Eq(Term::Var(vx), Term::Var(vt)));
    }
    body.extend(links);
    for cfd in &cs.cfds {
        let Some(r) = schema.index_of(&cfd.relation) else {
            continue;
        };
        let cells = cfd
            .lhs_pos
            .iter()
            .copied()
            .chain([cfd.rhs_pos])
            .zip(&cfd.pattern);
        for (p, cell) in cells {
            let Cell::Const(c) = cell else { continue };
            for i in (1..b.rels.len()).filter(|&i| b.rels[i] == r) {
                if b.vals[i][p] == *c && b.terms[i][p].is_var() {
                    body.push(Literal::Eq(b.terms[i][p].clone(), Term::Const(c.clone())));
                }
            }
        }
    }
    let head = Pred::new(&db.target_decl().name, b.terms[0].clone());
    let mut clause = Clause::new(head, body);
    clause.dedup_body();
    inject_cfd_repairs(&clause, &cs.cfds, cfg.cfd_fixpoint_cap)
}

fn swap_present(c: &Clause, k: usize, z: &Term, t: &Term) -> bool {
    c.body.iter().filter_map(Literal::as_repair).any(|r| {
        r.origin == Origin::Cfd(k)
            && ((r.target == *z && Term::Var(r.replacement) == *t)
                || (r.target == *t && Term::Var(r.replacement) == *z))
    })
}

/// Adds repair literals for every CFD violation of `c`, including violations that
/// appear once a single existing repair literal is applied, until nothing new is found.
pub fn inject_cfd_repairs(c: &Clause, cfds: &[Cfd], cap: usize) -> Result<Clause, SaturationError> {
    let mut out = c.clone();
    if cfds.is_empty() {
        return Ok(out);
    }
    let mut next = out.next_var();
    for _ in 0..cap {
        let mut scans = vec![out.clone()];
        for (i, l) in out.body.iter().enumerate() {
            if let Literal::Repair(r) = l {
                if condition_holds(&r.cond, &out) {
                    scans.push(
                        apply_repair_literal(&out, i).expect("index points at a repair literal"),
                    );
                }
            }
        }
        let mut added = false;
        for h in &scans {
            let closure = EqClosure::of(&h.body);
            for (k, cfd) in cfds.iter().enumerate() {
                for v in find_cfd_violations(&h.body, cfd, &closure) {
                    let (z, t) = v.rhs.clone();
                    if !z.is_var()
                        || !t.is_var()
                        || closure.same(&z, &t)
                        || swap_present(&out, k, &z, &t)
                    {
                        continue;
                    }
                    let (Some(a), Some(b)) = (h.body[v.first].as_rel(), h.body[v.second].as_rel())
                    else {
                        continue;
                    };
                    let (a, b) = (a.args.clone(), b.args.clone());
                    let mut cond: Vec<Atom> = Vec::new();
                    for (&p, cell) in cfd.lhs_pos.iter().zip(&cfd.pattern) {
                        cond.push(Atom::new(AtomKind::Eq, a[p].clone(), b[p].clone()));
                        if let Cell::Const(cv) = cell {
                            let cv = Term::Const(cv.clone());
                            if a[p] != cv {
                                cond.push(Atom::new(AtomKind::Eq, a[p].clone(), cv));
                            }
                        }
                    }
                    cond.push(Atom::new(AtomKind::Neq, z.clone(), t.clone()));
                    let origin = Origin::Cfd(k);
                    for (target, repl) in [(&z, &t), (&t, &z)] {
                        out.body.push(Literal::Repair(RepairLit {
                            cond: cond.clone(),
                            target: target.clone(),
                            replacement: repl.as_var().expect("checked above"),
                            origin,
                        }));
                    }
                    for &p in &cfd.lhs_pos {
                        for (mine, other) in [(&a, &b), (&b, &a)] {
                            let v = next;
                            next += 1;
                            let mut own = cond.clone();
                            own.push(Atom::new(AtomKind::Neq, Term::Var(v), other[p].clone()));
                            out.body.push(Literal::Repair(RepairLit {
                                cond: own,
                                target: mine[p].clone(),
                                replacement: v,
                                origin,
                            }));
                        }
                    }
                    added = true;
                }
            }
        }
        if !added {
            return Ok(out);
        }
    }
    Err(SaturationError::FixpointCap(cap))
}

/// Variabilized bottom clause `C_e`.
pub fn bottom_clause(
    e: &[Value],
    db: &Database,
    cs: &ConstraintSet,
    idx: &SimilarityIndex,
    cfg: &SaturationConfig,
) -> Result<Clause, SaturationError> {
    let rel = collect_relevant(e, db, cs, idx, cfg)?;
    build_bottom_clause(e, &rel, db, cs, idx, cfg, false)
}

/// Ground bottom clause `G_e`, the target of coverage tests.
pub fn ground_bottom_clause(
    e: &[Value],
    db: &Database,
    cs: &ConstraintSet,
    idx: &SimilarityIndex,
    cfg: &SaturationConfig,
) -> Result<Clause, SaturationError> {
    let rel = collect_relevant(e, db, cs, idx, cfg)?;
    build_bottom_clause(e, &rel, db, cs, idx, cfg, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::parse_constraints;
    use crate::logic::{isomorphic, parse_clause};
    use crate::store::Schema;
    use proptest::prelude::*;

    use crate::fixtures::{ex, no_sampling, paper_db, sigma2};

    #[test]
    fn relevant_tuples_of_the_running_example() {
        let db = paper_db();
        let cs = sigma2(&db);
        let idx = SimilarityIndex::build(
            &db,
            &[ex("Superbad"), ex("Zoolander")],
            &cs.mds,
            Default::default(),
        );
        let rel = collect_relevant(&ex("Superbad"), &db, &cs, &idx, &no_sampling()).unwrap();
        let got: BTreeSet<String> = rel
            .tuples
            .iter()
            .map(|g| {
                format!(
                    "{}{:?}",
                    db.schema().relations()[g.relation].name,
                    db.row(g.relation, g.row)
                )
            })
            .collect();
        assert_eq!(got.len(), 6, "{got:?}");
        assert!(got.contains("countries[\"c1\", \"USA\"]"));
        assert!(matches!(rel.tuples[0].provenance, Provenance::Sim { .. }));
    }

    #[test]
    fn bottom_clause_of_the_running_example() {
        let db = paper_db();
        let cs = sigma2(&db);
        let idx = SimilarityIndex::build(&db, &[ex("Superbad")], &cs.mds, Default::default());
        let c = bottom_clause(&ex("Superbad"), &db, &cs, &idx, &no_sampling()).unwrap();
        let want = parse_clause(
            "highGrossing(V0) :- movies(V1,V2,V3), sim(V0,V2), rep[md0]{sim(V0,V2)}(V0,V4), \
             rep[md0]{sim(V0,V2)}(V2,V5), eq(V4,V5), mov2genres(V1,'comedy'), mov2countries(V1,V6), \
             countries(V6,'USA'), englishMovies(V1), mov2releasedate(V1,'August',V7).",
        )
        .unwrap();
        assert!(isomorphic(&c, &want), "{c}");
    }

    #[test]
    fn negative_ground_clause_reaches_its_own_tuples() {
        let db = paper_db();
        let cs = sigma2(&db);
        let idx = SimilarityIndex::build(&db, &[ex("Orphanage")], &cs.mds, Default::default());
        let g = ground_bottom_clause(&ex("Orphanage"), &db, &cs, &idx, &no_sampling()).unwrap();
        let text = g.to_string();
        assert!(text.contains("mov2genres('m3','drama')"), "{text}");
        assert!(text.contains("countries('c2','Spain')"), "{text}");
    }

    #[test]
    fn unmatched_example_gives_head_only_clause() {
        let db = paper_db();
        let cs = sigma2(&db);
        let idx = SimilarityIndex::empty(Default::default());
        let c = bottom_clause(&ex("Nothing"), &db, &cs, &idx, &no_sampling()).unwrap();
        assert_eq!(c.to_string(), "highGrossing(V0).");
        let bad = SaturationConfig {
            d: 0,
            ..no_sampling()
        };
        assert!(bottom_clause(&ex("x"), &db, &cs, &idx, &bad).is_err());
    }

    fn locale() -> (Database, ConstraintSet) {
        let schema =
            Schema::parse("h(title:text)\nloc(title:text, language:text:const, country:text)")
                .unwrap();
        let db = Database::from_rows(
            schema,
            "h",
            &[
                ("loc", vec!["Bait", "English", "USA"]),
                ("loc", vec!["Bait", "English", "Ireland"]),
            ],
        )
        .unwrap();
        let cs = parse_constraints(
            "cfd: loc : title, language -> country : (_, 'English' || _)",
            db.schema(),
        )
        .unwrap();
        (db, cs)
    }

    #[test]
    fn cfd_violation_gets_swap_and_lhs_repairs() {
        let (db, cs) = locale();
        let idx = SimilarityIndex::empty(Default::default());
        let c = bottom_clause(&ex("Bait"), &db, &cs, &idx, &no_sampling()).unwrap();
        let repairs: Vec<&RepairLit> = c.body.iter().filter_map(Literal::as_repair).collect();
        assert_eq!(repairs.len(), 2 + 4, "{c}");
        let swaps = repairs
            .iter()
            .filter(|r| {
                r.cond.len() == 4 && matches!(r.cond.last(), Some(a) if a.kind == AtomKind::Neq)
            })
            .count();
        assert_eq!(swaps, 2, "{c}");
        let again = inject_cfd_repairs(&c, &cs.cfds, 16).unwrap();
        assert_eq!(again, c);
        let fixes = crate::logic::repaired_clauses(&c, 256).unwrap();
        assert!(fixes.len() >= 2, "{fixes:?}");
    }

    #[test]
    fn chained_cfds_repair_induced_violations() {
        let schema = Schema::parse("t(a:text)\nr(a:text, b:text, c:text)").unwrap();
        let db = Database::from_rows(
            schema,
            "t",
            &[("r", vec!["x", "y", "z1"]), ("r", vec!["x", "y", "z2"])],
        )
        .unwrap();
        let cs = parse_constraints(
            "cfd: r : a -> b : (_ || _)\ncfd: r : b -> c : (_ || _)",
            db.schema(),
        )
        .unwrap();
        let idx = SimilarityIndex::empty(Default::default());
        let c = bottom_clause(&ex("x"), &db, &cs, &idx, &no_sampling()).unwrap();
        let first: Vec<&RepairLit> = c
            .body
            .iter()
            .filter_map(Literal::as_repair)
            .filter(|r| {
                r.origin == Origin::Cfd(1)
                    && r.cond
                        .iter()
                        .any(|a| a.kind == AtomKind::Neq && a.a == Term::Var(r.replacement))
            })
            .collect();
        assert!(!first.is_empty(), "{c}");
        let replacements: BTreeSet<Term> = first.iter().map(|r| Term::Var(r.replacement)).collect();
        let induced = c.body.iter().filter_map(Literal::as_repair).filter(|r| {
            r.origin == Origin::Cfd(0)
                && r.cond
                    .iter()
                    .any(|a| replacements.contains(&a.a) || replacements.contains(&a.b))
        });
        assert!(induced.count() >= 2, "{c}");
    }

    #[test]
    fn sampling_keeps_small_inputs_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(naive_sample(&[1, 2, 3], 10, &mut rng), vec![1, 2, 3]);
        let s = naive_sample(&(0..50).collect::<Vec<_>>(), 7, &mut rng);
        assert_eq!(s.len(), 7);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sampling_is_uniform() {
        let n = 8;
        let trials = 10_000;
        let mut counts = vec![0usize; n];
        let cands: Vec<usize> = (0..n).collect();
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in naive_sample(&cands, 1, &mut rng) {
                counts[i] += 1;
            }
        }
        let p = 1.0 / n as f64;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - trials as f64 * p).abs() <= 3.0 * sd, "{c}");
        }
    }

    proptest! {
        #[test]
        fn more_rounds_never_lose_literals(seed in 0u64..200, sample in 1usize..4) {
            let db = paper_db();
            let cs = sigma2(&db);
            let idx = SimilarityIndex::build(&db, &[ex("Superbad")], &cs.mds, Default::default());
            let mut prev: Vec<(usize, usize)> = Vec::new();
            for d in 1..4 {
                let cfg = SaturationConfig { d, sample_size: sample, rng_seed: seed, cfd_fixpoint_cap: 16 };
                let rel = collect_relevant(&ex("Superbad"), &db, &cs, &idx, &cfg).unwrap();
                let now: Vec<(usize, usize)> = rel.tuples.iter().map(|g| (g.relation, g.row)).collect();
                prop_assert!(now.starts_with(&prev));
                prev = now;
            }
            let full = collect_relevant(&ex("Superbad"), &db, &cs, &idx, &no_sampling()).unwrap();
            let all: BTreeSet<(usize, usize)> = full.tuples.iter().map(|g| (g.relation, g.row)).collect();
            prop_assert!(prev.iter().all(|t| all.contains(t)));
        }
    }
}
