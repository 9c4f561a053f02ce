//! Brute-force reference semantics: repairs of small databases, exhaustive
//! subsumption, entailment between clauses with repair literals, and coverage
//! of definitions evaluated over every repaired instance.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::constraints::{pattern_matches, ConstraintSet};
use crate::logic::{
    isomorphic, prune_disconnected, repaired_clauses, Clause, EqClosure, Literal, LogicError, Term,
};
use crate::saturation::{bottom_clause, SaturationConfig, SaturationError};
use crate::store::{Database, Schema, StoreError, Value};
use crate::textsim::SimilarityIndex;

pub const DEFAULT_INSTANCE_CAP: usize = 64;
const STATE_BUDGET: usize = 1 << 14;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("more than {0} repaired instances")]
    CapExceeded(usize),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Saturation(#[from] SaturationError),
}

/// Fresh values are written `⟨..⟩` and never collide with base constants.
pub fn is_fresh(v: &str) -> bool {
    v.starts_with('⟨')
}

/// The fresh value `v(a,b)` created by enforcing an MD; symmetric in its arguments.
pub fn merged_value(a: &str, b: &str) -> Value {
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    Value::from(format!("⟨{x}|{y}⟩").as_str())
}

fn escaped_value(old: &str, tuple: &[Value]) -> Value {
    Value::from(format!("⟨≠{old}@{}⟩", tuple.join(",")).as_str())
}

/// Tuples per relation index, each relation kept sorted and duplicate free.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Instance {
    pub rows: Vec<Vec<Vec<Value>>>,
}

impl Instance {
    /// The stored tuples of `db` plus `examples` as rows of the target relation.
    pub fn of(db: &Database, examples: &[Vec<Value>]) -> Self {
        let n = db.schema().relations().len();
        let rows = (0..n)
            .map(|r| {
                if r == db.target() {
                    examples.to_vec()
                } else {
                    db.rows(r).to_vec()
                }
            })
            .collect();
        let mut out = Instance { rows };
        out.normalize();
        out
    }

    fn normalize(&mut self) {
        for r in &mut self.rows {
            r.sort();
            r.dedup();
        }
    }

    /// Splits into a database and the target relation's rows.
    pub fn to_database(
        &self,
        schema: &Schema,
        target: &str,
    ) -> Result<(Database, Vec<Vec<Value>>), OracleError> {
        let mut db = Database::empty(schema.clone(), target)?;
        let t = db.target();
        for (r, rows) in self.rows.iter().enumerate() {
            if r == t {
                continue;
            }
            let name = schema.relations()[r].name.clone();
            for row in rows {
                db.insert(&name, row.clone())?;
            }
        }
        Ok((db, self.rows[t].clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    /// Both right-hand cells set to a fresh value.
    Merge {
        md: usize,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A CFD violation fixed by setting `cell` to `value`.
    CfdFix {
        cfd: usize,
        relation: usize,
        row: usize,
        attr: usize,
        value: Value,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairedInstance {
    pub instance: Instance,
    pub lineage: Vec<Op>,
}

struct Ctx<'a> {
    schema: &'a Schema,
    cs: &'a ConstraintSet,
    idx: &'a SimilarityIndex,
}

impl Ctx<'_> {
    fn pos(&self, relation: &str, attribute: &str) -> (usize, usize) {
        self.schema
            .resolve(relation, attribute)
            .expect("constraints were checked against the schema")
    }

    fn similar(
        &self,
        key: &(crate::textsim::AttrRef, crate::textsim::AttrRef),
        a: &Value,
        b: &Value,
    ) -> bool {
        a == b || (!is_fresh(a) && !is_fresh(b) && self.idx.score(key, a, b).is_some())
    }

    fn ops(&self, inst: &Instance) -> Vec<Op> {
        let mut out = Vec::new();
        for (k, md) in self.cs.mds.iter().enumerate() {
            let (r, c) = self.pos(&md.rhs.0.relation, &md.rhs.0.attribute);
            let (s, d) = self.pos(&md.rhs.1.relation, &md.rhs.1.attribute);
            let lhs: Vec<(usize, usize, _)> = md
                .lhs
                .iter()
                .map(|(a, b)| {
                    (
                        self.pos(&a.relation, &a.attribute).1,
                        self.pos(&b.relation, &b.attribute).1,
                        (a.clone(), b.clone()),
                    )
                })
                .collect();
            for (i, t1) in inst.rows[r].iter().enumerate() {
                for (j, t2) in inst.rows[s].iter().enumerate() {
                    if (r, i) == (s, j) || t1[c] == t2[d] {
                        continue;
                    }
                    if lhs
                        .iter()
                        .all(|(a, b, key)| self.similar(key, &t1[*a], &t2[*b]))
                    {
                        out.push(Op::Merge {
                            md: k,
                            left: (r, i),
                            right: (s, j),
                        });
                    }
                }
            }
        }
        for (k, cfd) in self.cs.cfds.iter().enumerate() {
            let Some(r) = self.schema.index_of(&cfd.relation) else {
                continue;
            };
            let rows = &inst.rows[r];
            for i in 0..rows.len() {
                for j in i + 1..rows.len() {
                    let (a, b) = (&rows[i], &rows[j]);
                    let lhs_ok = cfd
                        .lhs_pos
                        .iter()
                        .zip(&cfd.pattern)
                        .all(|(&p, cell)| a[p] == b[p] && pattern_matches(&a[p], cell));
                    if !lhs_ok || a[cfd.rhs_pos] == b[cfd.rhs_pos] {
                        continue;
                    }
                    let fix = |row: usize, attr: usize, value: Value| Op::CfdFix {
                        cfd: k,
                        relation: r,
                        row,
                        attr,
                        value,
                    };
                    out.push(fix(i, cfd.rhs_pos, b[cfd.rhs_pos].clone()));
                    out.push(fix(j, cfd.rhs_pos, a[cfd.rhs_pos].clone()));
                    for &p in &cfd.lhs_pos {
                        out.push(fix(i, p, escaped_value(&a[p], a)));
                        out.push(fix(j, p, escaped_value(&b[p], b)));
                    }
                }
            }
        }
        out
    }

    fn apply(&self, inst: &Instance, op: &Op) -> Instance {
        let mut out = inst.clone();
        match op {
            Op::Merge { md, left, right } => {
                let md = &self.cs.mds[*md];
                let c = self.pos(&md.rhs.0.relation, &md.rhs.0.attribute).1;
                let d = self.pos(&md.rhs.1.relation, &md.rhs.1.attribute).1;
                let v = merged_value(
                    &inst.rows[left.0][left.1][c],
                    &inst.rows[right.0][right.1][d],
                );
                out.rows[left.0][left.1][c] = v.clone();
                out.rows[right.0][right.1][d] = v;
            }
            Op::CfdFix {
                relation,
                row,
                attr,
                value,
                ..
            } => {
                out.rows[*relation][*row][*attr] = value.clone();
            }
        }
        out.normalize();
        out
    }
}

/// Every stable instance reachable by enforcing MDs and fixing CFD violations in any order.
pub fn enumerate_repairs(
    inst: &Instance,
    schema: &Schema,
    cs: &ConstraintSet,
    idx: &SimilarityIndex,
    cap: usize,
) -> Result<Vec<RepairedInstance>, OracleError> {
    let ctx = Ctx { schema, cs, idx };
    let mut results: BTreeMap<Instance, Vec<Op>> = BTreeMap::new();
    let mut seen: HashSet<Instance> = HashSet::new();
    let mut stack = vec![(inst.clone(), Vec::new())];
    seen.insert(inst.clone());
    while let Some((state, lineage)) = stack.pop() {
        let ops = ctx.ops(&state);
        if ops.is_empty() {
            results.entry(state).or_insert(lineage);
            if results.len() > cap {
                return Err(OracleError::CapExceeded(cap));
            }
            continue;
        }
        for op in ops {
            let next = ctx.apply(&state, &op);
            if seen.insert(next.clone()) {
                if seen.len() > STATE_BUDGET {
                    return Err(OracleError::CapExceeded(cap));
                }
                let mut l = lineage.clone();
                l.push(op);
                stack.push((next, l));
            }
        }
    }
    Ok(results
        .into_iter()
        .map(|(instance, lineage)| RepairedInstance { instance, lineage })
        .collect())
}

fn rel_holds(d: &Clause, cl: &EqClosure, rel: &str, args: &[Term]) -> bool {
    d.body.iter().filter_map(Literal::as_rel).any(|q| {
        &*q.rel == rel
            && q.args.len() == args.len()
            && q.args.iter().zip(args).all(|(x, y)| cl.same(x, y))
    })
}

fn sim_holds(d: &Clause, cl: &EqClosure, a: &Term, b: &Term) -> bool {
    cl.same(a, b)
        || d.body.iter().any(|l| match l {
            Literal::Sim(p, q) => {
                (cl.same(p, a) && cl.same(q, b)) || (cl.same(p, b) && cl.same(q, a))
            }
            _ => false,
        })
}

fn literal_holds(l: &Literal, d: &Clause, cl: &EqClosure) -> bool {
    match l {
        Literal::Rel(p) => rel_holds(d, cl, &p.rel, &p.args),
        Literal::Eq(a, b) => cl.same(a, b),
        Literal::Sim(a, b) => sim_holds(d, cl, a, b),
        Literal::Repair(r) => d.body.iter().filter_map(Literal::as_repair).any(|s| {
            r.origin.is_md() == s.origin.is_md()
                && r.cond.len() == s.cond.len()
                && r.target == s.target
                && r.replacement == s.replacement
                && r.cond.iter().zip(&s.cond).all(|(x, y)| {
                    x.kind == y.kind
                        && ((cl.same(&x.a, &y.a) && cl.same(&x.b, &y.b))
                            || (cl.same(&x.a, &y.b) && cl.same(&x.b, &y.a)))
                })
        }),
    }
}

fn terms_of(d: &Clause) -> Vec<Term> {
    let mut out: BTreeSet<Term> = d.head.args.iter().cloned().collect();
    for l in &d.body {
        out.extend(l.terms().into_iter().cloned());
        if let Literal::Repair(r) = l {
            out.insert(Term::Var(r.replacement));
        }
    }
    out.into_iter().collect()
}

/// Plain θ-subsumption by enumerating every assignment of `c`'s variables to terms of `d`.
/// Repair literals of `c` must correspond to a repair literal of `d` with identical target
/// and replacement once substituted.
pub fn exhaustive_subsumes(c: &Clause, d: &Clause) -> bool {
    if c.head.rel != d.head.rel || c.head.args.len() != d.head.args.len() {
        return false;
    }
    // variables in order of first appearance; each literal is checked once all of its
    // variables are bound, which prunes without changing the answer
    let mut vars: Vec<u32> = Vec::new();
    let push = |v: u32, vars: &mut Vec<u32>| {
        if !vars.contains(&v) {
            vars.push(v);
        }
    };
    for t in &c.head.args {
        if let Term::Var(v) = t {
            push(*v, &mut vars);
        }
    }
    for l in &c.body {
        for v in l.vars() {
            push(v, &mut vars);
        }
    }
    let level = |vs: BTreeSet<u32>| {
        vs.iter()
            .map(|v| vars.iter().position(|w| w == v).unwrap_or(0) + 1)
            .max()
            .unwrap_or(0)
    };
    let mut checks: Vec<Vec<Check>> = vec![Vec::new(); vars.len() + 1];
    for (i, t) in c.head.args.iter().enumerate() {
        let vs = t.as_var().into_iter().collect();
        checks[level(vs)].push(Check::Head(i));
    }
    for (i, l) in c.body.iter().enumerate() {
        checks[level(l.vars())].push(Check::Body(i));
    }
    let domain = terms_of(d);
    let cl = EqClosure::of(&d.body);
    let search = Search {
        c,
        d,
        cl: &cl,
        vars: &vars,
        domain: &domain,
        checks: &checks,
    };
    let mut assign = HashMap::new();
    search.passes(0, &assign) && search.go(0, &mut assign)
}

#[derive(Debug, Clone, Copy)]
enum Check {
    Head(usize),
    Body(usize),
}

struct Search<'a> {
    c: &'a Clause,
    d: &'a Clause,
    cl: &'a EqClosure,
    vars: &'a [u32],
    domain: &'a [Term],
    checks: &'a [Vec<Check>],
}

impl Search<'_> {
    fn passes(&self, level: usize, assign: &HashMap<u32, Term>) -> bool {
        let mut sub = |t: &Term| match t {
            Term::Var(v) => assign[v].clone(),
            other => other.clone(),
        };
        self.checks[level].iter().all(|chk| match *chk {
            Check::Head(i) => self
                .cl
                .same(&sub(&self.c.head.args[i]), &self.d.head.args[i]),
            Check::Body(i) => {
                let l = &self.c.body[i];
                if let Literal::Repair(r) = l {
                    if !assign[&r.replacement].is_var() {
                        return false;
                    }
                }
                literal_holds(&l.map_terms(&mut sub), self.d, self.cl)
            }
        })
    }

    fn go(&self, k: usize, assign: &mut HashMap<u32, Term>) -> bool {
        if k == self.vars.len() {
            return true;
        }
        for t in self.domain {
            assign.insert(self.vars[k], t.clone());
            if self.passes(k + 1, assign) && self.go(k + 1, assign) {
                return true;
            }
        }
        assign.remove(&self.vars[k]);
        false
    }
}

/// `c` entails `d` when every repaired clause of `d` is θ-subsumed by some repaired
/// clause of `c` (an onto relation from the repairs of `c` to those of `d`).
pub fn brute_force_entails(c: &Clause, d: &Clause, cap: usize) -> Result<bool, OracleError> {
    let cs = repaired_clauses(c, cap)?;
    let ds = repaired_clauses(d, cap)?;
    Ok(ds
        .iter()
        .all(|dr| cs.iter().any(|cr| exhaustive_subsumes(cr, dr))))
}

/// Some repaired clause of `c` θ-subsumes some repaired clause of `g`, checked exhaustively.
pub fn brute_force_covers_negative(
    c: &Clause,
    g: &Clause,
    cap: usize,
) -> Result<bool, OracleError> {
    let cs = repaired_clauses(c, cap)?;
    let gs = repaired_clauses(g, cap)?;
    Ok(cs
        .iter()
        .any(|cr| gs.iter().any(|gr| exhaustive_subsumes(cr, gr))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

/// Evaluates a repair-free clause as a conjunctive query over `inst`, asking whether
/// its head can equal `e`.
pub fn query_covers(
    c: &Clause,
    e: &[Value],
    inst: &Instance,
    schema: &Schema,
    idx: &SimilarityIndex,
) -> bool {
    let mut assign: HashMap<u32, Value> = HashMap::new();
    for (t, v) in c.head.args.iter().zip(e) {
        match t {
            Term::Const(k) if k != v => return false,
            Term::Const(_) => {}
            Term::Var(x) => {
                if assign.get(x).is_some_and(|w| w != v) {
                    return false;
                }
                assign.insert(*x, v.clone());
            }
        }
    }
    let rels: Vec<(usize, &[Term])> = c
        .body
        .iter()
        .filter_map(Literal::as_rel)
        .map(|p| {
            (
                schema.index_of(&p.rel).unwrap_or(usize::MAX),
                p.args.as_slice(),
            )
        })
        .collect();
    let similar = |a: &Value, b: &Value| {
        a == b
            || (!is_fresh(a)
                && !is_fresh(b)
                && idx
                    .keys()
                    .any(|k| idx.score(k, a, b).or_else(|| idx.score(k, b, a)).is_some()))
    };
    fn go(
        k: usize,
        rels: &[(usize, &[Term])],
        assign: &mut HashMap<u32, Value>,
        inst: &Instance,
        c: &Clause,
        similar: &dyn Fn(&Value, &Value) -> bool,
    ) -> bool {
        if k == rels.len() {
            let val = |t: &Term| match t {
                Term::Var(v) => assign.get(v).cloned(),
                Term::Const(s) => Some(s.clone()),
            };
            return c.body.iter().all(|l| match l {
                Literal::Eq(a, b) => matches!((val(a), val(b)), (Some(x), Some(y)) if x == y),
                Literal::Sim(a, b) => {
                    matches!((val(a), val(b)), (Some(x), Some(y)) if similar(&x, &y))
                }
                _ => true,
            });
        }
        let (r, args) = rels[k];
        let Some(rows) = inst.rows.get(r) else {
            return false;
        };
        for row in rows {
            if row.len() != args.len() {
                continue;
            }
            let mut added = Vec::new();
            let mut ok = true;
            for (t, v) in args.iter().zip(row) {
                match t {
                    Term::Const(s) => ok &= s == v,
                    Term::Var(x) => match assign.get(x) {
                        Some(w) => ok &= w == v,
                        None => {
                            assign.insert(*x, v.clone());
                            added.push(*x);
                        }
                    },
                }
                if !ok {
                    break;
                }
            }
            if ok && go(k + 1, rels, assign, inst, c, similar) {
                return true;
            }
            for x in added {
                assign.remove(&x);
            }
        }
        false
    }
    go(0, &rels, &mut assign, inst, c, &similar)
}

/// Coverage of `e` by definition `h` judged over every repair of the data with `e` added.
/// Positive: every repaired definition covers `e` in some repair. Negative: some repaired
/// definition covers `e` in some repair.
pub fn brute_force_covers(
    h: &[Clause],
    e: &[Value],
    sign: Sign,
    db: &Database,
    cs: &ConstraintSet,
    idx: &SimilarityIndex,
    cap: usize,
) -> Result<bool, OracleError> {
    let schema = db.schema();
    let inst = Instance::of(db, &[e.to_vec()]);
    let repairs = enumerate_repairs(&inst, schema, cs, idx, cap)?;
    let per_clause: Vec<Vec<Clause>> = h
        .iter()
        .map(|c| repaired_clauses(c, cap))
        .collect::<Result<_, _>>()?;
    let mut defs: Vec<Vec<&Clause>> = vec![Vec::new()];
    for options in &per_clause {
        defs = defs
            .into_iter()
            .flat_map(|d| {
                options.iter().map(move |o| {
                    let mut d = d.clone();
                    d.push(o);
                    d
                })
            })
            .collect();
        if defs.len() > cap {
            return Err(OracleError::CapExceeded(cap));
        }
    }
    let t = db.target();
    let covers_in = |def: &[&Clause], j: &RepairedInstance| {
        j.instance.rows[t].iter().any(|ej| {
            def.iter()
                .any(|c| query_covers(c, ej, &j.instance, schema, idx))
        })
    };
    let some_repair = |def: &Vec<&Clause>| repairs.iter().any(|j| covers_in(def, j));
    Ok(match sign {
        Sign::Positive => !h.is_empty() && defs.iter().all(some_repair),
        Sign::Negative => defs.iter().any(some_repair),
    })
}

/// Canonical shape used to compare clauses across repairs: equalities collapsed into
/// their class representative (a constant when the class has one), similarity
/// literals dropped, and only the head-connected part kept.
pub fn normal_form(c: &Clause) -> Clause {
    let cl = EqClosure::of(&c.body);
    let mut rep: HashMap<Term, Term> = HashMap::new();
    for t in terms_of(c) {
        let root = cl.find(&t);
        let cur = rep.entry(root).or_insert_with(|| t.clone());
        if matches!(t, Term::Const(_)) && !matches!(cur, Term::Const(_)) {
            *cur = t.clone();
        }
    }
    let body = c
        .body
        .iter()
        .filter(|l| matches!(l, Literal::Rel(_)))
        .cloned()
        .collect();
    let mapped = Clause::new(c.head.clone(), body)
        .map_terms(&mut |t| rep.get(&cl.find(t)).cloned().unwrap_or_else(|| t.clone()));
    let mut out = prune_disconnected(&mapped);
    out.dedup_body();
    out.canonical()
}

/// Equality of two clause sets up to renaming after [`normal_form`].
pub fn same_clause_sets(a: &[Clause], b: &[Clause]) -> bool {
    let na: Vec<Clause> = a.iter().map(normal_form).collect();
    let nb: Vec<Clause> = b.iter().map(normal_form).collect();
    na.iter().all(|x| nb.iter().any(|y| isomorphic(x, y)))
        && nb.iter().all(|y| na.iter().any(|x| isomorphic(x, y)))
}

/// Bottom clauses of the example's images over each repair of the data.
pub fn bottom_clauses_over_repairs(
    e: &[Value],
    db: &Database,
    cs: &ConstraintSet,
    idx: &SimilarityIndex,
    cfg: &SaturationConfig,
    cap: usize,
) -> Result<Vec<Clause>, OracleError> {
    let schema = db.schema();
    let target = db.target_decl().name.clone();
    let repairs = enumerate_repairs(&Instance::of(db, &[e.to_vec()]), schema, cs, idx, cap)?;
    let mut out = Vec::new();
    for j in repairs {
        let (dbj, examples) = j.instance.to_database(schema, &target)?;
        for ej in examples {
            out.push(bottom_clause(&ej, &dbj, cs, idx, cfg)?);
        }
    }
    Ok(out)
}

pub mod gen {
    //! Seeded generators of micro databases and clause pairs.

    use rand::seq::SliceRandom;
    use rand::Rng;

    use super::*;
    use crate::constraints::parse_constraints;
    use crate::generalization::{drop_with_repair, order_clause};
    use crate::saturation::ground_bottom_clause;
    use crate::textsim::SimParams;

    #[derive(Debug, Clone, Copy)]
    pub struct WorldSpec {
        pub max_relations: usize,
        pub max_tuples: usize,
        pub max_mds: usize,
        pub max_cfds: usize,
    }

    impl Default for WorldSpec {
        fn default() -> Self {
            WorldSpec {
                max_relations: 5,
                max_tuples: 30,
                max_mds: 2,
                max_cfds: 1,
            }
        }
    }

    pub struct World {
        pub schema_text: String,
        pub constraints_text: String,
        pub db: Database,
        pub cs: ConstraintSet,
        pub idx: SimilarityIndex,
        pub examples: Vec<Vec<Value>>,
    }

    const NAMES: [&str; 5] = ["alpha", "bravo", "charlie", "delta", "echo"];
    const IDS: [&str; 4] = ["i1", "i2", "i3", "i4"];
    const TAGS: [&str; 2] = ["x", "y"];

    fn name<R: Rng>(rng: &mut R) -> String {
        let n = NAMES[rng.gen_range(0..NAMES.len())];
        if rng.gen_bool(0.4) {
            format!("{n}~")
        } else {
            n.to_string()
        }
    }

    /// A random world: target `t(name)`, relations mixing id, name and tag columns, MDs
    /// from the target or between name columns, and at most one CFD on an id-keyed
    /// relation. Similar pairs are exactly a name and its `~` variant.
    pub fn world<R: Rng>(rng: &mut R, spec: &WorldSpec) -> World {
        let nrel = rng.gen_range(2..=spec.max_relations.max(2) - 1);
        let mut decls = vec!["t(name:text)".to_string()];
        let mut name_cols: Vec<(String, String)> = Vec::new();
        let mut cfd_cands: Vec<String> = Vec::new();
        let mut kinds: Vec<Vec<char>> = Vec::new();
        for r in 0..nrel {
            let rel = format!("r{r}");
            let shape: Vec<char> = match rng.gen_range(0..4) {
                0 => vec!['i', 'n'],
                1 => vec!['i', 'i'],
                2 => vec!['i', 't'],
                _ => vec!['i', 'n', 't'],
            };
            let attrs: Vec<String> = shape
                .iter()
                .enumerate()
                .map(|(k, c)| match c {
                    'i' => format!("id{k}:text"),
                    'n' => format!("name{k}:text"),
                    _ => format!("tag{k}:text"),
                })
                .collect();
            for (k, c) in shape.iter().enumerate() {
                if *c == 'n' {
                    name_cols.push((rel.clone(), format!("name{k}")));
                }
            }
            if shape.len() >= 2 && shape[0] == 'i' && shape[1] != 'n' {
                cfd_cands.push(format!(
                    "{rel} : id0 -> {} : (_ || _)",
                    if shape[1] == 'i' { "id1" } else { "tag1" }
                ));
            }
            decls.push(format!("{rel}({})", attrs.join(", ")));
            kinds.push(shape);
        }
        if name_cols.is_empty() {
            decls[1] = "r0(id0:text, name1:text)".into();
            kinds[0] = vec!['i', 'n'];
            name_cols.push(("r0".into(), "name1".into()));
            cfd_cands.retain(|c| !c.starts_with("r0 "));
        }
        let schema_text = decls.join("\n") + "\n";
        let schema = Schema::parse(&schema_text).expect("generated schema is valid");
        let mut cons = Vec::new();
        let nmd = rng.gen_range(0..=spec.max_mds);
        for _ in 0..nmd {
            let (rel, col) = name_cols.choose(rng).expect("non-empty").clone();
            cons.push(format!(
                "md: t[name] ~ {rel}[{col}] -> t[name] <-> {rel}[{col}]"
            ));
        }
        cons.dedup();
        if spec.max_cfds > 0 && !cfd_cands.is_empty() && rng.gen_bool(0.5) {
            cons.push(format!(
                "cfd: {}",
                cfd_cands.choose(rng).expect("non-empty")
            ));
        }
        let constraints_text = cons.join("\n") + "\n";
        let cs =
            parse_constraints(&constraints_text, &schema).expect("generated constraints are valid");
        let total = rng.gen_range(nrel..=spec.max_tuples.max(nrel));
        let mut rows: Vec<(String, Vec<String>)> = Vec::new();
        for _ in 0..total {
            let r = rng.gen_range(0..nrel);
            let vals = kinds[r]
                .iter()
                .map(|c| match c {
                    'i' => IDS[rng.gen_range(0..IDS.len())].to_string(),
                    'n' => name(rng),
                    _ => TAGS[rng.gen_range(0..TAGS.len())].to_string(),
                })
                .collect();
            rows.push((format!("r{r}"), vals));
        }
        rows.sort();
        rows.dedup();
        let refs: Vec<(&str, Vec<&str>)> = rows
            .iter()
            .map(|(r, v)| (r.as_str(), v.iter().map(String::as_str).collect()))
            .collect();
        let db = Database::from_rows(schema, "t", &refs).expect("generated rows fit the schema");
        let mut idx = SimilarityIndex::empty(SimParams::default());
        for md in &cs.mds {
            for (l, r) in &md.lhs {
                for n in NAMES {
                    idx.insert((l.clone(), r.clone()), n, &format!("{n}~"), 0.9);
                    idx.insert((l.clone(), r.clone()), &format!("{n}~"), n, 0.9);
                }
            }
        }
        let examples = (0..3)
            .map(|_| vec![Value::from(name(rng).as_str())])
            .collect();
        World {
            schema_text,
            constraints_text,
            db,
            cs,
            idx,
            examples,
        }
    }

    pub fn no_sampling(d: usize) -> SaturationConfig {
        SaturationConfig {
            d,
            sample_size: 10_000,
            ..SaturationConfig::default()
        }
    }

    fn repair_count(c: &Clause) -> usize {
        c.body.iter().filter(|l| l.is_repair()).count()
    }

    /// A pair `(C, D)` of the kind compared during learning: `C` is a bottom clause with a
    /// few random literal drops, and `D` is either a ground bottom clause or another
    /// generalized bottom clause of the same world. Both keep at most `max_repairs`
    /// repair literals and a size the exhaustive checks can handle.
    pub fn usage_pair<R: Rng>(
        rng: &mut R,
        spec: &WorldSpec,
        max_repairs: usize,
    ) -> Option<(Clause, Clause)> {
        let w = world(rng, spec);
        let cfg = no_sampling(rng.gen_range(1..=2));
        let e = w.examples.choose(rng)?.clone();
        let f = w.examples.choose(rng)?.clone();
        let c = random_drops(
            rng,
            order_clause(&bottom_clause(&e, &w.db, &w.cs, &w.idx, &cfg).ok()?),
            4,
        );
        let d = if rng.gen_bool(0.7) {
            ground_bottom_clause(&f, &w.db, &w.cs, &w.idx, &cfg).ok()?
        } else {
            random_drops(
                rng,
                order_clause(&bottom_clause(&f, &w.db, &w.cs, &w.idx, &cfg).ok()?),
                2,
            )
        };
        if repair_count(&c) > max_repairs || repair_count(&d) > max_repairs {
            return None;
        }
        if c.vars().len() > 14 || d.body.len() > 40 {
            return None;
        }
        Some((c, d))
    }

    fn random_drops<R: Rng>(rng: &mut R, mut c: Clause, max: usize) -> Clause {
        for _ in 0..rng.gen_range(0..=max) {
            let rels: Vec<usize> = (0..c.body.len()).filter(|&i| c.body[i].is_rel()).collect();
            let Some(&i) = rels.choose(rng) else { break };
            c = drop_with_repair(&c, i);
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::parse_constraints;
    use crate::logic::parse_clause;
    use crate::textsim::{AttrRef, SimParams};

    fn p(s: &str) -> Clause {
        parse_clause(s).unwrap()
    }

    fn hetero() -> (Database, ConstraintSet, SimilarityIndex) {
        let schema = Schema::parse("t(a:text)\nr(a:text)\ns(a:text)\n").unwrap();
        let db = Database::from_rows(schema, "t", &[("r", vec!["b"]), ("s", vec!["c"])]).unwrap();
        let cs = parse_constraints(
            "md: t[a] ~ r[a] -> t[a] <-> r[a]\nmd: t[a] ~ s[a] -> t[a] <-> s[a]\n",
            db.schema(),
        )
        .unwrap();
        let mut idx = SimilarityIndex::empty(SimParams::default());
        idx.insert(
            (AttrRef::new("t", "a"), AttrRef::new("r", "a")),
            "a",
            "b",
            0.9,
        );
        idx.insert(
            (AttrRef::new("t", "a"), AttrRef::new("s", "a")),
            "a",
            "c",
            0.9,
        );
        (db, cs, idx)
    }

    #[test]
    fn two_stable_instances_for_competing_matches() {
        let (db, cs, idx) = hetero();
        let inst = Instance::of(&db, &[vec![Value::from("a")]]);
        let reps = enumerate_repairs(&inst, db.schema(), &cs, &idx, DEFAULT_INSTANCE_CAP).unwrap();
        assert_eq!(reps.len(), 2);
        let vab = merged_value("a", "b");
        let vac = merged_value("a", "c");
        let want1 = Instance {
            rows: vec![
                vec![vec![vab.clone()]],
                vec![vec![vab]],
                vec![vec![Value::from("c")]],
            ],
        };
        let want2 = Instance {
            rows: vec![
                vec![vec![vac.clone()]],
                vec![vec![Value::from("b")]],
                vec![vec![vac]],
            ],
        };
        assert!(reps.iter().any(|r| r.instance == want1));
        assert!(reps.iter().any(|r| r.instance == want2));
        for r in &reps {
            let again =
                enumerate_repairs(&r.instance, db.schema(), &cs, &idx, DEFAULT_INSTANCE_CAP)
                    .unwrap();
            assert_eq!(again.len(), 1);
            assert_eq!(again[0].instance, r.instance);
        }
    }

    #[test]
    fn no_constraint_means_no_change() {
        let (db, _, idx) = hetero();
        let inst = Instance::of(&db, &[vec![Value::from("a")]]);
        let reps =
            enumerate_repairs(&inst, db.schema(), &ConstraintSet::default(), &idx, 4).unwrap();
        assert_eq!(reps.len(), 1);
        assert_eq!(reps[0].instance, inst);
        assert!(reps[0].lineage.is_empty());
    }

    #[test]
    fn multiple_instances_from_one_title() {
        let schema =
            Schema::parse("t(a:text)\nmovies(id:text, title:text)\nhighBudgetMovies(title:text)\n")
                .unwrap();
        let db = Database::from_rows(
            schema,
            "t",
            &[
                ("movies", vec!["m1", "Star Wars: Episode IV - 1977"]),
                ("movies", vec!["m2", "Star Wars: Episode III - 2005"]),
                ("highBudgetMovies", vec!["Star Wars"]),
            ],
        )
        .unwrap();
        let cs = parse_constraints(
            "md: movies[title] ~ highBudgetMovies[title] -> movies[title] <-> highBudgetMovies[title]",
            db.schema(),
        )
        .unwrap();
        let key = (
            AttrRef::new("movies", "title"),
            AttrRef::new("highBudgetMovies", "title"),
        );
        let mut idx = SimilarityIndex::empty(SimParams::default());
        idx.insert(
            key.clone(),
            "Star Wars: Episode IV - 1977",
            "Star Wars",
            0.7,
        );
        idx.insert(key, "Star Wars: Episode III - 2005", "Star Wars", 0.7);
        let reps = enumerate_repairs(&Instance::of(&db, &[]), db.schema(), &cs, &idx, 8).unwrap();
        assert_eq!(reps.len(), 2);
        for r in &reps {
            let fresh = r.instance.rows[1]
                .iter()
                .filter(|row| is_fresh(&row[1]))
                .count();
            assert_eq!(fresh, 1);
        }
    }

    #[test]
    fn cfd_violation_has_swap_and_escape_repairs() {
        let schema = Schema::parse("t(a:text)\nloc(id:text, lang:text)\n").unwrap();
        let db = Database::from_rows(
            schema,
            "t",
            &[("loc", vec!["k", "en"]), ("loc", vec!["k", "fr"])],
        )
        .unwrap();
        let cs = parse_constraints("cfd: loc : id -> lang : (_ || _)", db.schema()).unwrap();
        let idx = SimilarityIndex::empty(SimParams::default());
        let reps = enumerate_repairs(&Instance::of(&db, &[]), db.schema(), &cs, &idx, 16).unwrap();
        // both to 'en', both to 'fr', or either id escaped
        assert_eq!(reps.len(), 4);
    }

    const H: &str = "t(V0) :- r(V1), sim(V0,V1), rep[md0]{sim(V0,V1)}(V0,V2), \
        rep[md0]{sim(V0,V1)}(V1,V3), eq(V2,V3), s(V4), sim(V0,V4), rep[md1]{sim(V0,V4)}(V0,V5), \
        rep[md1]{sim(V0,V4)}(V4,V6), eq(V5,V6).";

    #[test]
    fn heterogeneous_coverage_by_brute_force() {
        let (db, cs, idx) = hetero();
        let e = vec![Value::from("a")];
        assert!(brute_force_covers(&[p(H)], &e, Sign::Positive, &db, &cs, &idx, 16).unwrap());
        assert!(
            brute_force_covers(&[p("t(V0).")], &e, Sign::Positive, &db, &cs, &idx, 16).unwrap()
        );
        assert!(!brute_force_covers(
            &[p("t(V0) :- q(V0).")],
            &e,
            Sign::Negative,
            &db,
            &cs,
            &idx,
            16
        )
        .unwrap_or(false));
        let only_r = p("t(V0) :- r(V0), s(V0).");
        assert!(!brute_force_covers(&[only_r], &e, Sign::Negative, &db, &cs, &idx, 16).unwrap());
    }

    #[test]
    fn entailment_examples() {
        let h = p(H);
        assert!(brute_force_entails(&h, &h, 16).unwrap());
        // a clause with only the first repaired shape is not enough for both repairs of h
        let first_only = p("t(V0) :- r(V0), s(V1).");
        assert!(!brute_force_entails(&first_only, &h, 16).unwrap());
        let c = p("t(V0) :- r(V0,V1).");
        let d = p("t('a') :- r('a','b'), s('b').");
        assert!(brute_force_entails(&c, &d, 16).unwrap());
        assert!(!brute_force_entails(&d, &c, 16).unwrap());
    }

    #[test]
    fn exhaustive_matches_engine_on_examples() {
        let c = p("t(V0) :- r(V0,V1), sim(V1,V2), s(V2).");
        let d = p("t('a') :- r('a','b'), s('c'), sim('b','c').");
        assert!(exhaustive_subsumes(&c, &d));
        assert!(!exhaustive_subsumes(
            &c,
            &p("t('a') :- r('a','b'), s('c').")
        ));
    }

    #[test]
    fn match_only_entailment_beyond_the_side_condition() {
        // the side condition rejects this pair, yet the only repair of d is subsumed
        let c = p("t(V0) :- r(V1), sim(V0,V1).");
        let d = p(
            "t('a') :- r('b'), sim('a','b'), rep[md0]{sim('a','b')}('a',V2), \
            rep[md0]{sim('a','b')}('b',V3), eq(V2,V3).",
        );
        assert!(!crate::subsumption::subsumes_with_repairs(&c, &d).covered);
        assert!(brute_force_entails(&c, &d, 16).unwrap());
    }

    #[test]
    fn normal_form_collapses_equalities() {
        let a = p("t(V0) :- r(V1), eq(V0,V1), s(V5), eq(V2,'k'), q(V2,V0).");
        assert_eq!(normal_form(&a).to_string(), "t(V0) :- r(V0), q('k',V0).");
    }
}
