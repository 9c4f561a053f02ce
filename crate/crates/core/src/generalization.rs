//! Generalization of a clause toward another example: literal ordering, blocking
//! literals, dropping with head-connectivity repair, and candidate scoring.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::logic::{prune_disconnected, Clause, Literal, Term};
use crate::subsumption::{
    covers_negative_prepared, covers_positive_prepared, SubsumptionConfig, Target, Verdict,
};

fn kind_rank(l: &Literal) -> u8 {
    match l {
        Literal::Rel(_) => 0,
        Literal::Sim(..) => 1,
        Literal::Eq(..) => 2,
        Literal::Repair(_) => 3,
    }
}

/// Symbol part of the order key; repair literals embed origin, condition and arguments.
pub fn symbol_key(l: &Literal) -> String {
    match l {
        Literal::Rel(p) => p.rel.to_string(),
        Literal::Sim(..) => "sim".into(),
        Literal::Eq(..) => "eq".into(),
        Literal::Repair(_) => l.to_string(),
    }
}

/// Stable sort of the body by literal kind (relation, similarity, equality, repair),
/// then symbol key.
pub fn order_clause(c: &Clause) -> Clause {
    let mut keyed: Vec<(u8, String, usize, &Literal)> = c
        .body
        .iter()
        .enumerate()
        .map(|(i, l)| (kind_rank(l), symbol_key(l), i, l))
        .collect();
    keyed.sort_by(|a, b| (a.0, &a.1, a.2).cmp(&(b.0, &b.1, b.2)));
    Clause::new(
        c.head.clone(),
        keyed.into_iter().map(|k| k.3.clone()).collect(),
    )
}

/// Removes literals left dangling after a drop, to a fixpoint: repair literals whose target
/// or condition mentions an undefined variable, equality and similarity literals over
/// undefined variables, and literals no longer connected to the head. Defined variables
/// are those of the head, relation literals and replacements of kept repair literals.
pub fn cleanup(c: &Clause) -> Clause {
    well_formed(c, true)
}

fn well_formed(c: &Clause, connected: bool) -> Clause {
    let mut cur = c.clone();
    loop {
        let mut defined = cur.anchored_vars();
        for l in &cur.body {
            if let Literal::Repair(r) = l {
                defined.insert(r.replacement);
            }
        }
        let ok = |t: &Term| t.as_var().is_none_or(|v| defined.contains(&v));
        let body: Vec<Literal> = cur
            .body
            .iter()
            .filter(|l| match l {
                Literal::Rel(_) => true,
                Literal::Eq(a, b) | Literal::Sim(a, b) => ok(a) && ok(b),
                Literal::Repair(_) => l.terms().into_iter().all(ok),
            })
            .cloned()
            .collect();
        let next = Clause::new(cur.head.clone(), body);
        let next = if connected {
            prune_disconnected(&next)
        } else {
            next
        };
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Drops body literal `i`, then the literals that depended on it.
pub fn drop_with_repair(c: &Clause, i: usize) -> Clause {
    let mut out = c.clone();
    out.body.remove(i);
    order_clause(&cleanup(&out))
}

/// The prefix of `c` through its `k`-th relation literal (none when `k` is `None`), with the
/// other literals kept whenever their variables are defined. Head connectivity is not
/// enforced, so a disconnected literal that cannot be matched blocks on its own.
pub fn prefix(c: &Clause, rels: &[usize], k: Option<usize>) -> Clause {
    let keep: BTreeSet<usize> = k.map_or(BTreeSet::new(), |k| rels[..=k].iter().copied().collect());
    let body = c
        .body
        .iter()
        .enumerate()
        .filter(|(i, l)| !l.is_rel() || keep.contains(i))
        .map(|(_, l)| l.clone())
        .collect();
    well_formed(&Clause::new(c.head.clone(), body), false)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Blocking {
    /// The whole clause covers the example.
    Covers,
    /// Body index of the least relation literal whose prefix fails.
    At {
        index: usize,
        budget_exhausted: bool,
    },
    /// Even the head-only prefix fails.
    Unsatisfiable,
}

fn rel_positions(c: &Clause) -> Vec<usize> {
    (0..c.body.len()).filter(|&i| c.body[i].is_rel()).collect()
}

fn find_blocking_from(c: &Clause, g: &Target, cfg: &SubsumptionConfig, from: usize) -> Blocking {
    let rels = rel_positions(c);
    if from == 0 && !covers_positive_prepared(&prefix(c, &rels, None), g, cfg).covered {
        return Blocking::Unsatisfiable;
    }
    for k in from..rels.len() {
        let v = covers_positive_prepared(&prefix(c, &rels, Some(k)), g, cfg);
        if !v.covered {
            return Blocking::At {
                index: rels[k],
                budget_exhausted: v.budget_exhausted || v.cap_exceeded,
            };
        }
    }
    if covers_positive_prepared(c, g, cfg).covered {
        Blocking::Covers
    } else {
        // only reachable when a non-relation literal blocks on its own
        Blocking::Unsatisfiable
    }
}

/// Least relation literal whose prefix clause fails to cover the example of `g`.
/// `c` must already be ordered.
pub fn find_blocking_literal(c: &Clause, g: &Target, cfg: &SubsumptionConfig) -> Blocking {
    find_blocking_from(c, g, cfg, 0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generalized {
    pub clause: Clause,
    pub covers: bool,
    /// A blocking search hit the subsumption budget or repair cap.
    pub flagged: bool,
}

/// Removes blocking literals from `c` until it covers the example of `g`.
pub fn armg(c: &Clause, g: &Target, cfg: &SubsumptionConfig) -> Generalized {
    let mut cur = order_clause(&cleanup(c));
    let mut flagged = false;
    let mut from = 0;
    loop {
        match find_blocking_from(&cur, g, cfg, from) {
            Blocking::Covers => {
                return Generalized {
                    clause: cur,
                    covers: true,
                    flagged,
                }
            }
            Blocking::At {
                index,
                budget_exhausted,
            } => {
                flagged |= budget_exhausted;
                from = cur.body[..index].iter().filter(|l| l.is_rel()).count();
                let before = cur.rel_count();
                cur = drop_with_repair(&cur, index);
                if cur.rel_count() + 1 != before {
                    from = 0;
                }
            }
            Blocking::Unsatisfiable => {
                let head_only = Clause::new(cur.head.clone(), Vec::new());
                let covers = covers_positive_prepared(&head_only, g, cfg).covered;
                let clause = if covers {
                    cleanup(&prefix(&cur, &rel_positions(&cur), None))
                } else {
                    head_only
                };
                return Generalized {
                    covers: covers && covers_positive_prepared(&clause, g, cfg).covered,
                    clause,
                    flagged: true,
                };
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Score {
    pub pos: usize,
    pub neg: usize,
    pub flagged: usize,
}

impl Score {
    pub fn value(&self) -> i64 {
        self.pos as i64 - self.neg as i64
    }
}

fn flagged(v: &Verdict) -> bool {
    v.budget_exhausted || v.cap_exceeded
}

/// Coverage flags of `c` over positive and negative ground bottom clauses, in input order.
pub fn coverage(
    c: &Clause,
    pos: &[&Target],
    neg: &[&Target],
    cfg: &SubsumptionConfig,
) -> (Vec<bool>, Vec<bool>, usize) {
    let p: Vec<Verdict> = pos
        .par_iter()
        .map(|g| covers_positive_prepared(c, g, cfg))
        .collect();
    let n: Vec<Verdict> = neg
        .par_iter()
        .map(|g| covers_negative_prepared(c, g, cfg))
        .collect();
    let flags = p.iter().chain(&n).filter(|v| flagged(v)).count();
    (
        p.into_iter().map(|v| v.covered).collect(),
        n.into_iter().map(|v| v.covered).collect(),
        flags,
    )
}

pub fn score(c: &Clause, pos: &[&Target], neg: &[&Target], cfg: &SubsumptionConfig) -> Score {
    let (p, n, flagged) = coverage(c, pos, neg, cfg);
    Score {
        pos: p.iter().filter(|b| **b).count(),
        neg: n.iter().filter(|b| **b).count(),
        flagged,
    }
}

fn better(a: &(Clause, Score), b: &(Clause, Score)) -> Ordering {
    b.1.value()
        .cmp(&a.1.value())
        .then(a.0.body.len().cmp(&b.0.body.len()))
        .then_with(|| a.0.to_string().cmp(&b.0.to_string()))
}

/// Highest scoring candidate; ties go to fewer body literals, then the smaller printed form.
pub fn best_candidate(
    cands: &[Clause],
    pos: &[&Target],
    neg: &[&Target],
    cfg: &SubsumptionConfig,
) -> Option<(Clause, Score)> {
    cands
        .iter()
        .map(|c| (c.clone(), score(c, pos, neg, cfg)))
        .min_by(better)
}
