use std::collections::{BTreeSet, HashSet};

use super::{Atom, AtomKind, Clause, EqClosure, Literal, LogicError, RepairLit, Term};

pub const DEFAULT_REPAIR_CAP: usize = 256;

/// Upper bound on intermediate states visited while enumerating application orders.
const STATE_BUDGET: usize = 1 << 16;

fn sim_supports(closure: &EqClosure, lit: &Literal, a: &Term, b: &Term) -> bool {
    let Literal::Sim(p, q) = lit else {
        return false;
    };
    (closure.same(p, a) && closure.same(q, b)) || (closure.same(p, b) && closure.same(q, a))
}

fn atom_holds(at: &Atom, body: &[Literal], closure: &EqClosure) -> bool {
    match at.kind {
        AtomKind::Eq => closure.same(&at.a, &at.b),
        AtomKind::Neq => !closure.same(&at.a, &at.b),
        AtomKind::Sim => {
            closure.same(&at.a, &at.b)
                || body.iter().any(|l| sim_supports(closure, l, &at.a, &at.b))
        }
    }
}

/// Evaluates a repair condition against the equality and similarity literals of `c`.
pub fn condition_holds(cond: &[Atom], c: &Clause) -> bool {
    let closure = EqClosure::of(&c.body);
    cond.iter().all(|at| atom_holds(at, &c.body, &closure))
}

fn same_pair(lit: &Literal, a: &Term, b: &Term) -> bool {
    let Literal::Sim(p, q) = lit else {
        return false;
    };
    (p == a && q == b) || (p == b && q == a)
}

fn referenced_by_condition(lit: &Literal, repairs: &[&RepairLit]) -> bool {
    let Literal::Sim(p, q) = lit else {
        return false;
    };
    repairs.iter().any(|r| {
        r.cond.iter().any(|at| {
            at.kind == AtomKind::Sim && ((&at.a == p && &at.b == q) || (&at.a == q && &at.b == p))
        })
    })
}

/// Applies the repair literal at `idx` when its condition holds, otherwise drops it.
///
/// Equality literals mentioning the target are discarded, and similarity literals are
/// rewritten only when they are the applied literal's own condition. Repair
/// literals whose condition no longer holds afterwards are eliminated.
pub fn apply_repair_literal(c: &Clause, idx: usize) -> Result<Clause, LogicError> {
    let r = c
        .body
        .get(idx)
        .and_then(Literal::as_repair)
        .ok_or(LogicError::NotRepair(idx))?
        .clone();
    if !condition_holds(&r.cond, c) {
        let mut out = c.clone();
        out.body.remove(idx);
        return Ok(out);
    }
    let replacement = Term::Var(r.replacement);
    let mut subst = |t: &Term| {
        if *t == r.target {
            replacement.clone()
        } else {
            t.clone()
        }
    };
    let mut rewritten = Vec::new();
    let mut body = Vec::with_capacity(c.body.len());
    for (j, l) in c.body.iter().enumerate() {
        if j == idx {
            continue;
        }
        match l {
            Literal::Eq(a, b) if *a == r.target || *b == r.target => {}
            Literal::Eq(..) => body.push(l.clone()),
            Literal::Sim(..) => {
                let own = r.origin.is_md()
                    && r.cond
                        .iter()
                        .any(|at| at.kind == AtomKind::Sim && same_pair(l, &at.a, &at.b));
                if own {
                    rewritten.push(body.len());
                    body.push(l.map_terms(&mut subst));
                } else {
                    body.push(l.clone());
                }
            }
            _ => body.push(l.map_terms(&mut subst)),
        }
    }
    let head = c.head.args.iter().map(&mut subst).collect();
    let mut out = Clause::new(
        super::Pred {
            rel: c.head.rel.clone(),
            args: head,
        },
        body,
    );

    let snapshot = out.clone();
    let closure = EqClosure::of(&snapshot.body);
    let mut keep: Vec<bool> = snapshot
        .body
        .iter()
        .map(|l| match l {
            Literal::Repair(o) => o
                .cond
                .iter()
                .all(|at| atom_holds(at, &snapshot.body, &closure)),
            _ => true,
        })
        .collect();
    let survivors: Vec<&RepairLit> = snapshot
        .body
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .filter_map(|(l, _)| l.as_repair())
        .collect();
    let drop_sims: Vec<usize> = rewritten
        .iter()
        .copied()
        .filter(|&j| !referenced_by_condition(&snapshot.body[j], &survivors))
        .collect();
    for j in drop_sims {
        keep[j] = false;
    }
    out.body = snapshot
        .body
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(l, _)| l)
        .collect();
    Ok(out)
}

/// Applies the repair literal at `idx`; for a matching dependency the literals of the
/// same match (same origin and condition) are applied with it, so both sides of a match
/// are always identified together.
fn apply_matching_step(c: &Clause, idx: usize) -> Result<Clause, LogicError> {
    let Some(r) = c.body.get(idx).and_then(Literal::as_repair) else {
        return Err(LogicError::NotRepair(idx));
    };
    let siblings: Vec<u32> = if r.origin.is_md() && condition_holds(&r.cond, c) {
        c.body
            .iter()
            .enumerate()
            .filter_map(|(j, l)| {
                l.as_repair()
                    .filter(|s| j != idx && s.origin == r.origin && s.cond == r.cond)
            })
            .map(|s| s.replacement)
            .collect()
    } else {
        Vec::new()
    };
    let mut out = apply_repair_literal(c, idx)?;
    for v in siblings {
        if let Some(j) = out
            .body
            .iter()
            .position(|l| l.as_repair().is_some_and(|s| s.replacement == v))
        {
            out = apply_repair_literal(&out, j)?;
        }
    }
    Ok(out)
}

/// Drops equality and similarity literals that are trivial or mention a variable
/// missing from the head, the relation literals and any remaining repair literal.
fn finish(mut c: Clause) -> Clause {
    let mut anchored = c.anchored_vars();
    for l in &c.body {
        if l.is_repair() {
            anchored.extend(l.vars());
        }
    }
    let ok = |t: &Term| t.as_var().is_none_or(|v| anchored.contains(&v));
    c.body.retain(|l| match l {
        Literal::Eq(a, b) | Literal::Sim(a, b) => a != b && ok(a) && ok(b),
        _ => true,
    });
    c.dedup_body();
    c.canonical()
}

/// All repair-free clauses reachable by applying repair literals in every order,
/// deduplicated up to variable renaming.
pub fn repaired_clauses(c: &Clause, cap: usize) -> Result<Vec<Clause>, LogicError> {
    apply_repairs_where(c, |_| true, cap)
}

/// Like [`repaired_clauses`] but only applies repair literals accepted by `select`;
/// the others stay in the resulting clauses.
pub fn apply_repairs_where(
    c: &Clause,
    select: impl Fn(&RepairLit) -> bool,
    cap: usize,
) -> Result<Vec<Clause>, LogicError> {
    let mut results: BTreeSet<Clause> = BTreeSet::new();
    let mut seen: HashSet<Clause> = HashSet::new();
    let mut stack = vec![c.clone()];
    seen.insert(c.clone());
    while let Some(state) = stack.pop() {
        let repairs: Vec<usize> = (0..state.body.len())
            .filter(|&i| state.body[i].as_repair().is_some_and(&select))
            .collect();
        if repairs.is_empty() {
            let done = finish(state);
            // canonical numbering alone does not identify body permutations
            if !results.iter().any(|r| super::isomorphic(r, &done)) {
                results.insert(done);
                if results.len() > cap {
                    return Err(LogicError::CapExceeded(cap));
                }
            }
            continue;
        }
        for i in repairs {
            let next = apply_matching_step(&state, i)?;
            if seen.insert(next.clone()) {
                if seen.len() > STATE_BUDGET {
                    return Err(LogicError::CapExceeded(cap));
                }
                stack.push(next);
            }
        }
    }
    Ok(results.into_iter().collect())
}
