//! Matching dependencies, conditional functional dependencies and their text format.

use std::fmt;

use thiserror::Error;

use crate::logic::{EqClosure, Literal, Term};
use crate::store::{Schema, StoreError, Value};
use crate::textsim::AttrRef;

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Schema { line: usize, source: StoreError },
    #[error("line {line}: conflicting CFDs on {relation}")]
    Conflict { line: usize, relation: String },
}

/// `lhs[0] ≈ ... ∧ lhs[n] ≈ ... → rhs.0 ⇌ rhs.1`, with a single right-hand pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Md {
    pub lhs: Vec<(AttrRef, AttrRef)>,
    pub rhs: (AttrRef, AttrRef),
}

impl fmt::Display for Md {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (l, r) = &self.lhs[0];
        let la: Vec<&str> = self.lhs.iter().map(|(a, _)| a.attribute.as_str()).collect();
        let ra: Vec<&str> = self.lhs.iter().map(|(_, b)| b.attribute.as_str()).collect();
        write!(
            f,
            "md: {}[{}] ~ {}[{}] -> {}[{}] <-> {}[{}]",
            l.relation,
            la.join(","),
            r.relation,
            ra.join(","),
            self.rhs.0.relation,
            self.rhs.0.attribute,
            self.rhs.1.relation,
            self.rhs.1.attribute
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cell {
    Wild,
    Const(Value),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Wild => f.write_str("_"),
            Cell::Const(c) => write!(f, "'{}'", c.replace('\'', "''")),
        }
    }
}

pub fn pattern_matches(value: &str, cell: &Cell) -> bool {
    match cell {
        Cell::Wild => true,
        Cell::Const(c) => &**c == value,
    }
}

/// `relation : X -> A : (t_p)` with the pattern laid out as X cells then the A cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cfd {
    pub relation: String,
    pub lhs: Vec<String>,
    pub rhs: String,
    pub pattern: Vec<Cell>,
    pub lhs_pos: Vec<usize>,
    pub rhs_pos: usize,
}

impl Cfd {
    pub fn rhs_cell(&self) -> &Cell {
        &self.pattern[self.lhs.len()]
    }

    /// True when two tuples of the relation jointly violate the dependency.
    pub fn tuples_violate(&self, a: &[Value], b: &[Value]) -> bool {
        let lhs_ok = self
            .lhs_pos
            .iter()
            .zip(&self.pattern)
            .all(|(&p, cell)| a[p] == b[p] && pattern_matches(&a[p], cell));
        lhs_ok
            && (a[self.rhs_pos] != b[self.rhs_pos]
                || !pattern_matches(&a[self.rhs_pos], self.rhs_cell())
                || !pattern_matches(&b[self.rhs_pos], self.rhs_cell()))
    }
}

impl fmt::Display for Cfd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self.pattern[..self.lhs.len()]
            .iter()
            .map(Cell::to_string)
            .collect();
        write!(
            f,
            "cfd: {} : {} -> {} : ({} || {})",
            self.relation,
            self.lhs.join(","),
            self.rhs,
            cells.join(","),
            self.rhs_cell()
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    pub mds: Vec<Md>,
    pub cfds: Vec<Cfd>,
}

impl fmt::Display for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.mds {
            writeln!(f, "{m}")?;
        }
        for c in &self.cfds {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Two literals of a CFD's relation whose X terms coincide under the equality closure
/// but whose A terms do not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfdViolation {
    pub first: usize,
    pub second: usize,
    pub rhs: (Term, Term),
}

pub fn find_cfd_violations(body: &[Literal], cfd: &Cfd, closure: &EqClosure) -> Vec<CfdViolation> {
    let lits: Vec<(usize, &[Term])> = body
        .iter()
        .enumerate()
        .filter_map(|(i, l)| match l {
            Literal::Rel(p) if *p.rel == *cfd.relation && p.args.len() > cfd.rhs_pos => {
                Some((i, p.args.as_slice()))
            }
            _ => None,
        })
        .collect();
    let matches_cell = |t: &Term, cell: &Cell| match cell {
        Cell::Wild => true,
        Cell::Const(c) => closure.same(t, &Term::Const(c.clone())),
    };
    let mut out = Vec::new();
    for (x, (i, a)) in lits.iter().enumerate() {
        for (j, b) in &lits[x + 1..] {
            let lhs_ok = cfd
                .lhs_pos
                .iter()
                .zip(&cfd.pattern)
                .all(|(&p, cell)| closure.same(&a[p], &b[p]) && matches_cell(&a[p], cell));
            if !lhs_ok {
                continue;
            }
            let (z, t) = (&a[cfd.rhs_pos], &b[cfd.rhs_pos]);
            let rhs_bad = !closure.same(z, t)
                || !matches_cell(z, cfd.rhs_cell())
                || !matches_cell(t, cfd.rhs_cell());
            if rhs_bad {
                out.push(CfdViolation {
                    first: *i,
                    second: *j,
                    rhs: (z.clone(), t.clone()),
                });
            }
        }
    }
    out
}

fn syntax<T>(line: usize, msg: impl Into<String>) -> Result<T, ConstraintError> {
    Err(ConstraintError::Syntax {
        line,
        msg: msg.into(),
    })
}

/// Splits on `sep` outside single-quoted constants.
fn split_outside_quotes(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut quoted = false;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        if c == '\'' {
            quoted = !quoted;
        } else if c == sep && !quoted {
            out.push(&s[start..i]);
            start = i + c.len_utf8();
        }
    }
    out.push(&s[start..]);
    out
}

/// `R[A,B]` into the relation and its attribute names.
fn attr_list(line: usize, s: &str) -> Result<(String, Vec<String>), ConstraintError> {
    let s = s.trim();
    let (Some(open), true) = (s.find('['), s.ends_with(']')) else {
        return syntax(line, format!("expected `R[attrs]`, found `{s}`"));
    };
    let rel = s[..open].trim();
    let attrs: Vec<String> = s[open + 1..s.len() - 1]
        .split(',')
        .map(|a| a.trim().to_string())
        .filter(|a| !a.is_empty())
        .collect();
    if rel.is_empty() || attrs.is_empty() {
        return syntax(line, format!("empty relation or attribute list in `{s}`"));
    }
    Ok((rel.to_string(), attrs))
}

fn resolve(
    schema: &Schema,
    line: usize,
    rel: &str,
    attr: &str,
) -> Result<(usize, usize), ConstraintError> {
    schema
        .resolve(rel, attr)
        .map_err(|source| ConstraintError::Schema { line, source })
}

fn parse_md(schema: &Schema, line: usize, s: &str) -> Result<Vec<Md>, ConstraintError> {
    let Some((lhs, rhs)) = s.split_once("->") else {
        return syntax(line, "missing `->`");
    };
    let Some((l1, l2)) = lhs.split_once('~') else {
        return syntax(line, "missing `~`");
    };
    let Some((r1, r2)) = rhs.split_once("<->") else {
        return syntax(line, "missing `<->`");
    };
    let (lr, la) = attr_list(line, l1)?;
    let (rr, ra) = attr_list(line, l2)?;
    let (cr, ca) = attr_list(line, r1)?;
    let (dr, da) = attr_list(line, r2)?;
    if la.len() != ra.len() || ca.len() != da.len() {
        return syntax(line, "attribute lists differ in length");
    }
    if cr != lr || dr != rr {
        return syntax(
            line,
            "right-hand side must use the same relations as the left",
        );
    }
    let mut lhs = Vec::new();
    for (a, b) in la.iter().zip(&ra) {
        let (ri, ai) = resolve(schema, line, &lr, a)?;
        let (rj, aj) = resolve(schema, line, &rr, b)?;
        let rels = schema.relations();
        if rels[ri].attributes[ai].domain != rels[rj].attributes[aj].domain {
            return syntax(
                line,
                format!("{lr}.{a} and {rr}.{b} have different domains"),
            );
        }
        lhs.push((AttrRef::new(&lr, a), AttrRef::new(&rr, b)));
    }
    let mut out = Vec::new();
    for (c, d) in ca.iter().zip(&da) {
        resolve(schema, line, &cr, c)?;
        resolve(schema, line, &dr, d)?;
        out.push(Md {
            lhs: lhs.clone(),
            rhs: (AttrRef::new(&cr, c), AttrRef::new(&dr, d)),
        });
    }
    Ok(out)
}

fn parse_cell(line: usize, s: &str) -> Result<Cell, ConstraintError> {
    let s = s.trim();
    if s == "_" || s == "-" {
        return Ok(Cell::Wild);
    }
    if s.len() >= 2 && s.starts_with('\'') && s.ends_with('\'') {
        return Ok(Cell::Const(Value::from(
            s[1..s.len() - 1].replace("''", "'").as_str(),
        )));
    }
    syntax(
        line,
        format!("pattern cell `{s}` is neither `_` nor a quoted constant"),
    )
}

fn parse_cfd(schema: &Schema, line: usize, s: &str) -> Result<Vec<Cfd>, ConstraintError> {
    let parts = split_outside_quotes(s, ':');
    let [rel, deps, pattern] = parts.as_slice() else {
        return syntax(line, "expected `R : X -> A : (pattern)`");
    };
    let rel = rel.trim();
    let Some((x, a)) = deps.split_once("->") else {
        return syntax(line, "missing `->`");
    };
    let names = |s: &str| -> Vec<String> {
        s.split(',')
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .collect()
    };
    let (x, a) = (names(x), names(a));
    if x.is_empty() {
        return syntax(line, "empty left-hand side");
    }
    if a.is_empty() {
        return syntax(line, "empty right-hand side");
    }
    let pattern = pattern.trim();
    let Some(inner) = pattern.strip_prefix('(').and_then(|p| p.strip_suffix(')')) else {
        return syntax(line, "pattern must be parenthesised");
    };
    let halves = split_outside_quotes(inner, '|');
    let [px, empty, pa] = halves.as_slice() else {
        return syntax(line, "pattern must contain `||`");
    };
    if !empty.is_empty() {
        return syntax(line, "pattern must contain `||`");
    }
    let px: Vec<Cell> = split_outside_quotes(px, ',')
        .into_iter()
        .map(|c| parse_cell(line, c))
        .collect::<Result<_, _>>()?;
    let pa: Vec<Cell> = split_outside_quotes(pa, ',')
        .into_iter()
        .map(|c| parse_cell(line, c))
        .collect::<Result<_, _>>()?;
    if px.len() != x.len() || pa.len() != a.len() {
        return syntax(line, "pattern length does not match the attributes");
    }
    let lhs_pos: Vec<usize> = x
        .iter()
        .map(|n| resolve(schema, line, rel, n).map(|p| p.1))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (name, cell) in a.iter().zip(pa) {
        let rhs_pos = resolve(schema, line, rel, name)?.1;
        if lhs_pos.contains(&rhs_pos) || x.iter().enumerate().any(|(i, n)| x[..i].contains(n)) {
            return syntax(line, "attributes must be distinct");
        }
        let mut pattern = px.clone();
        pattern.push(cell);
        out.push(Cfd {
            relation: rel.to_string(),
            lhs: x.clone(),
            rhs: name.clone(),
            pattern,
            lhs_pos: lhs_pos.clone(),
            rhs_pos,
        });
    }
    Ok(out)
}

/// Parses one constraint per line; `#` starts a comment line.
pub fn parse_constraints(text: &str, schema: &Schema) -> Result<ConstraintSet, ConstraintError> {
    let mut set = ConstraintSet::default();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        if let Some(rest) = s.strip_prefix("md:") {
            set.mds.extend(parse_md(schema, line, rest)?);
        } else if let Some(rest) = s.strip_prefix("cfd:") {
            for cfd in parse_cfd(schema, line, rest)? {
                let clash = set.cfds.iter().any(|o| {
                    o.relation == cfd.relation
                        && o.lhs == cfd.lhs
                        && o.rhs == cfd.rhs
                        && o.pattern[..o.lhs.len()] == cfd.pattern[..cfd.lhs.len()]
                        && matches!((o.rhs_cell(), cfd.rhs_cell()), (Cell::Const(p), Cell::Const(q)) if p != q)
                });
                if clash {
                    return Err(ConstraintError::Conflict {
                        line,
                        relation: cfd.relation,
                    });
                }
                set.cfds.push(cfd);
            }
        } else {
            return syntax(line, "expected `md:` or `cfd:`");
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_clause;
    use crate::store::{Attribute, Domain, RelationDecl};
    use proptest::prelude::*;

    fn schema() -> Schema {
        let text = |n: &str| Attribute::new(n, Domain::Text);
        Schema::new(vec![
            RelationDecl::new("highGrossing", vec![text("title")]),
            RelationDecl::new(
                "movies",
                vec![
                    text("id"),
                    text("title"),
                    Attribute::new("year", Domain::Integer),
                ],
            ),
            RelationDecl::new(
                "mov2locale",
                vec![text("title"), text("language"), text("country")],
            ),
            RelationDecl::new("r", vec![text("a"), text("b"), text("c")]),
        ])
        .unwrap()
    }

    #[test]
    fn parses_md_and_cfd() {
        let set = parse_constraints(
            "# comment\nmd: highGrossing[title] ~ movies[title] -> highGrossing[title] <-> movies[title]\n\
             cfd: mov2locale : title, language -> country : (_, 'English' || _)\n",
            &schema(),
        )
        .unwrap();
        assert_eq!(set.mds.len(), 1);
        assert_eq!(set.mds[0].lhs[0].1, AttrRef::new("movies", "title"));
        let c = &set.cfds[0];
        assert_eq!((c.lhs_pos.clone(), c.rhs_pos), (vec![0, 1], 2));
        assert_eq!(c.pattern[1], Cell::Const(Value::from("English")));
        let again = parse_constraints(&set.to_string(), &schema()).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn splits_multi_attribute_right_sides() {
        let set = parse_constraints(
            "md: highGrossing[title] ~ movies[title] -> highGrossing[title,title] <-> movies[title,id]\n\
             cfd: r : a -> b, c : (_ || _, 'k')",
            &schema(),
        )
        .unwrap();
        assert_eq!(set.mds.len(), 2);
        assert_eq!(set.cfds.len(), 2);
        assert_eq!(set.cfds[1].rhs_cell(), &Cell::Const(Value::from("k")));
    }

    #[test]
    fn reports_errors_with_lines() {
        let s = schema();
        assert!(matches!(
            parse_constraints("md: A[x] ~", &s),
            Err(ConstraintError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_constraints(
                "\nmd: highGrossing[nope] ~ movies[title] -> highGrossing[nope] <-> movies[title]",
                &s
            ),
            Err(ConstraintError::Schema { line: 2, .. })
        ));
        assert!(parse_constraints(
            "md: highGrossing[title] ~ movies[year] -> highGrossing[title] <-> movies[year]",
            &s
        )
        .is_err());
        assert!(parse_constraints("cfd: r : -> b : ( || _)", &s).is_err());
        assert!(matches!(
            parse_constraints(
                "cfd: r : a -> b : (_ || 'x')\ncfd: r : a -> b : (_ || 'y')",
                &s
            ),
            Err(ConstraintError::Conflict { line: 2, .. })
        ));
    }

    #[test]
    fn pattern_cells() {
        assert!(pattern_matches(
            "English",
            &Cell::Const(Value::from("English"))
        ));
        assert!(pattern_matches("USA", &Cell::Wild));
        assert!(!pattern_matches(
            "Ireland",
            &Cell::Const(Value::from("English"))
        ));
    }

    fn phi1() -> Cfd {
        parse_constraints(
            "cfd: mov2locale : title, language -> country : (_, 'English' || _)",
            &schema(),
        )
        .unwrap()
        .cfds
        .remove(0)
    }

    #[test]
    fn violations_follow_the_equality_closure() {
        let c = parse_clause(
            "h(V0) :- mov2locale(V0,V4,V1), mov2locale(V2,V5,V3), eq(V0,V2), eq(V4,'English'), eq(V5,V4).",
        )
        .unwrap();
        let v = find_cfd_violations(&c.body, &phi1(), &EqClosure::of(&c.body));
        assert_eq!(
            v,
            vec![CfdViolation {
                first: 0,
                second: 1,
                rhs: (Term::Var(1), Term::Var(3))
            }]
        );
        let single = parse_clause("h(V0) :- mov2locale(V0,'English',V1).").unwrap();
        assert!(find_cfd_violations(&single.body, &phi1(), &EqClosure::default()).is_empty());
        let apart =
            parse_clause("h(V0) :- mov2locale(V0,'English',V1), mov2locale(V2,'English',V3).")
                .unwrap();
        assert!(find_cfd_violations(&apart.body, &phi1(), &EqClosure::of(&apart.body)).is_empty());
    }

    proptest! {
        #[test]
        fn ground_detection_agrees_with_tuple_semantics(
            rows in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["a", "b", "English"]), 3), 0..5)
        ) {
            let cfd = phi1();
            let body: Vec<Literal> = rows
                .iter()
                .map(|r| Literal::rel("mov2locale", r.iter().map(|v| Term::constant(v)).collect()))
                .collect();
            let found = find_cfd_violations(&body, &cfd, &EqClosure::default());
            let vals: Vec<Vec<Value>> = rows.iter().map(|r| r.iter().map(|v| Value::from(*v)).collect()).collect();
            let mut expected = Vec::new();
            for i in 0..vals.len() {
                for j in i + 1..vals.len() {
                    if cfd.tuples_violate(&vals[i], &vals[j]) {
                        expected.push((i, j));
                    }
                }
            }
            let got: Vec<(usize, usize)> = found.iter().map(|v| (v.first, v.second)).collect();
            prop_assert_eq!(got, expected);
        }
    }
}
