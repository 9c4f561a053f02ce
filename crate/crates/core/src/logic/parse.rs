use std::sync::Arc;

use super::{Atom, AtomKind, Clause, Literal, LogicError, Origin, Pred, RepairLit, Term};

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, LogicError> {
        Err(LogicError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        loop {
            let r = self.rest();
            let trimmed = r.trim_start();
            self.pos += r.len() - trimmed.len();
            if trimmed.starts_with('#') {
                let end = trimmed.find('\n').unwrap_or(trimmed.len());
                self.pos += end;
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), LogicError> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<&'a str, LogicError> {
        self.skip_ws();
        let r = self.rest();
        let len = r
            .char_indices()
            .find(|&(i, c)| {
                !(c.is_ascii_alphanumeric() || c == '_') || (i == 0 && c.is_ascii_digit())
            })
            .map_or(r.len(), |(i, _)| i);
        if len == 0 {
            return self.err("expected identifier");
        }
        self.pos += len;
        Ok(&r[..len])
    }

    fn peek_ident(&mut self) -> Option<&'a str> {
        let save = self.pos;
        let out = self.ident().ok();
        self.pos = save;
        out
    }

    fn term(&mut self) -> Result<Term, LogicError> {
        self.skip_ws();
        if self.rest().starts_with('\'') {
            self.pos += 1;
            let mut out = String::new();
            loop {
                let r = self.rest();
                let Some(i) = r.find('\'') else {
                    return self.err("unterminated constant");
                };
                out.push_str(&r[..i]);
                self.pos += i + 1;
                if self.rest().starts_with('\'') {
                    out.push('\'');
                    self.pos += 1;
                } else {
                    return Ok(Term::Const(Arc::from(out.as_str())));
                }
            }
        }
        let id = self.ident()?;
        self.var_id(id).map(Term::Var)
    }

    fn var_id(&self, id: &str) -> Result<u32, LogicError> {
        match id.strip_prefix('V') {
            Some(d) if !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()) => {
                d.parse().or_else(|_| self.err("variable id out of range"))
            }
            _ => self.err(format!(
                "`{id}` is neither a variable nor a quoted constant"
            )),
        }
    }

    fn pair(&mut self) -> Result<(Term, Term), LogicError> {
        self.expect("(")?;
        let a = self.term()?;
        self.expect(",")?;
        let b = self.term()?;
        self.expect(")")?;
        Ok((a, b))
    }

    fn pred(&mut self) -> Result<Pred, LogicError> {
        let name = self.ident()?;
        if matches!(name, "eq" | "neq" | "sim" | "rep") {
            return self.err(format!("`{name}` is reserved"));
        }
        self.expect("(")?;
        let mut args = vec![self.term()?];
        while self.eat(",") {
            args.push(self.term()?);
        }
        self.expect(")")?;
        Ok(Pred::new(name, args))
    }

    fn atom(&mut self) -> Result<Atom, LogicError> {
        let kind = match self.ident()? {
            "eq" => AtomKind::Eq,
            "neq" => AtomKind::Neq,
            "sim" => AtomKind::Sim,
            other => return self.err(format!("unknown condition atom `{other}`")),
        };
        let (a, b) = self.pair()?;
        Ok(Atom::new(kind, a, b))
    }

    fn origin(&mut self) -> Result<Origin, LogicError> {
        let id = self.ident()?;
        let parse = |d: &str| d.parse::<usize>().ok();
        if let Some(i) = id.strip_prefix("cfd").and_then(parse) {
            Ok(Origin::Cfd(i))
        } else if let Some(i) = id.strip_prefix("md").and_then(parse) {
            Ok(Origin::Md(i))
        } else {
            self.err(format!("bad origin tag `{id}`"))
        }
    }

    fn literal(&mut self) -> Result<Literal, LogicError> {
        match self.peek_ident() {
            Some("sim") => {
                self.ident()?;
                let (a, b) = self.pair()?;
                Ok(Literal::Sim(a, b))
            }
            Some("eq") => {
                self.ident()?;
                let (a, b) = self.pair()?;
                Ok(Literal::Eq(a, b))
            }
            Some("rep") => {
                self.ident()?;
                let origin = if self.eat("[") {
                    let o = self.origin()?;
                    self.expect("]")?;
                    Some(o)
                } else {
                    None
                };
                self.expect("{")?;
                let mut cond = vec![self.atom()?];
                while self.eat(";") {
                    cond.push(self.atom()?);
                }
                self.expect("}")?;
                self.expect("(")?;
                let target = self.term()?;
                self.expect(",")?;
                let id = self.ident()?;
                let replacement = self.var_id(id)?;
                self.expect(")")?;
                let origin = origin.unwrap_or(if cond.iter().all(|a| a.kind == AtomKind::Sim) {
                    Origin::Md(0)
                } else {
                    Origin::Cfd(0)
                });
                Ok(Literal::Repair(RepairLit {
                    cond,
                    target,
                    replacement,
                    origin,
                }))
            }
            _ => Ok(Literal::Rel(self.pred()?)),
        }
    }

    fn clause(&mut self) -> Result<Clause, LogicError> {
        let head = self.pred()?;
        let mut body = Vec::new();
        if self.eat(":-") {
            body.push(self.literal()?);
            while self.eat(",") {
                body.push(self.literal()?);
            }
        }
        self.expect(".")?;
        Ok(Clause { head, body })
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.src.len()
    }
}

/// Parses one clause; trailing text other than whitespace and comments is an error.
pub fn parse_clause(text: &str) -> Result<Clause, LogicError> {
    let mut p = Parser { src: text, pos: 0 };
    let c = p.clause()?;
    if !p.at_end() {
        return p.err("trailing input after clause");
    }
    Ok(c)
}

/// Parses a sequence of clauses separated by whitespace or `#` comment lines.
pub fn parse_clauses(text: &str) -> Result<Vec<Clause>, LogicError> {
    let mut p = Parser { src: text, pos: 0 };
    let mut out = Vec::new();
    while !p.at_end() {
        out.push(p.clause()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trips() {
        let text = "t(V0) :- r(V0,V1), eq(V1,'a').";
        assert_eq!(parse_clause(text).unwrap().to_string(), text);
        let c = parse_clause("t(V0) :- rep{sim(V0,V1)}(V0,V2), r(V1).").unwrap();
        let Literal::Repair(r) = &c.body[0] else {
            panic!()
        };
        assert_eq!(r.origin, Origin::Md(0));
        assert_eq!(r.replacement, 2);
        assert_eq!(parse_clause(&c.to_string()).unwrap(), c);
        let q = parse_clause("t('it''s') :- rep[cfd3]{eq(V1,V2);neq(V3,V4)}(V1,V9).").unwrap();
        assert_eq!(q.head.args[0], Term::constant("it's"));
        assert_eq!(parse_clause(&q.to_string()).unwrap(), q);
        assert_eq!(parse_clause("t(V0).").unwrap().body.len(), 0);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_clause("t(V0) :- r(x).").is_err());
        assert!(parse_clause("t(V0) :- r(V0)").is_err());
        assert!(parse_clause("t(V0) :- rep{foo(V0,V1)}(V0,V2).").is_err());
        assert!(parse_clause("eq(V0) :- r(V0).").is_err());
    }

    #[test]
    fn many_clauses_with_comments() {
        let cs =
            parse_clauses("# pos=2 neg=0\nt(V0) :- r(V0).\n# pos=1 neg=0\nt(V0) :- s(V0,'x.y').\n")
                .unwrap();
        assert_eq!(cs.len(), 2);
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        prop_oneof![
            (0u32..6).prop_map(Term::Var),
            "[a-z' .,()]{0,4}".prop_map(|s| Term::constant(&s)),
        ]
    }

    fn arb_literal() -> impl Strategy<Value = Literal> {
        let atom = (0usize..3, arb_term(), arb_term())
            .prop_map(|(k, a, b)| Atom::new([AtomKind::Eq, AtomKind::Neq, AtomKind::Sim][k], a, b));
        prop_oneof![
            (
                "[a-z][a-z0-9_]{0,3}",
                prop::collection::vec(arb_term(), 1..4)
            )
                .prop_filter("reserved", |(n, _)| !matches!(
                    n.as_str(),
                    "eq" | "neq" | "sim" | "rep"
                ))
                .prop_map(|(n, args)| Literal::rel(&n, args)),
            (arb_term(), arb_term()).prop_map(|(a, b)| Literal::Sim(a, b)),
            (arb_term(), arb_term()).prop_map(|(a, b)| Literal::Eq(a, b)),
            (
                prop::collection::vec(atom, 1..3),
                arb_term(),
                0u32..9,
                any::<bool>(),
                0usize..3
            )
                .prop_map(|(cond, target, replacement, md, i)| Literal::Repair(
                    RepairLit {
                        cond,
                        target,
                        replacement,
                        origin: if md { Origin::Md(i) } else { Origin::Cfd(i) },
                    }
                )),
        ]
    }

    proptest! {
        #[test]
        fn parse_inverts_print(head in prop::collection::vec(arb_term(), 1..3),
                               body in prop::collection::vec(arb_literal(), 0..5)) {
            let c = Clause::new(Pred::new("t", head), body);
            prop_assert_eq!(parse_clause(&c.to_string()).unwrap(), c);
        }
    }
}
