//! Syntactic scalarset classification of integer domains.
//!
//! A domain is symmetric when its values are only copied around and compared
//! for (in)equality with values of the same domain: no literals, no ordering,
//! no arithmetic, and no flow into or out of other domains. `default(v)` is a
//! distinguished element that permutations move along with everything else, so
//! it is allowed.

use crate::frontend::{BinOp, Domain, Expr, Handler, ProcessModel, Trigger, UnOp};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Symmetric,
    NotSymmetric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub location: String,
    pub handler: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalarsetReport {
    pub domain: Domain,
    pub status: Status,
    pub witnesses: Vec<Witness>,
}

impl ScalarsetReport {
    pub fn is_symmetric(&self) -> bool {
        self.status == Status::Symmetric
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Ty {
    Lit,
    Bool,
    Pids,
    Int(Domain),
    /// Arithmetic over the listed domain, or over literals only.
    Arith(Option<Domain>),
}

impl Ty {
    fn domain(&self) -> Option<&Domain> {
        match self {
            Ty::Int(d) | Ty::Arith(Some(d)) => Some(d),
            _ => None,
        }
    }
}

fn type_of(m: &ProcessModel, e: &Expr) -> Ty {
    match e {
        Expr::Int(_) => Ty::Lit,
        Expr::Bool(_) => Ty::Bool,
        Expr::Var(v) | Expr::Default(v) => match m.var(v).map(|d| &d.domain) {
            Some(Domain::PidSet) => Ty::Pids,
            Some(d) => Ty::Int(d.clone()),
            None => Ty::Lit,
        },
        Expr::Payload(ev) => m.event(ev).and_then(|e| e.payload.clone()).map_or(Ty::Lit, Ty::Int),
        Expr::DecVar { inst, .. } => m
            .event(inst)
            .and_then(|e| e.proposal_var.as_deref())
            .and_then(|v| m.var(v))
            .map_or(Ty::Lit, |v| Ty::Int(v.domain.clone())),
        Expr::WinSet(_) => Ty::Pids,
        Expr::Unary(UnOp::Not, _) => Ty::Bool,
        Expr::Unary(UnOp::Neg, a) => Ty::Arith(type_of(m, a).domain().cloned()),
        Expr::Binary(op, a, b) => match op {
            BinOp::Add | BinOp::Sub => {
                Ty::Arith(type_of(m, a).domain().cloned().or_else(|| type_of(m, b).domain().cloned()))
            }
            _ => Ty::Bool,
        },
    }
}

/// Whether `e` is a plain reference to a value of `d`.
fn is_plain_term(m: &ProcessModel, e: &Expr, d: &Domain) -> bool {
    matches!(e, Expr::Var(_) | Expr::Payload(_) | Expr::DecVar { .. } | Expr::Default(_))
        && type_of(m, e) == Ty::Int(d.clone())
}

fn describe(h: &Handler) -> String {
    let t = match &h.trigger {
        Trigger::Internal => "on _".to_string(),
        Trigger::Recv(e) => format!("on recv({e})"),
        Trigger::Partition(p) => format!("on partition<{p}>"),
        Trigger::Consensus(c) => format!("on consensus<{c}>"),
    };
    match &h.body.send {
        Some(s) => format!("{t} / {}", s.event),
        None => t,
    }
}

struct Checker<'a> {
    m: &'a ProcessModel,
    d: &'a Domain,
    out: Vec<Witness>,
    loc: String,
    handler: String,
}

impl Checker<'_> {
    fn flag(&mut self, reason: String) {
        let w = Witness { location: self.loc.clone(), handler: self.handler.clone(), reason };
        if !self.out.contains(&w) {
            self.out.push(w);
        }
    }

    fn mentions(&self, e: &Expr) -> bool {
        type_of(self.m, e).domain() == Some(self.d)
    }

    fn expr(&mut self, e: &Expr) {
        let m = self.m;
        let mut problems = Vec::new();
        e.walk(&mut |sub| match sub {
            Expr::Binary(op, a, b) if op.is_comparison() => {
                let (ta, tb) = (type_of(m, a), type_of(m, b));
                let touches = ta.domain() == Some(self.d) || tb.domain() == Some(self.d);
                if !touches {
                    return;
                }
                if op.is_ordering() {
                    problems.push(format!("ordered comparison `{}`", crate::frontend::expr_to_string(sub)));
                }
                if ta == Ty::Lit || tb == Ty::Lit {
                    problems.push(format!("constant literal in `{}`", crate::frontend::expr_to_string(sub)));
                } else if ta.domain() != tb.domain() {
                    problems.push(format!("comparison across domains in `{}`", crate::frontend::expr_to_string(sub)));
                }
            }
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) | Expr::Unary(UnOp::Neg, _) => {
                if type_of(m, sub).domain() == Some(self.d) {
                    problems.push(format!("arithmetic `{}`", crate::frontend::expr_to_string(sub)));
                }
            }
            _ => {}
        });
        for p in problems {
            self.flag(p);
        }
    }

    /// A value of some domain flowing into a slot of domain `target`.
    fn flow(&mut self, target: Option<&Domain>, e: &Expr, what: &str) {
        let into_d = target == Some(self.d);
        if into_d && !is_plain_term(self.m, e, self.d) {
            let reason = match type_of(self.m, e) {
                Ty::Lit => format!("constant literal assigned to {what}"),
                Ty::Arith(_) => format!("arithmetic assigned to {what}"),
                _ => format!("value of another domain assigned to {what}"),
            };
            self.flag(reason);
        } else if !into_d && self.mentions(e) {
            self.flag(format!("value escapes into {what} of another domain"));
        }
    }
}

/// One report per distinct integer domain, in order of first declaration.
pub fn classify_domains(m: &ProcessModel) -> Vec<ScalarsetReport> {
    m.int_domains()
        .into_iter()
        .map(|d| {
            let mut c = Checker { m, d: &d, out: Vec::new(), loc: String::new(), handler: String::new() };
            for (li, _, h) in m.handlers() {
                c.loc = m.locations[li].name.clone();
                c.handler = describe(h);
                if let Some(g) = &h.guard {
                    c.expr(g);
                }
                for (_, b) in h.branches() {
                    for u in &b.updates {
                        c.expr(&u.expr);
                        let target = m.var(&u.var).map(|v| &v.domain);
                        c.flow(target, &u.expr, &format!("`{}`", u.var));
                    }
                    if let Some(s) = &b.send {
                        if let Some(p) = &s.payload {
                            c.expr(p);
                            let target = m.event(&s.event).and_then(|e| e.payload.as_ref());
                            c.flow(target, p, &format!("payload of `{}`", s.event));
                        }
                    }
                }
            }
            let status = if c.out.is_empty() { Status::Symmetric } else { Status::NotSymmetric };
            ScalarsetReport { domain: d.clone(), status, witnesses: c.out }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_model;

    const CONSORTIUM: &str = include_str!("../../../models/consortium.mer");

    fn with_handler(extra: &str) -> ProcessModel {
        let src = CONSORTIUM.replace("location Wait\n", &format!("location Wait\n{extra}"));
        parse_model(&src).unwrap()
    }

    #[test]
    fn consortium_is_symmetric() {
        let r = classify_domains(&parse_model(CONSORTIUM).unwrap());
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].domain, Domain::UnboundedInt { tag: None });
        assert!(r[0].is_symmetric(), "{:?}", r[0].witnesses);
    }

    #[test]
    fn constant_literal_breaks_symmetry() {
        let r = classify_domains(&with_handler("  on _ when decision == 5 do\n    goto Election\n"));
        assert_eq!(r[0].status, Status::NotSymmetric);
        assert_eq!(r[0].witnesses[0].location, "Wait");
        assert!(r[0].witnesses[0].reason.contains("constant literal"));
    }

    #[test]
    fn arithmetic_breaks_symmetry() {
        let r = classify_domains(&with_handler("  on _ do\n    motion := motion + 1\n"));
        assert_eq!(r[0].status, Status::NotSymmetric);
        assert!(r[0].witnesses.iter().any(|w| w.reason.contains("arithmetic")));
    }

    #[test]
    fn ordering_breaks_symmetry() {
        let r = classify_domains(&with_handler("  on _ when motion < decision do\n"));
        assert!(r[0].witnesses.iter().any(|w| w.reason.contains("ordered")));
    }

    #[test]
    fn default_is_not_a_constant() {
        let r = classify_domains(&with_handler("  on _ when motion != decision do\n    motion := default(decision)\n"));
        assert!(r[0].is_symmetric());
    }

    #[test]
    fn domains_are_structural() {
        let src = "process P\nvariables\n  int[1,3] a\n  int[1,4] b\n  int[1,3] c\ninitial location L\n  on _ do\n    a := c\n    b := a\n";
        let r = classify_domains(&parse_model(src).unwrap());
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|x| x.status == Status::NotSymmetric));
        let ok = "process P\nvariables\n  int[1,3] a\n  int[1,4] b\n  int[1,3] c\ninitial location L\n  on _ do\n    a := c\n";
        let r = classify_domains(&parse_model(ok).unwrap());
        assert!(r.iter().all(|x| x.is_symmetric()));
    }

    #[test]
    fn report_per_tagged_domain() {
        let m = parse_model(include_str!("../../../models/distreg-two.mer")).unwrap();
        let r = classify_domains(&m);
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|x| x.is_symmetric()));
    }

    const SNIPPETS: &[&str] = &[
        "  on _ when motion == decision do\n",
        "  on _ when decision == 5 do\n",
        "  on _ do\n    motion := decision\n",
        "  on _ do\n    motion := motion + 1\n",
        "  on _ when motion > decision do\n",
        "  on _ do\n    decision := 3\n",
        "  on _ do\n    decision := default(motion)\n",
        "  on _ do\n    broadcast(inform[motion])\n",
    ];

    proptest::proptest! {
        #[test]
        fn adding_handlers_never_restores_symmetry(picks in proptest::collection::vec(0..SNIPPETS.len(), 1..6)) {
            let mut before = classify_domains(&parse_model(CONSORTIUM).unwrap());
            let mut src = CONSORTIUM.to_string();
            for (k, i) in picks.into_iter().enumerate() {
                let block = format!("location Extra{k}\n{}\nsafety", SNIPPETS[i]);
                src = src.replace("safety", &block);
                let after = classify_domains(&parse_model(&src).unwrap());
                for (b, a) in before.iter().zip(&after) {
                    proptest::prop_assert!(b.witnesses.iter().all(|w| a.witnesses.contains(w)));
                    if b.status == Status::NotSymmetric {
                        proptest::prop_assert_eq!(a.status, Status::NotSymmetric);
                    }
                }
                before = after;
            }
        }
    }
}
