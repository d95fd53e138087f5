//! Recursive-descent parser with name resolution.

use super::ast::*;
use super::diag::{Diagnostic, DiagnosticKind, Diagnostics};
use super::lexer::{lex, Tok, Token};

const RESERVED: &[&str] = &[
    "process", "variables", "events", "initial", "location", "on", "do", "when", "win", "lose",
    "goto", "broadcast", "send", "recv", "partition", "consensus", "default", "safety",
    "agreement", "in", "env", "br", "bc", "rz", "pw", "unit", "int", "pidset", "All", "true",
    "false",
];

/// Words that end a handler body.
const BODY_END: &[&str] = &["on", "location", "initial", "safety", "win", "lose"];

type PResult<T> = Result<T, Diagnostic>;

/// Parses and validates a complete model file.
pub fn parse_model(src: &str) -> Result<ProcessModel, Diagnostics> {
    let tokens = lex(src)?;
    let mut p = Parser::new(tokens);
    let model = p.model()?;
    p.finish(model)
}

/// Parses a `safety agreement ...` trailer and resolves it against `model`.
pub fn parse_spec(src: &str, model: &ProcessModel) -> Result<SafetySpec, Diagnostics> {
    let tokens = lex(src)?;
    let mut p = Parser::new(tokens);
    let (spec, refs) = p.safety()?;
    p.expect_eof()?;
    let mut diags = Vec::new();
    resolve_spec(model, &spec, &refs, &mut diags);
    if diags.is_empty() {
        Ok(spec)
    } else {
        Err(Diagnostics(diags))
    }
}

type Pos = (u32, u32);

struct SpecRefs {
    var: Pos,
    locs: Vec<Pos>,
}

fn resolve_spec(model: &ProcessModel, spec: &SafetySpec, refs: &SpecRefs, diags: &mut Vec<Diagnostic>) {
    if model.var(&spec.variable).is_none() {
        diags.push(Diagnostic::at(refs.var.0, refs.var.1, DiagnosticKind::Resolution { symbol: spec.variable.clone() }));
    }
    for (l, pos) in spec.locations.iter().zip(&refs.locs) {
        if model.location_index(l).is_none() {
            diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Resolution { symbol: l.clone() }));
        }
    }
}

/// Context used while resolving a handler's expressions.
#[derive(Clone, Copy)]
enum ExprCtx<'a> {
    Guard,
    Body(&'a Trigger),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    /// `goto` targets, checked once all locations are known.
    gotos: Vec<(String, Pos)>,
    /// Partition instances referenced through `.winS`.
    win_refs: Vec<(String, Pos)>,
    spec_refs: Option<SpecRefs>,
}

impl Parser {
    fn new(toks: Vec<Token>) -> Self {
        Parser { toks, pos: 0, diags: Vec::new(), gotos: Vec::new(), win_refs: Vec::new(), spec_refs: None }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> Pos {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &str) -> PResult<T> {
        let (l, c) = self.here();
        Err(Diagnostic::at(l, c, DiagnosticKind::Syntax { expected: expected.into(), found: self.peek().describe() }))
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(&format!("`{kw}`"))
        }
    }

    fn expect_sym(&mut self, sym: &str) -> PResult<()> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.err(&format!("`{sym}`"))
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.err("end of input")
        }
    }

    /// A non-reserved identifier.
    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        let pos = self.here();
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok((s, pos))
            }
            _ => self.err(what),
        }
    }

    fn number(&mut self) -> PResult<i64> {
        let neg = self.eat_sym("-");
        let base = match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                n
            }
            _ => return self.err("an integer"),
        };
        let mut v = base;
        if self.eat_sym("^") {
            let pos = self.here();
            let exp = match self.peek().clone() {
                Tok::Int(n) => {
                    self.bump();
                    n
                }
                _ => return self.err("an exponent"),
            };
            v = u32::try_from(exp)
                .ok()
                .and_then(|e| base.checked_pow(e))
                .ok_or_else(|| Diagnostic::at(pos.0, pos.1, DiagnosticKind::Invalid(format!("`{base}^{exp}` out of range"))))?;
        }
        Ok(if neg { -v } else { v })
    }

    fn int_type(&mut self) -> PResult<Domain> {
        let pos = self.here();
        if self.eat_kw("pidset") {
            return Ok(Domain::PidSet);
        }
        self.expect_kw("int")?;
        let range = if self.eat_sym("[") {
            let lo = self.number()?;
            self.expect_sym(",")?;
            let hi = self.number()?;
            self.expect_sym("]")?;
            if lo > hi {
                return Err(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Invalid(format!("empty range int[{lo},{hi}]"))));
            }
            Some((lo, hi))
        } else {
            None
        };
        let tag = if self.eat_sym("<") {
            let (t, _) = self.ident("a domain tag")?;
            self.expect_sym(">")?;
            Some(t)
        } else {
            None
        };
        Ok(match range {
            Some((lo, hi)) => Domain::IntRange { lo, hi, tag },
            None => Domain::UnboundedInt { tag },
        })
    }

    fn model(&mut self) -> PResult<ProcessModel> {
        self.expect_kw("process")?;
        let (name, _) = self.ident("a process name")?;
        let mut m = ProcessModel { name, variables: Vec::new(), events: Vec::new(), locations: Vec::new(), safety: None };
        if self.eat_kw("variables") {
            while self.is_kw("int") || self.is_kw("pidset") {
                let domain = self.int_type()?;
                let (vname, pos) = self.ident("a variable name")?;
                if m.var(&vname).is_some() {
                    self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Duplicate { symbol: vname }));
                } else {
                    m.variables.push(VarDecl { name: vname, domain });
                }
            }
        }
        if self.eat_kw("events") {
            while !self.is_kw("initial") && !self.is_kw("location") && !self.is_kw("safety") && !matches!(self.peek(), Tok::Eof) {
                self.event_decl(&mut m)?;
            }
        }
        while self.is_kw("initial") || self.is_kw("location") {
            let initial = self.eat_kw("initial");
            self.expect_kw("location")?;
            let (lname, pos) = self.ident("a location name")?;
            let mut loc = LocationDef { name: lname.clone(), initial, handlers: Vec::new() };
            while self.is_kw("on") {
                let hpos = self.here();
                let h = self.handler(&mut m)?;
                let dup = loc.handlers.iter().any(|o| o.trigger == h.trigger && o.guard == h.guard && send_event(o) == send_event(&h));
                if dup {
                    self.diags.push(Diagnostic::at(hpos.0, hpos.1, DiagnosticKind::Duplicate { symbol: format!("handler in location {lname}") }));
                }
                loc.handlers.push(h);
            }
            if m.location_index(&lname).is_some() {
                self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Duplicate { symbol: lname }));
            } else {
                m.locations.push(loc);
            }
        }
        if self.is_kw("safety") {
            let (spec, refs) = self.safety()?;
            m.safety = Some(spec);
            self.spec_refs = Some(refs);
        }
        self.expect_eof()?;
        Ok(m)
    }

    fn event_decl(&mut self, m: &mut ProcessModel) -> PResult<()> {
        let env = self.eat_kw("env");
        let kind = if self.eat_kw("br") || self.eat_kw("bc") {
            EventKind::Broadcast
        } else if self.eat_kw("rz") || self.eat_kw("pw") {
            EventKind::Rendezvous
        } else {
            return self.err("an event kind (`br` or `rz`)");
        };
        let (name, pos) = self.ident("an event name")?;
        self.expect_sym(":")?;
        let payload = if self.eat_kw("unit") {
            None
        } else {
            let tpos = self.here();
            let d = self.int_type()?;
            if !d.is_int() {
                return Err(Diagnostic::at(tpos.0, tpos.1, DiagnosticKind::Invalid("event payloads must be integers".into())));
            }
            Some(d)
        };
        if m.event(&name).is_some() {
            self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Duplicate { symbol: name }));
            return Ok(());
        }
        m.events.push(EventDecl { kind, name, payload, env, cardinality: None, participants: None, proposal_var: None, dec_vars: Vec::new() });
        Ok(())
    }

    fn participants(&mut self) -> PResult<Participants> {
        if self.eat_kw("All") {
            return Ok(Participants::All);
        }
        let (p, pos) = self.ident("`All` or `<partition>.winS`")?;
        self.expect_sym(".")?;
        if !self.eat_kw("winS") {
            return self.err("`winS`");
        }
        self.win_refs.push((p.clone(), pos));
        Ok(Participants::WinnersOf(p))
    }

    fn cardinality(&mut self) -> PResult<u32> {
        let pos = self.here();
        let n = self.number()?;
        u32::try_from(n)
            .ok()
            .filter(|&k| k >= 1)
            .ok_or_else(|| Diagnostic::at(pos.0, pos.1, DiagnosticKind::Invalid("cardinality must be at least 1".into())))
    }

    /// Registers an agreement instance or checks it against an earlier use.
    fn declare_agreement(&mut self, m: &mut ProcessModel, decl: EventDecl, pos: Pos) {
        match m.event(&decl.name) {
            None => m.events.push(decl),
            Some(prev) => {
                let same = prev.kind == decl.kind
                    && prev.cardinality == decl.cardinality
                    && prev.participants == decl.participants
                    && prev.proposal_var == decl.proposal_var;
                if !same {
                    let kind = if prev.kind.is_agreement() {
                        DiagnosticKind::Invalid(format!("conflicting parameters for agreement `{}`", decl.name))
                    } else {
                        DiagnosticKind::Duplicate { symbol: decl.name.clone() }
                    };
                    self.diags.push(Diagnostic::at(pos.0, pos.1, kind));
                }
            }
        }
    }

    fn handler(&mut self, m: &mut ProcessModel) -> PResult<Handler> {
        self.expect_kw("on")?;
        let tpos = self.here();
        let trigger = if self.eat_sym("_") {
            Trigger::Internal
        } else if self.eat_kw("recv") {
            self.expect_sym("(")?;
            let (ev, pos) = self.ident("an event name")?;
            self.expect_sym(")")?;
            match m.event(&ev) {
                Some(e) if !e.kind.is_agreement() => {}
                Some(_) => self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Invalid(format!("`{ev}` is an agreement, not a message event")))),
                None => self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Resolution { symbol: ev.clone() })),
            }
            Trigger::Recv(ev)
        } else if self.eat_kw("partition") {
            self.expect_sym("<")?;
            let (id, pos) = self.ident("a partition identifier")?;
            self.expect_sym(">")?;
            self.expect_sym("(")?;
            let participants = self.participants()?;
            self.expect_sym(",")?;
            let card = self.cardinality()?;
            self.expect_sym(")")?;
            let decl = EventDecl {
                kind: EventKind::Partition,
                name: id.clone(),
                payload: None,
                env: false,
                cardinality: Some(card),
                participants: Some(participants),
                proposal_var: None,
                dec_vars: Vec::new(),
            };
            self.declare_agreement(m, decl, pos);
            Trigger::Partition(id)
        } else if self.eat_kw("consensus") {
            self.expect_sym("<")?;
            let (id, pos) = self.ident("a consensus identifier")?;
            self.expect_sym(">")?;
            self.expect_sym("(")?;
            let participants = self.participants()?;
            self.expect_sym(",")?;
            let card = self.cardinality()?;
            self.expect_sym(",")?;
            let (var, vpos) = self.ident("a proposal variable")?;
            self.expect_sym(")")?;
            match m.var(&var) {
                Some(v) if v.domain.is_int() => {}
                Some(_) => self.diags.push(Diagnostic::at(vpos.0, vpos.1, DiagnosticKind::Invalid(format!("proposal variable `{var}` must be an integer")))),
                None => self.diags.push(Diagnostic::at(vpos.0, vpos.1, DiagnosticKind::Resolution { symbol: var.clone() })),
            }
            let decl = EventDecl {
                kind: EventKind::Consensus,
                name: id.clone(),
                payload: m.var(&var).map(|v| v.domain.clone()),
                env: false,
                cardinality: Some(card),
                participants: Some(participants),
                proposal_var: Some(var),
                dec_vars: Vec::new(),
            };
            self.declare_agreement(m, decl, pos);
            Trigger::Consensus(id)
        } else {
            return self.err("`_`, `recv`, `partition` or `consensus`");
        };
        let guard = if self.eat_kw("when") {
            let g = self.expr(m, ExprCtx::Guard)?;
            Some(g)
        } else {
            None
        };
        let (body, lose) = if let Trigger::Partition(_) = trigger {
            self.expect_kw("win")?;
            self.expect_sym(":")?;
            let win = self.body(m, &trigger)?;
            self.expect_kw("lose")?;
            self.expect_sym(":")?;
            let lose = self.body(m, &trigger)?;
            (win, Some(lose))
        } else {
            self.expect_kw("do")?;
            (self.body(m, &trigger)?, None)
        };
        if body.send.is_some() && trigger != Trigger::Internal {
            self.diags.push(Diagnostic::at(tpos.0, tpos.1, DiagnosticKind::Invalid("only `on _` handlers may send".into())));
        }
        if let Trigger::Consensus(id) = &trigger {
            let targets: Vec<String> = body
                .updates
                .iter()
                .filter(|u| matches!(&u.expr, Expr::DecVar { inst, .. } if inst == id))
                .map(|u| u.var.clone())
                .collect();
            if let Some(e) = m.events.iter_mut().find(|e| &e.name == id) {
                for t in targets {
                    if !e.dec_vars.contains(&t) {
                        e.dec_vars.push(t);
                    }
                }
            }
        }
        Ok(Handler { trigger, guard, body, lose })
    }

    fn body(&mut self, m: &ProcessModel, trigger: &Trigger) -> PResult<Body> {
        let mut body = Body::default();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(w) if BODY_END.contains(&w.as_str()) => break,
                Tok::Ident(w) if w == "goto" => {
                    self.bump();
                    let (target, pos) = self.ident("a location name")?;
                    self.gotos.push((target.clone(), pos));
                    body.target = Some(target);
                    break;
                }
                Tok::Ident(w) if w == "broadcast" || w == "send" => {
                    let pos = self.here();
                    self.bump();
                    let kind = if w == "broadcast" { SendKind::Broadcast } else { SendKind::Rendezvous };
                    self.expect_sym("(")?;
                    let (ev, epos) = self.ident("an event name")?;
                    let payload = if self.eat_sym("[") {
                        let e = self.expr(m, ExprCtx::Body(trigger))?;
                        self.expect_sym("]")?;
                        Some(e)
                    } else {
                        None
                    };
                    self.expect_sym(")")?;
                    self.check_send(m, kind, &ev, payload.is_some(), epos);
                    if body.send.is_some() {
                        self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Invalid("at most one send per handler".into())));
                    }
                    body.send = Some(Send { kind, event: ev, payload });
                }
                Tok::Ident(_) => {
                    let (var, pos) = self.ident("a variable name")?;
                    self.expect_sym(":=")?;
                    let expr = self.expr(m, ExprCtx::Body(trigger))?;
                    if m.var(&var).is_none() {
                        self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Resolution { symbol: var.clone() }));
                    }
                    if body.updates.iter().any(|u| u.var == var) {
                        self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Duplicate { symbol: format!("assignment to {var}") }));
                    }
                    body.updates.push(Update { var, expr });
                }
                _ => return self.err("a statement, `goto`, or the next handler"),
            }
        }
        Ok(body)
    }

    fn check_send(&mut self, m: &ProcessModel, kind: SendKind, ev: &str, has_payload: bool, pos: Pos) {
        let Some(e) = m.event(ev) else {
            self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Resolution { symbol: ev.into() }));
            return;
        };
        let want = match kind {
            SendKind::Broadcast => EventKind::Broadcast,
            SendKind::Rendezvous => EventKind::Rendezvous,
        };
        if e.kind != want {
            self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Invalid(format!("`{ev}` is not a {} event", want.short()))));
        } else if e.payload.is_some() != has_payload {
            let msg = if has_payload { format!("`{ev}` carries no payload") } else { format!("`{ev}` needs a payload") };
            self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Invalid(msg)));
        }
    }

    fn safety(&mut self) -> PResult<(SafetySpec, SpecRefs)> {
        self.expect_kw("safety")?;
        self.expect_kw("agreement")?;
        let (variable, vpos) = self.ident("a variable name")?;
        self.expect_kw("in")?;
        self.expect_sym("{")?;
        let mut locations = Vec::new();
        let mut locs = Vec::new();
        loop {
            let (l, pos) = self.ident("a location name")?;
            locations.push(l);
            locs.push(pos);
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym("}")?;
        Ok((SafetySpec { variable, locations }, SpecRefs { var: vpos, locs }))
    }

    fn expr(&mut self, m: &ProcessModel, ctx: ExprCtx<'_>) -> PResult<Expr> {
        self.binary(m, ctx, 0)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let Tok::Sym(s) = self.peek() else { return None };
        Some(match *s {
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            _ => return None,
        })
    }

    fn binary(&mut self, m: &ProcessModel, ctx: ExprCtx<'_>, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary(m, ctx)?;
        while let Some(op) = self.peek_binop() {
            if op.precedence() <= min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(m, ctx, op.precedence())?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self, m: &ProcessModel, ctx: ExprCtx<'_>) -> PResult<Expr> {
        if self.eat_sym("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary(m, ctx)?)));
        }
        if self.eat_sym("-") {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary(m, ctx)?)));
        }
        self.primary(m, ctx)
    }

    fn primary(&mut self, m: &ProcessModel, ctx: ExprCtx<'_>) -> PResult<Expr> {
        let pos = self.here();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr(m, ctx)?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(w) if w == "true" || w == "false" => {
                self.bump();
                Ok(Expr::Bool(w == "true"))
            }
            Tok::Ident(w) if w == "default" => {
                self.bump();
                self.expect_sym("(")?;
                let (v, vpos) = self.ident("a variable name")?;
                self.expect_sym(")")?;
                if m.var(&v).is_none() {
                    self.diags.push(Diagnostic::at(vpos.0, vpos.1, DiagnosticKind::Resolution { symbol: v.clone() }));
                }
                Ok(Expr::Default(v))
            }
            Tok::Ident(_) if matches!(self.peek_at(1), Tok::Sym(".")) => {
                let (base, _) = self.ident("a name")?;
                self.bump();
                let fpos = self.here();
                let field = match self.peek().clone() {
                    Tok::Ident(f) => {
                        self.bump();
                        f
                    }
                    _ => return self.err("`payld`, `decVar` or `winS`"),
                };
                match field.as_str() {
                    "payld" => {
                        self.check_payload(m, ctx, &base, pos);
                        Ok(Expr::Payload(base))
                    }
                    "decVar" => {
                        self.expect_sym("[")?;
                        let ipos = self.here();
                        let idx = self.number()?;
                        self.expect_sym("]")?;
                        self.check_decvar(m, ctx, &base, idx, pos, ipos);
                        Ok(Expr::DecVar { inst: base, index: idx.max(0) as u32 })
                    }
                    "winS" => {
                        self.win_refs.push((base.clone(), pos));
                        Ok(Expr::WinSet(base))
                    }
                    _ => Err(Diagnostic::at(fpos.0, fpos.1, DiagnosticKind::Syntax { expected: "`payld`, `decVar` or `winS`".into(), found: format!("`{field}`") })),
                }
            }
            Tok::Ident(_) => {
                let (v, vpos) = self.ident("an expression")?;
                if m.var(&v).is_none() {
                    self.diags.push(Diagnostic::at(vpos.0, vpos.1, DiagnosticKind::Resolution { symbol: v.clone() }));
                }
                Ok(Expr::Var(v))
            }
            _ => self.err("an expression"),
        }
    }

    fn check_payload(&mut self, m: &ProcessModel, ctx: ExprCtx<'_>, ev: &str, pos: Pos) {
        let msg = match ctx {
            ExprCtx::Guard => Some("guards may not read event payloads".to_string()),
            ExprCtx::Body(Trigger::Recv(t)) if t == ev => match m.event(ev) {
                Some(e) if e.payload.is_none() => Some(format!("`{ev}` carries no payload")),
                _ => None,
            },
            ExprCtx::Body(_) => Some(format!("`{ev}.payld` is only available in a `recv({ev})` handler")),
        };
        if let Some(msg) = msg {
            self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Invalid(msg)));
        }
    }

    fn check_decvar(&mut self, m: &ProcessModel, ctx: ExprCtx<'_>, inst: &str, idx: i64, pos: Pos, ipos: Pos) {
        let ok_ctx = matches!(ctx, ExprCtx::Body(Trigger::Consensus(c)) if c == inst);
        if !ok_ctx {
            let msg = format!("`{inst}.decVar` is only available in its consensus handler");
            self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Invalid(msg)));
            return;
        }
        let card = m.event(inst).and_then(|e| e.cardinality).unwrap_or(1) as i64;
        if idx < 1 || idx > card {
            let msg = format!("decVar index {idx} outside 1..{card}");
            self.diags.push(Diagnostic::at(ipos.0, ipos.1, DiagnosticKind::Invalid(msg)));
        }
    }

    /// Runs the checks that need the complete model.
    fn finish(mut self, m: ProcessModel) -> Result<ProcessModel, Diagnostics> {
        for (target, pos) in std::mem::take(&mut self.gotos) {
            if m.location_index(&target).is_none() {
                self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Resolution { symbol: target }));
            }
        }
        for (p, pos) in std::mem::take(&mut self.win_refs) {
            if !m.event(&p).is_some_and(|e| e.kind == EventKind::Partition) {
                self.diags.push(Diagnostic::at(pos.0, pos.1, DiagnosticKind::Resolution { symbol: format!("{p}.winS") }));
            }
        }
        for e in m.agreements().filter(|e| e.kind == EventKind::Consensus) {
            let pd = e.proposal_var.as_deref().and_then(|v| m.var(v)).map(|v| &v.domain);
            for d in &e.dec_vars {
                if m.var(d).map(|v| &v.domain) != pd {
                    let msg = format!("`{d}` and the proposal variable of `{}` have different domains", e.name);
                    self.diags.push(Diagnostic::global(DiagnosticKind::Invalid(msg)));
                }
            }
        }
        let initials = m.locations.iter().filter(|l| l.initial).count();
        if initials == 0 {
            self.diags.push(Diagnostic::global(DiagnosticKind::NoInitialLocation));
        } else if initials > 1 {
            self.diags.push(Diagnostic::global(DiagnosticKind::Invalid("more than one initial location".into())));
        }
        if let (Some(spec), Some(refs)) = (&m.safety, &self.spec_refs) {
            resolve_spec(&m, spec, refs, &mut self.diags);
        }
        if self.diags.is_empty() {
            Ok(m)
        } else {
            Err(Diagnostics(self.diags))
        }
    }
}

fn send_event(h: &Handler) -> Option<&str> {
    h.body.send.as_ref().map(|s| s.event.as_str())
}
