//! Canonical text rendering of a model.

use super::ast::*;
use std::fmt::Write;

pub fn pretty_print(m: &ProcessModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "process {}", m.name);
    if !m.variables.is_empty() {
        out.push_str("\nvariables\n");
        for v in &m.variables {
            let _ = writeln!(out, "  {} {}", v.domain, v.name);
        }
    }
    let comm: Vec<_> = m.comm_events().collect();
    if !comm.is_empty() {
        out.push_str("\nevents\n");
        for e in comm {
            let env = if e.env { "env " } else { "" };
            let kind = if e.kind == EventKind::Broadcast { "br" } else { "rz" };
            let payload = e.payload.as_ref().map_or_else(|| "unit".to_string(), |d| d.to_string());
            let _ = writeln!(out, "  {env}{kind} {} : {payload}", e.name);
        }
    }
    for loc in &m.locations {
        out.push('\n');
        if loc.initial {
            out.push_str("initial ");
        }
        let _ = writeln!(out, "location {}", loc.name);
        for h in &loc.handlers {
            handler(&mut out, m, h);
        }
    }
    if let Some(s) = &m.safety {
        let _ = writeln!(out, "\nsafety agreement {} in {{{}}}", s.variable, s.locations.join(", "));
    }
    out
}

fn handler(out: &mut String, m: &ProcessModel, h: &Handler) {
    out.push_str("  on ");
    match &h.trigger {
        Trigger::Internal => out.push('_'),
        Trigger::Recv(e) => {
            let _ = write!(out, "recv({e})");
        }
        Trigger::Partition(p) => {
            let d = m.event(p).expect("resolved partition");
            let _ = write!(out, "partition<{p}>({},{})", participants(d), d.cardinality.unwrap_or(1));
        }
        Trigger::Consensus(c) => {
            let d = m.event(c).expect("resolved consensus");
            let var = d.proposal_var.as_deref().unwrap_or("");
            let _ = write!(out, "consensus<{c}>({},{},{var})", participants(d), d.cardinality.unwrap_or(1));
        }
    }
    if let Some(g) = &h.guard {
        let _ = write!(out, " when {}", expr_to_string(g));
    }
    match &h.lose {
        Some(lose) => {
            out.push('\n');
            branch(out, "win", &h.body);
            branch(out, "lose", lose);
        }
        None => {
            out.push_str(" do\n");
            body(out, &h.body, 4);
        }
    }
}

fn participants(d: &EventDecl) -> String {
    d.participants.as_ref().map_or_else(|| "All".to_string(), |p| p.to_string())
}

fn branch(out: &mut String, label: &str, b: &Body) {
    if b.updates.is_empty() && b.send.is_none() {
        match &b.target {
            Some(t) => {
                let _ = writeln!(out, "    {label}: goto {t}");
            }
            None => {
                let _ = writeln!(out, "    {label}:");
            }
        }
    } else {
        let _ = writeln!(out, "    {label}:");
        body(out, b, 6);
    }
}

fn body(out: &mut String, b: &Body, indent: usize) {
    let pad = " ".repeat(indent);
    for u in &b.updates {
        let _ = writeln!(out, "{pad}{} := {}", u.var, expr_to_string(&u.expr));
    }
    if let Some(s) = &b.send {
        let verb = match s.kind {
            SendKind::Broadcast => "broadcast",
            SendKind::Rendezvous => "send",
        };
        match &s.payload {
            Some(p) => {
                let _ = writeln!(out, "{pad}{verb}({}[{}])", s.event, expr_to_string(p));
            }
            None => {
                let _ = writeln!(out, "{pad}{verb}({})", s.event);
            }
        }
    }
    if let Some(t) = &b.target {
        let _ = writeln!(out, "{pad}goto {t}");
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(out: &mut String, e: &Expr, ctx_prec: u8) {
    match e {
        Expr::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::Var(v) => out.push_str(v),
        Expr::Payload(ev) => {
            let _ = write!(out, "{ev}.payld");
        }
        Expr::DecVar { inst, index } => {
            let _ = write!(out, "{inst}.decVar[{index}]");
        }
        Expr::WinSet(p) => {
            let _ = write!(out, "{p}.winS");
        }
        Expr::Default(v) => {
            let _ = write!(out, "default({v})");
        }
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            write_expr(out, inner, u8::MAX);
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            let paren = p < ctx_prec || ctx_prec == u8::MAX;
            if paren {
                out.push('(');
            }
            write_expr(out, a, p);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, p + 1);
            if paren {
                out.push(')');
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_model;

    fn roundtrip_expr(src: &str) -> String {
        let model = format!("process P\nvariables\n  int[0,9] a\n  int[0,9] b\ninitial location L\n  on _ when {src} do\n");
        let m = parse_model(&model).unwrap();
        expr_to_string(m.locations[0].handlers[0].guard.as_ref().unwrap())
    }

    #[test]
    fn parenthesizes_only_where_needed() {
        assert_eq!(roundtrip_expr("a == b && (a != 1 || b == 2)"), "a == b && (a != 1 || b == 2)");
        assert_eq!(roundtrip_expr("a - (b - 1) == 0"), "a - (b - 1) == 0");
        assert_eq!(roundtrip_expr("(a - b) - 1 == 0"), "a - b - 1 == 0");
        assert_eq!(roundtrip_expr("!(a == b)"), "!(a == b)");
    }
}
