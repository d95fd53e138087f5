use super::*;

const CONSORTIUM: &str = include_str!("../../../../models/consortium.mer");

#[test]
fn consortium_shape() {
    let m = parse_model(CONSORTIUM).unwrap();
    assert_eq!(m.name, "Consortium");
    assert_eq!(m.variables.len(), 2);
    assert_eq!(m.comm_events().count(), 3);
    let agreements: Vec<_> = m.agreements().map(|e| e.name.as_str()).collect();
    assert_eq!(agreements, ["elect", "vc", "share"]);
    let locs: Vec<_> = m.locations.iter().map(|l| l.name.as_str()).collect();
    assert_eq!(locs, ["Election", "Deliberate", "Decided", "Announce", "LeaderDone", "Wait", "ReplicaDone"]);
    assert_eq!(m.initial_index(), 0);
    let vc = m.event("vc").unwrap();
    assert_eq!(vc.proposal_var.as_deref(), Some("motion"));
    assert_eq!(vc.dec_vars, ["decision"]);
    assert_eq!(vc.participants, Some(Participants::WinnersOf("elect".into())));
    assert_eq!(m.event("elect").unwrap().cardinality, Some(2));
    assert!(m.event("influence").unwrap().env);
    assert_eq!(m.event("reset").unwrap().payload, None);
    assert_eq!(m.safety.as_ref().unwrap().locations, ["LeaderDone", "ReplicaDone"]);
}

#[test]
fn handler_without_goto_stays() {
    let m = parse_model(CONSORTIUM).unwrap();
    let h = &m.locations[1].handlers[0];
    assert_eq!(h.trigger, Trigger::Recv("influence".into()));
    assert_eq!(h.body.target, None);
    assert_eq!(h.body.updates[0].expr, Expr::Payload("influence".into()));
}

#[test]
fn minimal_model() {
    let m = parse_model("process P\ninitial location Only\n").unwrap();
    assert!(m.variables.is_empty() && m.events.is_empty());
    assert_eq!(m.locations.len(), 1);
    assert!(m.locations[0].handlers.is_empty());
    assert!(m.safety.is_none());
}

#[test]
fn missing_initial_location() {
    let err = parse_model("process P\nlocation A\nlocation B\n").unwrap_err();
    assert!(err.has(|k| *k == DiagnosticKind::NoInitialLocation));
    assert!(err.render("p.mer").contains("no initial location"));
}

#[test]
fn syntax_error_position() {
    let err = parse_model("process P\ninitial location A\n  on recv(x do\n").unwrap_err();
    let d = &err.0[0];
    assert!(matches!(d.kind, DiagnosticKind::Syntax { .. }), "{d:?}");
    assert_eq!((d.line, d.col), (Some(3), Some(13)));
    assert!(d.render("m.mer").starts_with("m.mer:3:13: error: expected"));
}

#[test]
fn unresolved_symbols() {
    let src = "process P\nvariables\n  int x\ninitial location A\n  on _ do\n    y := x\n    goto B\n";
    let err = parse_model(src).unwrap_err();
    let syms: Vec<_> = err
        .0
        .iter()
        .filter_map(|d| match &d.kind {
            DiagnosticKind::Resolution { symbol } => Some(symbol.as_str()),
            _ => None,
        })
        .collect();
    assert_eq!(syms, ["y", "B"]);
}

#[test]
fn duplicates_are_rejected() {
    let err = parse_model("process P\nvariables\n  int x\n  int x\ninitial location A\n").unwrap_err();
    assert!(err.has(|k| matches!(k, DiagnosticKind::Duplicate { symbol } if symbol == "x")));
    let err = parse_model("process P\ninitial location A\nlocation A\n").unwrap_err();
    assert!(err.has(|k| matches!(k, DiagnosticKind::Duplicate { .. })));
    let err = parse_model("process P\ninitial location A\n  on _ do\n  on _ do\n").unwrap_err();
    assert!(err.has(|k| matches!(k, DiagnosticKind::Duplicate { .. })));
}

#[test]
fn guarded_alternatives_are_allowed() {
    let src = "process P\nvariables\n  int x\n  int y\ninitial location A\n  on _ when x == y do\n  on _ when x != y do\n";
    assert!(parse_model(src).is_ok());
}

#[test]
fn guards_may_not_read_payloads() {
    let src = "process P\nvariables\n  int x\nevents\n  env rz e : int\ninitial location A\n  on recv(e) when e.payld == x do\n";
    let err = parse_model(src).unwrap_err();
    assert!(err.has(|k| matches!(k, DiagnosticKind::Invalid(m) if m.contains("payload"))));
}

#[test]
fn payload_outside_its_handler() {
    let src = "process P\nvariables\n  int x\nevents\n  env rz e : int\ninitial location A\n  on _ do\n    x := e.payld\n";
    assert!(parse_model(src).is_err());
}

#[test]
fn decvar_index_is_bounded_by_cardinality() {
    let src = "process P\nvariables\n  int x\ninitial location A\n  on consensus<c>(All,1,x) do\n    x := c.decVar[2]\n";
    assert!(parse_model(src).is_err());
}

#[test]
fn conflicting_agreement_parameters() {
    let src = "process P\ninitial location A\n  on partition<p>(All,1)\n    win: goto A\n    lose: goto A\nlocation B\n  on partition<p>(All,2)\n    win: goto A\n    lose: goto A\n";
    assert!(parse_model(src).is_err());
}

#[test]
fn power_of_two_ranges() {
    let m = parse_model("process P\nvariables\n  int[1,2^32] x\ninitial location A\n").unwrap();
    assert_eq!(m.variables[0].domain, Domain::IntRange { lo: 1, hi: 1 << 32, tag: None });
    assert_eq!(m.variables[0].domain.size(), Some(1 << 32));
}

#[test]
fn tagged_domains_are_distinct() {
    let m = parse_model("process P\nvariables\n  int<a> x\n  int<b> y\n  int<a> z\ninitial location A\n").unwrap();
    assert_eq!(m.int_domains().len(), 2);
    assert_eq!(m.vars_of(&m.variables[0].domain), [0, 2]);
}

#[test]
fn send_checks_event_kind_and_payload() {
    let base = "process P\nvariables\n  int x\nevents\n  br b : int\n  rz r : unit\ninitial location A\n  on _ do\n";
    assert!(parse_model(&format!("{base}    broadcast(b[x])\n")).is_ok());
    assert!(parse_model(&format!("{base}    send(r)\n")).is_ok());
    assert!(parse_model(&format!("{base}    send(b[x])\n")).is_err());
    assert!(parse_model(&format!("{base}    broadcast(b)\n")).is_err());
}

#[test]
fn spec_trailer() {
    let m = parse_model(CONSORTIUM).unwrap();
    let s = parse_spec("safety agreement decision in {LeaderDone, ReplicaDone}", &m).unwrap();
    assert_eq!(s.variable, "decision");
    assert_eq!(s.locations, ["LeaderDone", "ReplicaDone"]);
    let err = parse_spec("safety agreement verdict in {LeaderDone}", &m).unwrap_err();
    assert!(err.has(|k| matches!(k, DiagnosticKind::Resolution { symbol } if symbol == "verdict")));
    assert!(parse_spec("safety agreement decision in {}", &m).is_err());
}

#[test]
fn distreg_spec() {
    let m = parse_model(include_str!("../../../../models/distreg.mer")).unwrap();
    let s = parse_spec("safety agreement register in {Serve}", &m).unwrap();
    assert_eq!(Some(&s), m.safety.as_ref());
}

#[test]
fn consortium_round_trip() {
    let m = parse_model(CONSORTIUM).unwrap();
    let text = pretty_print(&m);
    assert_eq!(parse_model(&text).unwrap(), m);
    assert_eq!(pretty_print(&parse_model(&text).unwrap()), text);
}

#[test]
fn bounded_domains_print_as_ranges() {
    let mut m = parse_model(CONSORTIUM).unwrap();
    for v in &mut m.variables {
        v.domain = Domain::IntRange { lo: 1, hi: 3, tag: None };
    }
    let text = pretty_print(&m);
    assert!(text.contains("int[1,3] motion"));
}

#[test]
fn empty_location_prints_bare_block() {
    let m = parse_model("process P\ninitial location A\nlocation B\n  on _ do\n    goto A\n").unwrap();
    let text = pretty_print(&m);
    assert!(text.contains("initial location A\n\nlocation B\n"));
    assert_eq!(parse_model(&text).unwrap(), m);
}

#[test]
fn parse_is_deterministic() {
    assert_eq!(parse_model(CONSORTIUM).unwrap(), parse_model(CONSORTIUM).unwrap());
}
