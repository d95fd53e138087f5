use super::*;
use crate::frontend::parse_model;

fn model(name: &str) -> ProcessModel {
    let path = format!("{}/../../models/{name}.mer", env!("CARGO_MANIFEST_DIR"));
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn sem(name: &str, size: u64, n: usize) -> Semantics {
    let m = model(name);
    let inst = Instantiation::uniform(&m, size).unwrap();
    Semantics::new(&m, inst, n).unwrap()
}

fn state(sem: &Semantics, loc: &str, vals: &[(&str, i64)]) -> LocalState {
    let mut s = sem.initial_state();
    s.loc = sem.model.location_index(loc).unwrap() as u32;
    for (v, x) in vals {
        s.vals[sem.model.var_index(v).unwrap()] = *x;
    }
    s
}

fn only_handler(sem: &Semantics, loc: &str) -> HandlerRef {
    HandlerRef { loc: sem.model.location_index(loc).unwrap(), index: 0 }
}

#[test]
fn announce_sends_its_decision() {
    let sem = sem("consortium", 3, 2);
    let inform = sem.event_index("inform").unwrap();
    let s = state(&sem, "Announce", &[("decision", 2), ("motion", 1)]);
    let h = only_handler(&sem, "Announce");
    let send = |v| Action::Event { event: inform, payload: Payload::Value(v), polarity: Polarity::Acting };
    let t = sem.eval_handler(h, &s, 1, &send(2)).unwrap();
    assert_eq!(t, state(&sem, "LeaderDone", &[("decision", 2), ("motion", 1)]));
    assert_eq!(sem.eval_handler(h, &s, 1, &send(3)), None);
}

#[test]
fn wait_stores_received_value() {
    let sem = sem("consortium", 100, 2);
    let inform = sem.event_index("inform").unwrap();
    let s = state(&sem, "Wait", &[]);
    let a = Action::Event { event: inform, payload: Payload::Value(99), polarity: Polarity::Reacting };
    let t = sem.eval_handler(only_handler(&sem, "Wait"), &s, 2, &a).unwrap();
    assert_eq!(t, state(&sem, "ReplicaDone", &[("decision", 99)]));
    let acting = Action::Event { event: inform, payload: Payload::Value(99), polarity: Polarity::Acting };
    assert_eq!(sem.eval_handler(only_handler(&sem, "Wait"), &s, 2, &acting), None);
}

#[test]
fn payload_outside_domain_is_rejected() {
    let sem = sem("consortium", 3, 2);
    let inform = sem.event_index("inform").unwrap();
    let a = Action::Event { event: inform, payload: Payload::Value(99), polarity: Polarity::Reacting };
    assert_eq!(sem.eval_handler(only_handler(&sem, "Wait"), &state(&sem, "Wait", &[]), 2, &a), None);
}

#[test]
fn partition_branches_follow_membership() {
    let sem = sem("consortium", 3, 3);
    let elect = sem.event_index("elect").unwrap();
    let s = sem.initial_state();
    let h = only_handler(&sem, "Election");
    let win = |w| Action::Event { event: elect, payload: Payload::WinSet(w), polarity: Polarity::Acting };
    let lose = |w| Action::Event { event: elect, payload: Payload::WinSet(w), polarity: Polarity::Reacting };
    let t = sem.eval_handler(h, &s, 1, &win(0b011)).unwrap();
    assert_eq!(sem.model.locations[t.loc as usize].name, "Deliberate");
    assert_eq!(t.vals[sem.win_slot(elect).unwrap()], 0b011);
    assert!(sem.eval_handler(h, &s, 3, &win(0b011)).is_none());
    let t = sem.eval_handler(h, &s, 3, &lose(0b011)).unwrap();
    assert_eq!(sem.model.locations[t.loc as usize].name, "Wait");
    // wrong cardinality
    assert!(sem.eval_handler(h, &s, 1, &win(0b001)).is_none());
}

#[test]
fn consensus_acting_requires_own_proposal() {
    let sem = sem("consortium", 3, 2);
    let vc = sem.event_index("vc").unwrap();
    let elect = sem.event_index("elect").unwrap();
    let mut s = state(&sem, "Deliberate", &[("motion", 2)]);
    s.vals[sem.win_slot(elect).unwrap()] = 0b11;
    let h = HandlerRef { loc: s.loc as usize, index: 1 };
    let act = |v| Action::Event { event: vc, payload: Payload::Values(vec![v]), polarity: Polarity::Acting };
    let react = |v| Action::Event { event: vc, payload: Payload::Values(vec![v]), polarity: Polarity::Reacting };
    assert!(sem.eval_handler(h, &s, 1, &act(3)).is_none());
    let t = sem.eval_handler(h, &s, 1, &act(2)).unwrap();
    assert_eq!(t.vals[sem.model.var_index("decision").unwrap()], 2);
    let t = sem.eval_handler(h, &s, 1, &react(3)).unwrap();
    assert_eq!(t.vals[sem.model.var_index("decision").unwrap()], 3);
    // not a participant
    s.vals[sem.win_slot(elect).unwrap()] = 0b10;
    assert!(sem.eval_handler(h, &s, 1, &react(3)).is_none());
}

#[test]
fn single_location_ts() {
    let sem = sem("one-loc", 1, 1);
    let ts = build_local_ts(&sem, 1);
    assert_eq!(ts.states.len(), 1);
    assert!(ts.transitions.is_empty());
}

#[test]
fn unbounded_domain_needs_a_size() {
    let m = model("consortium");
    assert_eq!(
        Instantiation::declared(&m),
        Err(SemanticsError::DomainUnbounded("int".into()))
    );
    let m32 = model("consortium-32bit");
    assert!(matches!(Instantiation::declared(&m32), Err(SemanticsError::DomainUnbounded(_))));
    let sizes = [(m32.int_domains()[0].clone(), 3)].into_iter().collect();
    let inst = Instantiation::new(&m32, &sizes).unwrap();
    assert_eq!(inst.domains()[0].1, DomainInst { lo: 1, hi: 3, default: 1 });
}

/// Every transition is produced by its recorded handler, and every candidate
/// action of every reachable state that some handler accepts is a transition.
#[test]
fn transitions_are_exactly_the_handler_results() {
    for (name, size) in [("consortium", 3), ("consortium-check", 3), ("distreg", 2), ("distreg-two", 2)] {
        let sem = sem(name, size, 2);
        for pid in 1..=2 {
            let ts = build_local_ts(&sem, pid);
            for (s, a, t, h) in &ts.transitions {
                let got = sem.eval_handler(*h, &ts.states[*s], pid, a);
                assert_eq!(got.as_ref(), Some(&ts.states[*t]), "{name}");
            }
            for s in &ts.states {
                for (h, a) in sem.candidate_actions(s, pid) {
                    if let Some(t) = sem.eval_handler(h, s, pid, &a) {
                        assert!(ts.contains(s, &a, &t));
                    }
                }
                for (i, d) in sem.var_inst.iter().enumerate() {
                    if let Some(d) = d {
                        assert!(d.contains(s.vals[i]));
                    }
                }
            }
        }
    }
}

#[test]
fn consortium_state_space_over_three_values() {
    let sem = sem("consortium", 3, 3);
    let ts = build_local_ts(&sem, 1);
    // all 7 locations are reachable and every valuation stays within [1,3]
    let locs: HashSet<u32> = ts.states.iter().map(|s| s.loc).collect();
    assert_eq!(locs.len(), 7);
    assert!(ts.states.len() <= 7 * 3 * 3 * 8 * 8);
}

#[test]
fn distreg_register_copies() {
    let sem = sem("distreg", 2, 2);
    let ts = build_local_ts(&sem, 1);
    let values: HashSet<i64> = ts.states.iter().map(|s| s.vals[0]).collect();
    assert_eq!(values, HashSet::from([1, 2]));
    assert_eq!(ts.states.len(), 3 * 2);
}

#[test]
fn dump_format() {
    let sem = sem("consortium", 3, 2);
    let ts = build_local_ts(&sem, 1);
    let dump = ts.dump(&sem);
    assert!(dump.lines().any(|l| l == "Announce{motion=1, decision=2, elect.winS={1,2}, share.winS={1}} --!:inform[2]--> LeaderDone{motion=1, decision=2, elect.winS={1,2}, share.winS={1}}"), "{dump}");
}

#[test]
fn helpers() {
    assert_eq!(submasks(0b101).collect::<Vec<_>>(), vec![0b101, 0b100, 0b001, 0]);
    assert_eq!(arrangements(&[1, 2, 3], 2).len(), 6);
    assert_eq!(pid_set_string(0b101), "{1,3}");
}
