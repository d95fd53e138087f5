use super::*;
use crate::frontend::parse_model;
use crate::global::{reachable_states, successors, Limits};
use crate::local::{Instantiation, Semantics};

fn model(name: &str) -> ProcessModel {
    let path = format!("{}/../../models/{name}.mer", env!("CARGO_MANIFEST_DIR"));
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn names(lts: &Lts, set: &BTreeSet<usize>) -> Vec<String> {
    set.iter().map(|&n| lts.nodes[n].clone()).collect()
}

fn pair(m: &ProcessModel, lts: &Lts, loc: &str, var: &str) -> (usize, usize) {
    (lts.nodes.iter().position(|n| n == loc).unwrap(), m.var_index(var).unwrap())
}

fn src(m: &ProcessModel, lts: &Lts, loc: &str, var: &str) -> Source {
    let (node, var) = pair(m, lts, loc, var);
    Source::Pair { node, var }
}

const CORPUS: &[&str] = &[
    "consortium",
    "consortium-three",
    "consortium-bcast",
    "consortium-check",
    "consortium-32bit",
    "distreg",
    "distreg-two",
    "distreg-32bit",
];

#[test]
fn consortium_edges_follow_gotos() {
    let m = model("consortium");
    let lts = build_lts(&m);
    assert_eq!(lts.nodes.len(), 7);
    let edges: Vec<(String, String)> =
        lts.edge_set().into_iter().map(|(a, b)| (lts.nodes[a].clone(), lts.nodes[b].clone())).collect();
    let expected = [
        ("Election", "Deliberate"),
        ("Election", "Wait"),
        ("Deliberate", "Deliberate"),
        ("Deliberate", "Decided"),
        ("Decided", "Announce"),
        ("Decided", "LeaderDone"),
        ("Announce", "LeaderDone"),
        ("LeaderDone", "Election"),
        ("Wait", "ReplicaDone"),
        ("ReplicaDone", "Election"),
    ];
    let mut want: Vec<(String, String)> = expected.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    let mut got = edges;
    want.sort();
    got.sort();
    assert_eq!(got, want);
    // the share partition yields one edge per branch
    let decided = m.location_index("Decided").unwrap();
    let share: Vec<&Edge> = lts.edges_of(HandlerRef { loc: decided, index: 0 }).collect();
    assert_eq!(share.len(), 2);
    assert_eq!(lts.nodes[share[0].dst], "Announce");
    assert_eq!(lts.nodes[share[1].dst], "LeaderDone");
}

#[test]
fn single_location_lts() {
    let m = parse_model("process P\ninitial location L\n  on _ do\n    goto L\n").unwrap();
    let lts = build_lts(&m);
    assert_eq!(lts.nodes.len(), 1);
    assert_eq!(lts.edge_set(), BTreeSet::from([(0, 0)]));
    assert_eq!(phase_partition(&lts, &m).phases.len(), 1);
}

#[test]
fn consortium_gets_facts() {
    let m = model("consortium");
    let lts = build_lts(&m);
    let gets = compute_gets(&m, &lts);
    let (ann_d, lts_ref) = (pair(&m, &lts, "Announce", "decision"), &lts);
    assert!(gets.sources(ann_d.0, ann_d.1).contains(&src(&m, lts_ref, "Decided", "decision")));
    let dm = pair(&m, &lts, "Deliberate", "motion");
    assert!(gets.sources(dm.0, dm.1).contains(&Source::Env));
    let rd = pair(&m, &lts, "ReplicaDone", "decision");
    assert_eq!(gets.sources(rd.0, rd.1), BTreeSet::from([src(&m, &lts, "Announce", "decision")]));
    let dd = pair(&m, &lts, "Decided", "decision");
    assert_eq!(gets.sources(dd.0, dd.1), BTreeSet::from([src(&m, &lts, "Deliberate", "motion")]));
    let e = pair(&m, &lts, "Election", "decision");
    assert_eq!(
        gets.sources(e.0, e.1),
        BTreeSet::from([Source::Default])
    );
}

#[test]
fn consortium_server_region_is_announce() {
    let m = model("consortium");
    let lts = build_lts(&m);
    assert_eq!(names(&lts, &server_regions(&lts, &m)), vec!["Announce"]);
}

#[test]
fn server_regions_of_other_models() {
    for name in ["distreg", "distreg-two", "consortium-bcast", "consortium-check"] {
        let m = model(name);
        let lts = build_lts(&m);
        assert!(server_regions(&lts, &m).is_empty(), "{name}");
    }
    let m = parse_model("process P\ninitial location A\n  on _ do\n    goto B\nlocation B\n").unwrap();
    assert!(server_regions(&build_lts(&m), &m).is_empty());
}

#[test]
fn consortium_phases() {
    let m = model("consortium");
    let lts = build_lts(&m);
    let p = phase_partition(&lts, &m);
    let got: Vec<Vec<String>> = p.phases.iter().map(|b| names(&lts, b)).collect();
    assert_eq!(got[0], vec!["Election"]);
    let mut rest = got[1].clone();
    rest.sort();
    assert_eq!(rest, vec!["Announce", "Decided", "Deliberate", "LeaderDone", "ReplicaDone", "Wait"]);
    assert_eq!(got.len(), 2);
}

#[test]
fn rendezvous_only_model_has_one_phase() {
    let src = "process P\nevents\n  rz ping : unit\ninitial location A\n  on _ do\n    send(ping)\n    goto B\nlocation B\n  on recv(ping) do\n    goto A\n";
    let m = parse_model(src).unwrap();
    assert_eq!(phase_partition(&build_lts(&m), &m).phases.len(), 1);
}

#[test]
fn text_and_dot_dumps() {
    let m = model("consortium");
    let lts = build_lts(&m);
    let text = emit_text(&m, &lts, &compute_gets(&m, &lts));
    assert!(text.contains("edge Decided -> Announce [partition<share> win]"));
    assert!(text.contains("gets ReplicaDone.decision <- Announce.decision"));
    assert!(text.contains("server {Announce}"));
    let dot = emit_dot(&m, &lts);
    assert!(dot.starts_with("digraph \"Consortium\""));
    assert_eq!(dot.matches("->").count(), lts.edges.len());
}

#[test]
fn scc_order() {
    let adj = vec![vec![1], vec![0, 2], vec![], vec![3]];
    let comps = tarjan_scc(&adj);
    assert_eq!(comps, vec![vec![2], vec![0, 1], vec![3]]);
}

fn small(m: &ProcessModel, n: usize) -> Semantics {
    Semantics::new(m, Instantiation::uniform(m, 3).unwrap(), n).unwrap()
}

/// Every local step of an explored instance follows some LTS edge, and every
/// value a mover ends up holding is covered by a gets fact.
#[test]
fn dynamic_soundness_of_edges_and_gets() {
    for name in CORPUS {
        let m = model(name);
        let lts = build_lts(&m);
        let edges = lts.edge_set();
        let gets = compute_gets(&m, &lts);
        let sem = small(&m, 2);
        let store = reachable_states(&sem, &Limits::default()).unwrap();
        for q in store.states() {
            for t in successors(&sem, q) {
                for mv in &t.moves {
                    let (s, r) = (&q.locals[mv.pid - 1], &t.target.locals[mv.pid - 1]);
                    assert!(edges.contains(&(s.loc as usize, r.loc as usize)), "{name}");
                    for v in 0..m.variables.len() {
                        let sources = gets.sources(r.loc as usize, v);
                        let val = r.vals[v];
                        let covered = sources.iter().any(|src| match src {
                            Source::Env | Source::Default => true,
                            Source::Pair { node, var } => q
                                .locals
                                .iter()
                                .any(|p| p.loc as usize == *node && p.vals[*var] == val),
                        });
                        assert!(covered, "{name}: {}.{}", lts.nodes[r.loc as usize], m.variables[v].name);
                    }
                }
            }
        }
    }
}

#[test]
fn dynamic_soundness_of_servers_and_phases() {
    for name in CORPUS {
        let m = model(name);
        let lts = build_lts(&m);
        let servers = server_regions(&lts, &m);
        let phases = phase_partition(&lts, &m);
        for n in [2, 3] {
            let sem = small(&m, n);
            let store = reachable_states(&sem, &Limits::default()).unwrap();
            for q in store.states() {
                let in_server = q.locals.iter().filter(|s| servers.contains(&(s.loc as usize))).count();
                assert!(in_server <= 1, "{name}");
                let first = phases.phase_of(q.locals[0].loc as usize);
                assert!(q.locals.iter().all(|s| phases.phase_of(s.loc as usize) == first), "{name}");
            }
        }
    }
}
