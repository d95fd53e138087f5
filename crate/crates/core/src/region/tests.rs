use super::*;
use crate::frontend::parse_model;

fn model(name: &str) -> ProcessModel {
    let path = format!("{}/../../models/{name}.mer", env!("CARGO_MANIFEST_DIR"));
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn report(name: &str) -> Vec<CutoffReport> {
    let m = model(name);
    domain_cutoff(&m, m.safety.as_ref()).into_iter().map(|(_, r)| r.unwrap()).collect()
}

#[test]
fn consortium_region_and_cutoff() {
    for name in ["consortium", "consortium-three", "consortium-32bit"] {
        let r = report(name);
        assert_eq!(r.len(), 1);
        let r = &r[0];
        assert_eq!(
            r.region_pairs,
            [
                "Announce.decision",
                "Decided.decision",
                "Election.decision",
                "Election.motion",
                "LeaderDone.decision",
                "ReplicaDone.decision"
            ],
            "{name}"
        );
        assert_eq!((r.rho, r.lambda, r.cutoff), (1, 2, 3), "{name}");
    }
}

#[test]
fn consortium_initial_regions() {
    let m = model("consortium");
    let an = Analysis::new(&m, &m.int_domains()[0]);
    let mut log = Vec::new();
    let init = an.initial_regions(&mut log);
    let named: Vec<(Vec<String>, u32)> = init.iter().map(|c| (c.region.names(&m), c.region.rho())).collect();
    assert!(named.contains(&(vec!["Decided.decision".into()], 1)));
    assert!(named.contains(&(vec!["Announce.decision".into(), "Announce.motion".into()], 2)));
    assert!(named.contains(&(vec!["Election.decision".into(), "Election.motion".into()], 1)));
    let vc = init.iter().find(|c| c.origin == "consensus vc").unwrap();
    let grown = an.expand(vc);
    assert_eq!(
        grown.region.names(&m),
        ["Announce.decision", "Decided.decision", "LeaderDone.decision", "ReplicaDone.decision"]
    );
}

#[test]
fn other_benchmarks() {
    for name in ["consortium-bcast", "consortium-check"] {
        assert_eq!(report(name)[0].cutoff, 3, "{name}");
    }
    for name in ["distreg", "distreg-32bit"] {
        let r = &report(name)[0];
        assert_eq!(r.region_pairs, ["Serve.register"], "{name}");
        assert_eq!((r.rho, r.lambda, r.cutoff), (1, 1, 2), "{name}");
    }
    let two = report("distreg-two");
    assert_eq!(two.len(), 2);
    assert!(two.iter().all(|r| r.cutoff == 2));
}

#[test]
fn zero_bound_is_rejected() {
    assert_eq!(AbstractRegion::new(BTreeSet::new(), 0), Err(RegionError::ZeroBound));
}

#[test]
fn non_symmetric_domain_is_reported() {
    let src = std::fs::read_to_string(format!("{}/../../models/consortium.mer", env!("CARGO_MANIFEST_DIR")))
        .unwrap()
        .replace("    decision := inform.payld\n", "    decision := inform.payld + 1\n");
    let m = parse_model(&src).unwrap();
    let out = domain_cutoff(&m, m.safety.as_ref());
    assert!(matches!(out[0].1, Err(RegionError::NotSymmetric(_))));
}

#[test]
fn missing_spec_pair_is_not_minimal() {
    let m = model("consortium");
    let r = &report("consortium")[0];
    let mut pairs = r.region.pairs().clone();
    pairs.remove(&(m.location_index("ReplicaDone").unwrap(), m.var_index("decision").unwrap()));
    let shrunk = AbstractRegion::new(pairs, 1).unwrap();
    let v = validate_region(&m, &r.domain_decl, &shrunk, r.lambda, 2, 4, &Limits::default()).unwrap();
    match v {
        Validation::NotMinimal(why) => assert!(why.contains("ReplicaDone.decision"), "{why}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn selected_regions_hold_dynamically() {
    for name in ["consortium", "consortium-bcast", "consortium-check", "distreg", "distreg-two"] {
        let m = model(name);
        for (_, r) in domain_cutoff(&m, m.safety.as_ref()) {
            let r = r.unwrap();
            let v = validate_region(&m, &r.domain_decl, &r.region, r.lambda, 2, r.cutoff as u64 + 1, &Limits::default())
                .unwrap();
            assert!(matches!(v, Validation::Valid { .. }), "{name}: {v:?}");
        }
    }
}

#[test]
fn oversized_bound_fails_dynamically() {
    let m = model("consortium");
    let an = Analysis::new(&m, &m.int_domains()[0]);
    let all = AbstractRegion::new(an.universe(), 1).unwrap();
    let v = validate_region(&m, &an.domain, &all, 0, 2, 3, &Limits::default()).unwrap();
    assert!(matches!(v, Validation::Violated { .. }), "{v:?}");
}

#[test]
fn provenance_records_the_steps() {
    let r = &report("consortium")[0];
    assert!(r.provenance.iter().any(|l| l.starts_with("initial consensus vc")));
    assert!(r.provenance.iter().any(|l| l.starts_with("merge of")));
    assert!(r.provenance.last().unwrap().starts_with("selected"));
}

#[test]
fn consensus_result_overwritten_elsewhere_is_not_a_seed() {
    let m = model("distreg-buggy");
    let an = Analysis::new(&m, &m.int_domains()[0]);
    let mut log = Vec::new();
    assert!(an.initial_regions(&mut log).iter().all(|c| !c.origin.starts_with("consensus")));
    assert!(log.iter().any(|l| l.contains("Serve.register is also written outside the agreement")), "{log:?}");
    assert_eq!(domain_cutoff(&m, m.safety.as_ref())[0].1.as_ref().unwrap_err(), &RegionError::NoValidRegion);
}
