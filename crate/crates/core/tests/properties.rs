//! Property tests over the benchmark corpus.

mod common;

use common::{cutoffs, model, BENCHMARKS};
use dab_core::frontend::ProcessModel;
use dab_core::global::{reachable_states, successors, Limits};
use dab_core::local::{build_local_ts, Instantiation, LocalTS, Payload, Semantics};
use dab_core::perm::{
    apply_cwp, canonicalize, local_transition_preserved, random_permutation, sample_consistent, DomainView,
};
use dab_core::reduction::reduce_all;
use dab_core::region::{domain_cutoff, Analysis, AbstractRegion};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

struct Reduced {
    sem: Semantics,
    views: Vec<DomainView>,
    ts: LocalTS,
}

fn reduced() -> &'static Vec<Reduced> {
    static CELL: OnceLock<Vec<Reduced>> = OnceLock::new();
    CELL.get_or_init(|| {
        BENCHMARKS
            .iter()
            .map(|&(name, n, _)| {
                let m = model(name);
                let (r, _) = reduce_all(&m, &cutoffs(&m)).unwrap();
                let sem = Semantics::new(&r, Instantiation::declared(&r).unwrap(), n).unwrap();
                let views = r.int_domains().iter().map(|d| DomainView::new(&sem, d).unwrap()).collect();
                let ts = build_local_ts(&sem, 1);
                Reduced { sem, views, ts }
            })
            .collect()
    })
}

fn shuffled(m: &ProcessModel, seed: u64) -> ProcessModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = m.clone();
    out.variables.shuffle(&mut rng);
    out.events.shuffle(&mut rng);
    out.locations.shuffle(&mut rng);
    for l in &mut out.locations {
        l.handlers.shuffle(&mut rng);
    }
    out
}

fn summary(m: &ProcessModel) -> BTreeMap<String, (u32, u32, Vec<String>)> {
    domain_cutoff(m, m.safety.as_ref())
        .into_iter()
        .map(|(d, r)| {
            let r = r.unwrap();
            (d.to_string(), (r.rho, r.lambda, r.region_pairs))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn local_transitions_are_closed_under_permutation(bench in 0..BENCHMARKS.len(), pick: u64, seed: u64) {
        let f = &reduced()[bench];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, a, t, h) = &f.ts.transitions[(pick % f.ts.transitions.len() as u64) as usize];
        let view = f.views.choose(&mut rng).unwrap();
        let pi = random_permutation(view.inst, &mut rng);
        let ok = local_transition_preserved(&f.sem, view, &pi, 1, *h, (&f.ts.states[*s], a, &f.ts.states[*t])).unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn cutoff_ignores_declaration_order(bench in 0..BENCHMARKS.len(), seed: u64) {
        let m = model(BENCHMARKS[bench].0);
        prop_assert_eq!(summary(&shuffled(&m, seed)), summary(&m));
    }

    #[test]
    fn expansion_only_grows(bench in 0..BENCHMARKS.len(), seed: u64) {
        let m = model(BENCHMARKS[bench].0);
        let d = m.int_domains()[0].clone();
        let an = Analysis::new(&m, &d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let universe: Vec<_> = an.universe().into_iter().collect();
        let k = rand::Rng::gen_range(&mut rng, 0..=universe.len());
        let seed_pairs: BTreeSet<_> = universe.choose_multiple(&mut rng, k).copied().collect();
        let c = dab_core::region::Candidate {
            region: AbstractRegion::new(seed_pairs.clone(), 1).unwrap(),
            admits_default: rand::Rng::gen(&mut rng),
            origin: "sample".into(),
        };
        let grown = an.expand(&c);
        prop_assert!(grown.region.pairs().is_superset(&seed_pairs));
        let again = an.expand(&grown);
        prop_assert_eq!(again.region.pairs(), grown.region.pairs());
    }
}

/// Canonical forms agree on every member of a consistency class.
#[test]
fn canonical_form_is_a_class_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for name in ["consortium", "distreg", "distreg-two"] {
        let m = model(name);
        let reports = cutoffs(&m);
        let sem = Semantics::new(&m, Instantiation::uniform(&m, 4).unwrap(), 2).unwrap();
        let store = reachable_states(&sem, &Limits::default()).unwrap();
        for r in &reports {
            let view = DomainView::new(&sem, &r.domain_decl).unwrap();
            for q in store.states().take(2000) {
                let g = sample_consistent(&view, &r.region, q, r.cutoff, false, &mut rng);
                let moved = apply_cwp(&view, &g, q).unwrap();
                assert_eq!(canonicalize(&view, &r.region, &moved), canonicalize(&view, &r.region, q), "{name}");
            }
        }
    }
}

/// Every decided value was proposed by a participant.
#[test]
fn consensus_decides_proposed_values() {
    for name in ["consortium", "distreg", "distreg-two", "consortium-check"] {
        let m = model(name);
        let sem = Semantics::new(&m, Instantiation::uniform(&m, 3).unwrap(), 3).unwrap();
        let store = reachable_states(&sem, &Limits::default()).unwrap();
        for q in store.states() {
            for t in successors(&sem, q) {
                let (Some(e), Payload::Values(vals)) = (t.event.event, &t.event.payload) else { continue };
                let Some(slot) = sem.proposal_slot(e) else { continue };
                for v in vals {
                    assert!(t.moves.iter().any(|mv| q.locals[mv.pid - 1].vals[slot] == *v), "{name}");
                }
            }
        }
    }
}
