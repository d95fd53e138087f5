//! Global semantics of `n` processes plus a stateless environment, and
//! breadth-first safety checking.
//!
//! Receivers of a broadcast sent by a process are the other processes that
//! have an enabled receive handler; the rest keep their state. A broadcast
//! initiated by the environment must be received by every process. The
//! environment can send any payload of an env event to any single process and
//! absorbs rendezvous sends of env events.

use crate::frontend::{EventKind, ProcessModel, SafetySpec, Trigger};
use crate::local::{
    arrangements, payload_to_string, submasks, Action, HandlerRef, LocalState, Payload, Polarity, Semantics,
};
use indexmap::IndexMap;
use serde::Serialize;
use std::fmt::Write;
use std::time::{Duration, Instant};

/// Tuple of local states, process `i` at index `i - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalState {
    pub locals: Vec<LocalState>,
}

/// Label of a global transition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalEvent {
    /// `None` for an internal step.
    pub event: Option<usize>,
    pub payload: Payload,
    /// Process that initiated the step; `None` for the environment and for
    /// agreements.
    pub initiator: Option<usize>,
}

/// One process taking part in a global transition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Move {
    pub pid: usize,
    pub handler: HandlerRef,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub event: GlobalEvent,
    pub moves: Vec<Move>,
    pub target: GlobalState,
}

pub fn initial_state(sem: &Semantics) -> GlobalState {
    GlobalState { locals: vec![sem.initial_state(); sem.n] }
}

type Options = Vec<(HandlerRef, LocalState)>;

/// Handler results of process `pid` for action `a`, over handlers of its
/// location that satisfy `pick`.
fn options(sem: &Semantics, s: &LocalState, pid: usize, a: &Action, pick: impl Fn(&Trigger) -> bool) -> Options {
    sem.handlers_at(s.loc as usize)
        .filter(|(h, _)| pick(&sem.handler(*h).trigger))
        .filter_map(|(h, _)| sem.eval_handler(h, s, pid, a).map(|t| (h, t)))
        .collect()
}

/// Cartesian product of per-process options; unlisted processes keep their state.
fn combine(q: &GlobalState, parts: &[(usize, Action, Options)], event: &GlobalEvent, out: &mut Vec<Transition>) {
    fn go<'a>(
        q: &GlobalState,
        parts: &'a [(usize, Action, Options)],
        k: usize,
        cur: &mut Vec<(usize, HandlerRef, &'a LocalState, Action)>,
        event: &GlobalEvent,
        out: &mut Vec<Transition>,
    ) {
        if k == parts.len() {
            let mut target = q.clone();
            let mut moves = Vec::with_capacity(cur.len());
            for (pid, h, t, a) in cur.iter() {
                target.locals[pid - 1] = (*t).clone();
                moves.push(Move { pid: *pid, handler: *h, action: a.clone() });
            }
            out.push(Transition { event: event.clone(), moves, target });
            return;
        }
        let (pid, a, opts) = &parts[k];
        for (h, t) in opts {
            cur.push((*pid, *h, t, a.clone()));
            go(q, parts, k + 1, cur, event, out);
            cur.pop();
        }
    }
    go(q, parts, 0, &mut Vec::new(), event, out);
}

fn is_recv(e: &str) -> impl Fn(&Trigger) -> bool + '_ {
    move |t| matches!(t, Trigger::Recv(x) if x == e)
}

/// All one-step successors of `q`, in a deterministic order, without
/// duplicate `(event, target)` pairs.
pub fn successors(sem: &Semantics, q: &GlobalState) -> Vec<Transition> {
    let m = &sem.model;
    let n = sem.n;
    let mut out = Vec::new();

    // steps initiated by a process
    for i in 1..=n {
        let s = &q.locals[i - 1];
        for (h, ev) in sem.handlers_at(s.loc as usize) {
            let handler = sem.handler(h);
            if handler.trigger != Trigger::Internal {
                continue;
            }
            let Some(e) = ev else {
                if let Some(t) = sem.eval_handler(h, s, i, &Action::Internal) {
                    let event = GlobalEvent { event: None, payload: Payload::Unit, initiator: Some(i) };
                    combine(q, &[(i, Action::Internal, vec![(h, t)])], &event, &mut out);
                }
                continue;
            };
            let payload = sem.send_payload(handler, s);
            let send = Action::Event { event: e, payload: payload.clone(), polarity: Polarity::Acting };
            let Some(t) = sem.eval_handler(h, s, i, &send) else { continue };
            let event = GlobalEvent { event: Some(e), payload: payload.clone(), initiator: Some(i) };
            let decl = &m.events[e];
            let recv = Action::Event { event: e, payload, polarity: Polarity::Reacting };
            let me = (i, send, vec![(h, t)]);
            match decl.kind {
                EventKind::Broadcast => {
                    let mut parts = vec![me];
                    for j in (1..=n).filter(|&j| j != i) {
                        let opts = options(sem, &q.locals[j - 1], j, &recv, is_recv(&decl.name));
                        if !opts.is_empty() {
                            parts.push((j, recv.clone(), opts));
                        }
                    }
                    parts.sort_by_key(|p| p.0);
                    combine(q, &parts, &event, &mut out);
                }
                _ if decl.env => combine(q, &[me], &event, &mut out),
                _ => {
                    for j in (1..=n).filter(|&j| j != i) {
                        let opts = options(sem, &q.locals[j - 1], j, &recv, is_recv(&decl.name));
                        if !opts.is_empty() {
                            let mut parts = vec![me.clone(), (j, recv.clone(), opts)];
                            parts.sort_by_key(|p| p.0);
                            combine(q, &parts, &event, &mut out);
                        }
                    }
                }
            }
        }
    }

    for (e, decl) in m.events.iter().enumerate() {
        match decl.kind {
            EventKind::Broadcast | EventKind::Rendezvous if decl.env => {
                let payloads: Vec<Payload> = match sem.payload_inst(e) {
                    Some(d) => d.values().map(Payload::Value).collect(),
                    None => vec![Payload::Unit],
                };
                for payload in payloads {
                    let recv = Action::Event { event: e, payload: payload.clone(), polarity: Polarity::Reacting };
                    let event = GlobalEvent { event: Some(e), payload, initiator: None };
                    let per: Vec<_> = (1..=n)
                        .map(|j| (j, recv.clone(), options(sem, &q.locals[j - 1], j, &recv, is_recv(&decl.name))))
                        .collect();
                    if decl.kind == EventKind::Broadcast {
                        if per.iter().all(|p| !p.2.is_empty()) {
                            combine(q, &per, &event, &mut out);
                        }
                    } else {
                        for p in per {
                            combine(q, &[p], &event, &mut out);
                        }
                    }
                }
            }
            EventKind::Partition => partition_steps(sem, q, e, &mut out),
            EventKind::Consensus => consensus_steps(sem, q, e, &mut out),
            _ => {}
        }
    }

    let mut seen = std::collections::HashSet::new();
    out.retain(|t| seen.insert((t.event.clone(), t.target.clone())));
    out
}

/// Candidate participant sets of agreement `e`: sets announced by some
/// process with a handler for `e` that includes itself and on which all
/// members agree.
fn participant_sets(sem: &Semantics, q: &GlobalState, e: usize) -> Vec<u64> {
    let name = &sem.model.events[e].name;
    let has_handler = |s: &LocalState| {
        sem.handlers_at(s.loc as usize).any(|(h, _)| {
            matches!(&sem.handler(h).trigger, Trigger::Partition(x) | Trigger::Consensus(x) if x == name)
        })
    };
    let mut sets = Vec::new();
    for (k, s) in q.locals.iter().enumerate() {
        if !has_handler(s) {
            continue;
        }
        let set = sem.participants(e, s);
        if set & (1 << k) == 0 || sets.contains(&set) {
            continue;
        }
        let agreed = (0..sem.n)
            .filter(|j| set & (1 << j) != 0)
            .all(|j| has_handler(&q.locals[j]) && sem.participants(e, &q.locals[j]) == set);
        if agreed {
            sets.push(set);
        }
    }
    sets.sort_unstable();
    sets
}

fn members(set: u64, n: usize) -> impl Iterator<Item = usize> {
    (1..=n).filter(move |p| set & (1 << (p - 1)) != 0)
}

fn partition_steps(sem: &Semantics, q: &GlobalState, e: usize, out: &mut Vec<Transition>) {
    let card = sem.model.events[e].cardinality.unwrap_or(1);
    let name = sem.model.events[e].name.clone();
    let pick = |t: &Trigger| matches!(t, Trigger::Partition(x) if *x == name);
    for set in participant_sets(sem, q, e) {
        let mut winners: Vec<u64> = if set.count_ones() < card {
            vec![set]
        } else {
            submasks(set).filter(|w| w.count_ones() == card).collect()
        };
        winners.sort_unstable();
        for w in winners {
            let event = GlobalEvent { event: Some(e), payload: Payload::WinSet(w), initiator: None };
            let mut parts = Vec::new();
            for p in members(set, sem.n) {
                let polarity = if w & (1 << (p - 1)) != 0 { Polarity::Acting } else { Polarity::Reacting };
                let a = Action::Event { event: e, payload: Payload::WinSet(w), polarity };
                let opts = options(sem, &q.locals[p - 1], p, &a, pick);
                if opts.is_empty() {
                    parts.clear();
                    break;
                }
                parts.push((p, a, opts));
            }
            if !parts.is_empty() {
                combine(q, &parts, &event, out);
            }
        }
    }
}

fn consensus_steps(sem: &Semantics, q: &GlobalState, e: usize, out: &mut Vec<Transition>) {
    let card = sem.model.events[e].cardinality.unwrap_or(1) as usize;
    let name = sem.model.events[e].name.clone();
    let pick = |t: &Trigger| matches!(t, Trigger::Consensus(x) if *x == name);
    let Some(prop) = sem.proposal_slot(e) else { return };
    for set in participant_sets(sem, q, e) {
        let mut proposals: Vec<i64> = members(set, sem.n).map(|p| q.locals[p - 1].vals[prop]).collect();
        proposals.sort_unstable();
        proposals.dedup();
        for vals in arrangements(&proposals, card) {
            let payload = Payload::Values(vals);
            let event = GlobalEvent { event: Some(e), payload: payload.clone(), initiator: None };
            let a = Action::Event { event: e, payload, polarity: Polarity::Reacting };
            let mut parts = Vec::new();
            for p in members(set, sem.n) {
                let opts = options(sem, &q.locals[p - 1], p, &a, pick);
                if opts.is_empty() {
                    parts.clear();
                    break;
                }
                parts.push((p, a.clone(), opts));
            }
            if !parts.is_empty() {
                combine(q, &parts, &event, out);
            }
        }
    }
}

/// Agreement property: processes in the listed locations hold equal values.
#[derive(Debug, Clone)]
pub struct Property {
    var: usize,
    locs: Vec<u32>,
}

impl Property {
    pub fn new(model: &ProcessModel, spec: &SafetySpec) -> Option<Self> {
        let var = model.var_index(&spec.variable)?;
        let locs = spec.locations.iter().filter_map(|l| model.location_index(l).map(|i| i as u32)).collect();
        Some(Property { var, locs })
    }

    pub fn holds(&self, q: &GlobalState) -> bool {
        let mut seen = None;
        for s in q.locals.iter().filter(|s| self.locs.contains(&s.loc)) {
            match seen {
                None => seen = Some(s.vals[self.var]),
                Some(v) if v != s.vals[self.var] => return false,
                _ => {}
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Limits {
    pub max_states: Option<usize>,
    pub timeout: Option<Duration>,
    /// Worker threads for successor computation; 0 and 1 mean sequential.
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, thiserror::Error)]
pub enum ResourceLimit {
    #[error("state limit exceeded")]
    States,
    #[error("time limit exceeded")]
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Safe,
    Unsafe,
    Inconclusive(ResourceLimit),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    /// `None` for the initial state.
    pub event: Option<GlobalEvent>,
    pub state: GlobalState,
}

#[derive(Debug, Clone)]
pub struct VerificationResult {
    pub verdict: Verdict,
    pub trace: Vec<TraceStep>,
    pub states_explored: usize,
    pub elapsed: Duration,
}

/// Visited states in discovery order, each with its BFS parent and the event
/// that reached it.
#[derive(Debug, Clone, Default)]
pub struct StateStore {
    map: IndexMap<GlobalState, (usize, Option<GlobalEvent>)>,
}

impl StateStore {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &GlobalState> {
        self.map.keys()
    }

    pub fn contains(&self, q: &GlobalState) -> bool {
        self.map.contains_key(q)
    }

    /// Path from the initial state to the state at `index`.
    pub fn trace_to(&self, mut index: usize) -> Vec<TraceStep> {
        let mut steps = Vec::new();
        loop {
            let (q, (parent, ev)) = self.map.get_index(index).expect("stored state");
            steps.push(TraceStep { event: ev.clone(), state: q.clone() });
            if ev.is_none() {
                break;
            }
            index = *parent;
        }
        steps.reverse();
        steps
    }
}

struct Exploration {
    store: StateStore,
    hit: Option<usize>,
    limit: Option<ResourceLimit>,
}

fn explore(sem: &Semantics, limits: &Limits, bad: &(dyn Fn(&GlobalState) -> bool + Sync)) -> Exploration {
    let start = Instant::now();
    let mut store = StateStore::default();
    let init = initial_state(sem);
    let init_bad = bad(&init);
    store.map.insert(init, (0, None));
    if init_bad {
        return Exploration { store, hit: Some(0), limit: None };
    }
    let pool = (limits.threads > 1)
        .then(|| rayon::ThreadPoolBuilder::new().num_threads(limits.threads).build().ok())
        .flatten();
    let mut lo = 0;
    while lo < store.len() {
        let hi = store.len();
        let frontier: Vec<&GlobalState> = store.map.keys().skip(lo).take(hi - lo).collect();
        let expand = |q: &&GlobalState| -> Vec<(GlobalEvent, GlobalState)> {
            successors(sem, q).into_iter().map(|t| (t.event, t.target)).collect()
        };
        let succ: Vec<Vec<(GlobalEvent, GlobalState)>> = match &pool {
            Some(p) => p.install(|| {
                use rayon::prelude::*;
                frontier.par_iter().map(expand).collect()
            }),
            None => frontier.iter().map(expand).collect(),
        };
        for (k, list) in succ.into_iter().enumerate() {
            for (ev, t) in list {
                if store.map.contains_key(&t) {
                    continue;
                }
                let is_bad = bad(&t);
                let (idx, _) = store.map.insert_full(t, (lo + k, Some(ev)));
                if is_bad {
                    return Exploration { store, hit: Some(idx), limit: None };
                }
                if limits.max_states.is_some_and(|m| store.len() > m) {
                    return Exploration { store, hit: None, limit: Some(ResourceLimit::States) };
                }
            }
        }
        if limits.timeout.is_some_and(|t| start.elapsed() > t) {
            return Exploration { store, hit: None, limit: Some(ResourceLimit::Time) };
        }
        lo = hi;
    }
    Exploration { store, hit: None, limit: None }
}

/// Breadth-first search for a state violating `spec`; a model without a
/// property is trivially safe.
pub fn check_safety(sem: &Semantics, spec: Option<&SafetySpec>, limits: &Limits) -> VerificationResult {
    let start = Instant::now();
    let prop = spec.and_then(|s| Property::new(&sem.model, s));
    let bad = |q: &GlobalState| prop.as_ref().is_some_and(|p| !p.holds(q));
    let ex = explore(sem, limits, &bad);
    let (verdict, trace) = match (ex.hit, ex.limit) {
        (Some(i), _) => (Verdict::Unsafe, ex.store.trace_to(i)),
        (None, Some(l)) => (Verdict::Inconclusive(l), Vec::new()),
        (None, None) => (Verdict::Safe, Vec::new()),
    };
    VerificationResult { verdict, trace, states_explored: ex.store.len(), elapsed: start.elapsed() }
}

/// Every reachable global state.
pub fn reachable_states(sem: &Semantics, limits: &Limits) -> Result<StateStore, ResourceLimit> {
    let ex = explore(sem, limits, &|_| false);
    match ex.limit {
        Some(l) => Err(l),
        None => Ok(ex.store),
    }
}

/// Whether `trace` starts in the initial state and each step is a successor
/// of the previous state.
pub fn replay(sem: &Semantics, trace: &[TraceStep]) -> bool {
    let Some(first) = trace.first() else { return false };
    if first.state != initial_state(sem) {
        return false;
    }
    trace.windows(2).all(|w| {
        let ev = w[1].event.as_ref();
        successors(sem, &w[0].state).iter().any(|t| Some(&t.event) == ev && t.target == w[1].state)
    })
}

pub fn state_to_string(sem: &Semantics, q: &GlobalState) -> String {
    let parts: Vec<String> =
        q.locals.iter().enumerate().map(|(i, s)| format!("P{}:{}", i + 1, sem.state_to_string(s))).collect();
    format!("({})", parts.join(" | "))
}

pub fn event_to_string(sem: &Semantics, e: &GlobalEvent) -> String {
    let mut out = String::new();
    match e.initiator {
        Some(p) => {
            let _ = write!(out, "P{p}:");
        }
        None if e.event.is_some_and(|x| sem.model.events[x].env) => out.push_str("env:"),
        None => {}
    }
    match e.event {
        None => out.push_str("internal"),
        Some(x) => {
            out.push_str(&sem.model.events[x].name);
            out.push_str(&payload_to_string(&e.payload));
        }
    }
    out
}

/// Numbered `event / resulting state` lines.
pub fn render_trace(sem: &Semantics, trace: &[TraceStep]) -> String {
    let mut out = String::new();
    for (i, step) in trace.iter().enumerate() {
        let ev = step.event.as_ref().map_or_else(|| "initial".to_string(), |e| event_to_string(sem, e));
        let _ = writeln!(out, "{i}. {ev} / {}", state_to_string(sem, &step.state));
    }
    out
}
