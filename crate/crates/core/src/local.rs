//! Local semantics of one process over finite domains.
//!
//! [`Semantics`] fixes a model, a finite instantiation of its integer domains
//! and the number of processes. It evaluates handlers against local states
//! ([`Semantics::eval_handler`]) and enumerates the local transition system
//! ([`build_local_ts`]). Pid sets are bitmasks where bit `i - 1` stands for
//! process `i`.

use crate::frontend::{
    BinOp, Body, Domain, EventKind, Expr, Handler, Participants, ProcessModel, Trigger, UnOp,
};
use indexmap::IndexSet;
use std::collections::{BTreeMap, HashSet};
use std::fmt::Write;

/// Largest range that is enumerated without an explicit size.
pub const MAX_ENUMERABLE: u128 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SemanticsError {
    #[error("domain {0} has no finite size")]
    DomainUnbounded(String),
    #[error("{0} processes exceed the supported maximum of 63")]
    TooManyProcesses(usize),
}

/// Finite instantiation of one integer domain: the contiguous range
/// `lo..=hi` and the value `default(v)` evaluates to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DomainInst {
    pub lo: i64,
    pub hi: i64,
    pub default: i64,
}

impl DomainInst {
    pub fn values(&self) -> impl Iterator<Item = i64> + Clone {
        self.lo..=self.hi
    }

    pub fn contains(&self, v: i64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    pub fn size(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }
}

/// Finite instantiation of every integer domain of a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instantiation {
    domains: Vec<(Domain, DomainInst)>,
}

impl Instantiation {
    /// Instantiates each integer domain of `model`. A domain listed in
    /// `sizes` gets that many values starting at its lower bound (1 when
    /// unbounded); other ranges keep their declared bounds.
    pub fn new(model: &ProcessModel, sizes: &BTreeMap<Domain, u64>) -> Result<Self, SemanticsError> {
        let mut domains = Vec::new();
        for d in model.int_domains() {
            let (lo, hi) = match (sizes.get(&d), &d) {
                (Some(&k), Domain::IntRange { lo, .. }) => (*lo, lo + k as i64 - 1),
                (Some(&k), _) => (1, k as i64),
                (None, Domain::IntRange { lo, hi, .. }) if d.size().unwrap_or(0) <= MAX_ENUMERABLE => (*lo, *hi),
                _ => return Err(SemanticsError::DomainUnbounded(d.to_string())),
            };
            if hi < lo {
                return Err(SemanticsError::DomainUnbounded(d.to_string()));
            }
            domains.push((d, DomainInst { lo, hi, default: lo }));
        }
        Ok(Instantiation { domains })
    }

    /// Instantiation using the declared bounds only.
    pub fn declared(model: &ProcessModel) -> Result<Self, SemanticsError> {
        Self::new(model, &BTreeMap::new())
    }

    /// Every integer domain of `model` instantiated with `size` values.
    pub fn uniform(model: &ProcessModel, size: u64) -> Result<Self, SemanticsError> {
        let sizes = model.int_domains().into_iter().map(|d| (d, size)).collect();
        Self::new(model, &sizes)
    }

    pub fn get(&self, d: &Domain) -> Option<&DomainInst> {
        self.domains.iter().find(|(x, _)| x == d).map(|(_, i)| i)
    }

    /// Replaces the value `default(v)` takes in domain `d`.
    pub fn with_default(mut self, d: &Domain, value: i64) -> Self {
        for (x, i) in &mut self.domains {
            if x == d {
                i.default = value;
            }
        }
        self
    }

    pub fn domains(&self) -> &[(Domain, DomainInst)] {
        &self.domains
    }
}

/// Local state: the current location and one slot per variable, followed by
/// one `winS` slot per partition instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalState {
    pub loc: u32,
    pub vals: Box<[i64]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Payload {
    Unit,
    Value(i64),
    /// Winner set of a partition.
    WinSet(u64),
    /// Agreed values of a consensus, in `decVar` order.
    Values(Vec<i64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Acting,
    Reacting,
}

/// Label of a local transition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Internal,
    Event { event: usize, payload: Payload, polarity: Polarity },
}

/// A handler of the model, addressed by location and position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HandlerRef {
    pub loc: usize,
    pub index: usize,
}

/// Per-handler data resolved once.
#[derive(Debug, Clone)]
struct Compiled {
    href: HandlerRef,
    /// Event index of the trigger or of the sent event.
    event: Option<usize>,
}

/// A model together with a finite instantiation and a process count.
#[derive(Debug, Clone)]
pub struct Semantics {
    pub model: ProcessModel,
    pub inst: Instantiation,
    pub n: usize,
    var_inst: Vec<Option<DomainInst>>,
    /// Slot of each partition instance's `winS`, by event index.
    win_slot: Vec<Option<usize>>,
    width: usize,
    by_loc: Vec<Vec<Compiled>>,
}

struct Env<'a> {
    state: &'a LocalState,
    payload: Option<(usize, i64)>,
    decided: Option<(usize, &'a [i64])>,
}

impl Semantics {
    pub fn new(model: &ProcessModel, inst: Instantiation, n: usize) -> Result<Self, SemanticsError> {
        if n > 63 {
            return Err(SemanticsError::TooManyProcesses(n));
        }
        for d in model.int_domains() {
            if inst.get(&d).is_none() {
                return Err(SemanticsError::DomainUnbounded(d.to_string()));
            }
        }
        let var_inst = model.variables.iter().map(|v| inst.get(&v.domain).copied()).collect();
        let mut win_slot = vec![None; model.events.len()];
        let mut width = model.variables.len();
        for (i, e) in model.events.iter().enumerate() {
            if e.kind == EventKind::Partition {
                win_slot[i] = Some(width);
                width += 1;
            }
        }
        let event_index = |name: &str| model.events.iter().position(|e| e.name == name);
        let by_loc = model
            .locations
            .iter()
            .enumerate()
            .map(|(li, l)| {
                l.handlers
                    .iter()
                    .enumerate()
                    .map(|(hi, h)| {
                        let event = match &h.trigger {
                            Trigger::Internal => h.body.send.as_ref().and_then(|s| event_index(&s.event)),
                            Trigger::Recv(e) | Trigger::Partition(e) | Trigger::Consensus(e) => event_index(e),
                        };
                        Compiled { href: HandlerRef { loc: li, index: hi }, event }
                    })
                    .collect()
            })
            .collect();
        Ok(Semantics { model: model.clone(), inst, n, var_inst, win_slot, width, by_loc })
    }

    /// Number of value slots in a local state.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn win_slot(&self, event: usize) -> Option<usize> {
        self.win_slot[event]
    }

    pub fn all_pids(&self) -> u64 {
        (1u64 << self.n) - 1
    }

    pub fn handler(&self, h: HandlerRef) -> &Handler {
        &self.model.locations[h.loc].handlers[h.index]
    }

    /// Handlers of a location with the event they trigger on or send.
    pub fn handlers_at(&self, loc: usize) -> impl Iterator<Item = (HandlerRef, Option<usize>)> + '_ {
        self.by_loc[loc].iter().map(|c| (c.href, c.event))
    }

    pub fn event_index(&self, name: &str) -> Option<usize> {
        self.model.events.iter().position(|e| e.name == name)
    }

    pub fn initial_state(&self) -> LocalState {
        let mut vals = vec![0; self.width];
        for (i, inst) in self.var_inst.iter().enumerate() {
            if let Some(d) = inst {
                vals[i] = d.default;
            }
        }
        LocalState { loc: self.model.initial_index() as u32, vals: vals.into() }
    }

    /// Instantiation of the payload domain of `event`, if it carries integers.
    pub fn payload_inst(&self, event: usize) -> Option<DomainInst> {
        self.model.events[event].payload.as_ref().and_then(|d| self.inst.get(d)).copied()
    }

    /// Participant set of an agreement instance as seen from `s`.
    pub fn participants(&self, event: usize, s: &LocalState) -> u64 {
        match &self.model.events[event].participants {
            Some(Participants::WinnersOf(p)) => {
                let slot = self.event_index(p).and_then(|i| self.win_slot[i]).expect("resolved partition");
                s.vals[slot] as u64
            }
            _ => self.all_pids(),
        }
    }

    /// Slot of the consensus proposal variable.
    pub fn proposal_slot(&self, event: usize) -> Option<usize> {
        self.model.events[event].proposal_var.as_deref().and_then(|v| self.model.var_index(v))
    }

    fn default_of(&self, var: &str) -> i64 {
        let i = self.model.var_index(var).expect("resolved variable");
        self.var_inst[i].map_or(0, |d| d.default)
    }

    fn eval(&self, e: &Expr, env: &Env) -> i64 {
        match e {
            Expr::Int(n) => *n,
            Expr::Bool(b) => *b as i64,
            Expr::Var(v) => env.state.vals[self.model.var_index(v).expect("resolved variable")],
            Expr::Payload(_) => env.payload.map_or(0, |(_, v)| v),
            Expr::DecVar { index, .. } => env.decided.map_or(0, |(_, vals)| vals[*index as usize - 1]),
            Expr::WinSet(p) => {
                let slot = self.event_index(p).and_then(|i| self.win_slot[i]).expect("resolved partition");
                env.state.vals[slot]
            }
            Expr::Default(v) => self.default_of(v),
            Expr::Unary(UnOp::Not, a) => (self.eval(a, env) == 0) as i64,
            Expr::Unary(UnOp::Neg, a) => self.eval(a, env).wrapping_neg(),
            Expr::Binary(op, a, b) => {
                let x = self.eval(a, env);
                if *op == BinOp::And && x == 0 {
                    return 0;
                }
                if *op == BinOp::Or && x != 0 {
                    return 1;
                }
                let y = self.eval(b, env);
                match op {
                    BinOp::Eq => (x == y) as i64,
                    BinOp::Ne => (x != y) as i64,
                    BinOp::Lt => (x < y) as i64,
                    BinOp::Le => (x <= y) as i64,
                    BinOp::Gt => (x > y) as i64,
                    BinOp::Ge => (x >= y) as i64,
                    BinOp::And | BinOp::Or => (y != 0) as i64,
                    BinOp::Add => x.wrapping_add(y),
                    BinOp::Sub => x.wrapping_sub(y),
                }
            }
        }
    }

    fn guard_holds(&self, h: &Handler, s: &LocalState) -> bool {
        h.guard.as_ref().map_or(true, |g| self.eval(g, &Env { state: s, payload: None, decided: None }) != 0)
    }

    /// Applies a branch body in parallel; `None` if a result leaves its domain.
    fn apply(&self, body: &Body, env: &Env, extra: Option<(usize, i64)>) -> Option<LocalState> {
        let mut vals = env.state.vals.clone();
        for u in &body.updates {
            let i = self.model.var_index(&u.var).expect("resolved variable");
            let v = self.eval(&u.expr, env);
            let ok = match self.var_inst[i] {
                Some(d) => d.contains(v),
                None => v >= 0 && (v as u64) <= self.all_pids(),
            };
            if !ok {
                return None;
            }
            vals[i] = v;
        }
        if let Some((slot, v)) = extra {
            vals[slot] = v;
        }
        let loc = match &body.target {
            Some(t) => self.model.location_index(t).expect("resolved location") as u32,
            None => env.state.loc,
        };
        Some(LocalState { loc, vals })
    }

    /// Value a sending handler attaches to its event in state `s`.
    pub fn send_payload(&self, h: &Handler, s: &LocalState) -> Payload {
        match h.body.send.as_ref().and_then(|snd| snd.payload.as_ref()) {
            Some(p) => Payload::Value(self.eval(p, &Env { state: s, payload: None, decided: None })),
            None => Payload::Unit,
        }
    }

    /// Result of taking action `a` through handler `h` in state `s` of process
    /// `pid`, or `None` when the handler does not produce `a` from `s`.
    pub fn eval_handler(&self, h: HandlerRef, s: &LocalState, pid: usize, a: &Action) -> Option<LocalState> {
        if s.loc as usize != h.loc {
            return None;
        }
        let handler = self.handler(h);
        let event = self.by_loc[h.loc][h.index].event;
        if !self.guard_holds(handler, s) {
            return None;
        }
        let plain = Env { state: s, payload: None, decided: None };
        match (&handler.trigger, a) {
            (Trigger::Internal, Action::Internal) if handler.body.send.is_none() => self.apply(&handler.body, &plain, None),
            (Trigger::Internal, Action::Event { event: e, payload, polarity: Polarity::Acting }) => {
                if Some(*e) != event || *payload != self.send_payload(handler, s) {
                    return None;
                }
                self.apply(&handler.body, &plain, None)
            }
            (Trigger::Recv(_), Action::Event { event: e, payload, polarity: Polarity::Reacting }) => {
                if Some(*e) != event {
                    return None;
                }
                let bound = match (payload, self.payload_inst(*e)) {
                    (Payload::Unit, None) => None,
                    (Payload::Value(v), Some(d)) if d.contains(*v) => Some((*e, *v)),
                    _ => return None,
                };
                self.apply(&handler.body, &Env { state: s, payload: bound, decided: None }, None)
            }
            (Trigger::Partition(_), Action::Event { event: e, payload: Payload::WinSet(w), polarity }) => {
                if Some(*e) != event || !self.valid_winners(*e, s, *w) {
                    return None;
                }
                let me = 1u64 << (pid - 1);
                if self.participants(*e, s) & me == 0 {
                    return None;
                }
                let body = match polarity {
                    Polarity::Acting if w & me != 0 => &handler.body,
                    Polarity::Reacting if w & me == 0 => handler.lose.as_ref()?,
                    _ => return None,
                };
                self.apply(body, &plain, Some((self.win_slot[*e]?, *w as i64)))
            }
            (Trigger::Consensus(_), Action::Event { event: e, payload: Payload::Values(vals), polarity }) => {
                if Some(*e) != event || !self.valid_decision(*e, vals) {
                    return None;
                }
                let me = 1u64 << (pid - 1);
                if self.participants(*e, s) & me == 0 {
                    return None;
                }
                if *polarity == Polarity::Acting {
                    let prop = s.vals[self.proposal_slot(*e)?];
                    if !vals.contains(&prop) {
                        return None;
                    }
                }
                self.apply(&handler.body, &Env { state: s, payload: None, decided: Some((*e, vals)) }, None)
            }
            _ => None,
        }
    }

    /// Winner set `w` is admissible for a member of the participant set in `s`.
    fn valid_winners(&self, event: usize, s: &LocalState, w: u64) -> bool {
        let ptct = self.participants(event, s);
        let card = self.model.events[event].cardinality.unwrap_or(1);
        w & !ptct == 0 && (w.count_ones() == card || (w == ptct && ptct.count_ones() < card))
    }

    fn valid_decision(&self, event: usize, vals: &[i64]) -> bool {
        let card = self.model.events[event].cardinality.unwrap_or(1) as usize;
        let Some(d) = self.payload_inst(event) else { return false };
        vals.len() == card
            && vals.iter().all(|v| d.contains(*v))
            && vals.iter().enumerate().all(|(i, v)| !vals[..i].contains(v))
    }

    /// Every action some handler of `s`'s location could take, with payloads
    /// ranging over the whole instantiated domain.
    pub fn candidate_actions(&self, s: &LocalState, pid: usize) -> Vec<(HandlerRef, Action)> {
        let mut out = Vec::new();
        for c in &self.by_loc[s.loc as usize] {
            let h = self.handler(c.href);
            match &h.trigger {
                Trigger::Internal => match c.event {
                    None => out.push((c.href, Action::Internal)),
                    Some(e) => out.push((
                        c.href,
                        Action::Event { event: e, payload: self.send_payload(h, s), polarity: Polarity::Acting },
                    )),
                },
                Trigger::Recv(_) => {
                    let e = c.event.expect("resolved event");
                    match self.payload_inst(e) {
                        None => out.push((c.href, Action::Event { event: e, payload: Payload::Unit, polarity: Polarity::Reacting })),
                        Some(d) => out.extend(d.values().map(|v| {
                            (c.href, Action::Event { event: e, payload: Payload::Value(v), polarity: Polarity::Reacting })
                        })),
                    }
                }
                Trigger::Partition(_) => {
                    let e = c.event.expect("resolved event");
                    let ptct = self.participants(e, s);
                    for w in submasks(ptct) {
                        if self.valid_winners(e, s, w) {
                            let polarity = if w & (1 << (pid - 1)) != 0 { Polarity::Acting } else { Polarity::Reacting };
                            out.push((c.href, Action::Event { event: e, payload: Payload::WinSet(w), polarity }));
                        }
                    }
                }
                Trigger::Consensus(_) => {
                    let e = c.event.expect("resolved event");
                    let card = self.model.events[e].cardinality.unwrap_or(1) as usize;
                    let Some(d) = self.payload_inst(e) else { continue };
                    let pool: Vec<i64> = d.values().collect();
                    for vals in arrangements(&pool, card) {
                        for polarity in [Polarity::Acting, Polarity::Reacting] {
                            out.push((c.href, Action::Event { event: e, payload: Payload::Values(vals.clone()), polarity }));
                        }
                    }
                }
            }
        }
        out
    }

    /// All local transitions out of `s`, tagged with the handler producing them.
    pub fn local_successors(&self, s: &LocalState, pid: usize) -> Vec<(HandlerRef, Action, LocalState)> {
        self.candidate_actions(s, pid)
            .into_iter()
            .filter_map(|(h, a)| self.eval_handler(h, s, pid, &a).map(|t| (h, a, t)))
            .collect()
    }

    pub fn state_to_string(&self, s: &LocalState) -> String {
        let mut out = self.model.locations[s.loc as usize].name.clone();
        let mut parts = Vec::new();
        for (i, v) in self.model.variables.iter().enumerate() {
            match self.var_inst[i] {
                Some(_) => parts.push(format!("{}={}", v.name, s.vals[i])),
                None => parts.push(format!("{}={}", v.name, pid_set_string(s.vals[i] as u64))),
            }
        }
        for (e, slot) in self.win_slot.iter().enumerate() {
            if let Some(slot) = slot {
                if s.vals[*slot] != 0 {
                    parts.push(format!("{}.winS={}", self.model.events[e].name, pid_set_string(s.vals[*slot] as u64)));
                }
            }
        }
        if !parts.is_empty() {
            let _ = write!(out, "{{{}}}", parts.join(", "));
        }
        out
    }

    pub fn action_to_string(&self, a: &Action) -> String {
        match a {
            Action::Internal => "internal".to_string(),
            Action::Event { event, payload, polarity } => {
                let p = match polarity {
                    Polarity::Acting => '!',
                    Polarity::Reacting => '?',
                };
                format!("{p}:{}{}", self.model.events[*event].name, payload_to_string(payload))
            }
        }
    }
}

pub fn pid_set_string(mask: u64) -> String {
    let pids: Vec<String> = (0..64).filter(|i| mask & (1 << i) != 0).map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", pids.join(","))
}

pub fn payload_to_string(p: &Payload) -> String {
    match p {
        Payload::Unit => String::new(),
        Payload::Value(v) => format!("[{v}]"),
        Payload::WinSet(w) => format!("[{}]", pid_set_string(*w)),
        Payload::Values(vs) => {
            let vs: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
            format!("[{}]", vs.join(","))
        }
    }
}

/// All submasks of `mask`, including 0 and `mask`.
pub fn submasks(mask: u64) -> impl Iterator<Item = u64> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & mask) };
        Some(cur)
    })
}

/// Ordered selections of `k` distinct elements of `pool`.
pub fn arrangements(pool: &[i64], k: usize) -> Vec<Vec<i64>> {
    fn go(pool: &[i64], k: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for &v in pool {
            if !cur.contains(&v) {
                cur.push(v);
                go(pool, k, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(pool, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Materialized local transition system of process `pid`.
#[derive(Debug, Clone)]
pub struct LocalTS {
    pub pid: usize,
    pub states: IndexSet<LocalState>,
    pub initial: Vec<usize>,
    /// `(source, action, target, handler)`, indices into `states`.
    pub transitions: Vec<(usize, Action, usize, HandlerRef)>,
    index: HashSet<(usize, Action, usize)>,
}

impl LocalTS {
    pub fn contains(&self, s: &LocalState, a: &Action, t: &LocalState) -> bool {
        match (self.states.get_index_of(s), self.states.get_index_of(t)) {
            (Some(i), Some(j)) => self.index.contains(&(i, a.clone(), j)),
            _ => false,
        }
    }

    /// One line per transition: `src --polarity:event[payload]--> dst`.
    pub fn dump(&self, sem: &Semantics) -> String {
        let mut out = String::new();
        for (s, a, t, _) in &self.transitions {
            let _ = writeln!(
                out,
                "{} --{}--> {}",
                sem.state_to_string(&self.states[*s]),
                sem.action_to_string(a),
                sem.state_to_string(&self.states[*t])
            );
        }
        out
    }
}

/// Enumerates the states reachable from the initial state of process `pid`
/// under every locally enabled action.
pub fn build_local_ts(sem: &Semantics, pid: usize) -> LocalTS {
    let mut states = IndexSet::new();
    states.insert(sem.initial_state());
    let mut transitions = Vec::new();
    let mut index = HashSet::new();
    let mut next = 0;
    while next < states.len() {
        let s = states[next].clone();
        for (h, a, t) in sem.local_successors(&s, pid) {
            let (j, _) = states.insert_full(t);
            if index.insert((next, a.clone(), j)) {
                transitions.push((next, a, j, h));
            }
        }
        next += 1;
    }
    LocalTS { pid, states, initial: vec![0], transitions, index }
}

#[cfg(test)]
mod tests;
