//! Permutations of a scalarset domain and their component-wise lifting to
//! global states.
//!
//! A [`DomainPermutation`] is a bijection over a finite instantiation of one
//! domain; values of other domains are left alone. A [`Cwp`] applies one
//! permutation per process. The consistency set of a global state `q` with
//! respect to a region `Ψ` holds the CWPs that agree on every value stored in
//! `Ψ` and move all other values to the smallest free values; [`canonicalize`]
//! picks one representative of it and [`mk_gamma`] builds the CWP used to pull
//! a transition back into the reduced system.

use crate::frontend::{Domain, Expr, ProcessModel, Trigger};
use crate::global::{reachable_states, GlobalState, Limits, ResourceLimit, Transition};
use crate::local::{Action, DomainInst, Instantiation, LocalState, Payload, Polarity, Semantics, SemanticsError};
use crate::region::AbstractRegion;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, HashSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PermError {
    #[error("mapping is not a bijection over [{0},{1}]")]
    NotBijective(i64, i64),
    #[error("expected {expected} components, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("construction violates {0}")]
    ConstructionFailure(String),
}

/// Bijection over `lo..=hi`; identity elsewhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DomainPermutation {
    lo: i64,
    image: Vec<i64>,
}

impl DomainPermutation {
    pub fn identity(d: DomainInst) -> Self {
        DomainPermutation { lo: d.lo, image: d.values().collect() }
    }

    pub fn new(lo: i64, image: Vec<i64>) -> Result<Self, PermError> {
        let hi = lo + image.len() as i64 - 1;
        let mut seen = vec![false; image.len()];
        for &v in &image {
            if v < lo || v > hi || std::mem::replace(&mut seen[(v - lo) as usize], true) {
                return Err(PermError::NotBijective(lo, hi));
            }
        }
        Ok(DomainPermutation { lo, image })
    }

    /// Extends a partial injective mapping: unmapped values take the unused
    /// images in ascending order.
    pub fn complete(d: DomainInst, partial: &BTreeMap<i64, i64>) -> Result<Self, PermError> {
        let used: BTreeSet<i64> = partial.values().copied().collect();
        if used.len() != partial.len() || partial.iter().any(|(k, v)| !d.contains(*k) || !d.contains(*v)) {
            return Err(PermError::NotBijective(d.lo, d.hi));
        }
        let mut free = d.values().filter(|v| !used.contains(v));
        let image = d.values().map(|v| partial.get(&v).copied().unwrap_or_else(|| free.next().unwrap())).collect();
        Ok(DomainPermutation { lo: d.lo, image })
    }

    pub fn apply(&self, v: i64) -> i64 {
        let i = v - self.lo;
        if i >= 0 && (i as usize) < self.image.len() {
            self.image[i as usize]
        } else {
            v
        }
    }

    pub fn inverse(&self) -> Self {
        let mut image = vec![0; self.image.len()];
        for (i, &v) in self.image.iter().enumerate() {
            image[(v - self.lo) as usize] = self.lo + i as i64;
        }
        DomainPermutation { lo: self.lo, image }
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &v)| v == self.lo + i as i64)
    }
}

/// Component-wise permutation: one domain permutation per process.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cwp {
    pub components: Vec<DomainPermutation>,
}

impl Cwp {
    pub fn identity(d: DomainInst, n: usize) -> Self {
        Cwp { components: vec![DomainPermutation::identity(d); n] }
    }
}

/// One integer domain of an instantiated model.
#[derive(Debug, Clone)]
pub struct DomainView {
    pub domain: Domain,
    pub inst: DomainInst,
    /// Variables of the domain, in declaration order.
    pub vars: Vec<usize>,
    payload_events: Vec<bool>,
    decision_events: Vec<bool>,
}

impl DomainView {
    pub fn new(sem: &Semantics, domain: &Domain) -> Option<Self> {
        let m = &sem.model;
        let inst = *sem.inst.get(domain)?;
        let vars = m.vars_of(domain);
        let payload_events = m.events.iter().map(|e| e.payload.as_ref() == Some(domain)).collect();
        let decision_events = (0..m.events.len())
            .map(|e| sem.proposal_slot(e).is_some_and(|v| &m.variables[v].domain == domain))
            .collect();
        Some(DomainView { domain: domain.clone(), inst, vars, payload_events, decision_events })
    }

    /// δ-values of a local state.
    pub fn values(&self, s: &LocalState) -> BTreeSet<i64> {
        self.vars.iter().map(|&v| s.vals[v]).collect()
    }
}

pub fn apply_perm_local(view: &DomainView, pi: &DomainPermutation, s: &LocalState) -> LocalState {
    let mut vals = s.vals.clone();
    for &v in &view.vars {
        vals[v] = pi.apply(vals[v]);
    }
    LocalState { loc: s.loc, vals }
}

pub fn apply_perm_action(view: &DomainView, pi: &DomainPermutation, a: &Action) -> Action {
    match a {
        Action::Event { event, payload, polarity } => {
            let payload = match payload {
                Payload::Value(v) if view.payload_events[*event] => Payload::Value(pi.apply(*v)),
                Payload::Values(vs) if view.decision_events[*event] => Payload::Values(vs.iter().map(|v| pi.apply(*v)).collect()),
                p => p.clone(),
            };
            Action::Event { event: *event, payload, polarity: *polarity }
        }
        Action::Internal => Action::Internal,
    }
}

pub fn apply_perm_transition(
    view: &DomainView,
    pi: &DomainPermutation,
    (s, a, t): (&LocalState, &Action, &LocalState),
) -> (LocalState, Action, LocalState) {
    (apply_perm_local(view, pi, s), apply_perm_action(view, pi, a), apply_perm_local(view, pi, t))
}

pub fn apply_cwp(view: &DomainView, gamma: &Cwp, q: &GlobalState) -> Result<GlobalState, PermError> {
    if gamma.components.len() != q.locals.len() {
        return Err(PermError::ArityMismatch { expected: q.locals.len(), got: gamma.components.len() });
    }
    let locals = q.locals.iter().zip(&gamma.components).map(|(s, p)| apply_perm_local(view, p, s)).collect();
    Ok(GlobalState { locals })
}

/// δ-values process `s` holds in region pairs.
pub fn psi_local(view: &DomainView, region: &AbstractRegion, s: &LocalState) -> BTreeSet<i64> {
    view.vars.iter().filter(|&&v| region.contains(&(s.loc as usize, v))).map(|&v| s.vals[v]).collect()
}

/// δ-values held in region pairs by any process.
pub fn psi_values(view: &DomainView, region: &AbstractRegion, q: &GlobalState) -> BTreeSet<i64> {
    q.locals.iter().flat_map(|s| psi_local(view, region, s)).collect()
}

pub fn check_consistency(view: &DomainView, gamma: &Cwp, q: &GlobalState, region: &AbstractRegion) -> bool {
    psi_values(view, region, q).into_iter().all(|v| {
        let first = gamma.components.first().map(|p| p.apply(v));
        gamma.components.iter().all(|p| Some(p.apply(v)) == first)
    })
}

/// Every component sends its values outside the region to the smallest
/// values not taken by region values.
pub fn check_minimality(view: &DomainView, gamma: &Cwp, q: &GlobalState, region: &AbstractRegion) -> bool {
    let psi = psi_values(view, region, q);
    q.locals.iter().zip(&gamma.components).all(|(s, p)| {
        let taken: BTreeSet<i64> = psi.iter().map(|&v| p.apply(v)).collect();
        let own: BTreeSet<i64> = view.values(s).into_iter().filter(|v| !psi.contains(v)).map(|v| p.apply(v)).collect();
        let smallest: BTreeSet<i64> = view.inst.values().filter(|v| !taken.contains(v)).take(own.len()).collect();
        own == smallest
    })
}

/// The representative CWP of the consistency set: region values are numbered
/// by first occurrence (process order, then variable order), each process's
/// remaining values take the next free values in variable order.
pub fn canonical_cwp(view: &DomainView, region: &AbstractRegion, q: &GlobalState) -> Cwp {
    let d = view.inst;
    let mut shared = BTreeMap::new();
    let mut next = d.lo;
    for s in &q.locals {
        for &v in &view.vars {
            if region.contains(&(s.loc as usize, v)) && !shared.contains_key(&s.vals[v]) {
                shared.insert(s.vals[v], next);
                next += 1;
            }
        }
    }
    let components = q
        .locals
        .iter()
        .map(|s| {
            let mut map = shared.clone();
            let mut free = next;
            for &v in &view.vars {
                map.entry(s.vals[v]).or_insert_with(|| {
                    free += 1;
                    free - 1
                });
            }
            DomainPermutation::complete(d, &map).expect("canonical images stay in range")
        })
        .collect();
    Cwp { components }
}

pub fn canonicalize(view: &DomainView, region: &AbstractRegion, q: &GlobalState) -> GlobalState {
    apply_cwp(view, &canonical_cwp(view, region, q), q).expect("one component per process")
}

/// `gets(r[to.0], to.1, q[from.0], from.1)` for one concrete transition;
/// processes are 0-based, variables are δ-variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Flow {
    pub from: (usize, usize),
    pub to: (usize, usize),
}

/// Value flows of a global transition between δ-variables.
pub fn value_flows(sem: &Semantics, view: &DomainView, q: &GlobalState, t: &Transition) -> Vec<Flow> {
    let m = &sem.model;
    let mut out = Vec::new();
    let moved: BTreeMap<usize, &crate::global::Move> = t.moves.iter().map(|mv| (mv.pid - 1, mv)).collect();
    let is_delta = |v: &str| m.var_index(v).filter(|i| view.vars.contains(i));
    for j in 0..q.locals.len() {
        let Some(mv) = moved.get(&j) else {
            out.extend(view.vars.iter().map(|&v| Flow { from: (j, v), to: (j, v) }));
            continue;
        };
        let h = sem.handler(mv.handler);
        let reacting = matches!(mv.action, Action::Event { polarity: Polarity::Reacting, .. });
        let body = match (&h.trigger, &h.lose) {
            (Trigger::Partition(_), Some(lose)) if reacting => lose,
            _ => &h.body,
        };
        for &v in &view.vars {
            let name = &m.variables[v].name;
            let Some(u) = body.updates.iter().rev().find(|u| &u.var == name) else {
                out.push(Flow { from: (j, v), to: (j, v) });
                continue;
            };
            match &u.expr {
                Expr::Var(x) => out.extend(is_delta(x).map(|x| Flow { from: (j, x), to: (j, v) })),
                Expr::Payload(_) => {
                    let Action::Event { event, .. } = &mv.action else { continue };
                    for snd in t.moves.iter().filter(|o| o.pid != mv.pid) {
                        let Action::Event { event: e, polarity: Polarity::Acting, .. } = &snd.action else { continue };
                        if e != event {
                            continue;
                        }
                        let payload = sem.handler(snd.handler).body.send.as_ref().and_then(|s| s.payload.as_ref());
                        if let Some(Expr::Var(x)) = payload {
                            out.extend(is_delta(x).map(|x| Flow { from: (snd.pid - 1, x), to: (j, v) }));
                        }
                    }
                }
                Expr::DecVar { index, .. } => {
                    let Action::Event { event, payload: Payload::Values(vals), .. } = &mv.action else { continue };
                    let Some(slot) = sem.proposal_slot(*event).filter(|x| view.vars.contains(x)) else { continue };
                    let val = vals[*index as usize - 1];
                    for o in &t.moves {
                        if q.locals[o.pid - 1].vals[slot] == val {
                            out.push(Flow { from: (o.pid - 1, slot), to: (j, v) });
                        }
                    }
                }
                _ => {}
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

struct Partial {
    maps: Vec<BTreeMap<i64, i64>>,
}

impl Partial {
    fn image_used(&self, i: usize, img: i64) -> bool {
        self.maps[i].values().any(|&x| x == img)
    }

    /// Records `val -> img` in component `i` unless it clashes.
    fn set(&mut self, i: usize, val: i64, img: i64) {
        if !self.maps[i].contains_key(&val) && !self.image_used(i, img) {
            self.maps[i].insert(val, img);
        }
    }

    fn used_anywhere(&self) -> BTreeSet<i64> {
        self.maps.iter().flat_map(|m| m.values().copied()).collect()
    }
}

/// Builds `γ = mkγ(γ', q, r)` for the transition `q -> t.target` and checks
/// that it keeps transferred values, treats region values uniformly, is a
/// bijection per component and, when `γ'(r)` lies within the first `bound`
/// values, maps `q` into them as well.
pub fn mk_gamma(
    sem: &Semantics,
    view: &DomainView,
    region: &AbstractRegion,
    bound: u32,
    gamma_r: &Cwp,
    q: &GlobalState,
    t: &Transition,
) -> Result<Cwp, PermError> {
    let r = &t.target;
    let n = q.locals.len();
    if gamma_r.components.len() != n {
        return Err(PermError::ArityMismatch { expected: n, got: gamma_r.components.len() });
    }
    let d = view.inst;
    let flows = value_flows(sem, view, q, t);
    let psi_q = psi_values(view, region, q);
    let mut g = Partial { maps: vec![BTreeMap::new(); n] };

    // 1. region values of q that stay in the region of r
    for (j, rj) in r.locals.iter().enumerate() {
        for val in psi_local(view, region, rj) {
            if psi_q.contains(&val) {
                let img = gamma_r.components[j].apply(val);
                for i in 0..n {
                    g.set(i, val, img);
                }
            }
        }
    }
    // 2. transferred values follow γ'
    for f in &flows {
        let val = q.locals[f.from.0].vals[f.from.1];
        let img = gamma_r.components[f.to.0].apply(r.locals[f.to.0].vals[f.to.1]);
        g.set(f.from.0, val, img);
        if psi_q.contains(&val) {
            for i in 0..n {
                g.set(i, val, img);
            }
        }
    }
    // 3. region values that leave the system, and any region value still open
    let in_r: BTreeSet<i64> = r.locals.iter().flat_map(|s| view.values(s)).collect();
    let (gone, rest): (Vec<i64>, Vec<i64>) = psi_q.iter().partition(|v| !in_r.contains(v));
    for val in gone.into_iter().chain(rest) {
        if g.maps.iter().all(|m| m.contains_key(&val)) {
            continue;
        }
        let used = g.used_anywhere();
        let img = d.values().find(|x| !used.contains(x)).ok_or_else(|| PermError::ConstructionFailure("γ-bijection".into()))?;
        for i in 0..n {
            g.set(i, val, img);
        }
    }
    // 4. values that do not flow anywhere take the smallest free value
    for (i, qi) in q.locals.iter().enumerate() {
        for &v in &view.vars {
            let val = qi.vals[v];
            if psi_q.contains(&val) || g.maps[i].contains_key(&val) || flows.iter().any(|f| f.from == (i, v)) {
                continue;
            }
            let img = d.values().find(|x| !g.image_used(i, *x)).expect("a free image exists");
            g.set(i, val, img);
        }
    }
    // 5. the rest in ascending order
    let components = g
        .maps
        .iter()
        .map(|m| DomainPermutation::complete(d, m))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| PermError::ConstructionFailure("γ-bijection".into()))?;
    let gamma = Cwp { components };

    for f in &flows {
        let lhs = gamma.components[f.from.0].apply(q.locals[f.from.0].vals[f.from.1]);
        let rhs = gamma_r.components[f.to.0].apply(r.locals[f.to.0].vals[f.to.1]);
        if lhs != rhs {
            return Err(PermError::ConstructionFailure("γ-kept".into()));
        }
    }
    if !check_consistency(view, &gamma, q, region) {
        return Err(PermError::ConstructionFailure("γ-stable".into()));
    }
    if gamma.components.iter().any(|p| DomainPermutation::new(p.lo, p.image.clone()).is_err()) {
        return Err(PermError::ConstructionFailure("γ-bijection".into()));
    }
    let top = d.lo + bound as i64 - 1;
    let within = |s: &GlobalState| s.locals.iter().all(|l| view.values(l).iter().all(|&v| v <= top));
    let permuted_r = apply_cwp(view, gamma_r, r)?;
    if within(&permuted_r) && !within(&apply_cwp(view, &gamma, q)?) {
        return Err(PermError::ConstructionFailure("γ-bounded".into()));
    }
    Ok(gamma)
}

/// Draws a CWP from the consistency set of `q`. Region values get distinct
/// random images among the first `bound` values; each process's other values
/// fill the smallest remaining images in random order; the rest is shuffled.
/// With `keep_default`, the domain minimum is mapped to itself wherever the
/// consistency set allows it.
pub fn sample_consistent(
    view: &DomainView,
    region: &AbstractRegion,
    q: &GlobalState,
    bound: u32,
    keep_default: bool,
    rng: &mut impl Rng,
) -> Cwp {
    let d = view.inst;
    let psi: Vec<i64> = psi_values(view, region, q).into_iter().collect();
    let top = (d.lo + bound.max(psi.len() as u32) as i64 - 1).min(d.hi);
    let mut pool: Vec<i64> = (d.lo..=top).collect();
    pool.shuffle(rng);
    let mut shared: BTreeMap<i64, i64> = BTreeMap::new();
    if keep_default {
        if psi.contains(&d.lo) {
            shared.insert(d.lo, d.lo);
        }
        pool.retain(|&x| x != d.lo);
    }
    for &v in &psi {
        if !shared.contains_key(&v) {
            shared.insert(v, pool.pop().expect("enough images for region values"));
        }
    }
    let taken: HashSet<i64> = shared.values().copied().collect();
    let components = q
        .locals
        .iter()
        .map(|s| {
            let mut map = shared.clone();
            let mut own: Vec<i64> = view.values(s).into_iter().filter(|v| !shared.contains_key(v)).collect();
            own.shuffle(rng);
            if keep_default {
                if let Some(p) = own.iter().position(|&v| v == d.lo) {
                    own.swap(0, p);
                }
            }
            let mut free = d.values().filter(|x| !taken.contains(x));
            for v in own {
                map.insert(v, free.next().expect("enough values"));
            }
            let used: HashSet<i64> = map.values().copied().collect();
            let mut rest: Vec<i64> = d.values().filter(|x| !used.contains(x)).collect();
            rest.shuffle(rng);
            for v in d.values() {
                if !map.contains_key(&v) {
                    map.insert(v, rest.pop().expect("bijection"));
                }
            }
            DomainPermutation::complete(d, &map).expect("total bijection")
        })
        .collect();
    Cwp { components }
}

/// Uniformly random permutation of the instantiated domain.
pub fn random_permutation(d: DomainInst, rng: &mut impl Rng) -> DomainPermutation {
    let mut image: Vec<i64> = d.values().collect();
    image.shuffle(rng);
    DomainPermutation { lo: d.lo, image }
}

/// Whether the permuted local transition is a transition again. The
/// permuted system uses `π(min)` as its default value, since `default` is the
/// one constant a scalarset admits.
pub fn local_transition_preserved(
    sem: &Semantics,
    view: &DomainView,
    pi: &DomainPermutation,
    pid: usize,
    h: crate::local::HandlerRef,
    (s, a, t): (&LocalState, &Action, &LocalState),
) -> Result<bool, SemanticsError> {
    let inst = sem.inst.clone().with_default(&view.domain, pi.apply(view.inst.default));
    let permuted = Semantics::new(&sem.model, inst, sem.n)?;
    let (ps, pa, pt) = apply_perm_transition(view, pi, (s, a, t));
    Ok(permuted.eval_handler(h, &ps, pid, &pa) == Some(pt))
}

/// Whether `from -> to` is a single step of `sem`.
pub fn has_step(sem: &Semantics, from: &GlobalState, to: &GlobalState) -> bool {
    crate::global::successors(sem, from).iter().any(|t| &t.target == to)
}

#[derive(Debug, thiserror::Error)]
pub enum CensusError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Limit(#[from] ResourceLimit),
}

/// Number of canonical reachable states of `n` processes for each size of
/// `domain`. Other domains take their size from `others` or keep their
/// declared bounds.
pub fn saturation_census(
    m: &ProcessModel,
    domain: &Domain,
    region: &AbstractRegion,
    n: usize,
    sizes: &[u64],
    others: &BTreeMap<Domain, u64>,
    limits: &Limits,
) -> Result<Vec<(u64, usize)>, CensusError> {
    sizes
        .iter()
        .map(|&size| {
            let mut all = others.clone();
            all.insert(domain.clone(), size);
            let sem = Semantics::new(m, Instantiation::new(m, &all)?, n)?;
            let store = reachable_states(&sem, limits)?;
            let count = match DomainView::new(&sem, domain) {
                Some(view) => store.states().map(|q| canonicalize(&view, region, q)).collect::<HashSet<_>>().len(),
                None => store.len(),
            };
            Ok((size, count))
        })
        .collect()
}

pub fn census_csv(rows: &[(u64, usize)]) -> String {
    let mut out = String::from("size,count\n");
    for (s, c) in rows {
        out.push_str(&format!("{s},{c}\n"));
    }
    out
}
