//! Bounded-region analysis and domain cutoffs.
//!
//! For a symmetric domain δ the analysis looks for a set of node-variable
//! pairs whose values, across all processes, never exceed ρ distinct values.
//! Initial regions come from consensus results, server nodes and pairs that
//! only ever hold the default value. Regions grow along the `gets` relation,
//! are merged across mutually exclusive phases, and the cheapest region that
//! covers the pairs the reduction relies on is selected. The domain cutoff is
//! ρ plus λ, the number of δ-variables that also occur outside the region.

use crate::frontend::{Domain, EventKind, Expr, ProcessModel, SafetySpec, SendKind, Trigger};
use crate::global::{reachable_states, GlobalState, Limits, ResourceLimit};
use crate::local::{Instantiation, Semantics, SemanticsError};
use crate::lts::{build_lts, compute_gets, phase_partition, server_regions, tarjan_scc, GetsRelation, Lts, PhasePartition, Source};
use crate::scalarset::classify_domains;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// A `(node, variable)` pair; nodes are location indices.
pub type Pair = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegionError {
    #[error("no region covers the required node-variable pairs")]
    NoValidRegion,
    #[error("a region bound must be at least 1")]
    ZeroBound,
    #[error("domain {0} is not a scalarset")]
    NotSymmetric(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AbstractRegion {
    pairs: BTreeSet<Pair>,
    rho: u32,
}

impl AbstractRegion {
    pub fn new(pairs: BTreeSet<Pair>, rho: u32) -> Result<Self, RegionError> {
        if rho == 0 {
            return Err(RegionError::ZeroBound);
        }
        Ok(AbstractRegion { pairs, rho })
    }

    pub fn pairs(&self) -> &BTreeSet<Pair> {
        &self.pairs
    }

    pub fn rho(&self) -> u32 {
        self.rho
    }

    pub fn contains(&self, p: &Pair) -> bool {
        self.pairs.contains(p)
    }

    /// Pairs rendered as `Location.var`, sorted.
    pub fn names(&self, m: &ProcessModel) -> Vec<String> {
        let mut v: Vec<String> = self.pairs.iter().map(|p| pair_name(m, p)).collect();
        v.sort();
        v
    }
}

pub fn pair_name(m: &ProcessModel, p: &Pair) -> String {
    format!("{}.{}", m.locations[p.0].name, m.variables[p.1].name)
}

/// Region candidate together with how it was obtained.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub region: AbstractRegion,
    /// Whether `default` counts as a source inside the region.
    pub admits_default: bool,
    pub origin: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffReport {
    pub domain: String,
    #[serde(rename = "regionPairs")]
    pub region_pairs: Vec<String>,
    pub rho: u32,
    pub lambda: u32,
    pub cutoff: u32,
    pub provenance: Vec<String>,
    #[serde(skip)]
    pub region: AbstractRegion,
    #[serde(skip)]
    pub domain_decl: Domain,
}

/// Everything the analysis of one domain needs.
pub struct Analysis<'m> {
    pub model: &'m ProcessModel,
    pub domain: Domain,
    pub lts: Lts,
    pub gets: GetsRelation,
    pub phases: PhasePartition,
    pub servers: BTreeSet<usize>,
    /// δ-variables in declaration order.
    pub vars: Vec<usize>,
    /// Reachable LTS nodes.
    pub nodes: BTreeSet<usize>,
}

impl<'m> Analysis<'m> {
    pub fn new(model: &'m ProcessModel, domain: &Domain) -> Self {
        let lts = build_lts(model);
        let gets = compute_gets(model, &lts);
        let phases = phase_partition(&lts, model);
        let servers = server_regions(&lts, model);
        let nodes = lts.reachable().into_iter().collect();
        Analysis { model, domain: domain.clone(), vars: model.vars_of(domain), lts, gets, phases, servers, nodes }
    }

    /// Reachable δ-pairs.
    pub fn universe(&self) -> BTreeSet<Pair> {
        self.nodes.iter().flat_map(|&n| self.vars.iter().map(move |&v| (n, v))).collect()
    }

    /// Sources of a pair, ignoring pairs at unreachable nodes.
    fn sources(&self, p: &Pair) -> BTreeSet<Source> {
        self.gets
            .sources(p.0, p.1)
            .into_iter()
            .filter(|s| !matches!(s, Source::Pair { node, .. } if !self.nodes.contains(node)))
            .collect()
    }

    fn phases_of(&self, pairs: &BTreeSet<Pair>) -> BTreeSet<usize> {
        pairs.iter().map(|p| self.phases.phase_of(p.0)).collect()
    }

    fn consensus_instances(&self) -> Vec<(usize, Vec<usize>)> {
        let m = self.model;
        m.events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == EventKind::Consensus)
            .map(|(i, e)| {
                let dec: Vec<usize> =
                    e.dec_vars.iter().filter_map(|v| m.var_index(v)).filter(|v| self.vars.contains(v)).collect();
                (i, dec)
            })
            .filter(|(_, dec)| !dec.is_empty())
            .collect()
    }

    fn consensus_destinations(&self, event: usize) -> BTreeSet<usize> {
        let name = &self.model.events[event].name;
        self.lts
            .edges
            .iter()
            .filter(|e| {
                let h = &self.model.locations[e.handler.loc].handlers[e.handler.index];
                matches!(&h.trigger, Trigger::Consensus(c) if c == name)
            })
            .map(|e| e.dst)
            .filter(|d| self.nodes.contains(d))
            .collect()
    }

    /// A pair of `pairs` that receives a value other than the decision of
    /// `event`, a value carried from `closure` or the initial default.
    fn foreign_write(&self, event: usize, pairs: &BTreeSet<Pair>, closure: &BTreeSet<Pair>) -> Option<Pair> {
        let name = &self.model.events[event].name;
        self.gets.facts.iter().find_map(|f| {
            if !pairs.contains(&f.dst) {
                return None;
            }
            let ok = match f.edge {
                None => f.src == Source::Default,
                Some(i) => {
                    let e = &self.lts.edges[i];
                    let h = &self.model.locations[e.handler.loc].handlers[e.handler.index];
                    !self.nodes.contains(&e.src)
                        || matches!(&h.trigger, Trigger::Consensus(c) if c == name)
                        || matches!(f.src, Source::Pair { node, var } if closure.contains(&(node, var)))
                }
            };
            (!ok).then_some(f.dst)
        })
    }

    /// Greatest set of pairs whose sources are all `default` or other pairs of
    /// the set.
    fn default_only(&self) -> BTreeSet<Pair> {
        let mut set = self.universe();
        loop {
            let drop: Vec<Pair> = set
                .iter()
                .copied()
                .filter(|p| {
                    self.sources(p).iter().any(|s| match s {
                        Source::Default => false,
                        Source::Env => true,
                        Source::Pair { node, var } => !set.contains(&(*node, *var)),
                    })
                })
                .collect();
            if drop.is_empty() {
                return set;
            }
            for p in drop {
                set.remove(&p);
            }
        }
    }

    pub fn initial_regions(&self, log: &mut Vec<String>) -> Vec<Candidate> {
        let m = self.model;
        let mut out = Vec::new();
        let instances = self.consensus_instances();
        for (e, dec) in &instances {
            let dsts = self.consensus_destinations(*e);
            let pairs: BTreeSet<Pair> = dsts.iter().flat_map(|&n| dec.iter().map(move |&v| (n, v))).collect();
            if pairs.is_empty() {
                continue;
            }
            let decl = &m.events[*e];
            let seed = Candidate { region: AbstractRegion { pairs: pairs.clone(), rho: 1 }, admits_default: false, origin: String::new() };
            if let Some(p) = self.foreign_write(*e, &pairs, &self.expand(&seed).region.pairs) {
                log.push(format!(
                    "consensus {} not used as an initial region: {} is also written outside the agreement",
                    decl.name,
                    pair_name(m, &p)
                ));
                continue;
            }
            let mut rho = decl.cardinality.unwrap_or(1);
            let my_phases = self.phases_of(&pairs);
            for (other, odec) in &instances {
                if other == e || !odec.iter().any(|v| dec.contains(v)) {
                    continue;
                }
                let op: BTreeSet<usize> = self.consensus_destinations(*other).iter().map(|&n| self.phases.phase_of(n)).collect();
                if !op.is_disjoint(&my_phases) {
                    rho += m.events[*other].cardinality.unwrap_or(1);
                    log.push(format!(
                        "consensus {} shares a decision variable with {} in an overlapping phase; bounds summed",
                        decl.name, m.events[*other].name
                    ));
                }
            }
            let region = AbstractRegion::new(pairs, rho).expect("cardinality is positive");
            let origin = format!("consensus {}", decl.name);
            log.push(format!("initial {origin}: {{{}}}, rho = {rho}", region.names(m).join(", ")));
            out.push(Candidate { region, admits_default: false, origin });
        }
        for &s in &self.servers {
            if self.vars.is_empty() {
                break;
            }
            let pairs: BTreeSet<Pair> = self.vars.iter().map(|&v| (s, v)).collect();
            let region = AbstractRegion::new(pairs, self.vars.len() as u32).expect("non-empty");
            let origin = format!("server {}", m.locations[s].name);
            log.push(format!("initial {origin}: {{{}}}, rho = {}", region.names(m).join(", "), region.rho));
            out.push(Candidate { region, admits_default: false, origin });
        }
        let init_phase = self.phases.phase_of(self.lts.initial);
        let statics: BTreeSet<Pair> =
            self.default_only().into_iter().filter(|p| self.phases.phase_of(p.0) == init_phase).collect();
        if !statics.is_empty() {
            let region = AbstractRegion::new(statics, 1).expect("positive");
            log.push(format!("initial static: {{{}}}, rho = 1", region.names(m).join(", ")));
            out.push(Candidate { region, admits_default: true, origin: "static".into() });
        }
        out
    }

    /// Grows a region by every strongly connected group of pairs whose
    /// sources all lie in the group or the region.
    pub fn expand(&self, c: &Candidate) -> Candidate {
        let mut pairs = c.region.pairs.clone();
        loop {
            let rest: Vec<Pair> = self.universe().into_iter().filter(|p| !pairs.contains(p)).collect();
            let index: BTreeMap<Pair, usize> = rest.iter().enumerate().map(|(i, p)| (*p, i)).collect();
            let mut adj = vec![Vec::new(); rest.len()];
            for (i, p) in rest.iter().enumerate() {
                for s in self.sources(p) {
                    if let Source::Pair { node, var } = s {
                        if let Some(&j) = index.get(&(node, var)) {
                            adj[j].push(i);
                        }
                    }
                }
            }
            let mut grown = false;
            for comp in tarjan_scc(&adj) {
                let members: BTreeSet<Pair> = comp.iter().map(|&i| rest[i]).collect();
                let closed = members.iter().all(|p| {
                    self.sources(p).iter().all(|s| match s {
                        Source::Env => false,
                        Source::Default => c.admits_default,
                        Source::Pair { node, var } => pairs.contains(&(*node, *var)) || members.contains(&(*node, *var)),
                    })
                });
                if closed {
                    pairs.extend(members);
                    grown = true;
                }
            }
            if !grown {
                break;
            }
        }
        Candidate {
            region: AbstractRegion { pairs, rho: c.region.rho },
            admits_default: c.admits_default,
            origin: c.origin.clone(),
        }
    }

    /// Adds per-phase projections and unions of regions over disjoint phases.
    pub fn merge(&self, regions: &[Candidate], log: &mut Vec<String>) -> Vec<Candidate> {
        let mut pool: Vec<Candidate> = Vec::new();
        let push = |pool: &mut Vec<Candidate>, c: Candidate| {
            match pool.iter_mut().find(|x| x.region.pairs == c.region.pairs) {
                Some(x) if x.region.rho > c.region.rho => *x = c,
                Some(_) => {}
                None => pool.push(c),
            }
        };
        for c in regions {
            if c.region.pairs.is_empty() {
                continue;
            }
            push(&mut pool, c.clone());
            let ph = self.phases_of(&c.region.pairs);
            if ph.len() > 1 {
                for p in ph {
                    let pairs: BTreeSet<Pair> =
                        c.region.pairs.iter().copied().filter(|x| self.phases.phase_of(x.0) == p).collect();
                    let origin = format!("{} restricted to phase {p}", c.origin);
                    push(&mut pool, Candidate { region: AbstractRegion { pairs, rho: c.region.rho }, admits_default: c.admits_default, origin });
                }
            }
        }
        let mut i = 0;
        while i < pool.len() {
            for j in 0..i {
                let (a, b) = (&pool[i], &pool[j]);
                if !self.phases_of(&a.region.pairs).is_disjoint(&self.phases_of(&b.region.pairs)) {
                    continue;
                }
                let pairs: BTreeSet<Pair> = a.region.pairs.union(&b.region.pairs).copied().collect();
                let rho = a.region.rho.max(b.region.rho);
                if pool.iter().any(|x| x.region.pairs == pairs && x.region.rho <= rho) {
                    continue;
                }
                let origin = format!("merge of ({}) and ({})", a.origin, b.origin);
                log.push(format!("{origin}: rho = max({}, {}) = {rho}", a.region.rho, b.region.rho));
                let c = Candidate { region: AbstractRegion { pairs, rho }, admits_default: false, origin };
                push(&mut pool, c);
            }
            i += 1;
        }
        pool
    }

    /// Pairs a selected region must contain.
    pub fn required_pairs(&self, spec: Option<&SafetySpec>) -> BTreeMap<&'static str, BTreeSet<Pair>> {
        let m = self.model;
        let mut req: BTreeMap<&'static str, BTreeSet<Pair>> = BTreeMap::new();
        req.insert("(i) initial location", self.vars.iter().map(|&v| (self.lts.initial, v)).collect());
        let mut dest = BTreeSet::new();
        for (e, dec) in self.consensus_instances() {
            for n in self.consensus_destinations(e) {
                dest.extend(dec.iter().map(|&v| (n, v)));
            }
        }
        req.insert("(ii) consensus destinations", dest);
        let mut sources = BTreeSet::new();
        for (li, _, h) in m.handlers() {
            if !self.nodes.contains(&li) {
                continue;
            }
            let Some(send) = &h.body.send else { continue };
            if send.kind != SendKind::Broadcast || m.event(&send.event).and_then(|e| e.payload.as_ref()) != Some(&self.domain) {
                continue;
            }
            if let Some(Expr::Var(u)) = &send.payload {
                if let Some(v) = m.var_index(u).filter(|v| self.vars.contains(v)) {
                    sources.insert((li, v));
                }
            }
        }
        req.insert("(iii) broadcast payload sources", sources);
        let mut spec_pairs = BTreeSet::new();
        if let Some(s) = spec {
            if let Some(v) = m.var_index(&s.variable).filter(|v| self.vars.contains(v)) {
                for l in &s.locations {
                    if let Some(n) = m.location_index(l) {
                        spec_pairs.insert((n, v));
                    }
                }
            }
        }
        req.insert("(iv) property pairs", spec_pairs);
        req
    }

    /// First condition the region fails to cover, if any.
    pub fn missing_condition(&self, region: &AbstractRegion, spec: Option<&SafetySpec>) -> Option<String> {
        self.required_pairs(spec).into_iter().find_map(|(name, pairs)| {
            let missing: Vec<String> =
                pairs.iter().filter(|p| !region.contains(p)).map(|p| pair_name(self.model, p)).collect();
            (!missing.is_empty()).then(|| format!("{name}: missing {}", missing.join(", ")))
        })
    }

    pub fn select(&self, candidates: &[Candidate], spec: Option<&SafetySpec>) -> Result<Candidate, RegionError> {
        candidates
            .iter()
            .filter(|c| self.missing_condition(&c.region, spec).is_none())
            .min_by(|a, b| {
                (a.region.rho, a.region.pairs.len(), a.region.names(self.model))
                    .cmp(&(b.region.rho, b.region.pairs.len(), b.region.names(self.model)))
            })
            .cloned()
            .ok_or(RegionError::NoValidRegion)
    }

    /// Number of δ-variables with a reachable pair outside the region.
    pub fn lambda(&self, region: &AbstractRegion) -> u32 {
        self.vars.iter().filter(|&&v| self.nodes.iter().any(|&n| !region.contains(&(n, v)))).count() as u32
    }

    pub fn run(&self, spec: Option<&SafetySpec>) -> Result<CutoffReport, RegionError> {
        let m = self.model;
        let mut log = Vec::new();
        let initial = self.initial_regions(&mut log);
        let expanded: Vec<Candidate> = initial
            .iter()
            .map(|c| {
                let e = self.expand(c);
                if e.region.pairs.len() > c.region.pairs.len() {
                    log.push(format!("expanded {}: {{{}}}", e.origin, e.region.names(m).join(", ")));
                }
                e
            })
            .collect();
        let merged = self.merge(&expanded, &mut log);
        let chosen = self.select(&merged, spec)?;
        log.push(format!(
            "selected {}: rho = {}, {} pairs, conditions (i)-(iv) hold",
            chosen.origin,
            chosen.region.rho,
            chosen.region.pairs.len()
        ));
        let lambda = self.lambda(&chosen.region);
        let rho = chosen.region.rho;
        Ok(CutoffReport {
            domain: self.domain.to_string(),
            region_pairs: chosen.region.names(m),
            rho,
            lambda,
            cutoff: rho + lambda,
            provenance: log,
            region: chosen.region,
            domain_decl: self.domain.clone(),
        })
    }
}

/// Cutoff of every integer domain; non-symmetric domains yield an error.
pub fn domain_cutoff(m: &ProcessModel, spec: Option<&SafetySpec>) -> Vec<(Domain, Result<CutoffReport, RegionError>)> {
    classify_domains(m)
        .into_iter()
        .map(|r| {
            let res = if r.is_symmetric() {
                Analysis::new(m, &r.domain).run(spec)
            } else {
                Err(RegionError::NotSymmetric(r.domain.to_string()))
            };
            (r.domain, res)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Valid { states: usize },
    /// A required pair is not covered.
    NotMinimal(String),
    /// A reachable state breaks the ρ or λ bound.
    Violated { state: String, reason: String },
}

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Limit(#[from] ResourceLimit),
}

/// Distinct δ-values held in region pairs, across all processes.
pub fn region_values(region: &AbstractRegion, q: &GlobalState) -> BTreeSet<i64> {
    q.locals
        .iter()
        .flat_map(|s| region.pairs.iter().filter(move |p| p.0 == s.loc as usize).map(move |p| s.vals[p.1]))
        .collect()
}

/// Explores `n` processes with δ at `size` values (other domains likewise)
/// and checks the ρ and λ bounds on every reachable state.
pub fn validate_region(
    m: &ProcessModel,
    domain: &Domain,
    region: &AbstractRegion,
    lambda: u32,
    n: usize,
    size: u64,
    limits: &Limits,
) -> Result<Validation, ValidationError> {
    let an = Analysis::new(m, domain);
    if let Some(why) = an.missing_condition(region, m.safety.as_ref()) {
        return Ok(Validation::NotMinimal(why));
    }
    let sizes = m.int_domains().into_iter().map(|d| (d, size)).collect();
    let sem = Semantics::new(m, Instantiation::new(m, &sizes)?, n)?;
    let store = reachable_states(&sem, limits)?;
    for q in store.states() {
        let psi = region_values(region, q);
        if psi.len() > region.rho as usize {
            return Ok(Validation::Violated {
                state: crate::global::state_to_string(&sem, q),
                reason: format!("{} region values exceed rho = {}", psi.len(), region.rho),
            });
        }
        for (i, s) in q.locals.iter().enumerate() {
            let own: BTreeSet<i64> = an.vars.iter().map(|&v| s.vals[v]).filter(|x| !psi.contains(x)).collect();
            if own.len() > lambda as usize {
                return Ok(Validation::Violated {
                    state: crate::global::state_to_string(&sem, q),
                    reason: format!("process {} holds {} values outside the region, lambda = {lambda}", i + 1, own.len()),
                });
            }
        }
    }
    Ok(Validation::Valid { states: store.len() })
}

#[cfg(test)]
mod tests;
