//! Location transition system and static value flow.
//!
//! The LTS has one node per location and one edge per handler branch. The
//! `gets` relation records, for every node-variable pair, where its value can
//! come from. Server regions and synchronization phases are derived from the
//! same graph.

use crate::frontend::{EventKind, Expr, Handler, Participants, ProcessModel, SendKind, Trigger};
use crate::local::HandlerRef;
use std::collections::BTreeSet;
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub handler: HandlerRef,
    /// 0 for the body or win branch, 1 for lose.
    pub branch: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lts {
    /// Location name of each node.
    pub nodes: Vec<String>,
    pub initial: usize,
    pub edges: Vec<Edge>,
}

impl Lts {
    /// Edges induced by handler `h`.
    pub fn edges_of(&self, h: HandlerRef) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.handler == h)
    }

    /// Distinct `(src, dst)` pairs.
    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(|e| (e.src, e.dst)).collect()
    }

    /// Nodes reachable from the initial node, in BFS order.
    pub fn reachable(&self) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut order = vec![self.initial];
        seen[self.initial] = true;
        let mut i = 0;
        while i < order.len() {
            let x = order[i];
            for e in self.edges.iter().filter(|e| e.src == x) {
                if !seen[e.dst] {
                    seen[e.dst] = true;
                    order.push(e.dst);
                }
            }
            i += 1;
        }
        order
    }
}

pub fn build_lts(m: &ProcessModel) -> Lts {
    let mut edges = Vec::new();
    for (li, hi, h) in m.handlers() {
        for (branch, body) in h.branches() {
            let dst = body.target.as_deref().and_then(|t| m.location_index(t)).unwrap_or(li);
            edges.push(Edge { src: li, dst, handler: HandlerRef { loc: li, index: hi }, branch });
        }
    }
    Lts { nodes: m.locations.iter().map(|l| l.name.clone()).collect(), initial: m.initial_index(), edges }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    /// Variable `var` at node `node`.
    Pair { node: usize, var: usize },
    /// A value chosen by the environment, or one the analysis cannot track.
    Env,
    /// The default value of the domain.
    Default,
}

/// `dst` may hold a value that `src` held.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GetsFact {
    pub dst: (usize, usize),
    pub src: Source,
    /// Index of the inducing edge; `None` for initial values.
    pub edge: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GetsRelation {
    pub facts: Vec<GetsFact>,
}

impl GetsRelation {
    /// Distinct sources of a node-variable pair.
    pub fn sources(&self, node: usize, var: usize) -> BTreeSet<Source> {
        self.facts.iter().filter(|f| f.dst == (node, var)).map(|f| f.src).collect()
    }
}

/// Sources of the value of `e` when evaluated by a handler at node `x`.
fn expr_sources(m: &ProcessModel, x: usize, e: &Expr) -> Vec<Source> {
    match e {
        Expr::Var(u) => vec![Source::Pair { node: x, var: m.var_index(u).expect("resolved variable") }],
        Expr::Default(_) => vec![Source::Default],
        Expr::Payload(ev) => {
            if m.event(ev).is_some_and(|d| d.env) {
                return vec![Source::Env];
            }
            let mut out = Vec::new();
            for (y, _, h) in m.handlers() {
                let Some(send) = h.body.send.as_ref().filter(|s| s.event == *ev) else { continue };
                match &send.payload {
                    Some(p @ (Expr::Var(_) | Expr::Default(_))) => out.extend(expr_sources(m, y, p)),
                    _ => out.push(Source::Env),
                }
            }
            out
        }
        Expr::DecVar { inst, .. } => {
            let Some(prop) = m.event(inst).and_then(|d| d.proposal_var.as_deref()).and_then(|v| m.var_index(v)) else {
                return vec![Source::Env];
            };
            m.handlers()
                .filter(|(_, _, h)| matches!(&h.trigger, Trigger::Consensus(c) if c == inst))
                .map(|(y, _, _)| Source::Pair { node: y, var: prop })
                .collect()
        }
        _ => vec![Source::Env],
    }
}

pub fn compute_gets(m: &ProcessModel, lts: &Lts) -> GetsRelation {
    let mut facts = BTreeSet::new();
    for v in 0..m.variables.len() {
        facts.insert(GetsFact { dst: (lts.initial, v), src: Source::Default, edge: None });
    }
    for (ei, e) in lts.edges.iter().enumerate() {
        let h = &m.locations[e.handler.loc].handlers[e.handler.index];
        let body = h.branches().find(|(b, _)| *b == e.branch).map(|(_, b)| b).expect("edge branch");
        for v in 0..m.variables.len() {
            let name = &m.variables[v].name;
            let sources = match body.updates.iter().find(|u| u.var == *name) {
                Some(u) => expr_sources(m, e.src, &u.expr),
                None => vec![Source::Pair { node: e.src, var: v }],
            };
            for src in sources {
                facts.insert(GetsFact { dst: (e.dst, v), src, edge: Some(ei) });
            }
        }
    }
    GetsRelation { facts: facts.into_iter().collect() }
}

fn is_single_winner_edge(m: &ProcessModel, e: &Edge) -> bool {
    let h = &m.locations[e.handler.loc].handlers[e.handler.index];
    match &h.trigger {
        Trigger::Partition(p) => e.branch == 0 && m.event(p).and_then(|d| d.cardinality) == Some(1),
        _ => false,
    }
}

fn is_silent(h: &Handler) -> bool {
    h.trigger == Trigger::Internal && h.body.send.is_none()
}

/// Greatest set of reachable, non-initial nodes that is entered only through
/// the win branch of a cardinality-1 partition and is closed under internal
/// steps that send nothing.
pub fn server_regions(lts: &Lts, m: &ProcessModel) -> BTreeSet<usize> {
    let mut x: BTreeSet<usize> = lts.reachable().into_iter().filter(|&n| n != lts.initial).collect();
    loop {
        let drop: Vec<usize> = x
            .iter()
            .copied()
            .filter(|&n| {
                let bad_entry =
                    lts.edges.iter().any(|e| e.dst == n && !x.contains(&e.src) && !is_single_winner_edge(m, e));
                let escapes = lts.edges.iter().any(|e| {
                    e.src == n && !x.contains(&e.dst) && is_silent(&m.locations[e.handler.loc].handlers[e.handler.index])
                });
                bad_entry || escapes
            })
            .collect();
        if drop.is_empty() {
            return x;
        }
        for n in drop {
            x.remove(&n);
        }
    }
}

/// Ordered blocks of nodes such that all processes are always in the same
/// block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhasePartition {
    pub phases: Vec<BTreeSet<usize>>,
}

impl PhasePartition {
    pub fn phase_of(&self, node: usize) -> usize {
        self.phases.iter().position(|p| p.contains(&node)).expect("node in some phase")
    }
}

/// Whether every process must take part in event `ev`.
fn is_global_event(m: &ProcessModel, ev: &str) -> bool {
    m.event(ev).is_some_and(|d| match d.kind {
        EventKind::Partition | EventKind::Consensus => d.participants == Some(Participants::All),
        EventKind::Broadcast => d.env,
        EventKind::Rendezvous => false,
    })
}

/// Event an edge synchronizes on as a receiver or agreement participant.
fn received_event(h: &Handler) -> Option<&str> {
    match &h.trigger {
        Trigger::Recv(e) | Trigger::Partition(e) | Trigger::Consensus(e) => Some(e),
        Trigger::Internal => None,
    }
}

pub fn phase_partition(lts: &Lts, m: &ProcessModel) -> PhasePartition {
    let k = lts.nodes.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let next = p[c];
            p[c] = r;
            c = next;
        }
        r
    }
    fn union(p: &mut [usize], a: usize, b: usize) {
        let (ra, rb) = (find(p, a), find(p, b));
        if ra != rb {
            p[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut anchors: Vec<(String, usize, usize)> = Vec::new();
    for e in &lts.edges {
        let h = &m.locations[e.handler.loc].handlers[e.handler.index];
        match received_event(h).filter(|ev| is_global_event(m, ev)) {
            Some(ev) => match anchors.iter().find(|a| a.0 == ev) {
                Some(&(_, s, d)) => {
                    union(&mut parent, s, e.src);
                    union(&mut parent, d, e.dst);
                }
                None => anchors.push((ev.to_string(), e.src, e.dst)),
            },
            None => union(&mut parent, e.src, e.dst),
        }
    }
    let mut order = lts.reachable();
    let unreached: Vec<usize> = (0..k).filter(|n| !order.contains(n)).collect();
    order.extend(unreached);
    let mut phases: Vec<BTreeSet<usize>> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for n in order {
        let r = find(&mut parent, n);
        match roots.iter().position(|&x| x == r) {
            Some(i) => {
                phases[i].insert(n);
            }
            None => {
                roots.push(r);
                phases.push(BTreeSet::from([n]));
            }
        }
    }
    PhasePartition { phases }
}

/// Short description of the handler behind an edge.
pub fn edge_label(m: &ProcessModel, e: &Edge) -> String {
    let h = &m.locations[e.handler.loc].handlers[e.handler.index];
    let mut s = match &h.trigger {
        Trigger::Internal => match &h.body.send {
            Some(snd) if snd.kind == SendKind::Broadcast => format!("broadcast({})", snd.event),
            Some(snd) => format!("send({})", snd.event),
            None => "_".to_string(),
        },
        Trigger::Recv(ev) => format!("recv({ev})"),
        Trigger::Partition(p) => format!("partition<{p}> {}", if e.branch == 0 { "win" } else { "lose" }),
        Trigger::Consensus(c) => format!("consensus<{c}>"),
    };
    if h.guard.is_some() {
        let _ = write!(s, " #{}", e.handler.index);
    }
    s
}

pub fn source_to_string(m: &ProcessModel, lts: &Lts, s: &Source) -> String {
    match s {
        Source::Pair { node, var } => format!("{}.{}", lts.nodes[*node], m.variables[*var].name),
        Source::Env => "env".to_string(),
        Source::Default => "default".to_string(),
    }
}

/// Line-oriented dump of nodes, edges, gets facts, server regions and phases.
pub fn emit_text(m: &ProcessModel, lts: &Lts, gets: &GetsRelation) -> String {
    let mut out = String::new();
    for (i, n) in lts.nodes.iter().enumerate() {
        let mark = if i == lts.initial { " initial" } else { "" };
        let _ = writeln!(out, "node {n}{mark}");
    }
    for e in &lts.edges {
        let _ = writeln!(out, "edge {} -> {} [{}]", lts.nodes[e.src], lts.nodes[e.dst], edge_label(m, e));
    }
    let mut seen = BTreeSet::new();
    for f in &gets.facts {
        if seen.insert((f.dst, f.src)) {
            let dst = source_to_string(m, lts, &Source::Pair { node: f.dst.0, var: f.dst.1 });
            let _ = writeln!(out, "gets {dst} <- {}", source_to_string(m, lts, &f.src));
        }
    }
    let servers: Vec<&str> = server_regions(lts, m).into_iter().map(|n| lts.nodes[n].as_str()).collect();
    let _ = writeln!(out, "server {{{}}}", servers.join(", "));
    for p in phase_partition(lts, m).phases {
        let names: Vec<&str> = p.iter().map(|&n| lts.nodes[n].as_str()).collect();
        let _ = writeln!(out, "phase {{{}}}", names.join(", "));
    }
    out
}

/// Graphviz description of the LTS.
pub fn emit_dot(m: &ProcessModel, lts: &Lts) -> String {
    let mut out = format!("digraph \"{}\" {{\n", m.name);
    for (i, n) in lts.nodes.iter().enumerate() {
        let shape = if i == lts.initial { "doublecircle" } else { "circle" };
        let _ = writeln!(out, "  \"{n}\" [shape={shape}];");
    }
    for e in &lts.edges {
        let _ = writeln!(out, "  \"{}\" -> \"{}\" [label=\"{}\"];", lts.nodes[e.src], lts.nodes[e.dst], edge_label(m, e));
    }
    out.push_str("}\n");
    out
}

/// Strongly connected components of a directed graph given as adjacency
/// lists, in reverse topological order (sinks first).
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct St<'a> {
        adj: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(st: &mut St, v: usize) {
        // iterative DFS over (node, next child position)
        let mut work = vec![(v, 0)];
        st.index[v] = Some(st.next);
        st.low[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on[v] = true;
        while let Some(&mut (x, ref mut pos)) = work.last_mut() {
            if *pos < st.adj[x].len() {
                let y = st.adj[x][*pos];
                *pos += 1;
                match st.index[y] {
                    None => {
                        st.index[y] = Some(st.next);
                        st.low[y] = st.next;
                        st.next += 1;
                        st.stack.push(y);
                        st.on[y] = true;
                        work.push((y, 0));
                    }
                    Some(iy) if st.on[y] => st.low[x] = st.low[x].min(iy),
                    _ => {}
                }
            } else {
                work.pop();
                if let Some(&(p, _)) = work.last() {
                    st.low[p] = st.low[p].min(st.low[x]);
                }
                if Some(st.low[x]) == st.index[x] {
                    let mut comp = Vec::new();
                    loop {
                        let w = st.stack.pop().expect("scc stack");
                        st.on[w] = false;
                        comp.push(w);
                        if w == x {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    st.out.push(comp);
                }
            }
        }
    }
    let n = adj.len();
    let mut st = St { adj, index: vec![None; n], low: vec![0; n], on: vec![false; n], stack: Vec::new(), next: 0, out: Vec::new() };
    for v in 0..n {
        if st.index[v].is_none() {
            visit(&mut st, v);
        }
    }
    st.out
}

#[cfg(test)]
mod tests;
