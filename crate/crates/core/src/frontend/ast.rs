//! Typed model of a process definition.

use std::fmt;

/// Value domain of a variable or event payload.
///
/// Integer domains may carry a tag so that two otherwise identical ranges can
/// be told apart: `int<a>` and `int<b>` are distinct domains.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    IntRange { lo: i64, hi: i64, tag: Option<String> },
    UnboundedInt { tag: Option<String> },
    PidSet,
}

impl Domain {
    pub fn is_int(&self) -> bool {
        !matches!(self, Domain::PidSet)
    }

    pub fn tag(&self) -> Option<&str> {
        match self {
            Domain::IntRange { tag, .. } | Domain::UnboundedInt { tag } => tag.as_deref(),
            Domain::PidSet => None,
        }
    }

    /// Number of values, if bounded.
    pub fn size(&self) -> Option<u128> {
        match self {
            Domain::IntRange { lo, hi, .. } => Some((*hi as i128 - *lo as i128 + 1) as u128),
            _ => None,
        }
    }

    /// The same domain resized to `1..=size`, keeping its tag.
    pub fn resized(&self, size: i64) -> Domain {
        Domain::IntRange { lo: 1, hi: size, tag: self.tag().map(str::to_owned) }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::IntRange { lo, hi, tag } => {
                write!(f, "int[{lo},{hi}]")?;
                if let Some(t) = tag {
                    write!(f, "<{t}>")?;
                }
                Ok(())
            }
            Domain::UnboundedInt { tag } => {
                f.write_str("int")?;
                if let Some(t) = tag {
                    write!(f, "<{t}>")?;
                }
                Ok(())
            }
            Domain::PidSet => f.write_str("pidset"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub domain: Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// Pairwise rendezvous (`rz`).
    Rendezvous,
    /// Broadcast (`br`).
    Broadcast,
    /// Partition agreement.
    Partition,
    /// Value consensus.
    Consensus,
}

impl EventKind {
    pub fn short(self) -> &'static str {
        match self {
            EventKind::Rendezvous => "pw",
            EventKind::Broadcast => "bc",
            EventKind::Partition => "pc",
            EventKind::Consensus => "vc",
        }
    }

    pub fn is_agreement(self) -> bool {
        matches!(self, EventKind::Partition | EventKind::Consensus)
    }
}

/// Participant set of an agreement instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Participants {
    All,
    /// Winner set of an earlier partition instance (`elect.winS`).
    WinnersOf(String),
}

impl fmt::Display for Participants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Participants::All => f.write_str("All"),
            Participants::WinnersOf(p) => write!(f, "{p}.winS"),
        }
    }
}

/// A communication event or an agreement instance.
///
/// Communication events are declared in the `events` block; agreement
/// instances are introduced by the handlers that use them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDecl {
    pub kind: EventKind,
    pub name: String,
    /// `None` for `unit` payloads and for partitions.
    pub payload: Option<Domain>,
    pub env: bool,
    pub cardinality: Option<u32>,
    pub participants: Option<Participants>,
    pub proposal_var: Option<String>,
    /// Variables written from `<id>.decVar[k]` (consensus only).
    pub dec_vars: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Add,
    Sub,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Add => "+",
            BinOp::Sub => "-",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }

    pub fn is_ordering(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    /// `ev.payld`
    Payload(String),
    /// `vc.decVar[k]`, 1-based.
    DecVar { inst: String, index: u32 },
    /// `p.winS`
    WinSet(String),
    /// `default(v)`
    Default(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Calls `f` on every sub-expression, outermost first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Unary(_, e) => e.walk(f),
            Expr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SendKind {
    Broadcast,
    Rendezvous,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Send {
    pub kind: SendKind,
    pub event: String,
    pub payload: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Update {
    pub var: String,
    pub expr: Expr,
}

/// Effect of a handler branch: parallel updates, an optional send, and the
/// target location (`None` stays put).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Body {
    pub updates: Vec<Update>,
    pub send: Option<Send>,
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Trigger {
    /// `on _`
    Internal,
    /// `on recv(ev)`
    Recv(String),
    /// `on partition<id>(..)`
    Partition(String),
    /// `on consensus<id>(..)`
    Consensus(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Handler {
    pub trigger: Trigger,
    pub guard: Option<Expr>,
    /// The body, or the `win:` branch of a partition handler.
    pub body: Body,
    /// The `lose:` branch of a partition handler.
    pub lose: Option<Body>,
}

impl Handler {
    /// Branches with their index: 0 is the body or win branch, 1 is lose.
    pub fn branches(&self) -> impl Iterator<Item = (usize, &Body)> {
        std::iter::once((0, &self.body)).chain(self.lose.iter().map(|b| (1, b)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationDef {
    pub name: String,
    pub initial: bool,
    pub handlers: Vec<Handler>,
}

/// `safety agreement <var> in {<loc>, ...}`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetySpec {
    pub variable: String,
    pub locations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessModel {
    pub name: String,
    pub variables: Vec<VarDecl>,
    pub events: Vec<EventDecl>,
    pub locations: Vec<LocationDef>,
    pub safety: Option<SafetySpec>,
}

impl ProcessModel {
    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn event(&self, name: &str) -> Option<&EventDecl> {
        self.events.iter().find(|e| e.name == name)
    }

    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.name == name)
    }

    pub fn initial_index(&self) -> usize {
        self.locations.iter().position(|l| l.initial).unwrap_or(0)
    }

    pub fn comm_events(&self) -> impl Iterator<Item = &EventDecl> {
        self.events.iter().filter(|e| !e.kind.is_agreement())
    }

    pub fn agreements(&self) -> impl Iterator<Item = &EventDecl> {
        self.events.iter().filter(|e| e.kind.is_agreement())
    }

    /// Distinct integer domains in order of first use by a variable or payload.
    pub fn int_domains(&self) -> Vec<Domain> {
        let mut out: Vec<Domain> = Vec::new();
        let decls = self
            .variables
            .iter()
            .map(|v| &v.domain)
            .chain(self.events.iter().filter_map(|e| e.payload.as_ref()));
        for d in decls {
            if d.is_int() && !out.contains(d) {
                out.push(d.clone());
            }
        }
        out
    }

    /// Variables declared with domain `d`, in declaration order.
    pub fn vars_of(&self, d: &Domain) -> Vec<usize> {
        (0..self.variables.len()).filter(|&i| &self.variables[i].domain == d).collect()
    }

    /// Iterates `(location index, handler index, handler)`.
    pub fn handlers(&self) -> impl Iterator<Item = (usize, usize, &Handler)> {
        self.locations
            .iter()
            .enumerate()
            .flat_map(|(li, l)| l.handlers.iter().enumerate().map(move |(hi, h)| (li, hi, h)))
    }
}
