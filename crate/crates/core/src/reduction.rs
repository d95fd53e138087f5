//! Rewriting symmetric domains to their cutoff size.

use crate::frontend::{Domain, ProcessModel};
use crate::region::CutoffReport;
use crate::scalarset::classify_domains;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReductionError {
    #[error("domain {0} is not a scalarset")]
    DomainNotSymmetric(String),
    #[error("domain {0} does not occur in the model")]
    UnknownDomain(String),
    #[error("target size must be at least 1")]
    EmptyDomain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionStep {
    pub domain: Domain,
    pub size: u64,
    pub reduced: Domain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionPlan {
    pub steps: Vec<ReductionStep>,
    pub source: ProcessModel,
    pub reduced: ProcessModel,
}

fn target(d: &Domain, size: u64) -> Domain {
    if d.size() == Some(size as u128) {
        d.clone()
    } else {
        d.resized(size as i64)
    }
}

/// Redeclares every variable and payload of domain `d` over `1..=size`.
pub fn reduce(m: &ProcessModel, d: &Domain, size: u64) -> Result<ProcessModel, ReductionError> {
    if size == 0 {
        return Err(ReductionError::EmptyDomain);
    }
    let report = classify_domains(m)
        .into_iter()
        .find(|r| &r.domain == d)
        .ok_or_else(|| ReductionError::UnknownDomain(d.to_string()))?;
    if !report.is_symmetric() {
        return Err(ReductionError::DomainNotSymmetric(d.to_string()));
    }
    let to = target(d, size);
    let mut out = m.clone();
    for v in out.variables.iter_mut().filter(|v| &v.domain == d) {
        v.domain = to.clone();
    }
    for p in out.events.iter_mut().filter_map(|e| e.payload.as_mut()).filter(|p| *p == d) {
        *p = to.clone();
    }
    Ok(out)
}

/// Applies one reduction per report, in order.
pub fn reduce_all(m: &ProcessModel, reports: &[CutoffReport]) -> Result<(ProcessModel, ReductionPlan), ReductionError> {
    let mut cur = m.clone();
    let mut steps = Vec::new();
    for r in reports {
        let size = r.cutoff as u64;
        cur = reduce(&cur, &r.domain_decl, size)?;
        steps.push(ReductionStep { domain: r.domain_decl.clone(), size, reduced: target(&r.domain_decl, size) });
    }
    let plan = ReductionPlan { steps, source: m.clone(), reduced: cur.clone() };
    Ok((cur, plan))
}
