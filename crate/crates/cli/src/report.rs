use serde::Serialize;
use std::fmt::Write;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DomainEntry {
    pub domain: String,
    /// Declared size, `∞` when unbounded.
    pub size: String,
    pub status: String,
    pub witnesses: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CutoffEntry {
    pub domain: String,
    /// `ok`, `NoValidRegion` or `NotSymmetric`.
    pub status: String,
    pub region_pairs: Vec<String>,
    pub rho: Option<u32>,
    pub lambda: Option<u32>,
    pub cutoff: Option<u32>,
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CensusRow {
    pub size: u64,
    pub count: usize,
    pub verdict: String,
    pub states_explored: usize,
}

/// One run of the tool, shaped like a row of a benchmark table.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub mode: String,
    pub model: String,
    pub loc: usize,
    pub domains: Vec<DomainEntry>,
    pub cutoffs: Vec<CutoffEntry>,
    pub process_cutoff: Option<usize>,
    pub verdict: Option<String>,
    pub states_explored: Option<usize>,
    pub elapsed_seconds: f64,
    pub trace: Vec<String>,
    pub census_domain: Option<String>,
    pub census: Vec<CensusRow>,
}

impl RunReport {
    pub fn new(mode: &str, model: &str, loc: usize) -> Self {
        RunReport {
            mode: mode.into(),
            model: model.into(),
            loc,
            domains: Vec::new(),
            cutoffs: Vec::new(),
            process_cutoff: None,
            verdict: None,
            states_explored: None,
            elapsed_seconds: 0.0,
            trace: Vec::new(),
            census_domain: None,
            census: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "model: {} ({})", self.model, self.mode);
        let _ = writeln!(o, "loc: {}", self.loc);
        for d in &self.domains {
            let _ = writeln!(o, "domain {}: size {}, {}", d.domain, d.size, d.status);
            for w in &d.witnesses {
                let _ = writeln!(o, "  witness: {w}");
            }
        }
        for c in &self.cutoffs {
            match c.cutoff {
                Some(k) => {
                    let _ = writeln!(
                        o,
                        "cutoff {}: {k} (rho {}, lambda {})",
                        c.domain,
                        c.rho.unwrap_or(0),
                        c.lambda.unwrap_or(0)
                    );
                    let _ = writeln!(o, "  region: {{{}}}", c.region_pairs.join(", "));
                }
                None => {
                    let _ = writeln!(o, "cutoff {}: none ({})", c.domain, c.status);
                }
            }
            for p in &c.provenance {
                let _ = writeln!(o, "  - {p}");
            }
        }
        if let Some(n) = self.process_cutoff {
            let _ = writeln!(o, "process cutoff: {n}");
        }
        if let Some(d) = &self.census_domain {
            let _ = writeln!(o, "census domain: {d}");
            let _ = writeln!(o, "size,count,verdict,states");
            for r in &self.census {
                let _ = writeln!(o, "{},{},{},{}", r.size, r.count, r.verdict, r.states_explored);
            }
        }
        if let Some(v) = &self.verdict {
            let _ = writeln!(o, "verdict: {v}");
        }
        if let Some(s) = self.states_explored {
            let _ = writeln!(o, "states explored: {s}");
        }
        if !self.trace.is_empty() {
            let _ = writeln!(o, "counterexample:");
            for l in &self.trace {
                let _ = writeln!(o, "  {l}");
            }
        }
        let _ = writeln!(o, "time: {:.3}s", self.elapsed_seconds);
        o
    }
}

/// Non-blank lines that are not only a comment.
pub fn count_loc(src: &str) -> usize {
    src.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loc_skips_comments_and_blanks() {
        assert_eq!(count_loc("# c\n\nprocess P\n  # x\ninitial location A\n"), 2);
    }

    #[test]
    fn text_lists_every_field() {
        let mut r = RunReport::new("verify", "P", 3);
        r.process_cutoff = Some(2);
        r.verdict = Some("Safe".into());
        r.states_explored = Some(5);
        let t = r.to_text();
        for needle in ["model: P", "loc: 3", "process cutoff: 2", "verdict: Safe", "states explored: 5", "time:"] {
            assert!(t.contains(needle), "{t}");
        }
        let j: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(j["processCutoff"], 2);
        assert_eq!(j["statesExplored"], 5);
    }
}
