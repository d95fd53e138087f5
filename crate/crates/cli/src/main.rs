//! `dab-verify`: domain-cutoff analysis, reduction and model checking of
//! `.mer` process models.

mod report;

use clap::{Parser, ValueEnum};
use dab_core::frontend::{parse_model, pretty_print, Domain, ProcessModel};
use dab_core::global::{check_safety, render_trace, Limits, Verdict};
use dab_core::local::{Instantiation, Semantics};
use dab_core::lts::{build_lts, compute_gets, emit_dot, emit_text};
use dab_core::perm::saturation_census;
use dab_core::reduction::reduce_all;
use dab_core::region::{domain_cutoff, CutoffReport, RegionError};
use dab_core::scalarset::classify_domains;
use report::{count_loc, CensusRow, CutoffEntry, DomainEntry, RunReport};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

const SAFE: u8 = 0;
const UNSAFE: u8 = 1;
const USAGE: u8 = 2;
const INCONCLUSIVE: u8 = 3;
const NOT_REDUCIBLE: u8 = 4;

/// Size used for an unreduced domain when `--domain-sizes` is absent.
const FALLBACK_SIZE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Classify domains and compute domain cutoffs.
    Analyze,
    /// Reduce the model and check it at the given process cutoff.
    Verify,
    /// Count canonical states and verdicts over several domain sizes.
    Oracle,
}

#[derive(Debug, Parser)]
#[command(name = "dab-verify", version, about = "Domain-cutoff analysis and verification of .mer models")]
struct Args {
    mode: Mode,
    /// Path to a `.mer` model
    model: PathBuf,
    /// Number of processes to verify; a cutoff obtained elsewhere.
    #[arg(long)]
    process_cutoff: Option<usize>,
    /// Comma-separated domain sizes: the sizes compared by `oracle`, or the
    /// sizes `verify` uses for domains without a cutoff.
    #[arg(long, value_delimiter = ',')]
    domain_sizes: Vec<u64>,
    /// Number of processes for `oracle`.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Writes the reduced model as `.mer` source
    #[arg(long)]
    emit_reduced: Option<PathBuf>,
    /// Writes the abstract LTS; DOT when the path ends in `.dot`.
    #[arg(long)]
    emit_lts: Option<PathBuf>,
    /// Print the report as JSON
    #[arg(long)]
    json: bool,
    /// Worker threads for state exploration
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Stop exploring after this many states
    #[arg(long)]
    max_states: Option<usize>,
    /// Seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Fail unless all sizes give equal counts and verdicts.
    #[arg(long)]
    assert_saturation: bool,
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok((report, code, note)) => {
            if args.json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            if let Some(n) = note {
                eprintln!("{n}");
            }
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn limits(args: &Args) -> Limits {
    Limits {
        max_states: args.max_states,
        timeout: args.timeout.map(Duration::from_secs_f64),
        threads: args.threads,
    }
}

fn load(path: &Path) -> Result<(ProcessModel, String), Failure> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| fail(USAGE, format!("cannot read {}: {e}", path.display())))?;
    let model = parse_model(&src).map_err(|d| fail(USAGE, d.render(&path.display().to_string())))?;
    Ok((model, src))
}

fn size_label(d: &Domain) -> String {
    d.size().map_or_else(|| "∞".to_string(), |s| s.to_string())
}

fn verdict_label(v: Verdict) -> String {
    match v {
        Verdict::Safe => "Safe".into(),
        Verdict::Unsafe => "Unsafe".into(),
        Verdict::Inconclusive(l) => format!("Inconclusive ({l})"),
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Safe => SAFE,
        Verdict::Unsafe => UNSAFE,
        Verdict::Inconclusive(_) => INCONCLUSIVE,
    }
}

struct Analysis {
    report: RunReport,
    cutoffs: Vec<(Domain, Result<CutoffReport, RegionError>)>,
}

fn analyze(args: &Args, mode: &str, model: &ProcessModel, src: &str) -> Result<Analysis, Failure> {
    let mut report = RunReport::new(mode, &model.name, count_loc(src));
    for r in classify_domains(model) {
        report.domains.push(DomainEntry {
            domain: r.domain.to_string(),
            size: size_label(&r.domain),
            status: format!("{:?}", r.status),
            witnesses: r.witnesses.iter().map(|w| format!("{} / {}: {}", w.location, w.handler, w.reason)).collect(),
        });
    }
    let cutoffs = domain_cutoff(model, model.safety.as_ref());
    for (d, res) in &cutoffs {
        report.cutoffs.push(match res {
            Ok(c) => CutoffEntry {
                domain: d.to_string(),
                status: "ok".into(),
                region_pairs: c.region_pairs.clone(),
                rho: Some(c.rho),
                lambda: Some(c.lambda),
                cutoff: Some(c.cutoff),
                provenance: c.provenance.clone(),
            },
            Err(e) => CutoffEntry {
                domain: d.to_string(),
                status: match e {
                    RegionError::NotSymmetric(_) => "NotSymmetric".into(),
                    _ => "NoValidRegion".into(),
                },
                region_pairs: Vec::new(),
                rho: None,
                lambda: None,
                cutoff: None,
                provenance: vec![e.to_string()],
            },
        });
    }
    if let Some(path) = &args.emit_lts {
        let lts = build_lts(model);
        let text = if path.extension().is_some_and(|e| e == "dot") {
            emit_dot(model, &lts)
        } else {
            emit_text(model, &lts, &compute_gets(model, &lts))
        };
        write_file(path, &text)?;
    }
    Ok(Analysis { report, cutoffs })
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| fail(USAGE, format!("cannot write {}: {e}", path.display())))
}

fn reduced(args: &Args, model: &ProcessModel, a: &Analysis) -> Result<ProcessModel, Failure> {
    let ok: Vec<CutoffReport> = a.cutoffs.iter().filter_map(|(_, r)| r.as_ref().ok().cloned()).collect();
    let (m, _) = reduce_all(model, &ok).map_err(|e| fail(NOT_REDUCIBLE, e.to_string()))?;
    if let Some(path) = &args.emit_reduced {
        write_file(path, &pretty_print(&m))?;
    }
    Ok(m)
}

type Outcome = (RunReport, u8, Option<String>);

fn run(args: &Args) -> Result<Outcome, Failure> {
    let (model, src) = load(&args.model)?;
    let start = Instant::now();
    match args.mode {
        Mode::Analyze => {
            let mut a = analyze(args, "analyze", &model, &src)?;
            reduced(args, &model, &a)?;
            a.report.elapsed_seconds = start.elapsed().as_secs_f64();
            let stuck = a.cutoffs.iter().any(|(_, r)| matches!(r, Err(RegionError::NoValidRegion)));
            let code = if stuck { NOT_REDUCIBLE } else { SAFE };
            let note = stuck.then(|| "not reducible: no valid region for some domain".to_string());
            Ok((a.report, code, note))
        }
        Mode::Verify => {
            let n = args.process_cutoff.ok_or_else(|| {
                fail(
                    USAGE,
                    "verify needs --process-cutoff N: the number of processes is not bounded by this tool, \
                     so correctness for all process counts rests on a cutoff established separately",
                )
            })?;
            let mut a = analyze(args, "verify", &model, &src)?;
            let m = reduced(args, &model, &a)?;
            // Domains left unreduced are searched at a fixed size: a
            // counterexample found there is genuine, a clean run proves nothing.
            let open: Vec<Domain> = m.int_domains().into_iter().filter(|d| d.size().is_none()).collect();
            let sizes: BTreeMap<Domain, u64> = open
                .iter()
                .enumerate()
                .map(|(i, d)| (d.clone(), args.domain_sizes.get(i).or(args.domain_sizes.last()).copied().unwrap_or(FALLBACK_SIZE)))
                .collect();
            let inst = Instantiation::new(&m, &sizes).map_err(|e| fail(NOT_REDUCIBLE, format!("not reducible: {e}")))?;
            let sem = Semantics::new(&m, inst, n).map_err(|e| fail(USAGE, e.to_string()))?;
            let res = check_safety(&sem, m.safety.as_ref(), &limits(args));
            a.report.process_cutoff = Some(n);
            a.report.verdict = Some(verdict_label(res.verdict));
            a.report.states_explored = Some(res.states_explored);
            a.report.trace = render_trace(&sem, &res.trace).lines().map(str::to_owned).collect();
            a.report.elapsed_seconds = start.elapsed().as_secs_f64();
            if !open.is_empty() && res.verdict == Verdict::Safe {
                let list: Vec<String> = sizes.iter().map(|(d, k)| format!("{d} at size {k}")).collect();
                a.report.verdict = Some("Safe (bounded search only)".into());
                let note = format!("not reducible: no counterexample with {}, but no domain cutoff either", list.join(", "));
                return Ok((a.report, NOT_REDUCIBLE, Some(note)));
            }
            Ok((a.report, verdict_code(res.verdict), None))
        }
        Mode::Oracle => oracle(args, &model, &src, start),
    }
}

fn oracle(args: &Args, model: &ProcessModel, src: &str, start: Instant) -> Result<Outcome, Failure> {
    if args.domain_sizes.is_empty() {
        return Err(fail(USAGE, "oracle needs --domain-sizes a,b,..."));
    }
    let mut a = analyze(args, "oracle", model, src)?;
    let ok: Vec<&CutoffReport> = a.cutoffs.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    let mut others: BTreeMap<Domain, u64> = ok.iter().map(|c| (c.domain_decl.clone(), c.cutoff as u64)).collect();
    let (domain, region) = match ok.first() {
        Some(c) => (c.domain_decl.clone(), c.region.clone()),
        None => match model.int_domains().first() {
            Some(d) => (d.clone(), empty_region()),
            None => (Domain::UnboundedInt { tag: None }, empty_region()),
        },
    };
    others.remove(&domain);
    let lim = limits(args);
    let counts = saturation_census(model, &domain, &region, args.n, &args.domain_sizes, &others, &lim)
        .map_err(|e| fail(INCONCLUSIVE, e.to_string()))?;
    for (size, count) in counts {
        let mut sizes = others.clone();
        sizes.insert(domain.clone(), size);
        let inst = Instantiation::new(model, &sizes).map_err(|e| fail(NOT_REDUCIBLE, e.to_string()))?;
        let sem = Semantics::new(model, inst, args.n).map_err(|e| fail(USAGE, e.to_string()))?;
        let res = check_safety(&sem, model.safety.as_ref(), &lim);
        if let Verdict::Inconclusive(l) = res.verdict {
            return Err(fail(INCONCLUSIVE, l.to_string()));
        }
        a.report.census.push(CensusRow { size, count, verdict: verdict_label(res.verdict), states_explored: res.states_explored });
    }
    a.report.census_domain = Some(domain.to_string());
    a.report.elapsed_seconds = start.elapsed().as_secs_f64();
    let rows = &a.report.census;
    let saturated = rows.iter().all(|r| r.count == rows[0].count && r.verdict == rows[0].verdict);
    if args.assert_saturation && !saturated {
        return Ok((a.report, UNSAFE, Some("saturation assertion failed".into())));
    }
    Ok((a.report, SAFE, None))
}

fn empty_region() -> dab_core::region::AbstractRegion {
    dab_core::region::AbstractRegion::new(Default::default(), 1).expect("positive bound")
}
