//! Corpus loading and batch analysis, data-parallel over (program, config) jobs.

use crate::absint::Analysis;
use crate::base::BaseDomain;
use crate::concrete::{run_concrete, ConcreteConfig, ConcreteRun, Outcome};
use crate::config::{node_types, run_with, AnalysisConfig, AnalysisVisitor, Report};
use crate::gamma::{gamma_member, Violation};
use crate::lang::{LangError, Program};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expected {
    #[serde(rename = "SAFE")]
    Safe,
    #[serde(rename = "UNSAFE")]
    Unsafe,
    /// The concrete run need not terminate; the analysis must.
    #[serde(rename = "DIVERGE-OK")]
    DivergeOk,
}

impl Expected {
    pub fn label(self) -> &'static str {
        match self {
            Expected::Safe => "SAFE",
            Expected::Unsafe => "UNSAFE",
            Expected::DivergeOk => "DIVERGE-OK",
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: LangError },
    #[error("{path}: invalid manifest: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
}

/// A parsed corpus program with its expected verdict.
#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub source: String,
    pub program: Program,
    pub expected: Option<Expected>,
}

fn read(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_owned(), source })
}

/// Reads an expected-verdicts manifest `{file: SAFE|UNSAFE|DIVERGE-OK}`.
pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, Expected>, CorpusError> {
    serde_json::from_str(&read(path)?).map_err(|source| CorpusError::Manifest { path: path.to_owned(), source })
}

/// Parses one program file.
pub fn load_program(path: &Path, expected: Option<Expected>) -> Result<CorpusEntry, CorpusError> {
    let source = read(path)?;
    let program = Program::parse(&source).map_err(|source| CorpusError::Parse { path: path.to_owned(), source })?;
    let name = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(CorpusEntry { name, source, program, expected })
}

/// Loads `dir/programs/*.ml` (or `dir/*.ml`) with the sidecar `manifest.json` if present.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    let progs = if dir.join("programs").is_dir() { dir.join("programs") } else { dir.to_owned() };
    let manifest = [dir.join("manifest.json"), progs.join("manifest.json")].into_iter().find(|p| p.is_file());
    let expected = match manifest {
        Some(m) => read_manifest(&m)?,
        None => BTreeMap::new(),
    };
    let entries = std::fs::read_dir(&progs).map_err(|source| CorpusError::Io { path: progs.clone(), source })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ml"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let name = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
            load_program(p, expected.get(&name).copied())
        })
        .collect()
}

/// How batch jobs are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Data-parallel with rayon; sequential when the `parallel` feature is off.
    Parallel,
    Sequential,
}

/// Maps `f` over `items`, in parallel when requested and available.
pub fn map_jobs<T: Sync, R: Send>(items: &[T], mode: Mode, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    if mode == Mode::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Result of the concrete oracle for one job.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleResult {
    /// The concrete run reached its fixpoint and lies in the concretization.
    Sound,
    /// The concrete run was cut by fuel; its last iterate lies in the concretization.
    SoundPartial,
    Violation(Violation),
}

impl OracleResult {
    pub fn is_sound(&self) -> bool {
        !matches!(self, OracleResult::Violation(_))
    }
}

/// Analysis report plus optional oracle check of one (program, config) job.
#[derive(Clone, Debug)]
pub struct JobResult {
    pub program: String,
    pub config: usize,
    pub expected: Option<Expected>,
    pub report: Report,
    pub oracle: Option<OracleResult>,
    /// Concrete iterations, when the oracle ran.
    pub concrete_iterations: Option<usize>,
}

impl JobResult {
    /// Whether the verdict matches the manifest (and the oracle, if run, found no violation).
    pub fn success(&self) -> bool {
        let verdict_ok = match self.expected {
            None => true,
            Some(Expected::Safe) => self.report.is_safe(),
            Some(Expected::Unsafe) => !self.report.is_safe(),
            Some(Expected::DivergeOk) => self.report.converged,
        };
        verdict_ok && self.oracle.as_ref().is_none_or(|o| o.is_sound())
    }
}

struct WithOracle<'a> {
    run: &'a ConcreteRun,
    k: usize,
    start: Instant,
}

impl AnalysisVisitor for WithOracle<'_> {
    type Output = (Report, OracleResult);

    fn visit<D: BaseDomain>(self, an: Analysis<'_, D>) -> (Report, OracleResult) {
        let elapsed = self.start.elapsed();
        let oracle = match gamma_member(self.run, &an, self.k) {
            Err(v) => OracleResult::Violation(v),
            Ok(()) if self.run.outcome == Outcome::Fixpoint => OracleResult::Sound,
            Ok(()) => OracleResult::SoundPartial,
        };
        let report = Report {
            verdict: an.verdict(),
            iterations: an.iterations,
            converged: an.converged,
            max_depth: an.max_depth,
            elapsed,
            types: node_types(&an),
        };
        (report, oracle)
    }
}

/// Analyzes `prog` and checks the concrete run against the result.
pub fn analyze_with_oracle(prog: &Program, cfg: &AnalysisConfig, run: &ConcreteRun) -> (Report, OracleResult) {
    run_with(prog, cfg, WithOracle { run, k: cfg.k, start: Instant::now() })
}

/// Runs every config on every program.
pub fn run_batch(
    entries: &[CorpusEntry],
    configs: &[AnalysisConfig],
    oracle: Option<&ConcreteConfig>,
    mode: Mode,
) -> Vec<JobResult> {
    let runs: Vec<Option<ConcreteRun>> = match oracle {
        Some(cc) => map_jobs(entries, mode, |e| Some(run_concrete(&e.program, cc))),
        None => entries.iter().map(|_| None).collect(),
    };
    let jobs: Vec<(usize, usize)> = (0..entries.len()).flat_map(|p| (0..configs.len()).map(move |c| (p, c))).collect();
    map_jobs(&jobs, mode, |&(p, c)| {
        let e = &entries[p];
        let cfg = &configs[c];
        let (report, oracle) = match &runs[p] {
            Some(run) => {
                let (r, o) = analyze_with_oracle(&e.program, cfg, run);
                (r, Some(o))
            }
            None => (crate::config::analyze_program(&e.program, cfg), None),
        };
        JobResult {
            program: e.name.clone(),
            config: c,
            expected: e.expected,
            report,
            oracle,
            concrete_iterations: runs[p].as_ref().map(|r| r.iterations),
        }
    })
}

/// One row of the batch summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub category: String,
    pub succ: usize,
    pub total: usize,
    pub seconds: f64,
}

/// Success counts and cumulative analysis time per expected-verdict category.
pub fn summarize(results: &[JobResult]) -> Vec<SummaryRow> {
    let mut rows: BTreeMap<&'static str, (usize, usize, Duration)> = BTreeMap::new();
    for r in results {
        let cat = r.expected.map(Expected::label).unwrap_or("UNLISTED");
        let row = rows.entry(cat).or_default();
        row.0 += r.success() as usize;
        row.1 += 1;
        row.2 += r.report.elapsed;
    }
    let mut out: Vec<SummaryRow> = rows
        .into_iter()
        .map(|(c, (s, t, d))| SummaryRow { category: c.into(), succ: s, total: t, seconds: d.as_secs_f64() })
        .collect();
    let (s, t, d) = out.iter().fold((0, 0, 0.0), |a, r| (a.0 + r.succ, a.1 + r.total, a.2 + r.seconds));
    out.push(SummaryRow { category: "total".into(), succ: s, total: t, seconds: d });
    out
}
