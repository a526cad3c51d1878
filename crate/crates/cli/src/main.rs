use clap::{Args, Parser, Subcommand, ValueEnum};
use refty::absint::Verdict;
use refty::concrete::{run_concrete, ConcreteConfig, ConcreteRun, Outcome};
use refty::config::{analyze_program, AnalysisConfig, DomainChoice, Report, Widening};
use refty::corpus::{analyze_with_oracle, load_corpus, run_batch, summarize, Mode, OracleResult};
use refty::lang::Program;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "refty", version, about = "Data flow refinement type inference for a small ML-like language")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one or more programs and report verdicts.
    Analyze {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Analyze a corpus directory (`programs/*.ml` plus `manifest.json`) and print a summary.
    Batch {
        dir: PathBuf,
        #[command(flatten)]
        opts: Opts,
        /// Analyze programs one after another instead of in parallel.
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DomainArg {
    Pred,
    Oct,
    Poly,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WideningArg {
    Plain,
    Thresholds,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Opts {
    #[arg(long, value_enum, default_value = "poly")]
    domain: DomainArg,
    /// Qualifier file; required for the pred domain.
    #[arg(long, value_name = "FILE")]
    quals: Option<PathBuf>,
    /// Context sensitivity (call-site locations kept in stacks).
    #[arg(long = "ctx", value_name = "K", default_value_t = 1)]
    ctx: usize,
    #[arg(long, value_enum, default_value = "thresholds")]
    widening: WideningArg,
    /// Threshold file, or `auto` for thresholds derived from the program.
    #[arg(long, value_name = "FILE|auto", default_value = "auto")]
    thresholds: String,
    #[arg(long, value_name = "N", default_value_t = 20)]
    depth_cap: usize,
    #[arg(long, value_name = "N", default_value_t = 500)]
    max_iters: usize,
    /// Step budget of the concrete interpreter used by the oracle.
    #[arg(long, value_name = "N", default_value_t = 1000)]
    fuel: usize,
    /// Seed for `nondet` values in concrete runs.
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    /// Print the inferred type of every reached node (always included in JSON output).
    #[arg(long)]
    dump_types: bool,
    /// Print the concrete execution map (implies a concrete run).
    #[arg(long)]
    dump_concrete: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Run the concrete semantics and check it against the inferred types.
    #[arg(long)]
    oracle: bool,
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

impl Opts {
    fn config(&self) -> Result<AnalysisConfig, String> {
        let domain = match (self.domain, &self.quals) {
            (DomainArg::Pred, Some(q)) => {
                let src = read(q)?;
                AnalysisConfig::pred(&src, self.ctx).map_err(|e| format!("{}: {e}", q.display()))?.domain
            }
            (DomainArg::Pred, None) => return Err("--quals is required with --domain pred".into()),
            (_, Some(_)) => return Err("--quals is only valid with --domain pred".into()),
            (DomainArg::Oct, None) => DomainChoice::Oct,
            (DomainArg::Poly, None) => DomainChoice::Poly,
        };
        let mut cfg = AnalysisConfig::new(domain, self.ctx);
        cfg.depth_cap = self.depth_cap;
        cfg.max_iters = self.max_iters;
        cfg = match (self.widening, self.thresholds.as_str()) {
            (WideningArg::Plain, "auto") => cfg.with_widening(Widening::Plain),
            (WideningArg::Plain, _) => return Err("--thresholds requires --widening thresholds".into()),
            (WideningArg::Thresholds, "auto") => cfg.with_widening(Widening::AutoThresholds),
            (WideningArg::Thresholds, file) => {
                let src = read(Path::new(file))?;
                cfg.with_threshold_file(&src).map_err(|e| format!("{file}: {e}"))?
            }
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    fn concrete(&self) -> ConcreteConfig {
        ConcreteConfig { fuel: self.fuel, seed: self.seed, ..Default::default() }
    }
}

fn verdict_text(prog: &Program, v: &Verdict) -> String {
    match v {
        Verdict::Safe => "SAFE".into(),
        Verdict::Unsafe(e) => {
            let l = prog.loc(e.loc);
            format!("UNSAFE at {}:{}: {}", l.line, l.col, e.reason)
        }
    }
}

fn oracle_text(run: &ConcreteRun, o: &OracleResult) -> String {
    let how = match run.outcome {
        Outcome::Fixpoint => format!("fixpoint after {} steps", run.iterations),
        Outcome::Diverged => format!("fuel exhausted after {} steps", run.iterations),
    };
    match o {
        OracleResult::Violation(v) => format!("oracle: {how}; soundness violation {v}"),
        _ => format!("oracle: {how}; sound"),
    }
}

fn oracle_json(run: &ConcreteRun, o: &OracleResult) -> Value {
    let outcome = match run.outcome {
        Outcome::Fixpoint => "fixpoint",
        Outcome::Diverged => "diverged",
    };
    let violation = match o {
        OracleResult::Violation(v) => json!({
            "loc": v.loc, "concrete": v.concrete, "type": v.abstract_type, "reason": v.reason,
        }),
        _ => Value::Null,
    };
    json!({"outcome": outcome, "steps": run.iterations, "sound": o.is_sound(), "violation": violation})
}

fn short_label(label: &str) -> String {
    let flat = label.split_whitespace().collect::<Vec<_>>().join(" ");
    match flat.char_indices().nth(40) {
        Some((i, _)) => format!("{}...", &flat[..i]),
        None => flat,
    }
}

struct Outcomes {
    unsafe_found: bool,
    violation: bool,
}

fn analyze_file(path: &Path, opts: &Opts, cfg: &AnalysisConfig, out: &mut Vec<Value>, acc: &mut Outcomes) -> Result<(), String> {
    let name = path.display().to_string();
    let prog = Program::parse(&read(path)?).map_err(|e| format!("{name}: {e}"))?;
    let run = (opts.oracle || opts.dump_concrete).then(|| run_concrete(&prog, &opts.concrete()));
    let (report, oracle): (Report, Option<OracleResult>) = match &run {
        Some(run) if opts.oracle => {
            let (r, o) = analyze_with_oracle(&prog, cfg, run);
            (r, Some(o))
        }
        _ => (analyze_program(&prog, cfg), None),
    };
    acc.unsafe_found |= !report.is_safe();
    acc.violation |= oracle.as_ref().is_some_and(|o| !o.is_sound());
    match opts.format {
        Format::Json => {
            let mut v = report.to_json(&name, cfg);
            if let (Some(run), Some(o)) = (&run, &oracle) {
                v["oracle"] = oracle_json(run, o);
            }
            if let (Some(run), true) = (&run, opts.dump_concrete) {
                v["concrete"] = run.to_json(&prog);
            }
            out.push(v);
        }
        Format::Text => {
            println!(
                "{name}: {} ({} iterations, {:.3}s)",
                verdict_text(&prog, &report.verdict),
                report.iterations,
                report.elapsed.as_secs_f64()
            );
            if opts.dump_types {
                for t in &report.types {
                    let stack = t.stack.as_deref().map(|s| format!(" @{s}")).unwrap_or_default();
                    println!("  {}:{} {}{} : {}", t.line, t.col, short_label(&t.label), stack, t.pretty);
                }
            }
            if let (Some(run), Some(o)) = (&run, &oracle) {
                println!("  {}", oracle_text(run, o));
            }
            if let (Some(run), true) = (&run, opts.dump_concrete) {
                println!("{}", serde_json::to_string_pretty(&run.to_json(&prog)).unwrap_or_default());
            }
        }
    }
    Ok(())
}

fn analyze(inputs: &[PathBuf], opts: &Opts) -> Result<ExitCode, String> {
    let cfg = opts.config()?;
    let mut out = Vec::new();
    let mut acc = Outcomes { unsafe_found: false, violation: false };
    for p in inputs {
        analyze_file(p, opts, &cfg, &mut out, &mut acc)?;
    }
    if opts.format == Format::Json {
        let v = if out.len() == 1 { out.remove(0) } else { Value::Array(out) };
        println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
    }
    Ok(if acc.violation {
        eprintln!("error: soundness violation detected by the oracle");
        ExitCode::from(2)
    } else if acc.unsafe_found {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn batch(dir: &Path, opts: &Opts, sequential: bool) -> Result<ExitCode, String> {
    let cfg = opts.config()?;
    let entries = load_corpus(dir).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let cc = opts.concrete();
    let mode = if sequential { Mode::Sequential } else { Mode::Parallel };
    let results = run_batch(&entries, std::slice::from_ref(&cfg), opts.oracle.then_some(&cc), mode);
    let wall = start.elapsed().as_secs_f64();
    let summary = summarize(&results);
    let violation = results.iter().any(|r| r.oracle.as_ref().is_some_and(|o| !o.is_sound()));
    let all_ok = results.iter().all(|r| r.success());
    match opts.format {
        Format::Json => {
            let rows: Vec<Value> = results
                .iter()
                .map(|r| {
                    let verdict = if r.report.is_safe() { "SAFE" } else { "UNSAFE" };
                    json!({
                        "program": r.program,
                        "expected": r.expected.map(|e| e.label()),
                        "verdict": verdict,
                        "success": r.success(),
                        "iterations": r.report.iterations,
                        "converged": r.report.converged,
                        "seconds": r.report.elapsed.as_secs_f64(),
                        "oracle_sound": r.oracle.as_ref().map(|o| o.is_sound()),
                    })
                })
                .collect();
            let v = json!({"config": cfg.to_json(), "results": rows, "summary": summary, "wall_seconds": wall});
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
        }
        Format::Text => {
            for (r, e) in results.iter().zip(&entries) {
                let expected = r.expected.map(|e| e.label()).unwrap_or("-");
                let mark = if r.success() { "ok" } else { "FAIL" };
                println!(
                    "{:<24} {:<10} {:<44} {:>4} {:>8.3}s",
                    r.program,
                    expected,
                    verdict_text(&e.program, &r.report.verdict),
                    mark,
                    r.report.elapsed.as_secs_f64()
                );
                if let Some(OracleResult::Violation(v)) = &r.oracle {
                    println!("  soundness violation {v}");
                }
            }
            println!();
            println!("{:<12} {:>6} {:>6} {:>10}", "category", "succ", "total", "seconds");
            for row in &summary {
                println!("{:<12} {:>6} {:>6} {:>10.3}", row.category, row.succ, row.total, row.seconds);
            }
            println!("wall clock {wall:.3}s");
        }
    }
    Ok(if violation {
        eprintln!("error: soundness violation detected by the oracle");
        ExitCode::from(2)
    } else if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Analyze { inputs, opts } => analyze(inputs, opts),
        Command::Batch { dir, opts, sequential } => batch(dir, opts, *sequential),
    };
    r.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}

