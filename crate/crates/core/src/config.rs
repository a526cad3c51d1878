//! Analysis configuration, dispatch over the base domains, and reports.

use crate::absint::{analyze, guard_thresholds, ANode, Analysis, Verdict};
use crate::base::{parse_templates, BaseDomain, Oct, Poly, Pred, Template, TemplateError};
use crate::lang::Program;
use crate::types::{Thresholds, TypeOps};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::sync::Arc;
use std::time::{Duration, Instant};
use thiserror::Error;

/// The base domain of an analysis.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainChoice {
    /// Predicate abstraction over the given qualifier templates.
    Pred(Vec<Template>),
    Oct,
    Poly,
}

impl DomainChoice {
    pub fn name(&self) -> &'static str {
        match self {
            DomainChoice::Pred(_) => "pred",
            DomainChoice::Oct => "oct",
            DomainChoice::Poly => "poly",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Widening {
    Plain,
    /// Thresholds from the guards and scope variables of the program.
    AutoThresholds,
    /// Thresholds instantiated from templates.
    Thresholds(Vec<Template>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub domain: DomainChoice,
    /// Context sensitivity: call-site locations kept in abstract stacks.
    pub k: usize,
    pub widening: Widening,
    pub depth_cap: usize,
    pub max_iters: usize,
    pub record_iterates: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            domain: DomainChoice::Poly,
            k: 1,
            widening: Widening::AutoThresholds,
            depth_cap: 20,
            max_iters: 500,
            record_iterates: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid qualifier: {0}")]
    Qualifier(TemplateError),
    #[error("invalid threshold: {0}")]
    Threshold(TemplateError),
    #[error("max iterations must be at least 1")]
    NoIterations,
}

impl AnalysisConfig {
    pub fn new(domain: DomainChoice, k: usize) -> Self {
        AnalysisConfig { domain, k, ..Default::default() }
    }

    /// Predicate domain over qualifiers in the qualifier-file syntax.
    pub fn pred(quals: &str, k: usize) -> Result<Self, ConfigError> {
        let q = parse_templates(quals).map_err(ConfigError::Qualifier)?;
        Ok(AnalysisConfig::new(DomainChoice::Pred(q), k))
    }

    pub fn with_widening(mut self, w: Widening) -> Self {
        self.widening = w;
        self
    }

    /// Thresholds in the qualifier-file syntax.
    pub fn with_threshold_file(self, src: &str) -> Result<Self, ConfigError> {
        let t = parse_templates(src).map_err(ConfigError::Threshold)?;
        Ok(self.with_widening(Widening::Thresholds(t)))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_iters == 0 {
            return Err(ConfigError::NoIterations);
        }
        Ok(())
    }

    fn thresholds(&self, prog: &Program) -> Thresholds {
        match &self.widening {
            Widening::Plain => Thresholds::none(),
            Widening::AutoThresholds => Thresholds { fixed: guard_thresholds(prog), pairwise: true, ..Default::default() },
            Widening::Thresholds(ts) => {
                Thresholds { templates: ts.clone(), names: Arc::new(prog.var_names()), ..Default::default() }
            }
        }
    }

    fn ops<D: BaseDomain>(&self, dom: D, prog: &Program) -> TypeOps<D> {
        let mut ops = TypeOps::new(dom);
        ops.depth_cap = self.depth_cap;
        ops.thresholds = self.thresholds(prog);
        ops
    }

    pub fn to_json(&self) -> Value {
        let widening = match &self.widening {
            Widening::Plain => json!("plain"),
            Widening::AutoThresholds => json!("thresholds(auto)"),
            Widening::Thresholds(ts) => json!({"thresholds": ts.iter().map(|t| t.to_string()).collect::<Vec<_>>()}),
        };
        let mut v = json!({
            "domain": self.domain.name(),
            "k": self.k,
            "widening": widening,
            "depth_cap": self.depth_cap,
            "max_iters": self.max_iters,
        });
        if let DomainChoice::Pred(q) = &self.domain {
            v["qualifiers"] = json!(q.iter().map(|t| t.to_string()).collect::<Vec<_>>());
        }
        v
    }
}

/// A computation over an analysis result, generic in the base domain.
pub trait AnalysisVisitor {
    type Output;
    fn visit<D: BaseDomain>(self, an: Analysis<'_, D>) -> Self::Output;
}

/// Runs the analysis of `prog` under `cfg` and hands the result to `v`.
pub fn run_with<V: AnalysisVisitor>(prog: &Program, cfg: &AnalysisConfig, v: V) -> V::Output {
    match &cfg.domain {
        DomainChoice::Pred(q) => {
            let dom = Pred::new(q.clone()).with_names(prog.var_names());
            v.visit(analyze(prog, cfg.ops(dom, prog), cfg.k, cfg.max_iters, cfg.record_iterates))
        }
        DomainChoice::Oct => v.visit(analyze(prog, cfg.ops(Oct, prog), cfg.k, cfg.max_iters, cfg.record_iterates)),
        DomainChoice::Poly => v.visit(analyze(prog, cfg.ops(Poly, prog), cfg.k, cfg.max_iters, cfg.record_iterates)),
    }
}

/// The inferred type at one abstract node.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NodeType {
    /// `"expr"` or `"var"`.
    pub node: String,
    pub loc: u32,
    pub line: u32,
    pub col: u32,
    /// Source text of the expression or the variable name.
    pub label: String,
    /// Abstract stack of a variable node.
    pub stack: Option<String>,
    /// Abstract stacks of the variables in the node's environment.
    pub env: Vec<(String, String)>,
    pub pretty: String,
    pub structured: Value,
}

/// Outcome of an analysis, independent of the base domain.
#[derive(Clone, Debug)]
pub struct Report {
    pub verdict: Verdict,
    pub iterations: usize,
    pub converged: bool,
    pub max_depth: usize,
    pub elapsed: Duration,
    pub types: Vec<NodeType>,
}

impl Report {
    pub fn is_safe(&self) -> bool {
        self.verdict.is_safe()
    }

    /// Types at expression nodes of location `loc`.
    pub fn at_expr(&self, loc: u32) -> Vec<&NodeType> {
        self.types.iter().filter(|t| t.node == "expr" && t.loc == loc).collect()
    }

    /// Types at variable nodes of binder `var`.
    pub fn at_var(&self, var: u32) -> Vec<&NodeType> {
        self.types.iter().filter(|t| t.node == "var" && t.loc == var).collect()
    }

    pub fn to_json(&self, prog_name: &str, cfg: &AnalysisConfig) -> Value {
        let verdict = match &self.verdict {
            Verdict::Safe => json!({"result": "SAFE"}),
            Verdict::Unsafe(e) => json!({"result": "UNSAFE", "loc": e.loc, "reason": e.reason}),
        };
        json!({
            "program": prog_name,
            "config": cfg.to_json(),
            "verdict": verdict,
            "iterations": self.iterations,
            "converged": self.converged,
            "max_depth": self.max_depth,
            "types": self.types,
            "timing_ms": self.elapsed.as_secs_f64() * 1000.0,
        })
    }
}

struct Summarize {
    start: Instant,
}

impl AnalysisVisitor for Summarize {
    type Output = Report;

    fn visit<D: BaseDomain>(self, an: Analysis<'_, D>) -> Report {
        let elapsed = self.start.elapsed();
        Report {
            verdict: an.verdict(),
            iterations: an.iterations,
            converged: an.converged,
            max_depth: an.max_depth,
            elapsed,
            types: node_types(&an),
        }
    }
}

/// Rendered types of all non-⊥ nodes, ordered by location.
pub fn node_types<D: BaseDomain>(an: &Analysis<'_, D>) -> Vec<NodeType> {
    let prog = an.az.prog;
    let ctx = &an.az.ctx;
    let name = |v| an.az.var_name(v);
    let env_desc = |env| {
        ctx.env(env)
            .iter()
            .map(|(x, n)| {
                let st = match ctx.node_of(*n) {
                    ANode::Var(_, _, s) => s.to_string(),
                    ANode::Expr(..) => String::new(),
                };
                (name(crate::linear::SVar::P(*x)), st)
            })
            .collect::<Vec<_>>()
    };
    let mut out: Vec<NodeType> = an
        .map
        .iter()
        .map(|(n, t)| {
            let loc = prog.loc(ctx.loc(n));
            let sc = ctx.scope(n);
            let (node, label, stack, env) = match ctx.node_of(n) {
                ANode::Expr(l, env) => {
                    let label = prog.expr(*l).map(crate::lang::pretty).unwrap_or_default();
                    ("expr", label, None, env_desc(*env))
                }
                ANode::Var(x, env, s) => ("var", name(crate::linear::SVar::P(*x)), Some(s.to_string()), env_desc(*env)),
            };
            NodeType {
                node: node.into(),
                loc: loc.id,
                line: loc.line,
                col: loc.col,
                label,
                stack,
                env,
                pretty: an.az.show_type(n, t),
                structured: an.az.ops.to_json(t, sc, &name),
            }
        })
        .collect();
    out.sort_by(|a, b| (a.loc, &a.node, &a.stack, &a.env).cmp(&(b.loc, &b.node, &b.stack, &b.env)));
    out
}

/// Analyzes `prog` under `cfg` and summarizes the result.
pub fn analyze_program(prog: &Program, cfg: &AnalysisConfig) -> Report {
    run_with(prog, cfg, Summarize { start: Instant::now() })
}
