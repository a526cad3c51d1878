//! Concrete data flow semantics: execution maps over call-stack indexed tables.

use crate::lang::{Const, Expr, ExprKind, Program};
use serde_json::{json, Value};
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

/// Interned call stack; `EPS` is the empty stack.
pub type StackId = u32;
/// Interned environment; `EMPTY_ENV` binds nothing.
pub type EnvId = u32;
/// Interned execution node.
pub type NodeId = u32;

pub const EPS: StackId = 0;
pub const EMPTY_ENV: EnvId = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CNode {
    /// Expression location and environment.
    Expr(u32, EnvId),
    /// Binder id, defining environment, and call stack.
    Var(u32, EnvId, StackId),
}

/// Hash-consing tables for stacks, environments and nodes.
#[derive(Clone, Debug)]
pub struct Interner {
    stacks: Vec<(u32, StackId)>,
    stack_ids: HashMap<(u32, StackId), StackId>,
    envs: Vec<Arc<[(u32, NodeId)]>>,
    env_ids: HashMap<Arc<[(u32, NodeId)]>, EnvId>,
    nodes: Vec<CNode>,
    node_ids: HashMap<CNode, NodeId>,
}

impl Default for Interner {
    fn default() -> Self {
        let empty: Arc<[(u32, NodeId)]> = Arc::from(Vec::new());
        Interner {
            stacks: vec![(u32::MAX, EPS)],
            stack_ids: HashMap::new(),
            envs: vec![empty.clone()],
            env_ids: HashMap::from([(empty, EMPTY_ENV)]),
            nodes: Vec::new(),
            node_ids: HashMap::new(),
        }
    }
}

impl Interner {
    pub fn push(&mut self, loc: u32, s: StackId) -> StackId {
        if let Some(&id) = self.stack_ids.get(&(loc, s)) {
            return id;
        }
        let id = self.stacks.len() as StackId;
        self.stacks.push((loc, s));
        self.stack_ids.insert((loc, s), id);
        id
    }

    /// Locations of a stack, most recent call first.
    pub fn stack(&self, mut s: StackId) -> Vec<u32> {
        let mut out = Vec::new();
        while s != EPS {
            let (l, rest) = self.stacks[s as usize];
            out.push(l);
            s = rest;
        }
        out
    }

    /// Looks up an already interned stack.
    pub fn find_stack(&self, locs: &[u32]) -> Option<StackId> {
        let mut s = EPS;
        for &l in locs.iter().rev() {
            s = *self.stack_ids.get(&(l, s))?;
        }
        Some(s)
    }

    pub fn extend(&mut self, env: EnvId, var: u32, node: NodeId) -> EnvId {
        let mut v: Vec<(u32, NodeId)> = self.envs[env as usize].iter().copied().filter(|(x, _)| *x != var).collect();
        let pos = v.partition_point(|(x, _)| *x < var);
        v.insert(pos, (var, node));
        let key: Arc<[(u32, NodeId)]> = Arc::from(v);
        if let Some(&id) = self.env_ids.get(&key) {
            return id;
        }
        let id = self.envs.len() as EnvId;
        self.envs.push(key.clone());
        self.env_ids.insert(key, id);
        id
    }

    pub fn env(&self, env: EnvId) -> &[(u32, NodeId)] {
        &self.envs[env as usize]
    }

    pub fn lookup(&self, env: EnvId, var: u32) -> Option<NodeId> {
        let e = self.env(env);
        e.binary_search_by_key(&var, |(x, _)| *x).ok().map(|i| e[i].1)
    }

    pub fn node(&mut self, n: CNode) -> NodeId {
        if let Some(&id) = self.node_ids.get(&n) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(n);
        self.node_ids.insert(n, id);
        id
    }

    pub fn node_of(&self, id: NodeId) -> CNode {
        self.nodes[id as usize]
    }

    pub fn find_node(&self, n: CNode) -> Option<NodeId> {
        self.node_ids.get(&n).copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// A function value: call stacks mapped to input/output pairs, default (⊥, ⊥).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Table(Arc<BTreeMap<StackId, (CValue, CValue)>>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CValue {
    Bot,
    Err,
    Const(Const),
    Table(Table),
}

const BOT_PAIR: (CValue, CValue) = (CValue::Bot, CValue::Bot);

impl Table {
    pub fn get(&self, s: StackId) -> &(CValue, CValue) {
        self.0.get(&s).unwrap_or(&BOT_PAIR)
    }

    pub fn set(&mut self, s: StackId, entry: (CValue, CValue)) {
        if *self.get(s) == entry {
            return;
        }
        if entry == BOT_PAIR {
            Arc::make_mut(&mut self.0).remove(&s);
        } else {
            Arc::make_mut(&mut self.0).insert(s, entry);
        }
    }

    pub fn singleton(s: StackId, input: CValue, output: CValue) -> Table {
        let mut t = Table::default();
        t.set(s, (input, output));
        t
    }

    /// Stored entries, including those with a ⊥ input.
    pub fn entries(&self) -> impl Iterator<Item = (StackId, &(CValue, CValue))> {
        self.0.iter().map(|(s, e)| (*s, e))
    }

    /// Stacks at which the table has been called (input ≠ ⊥).
    pub fn called(&self) -> Vec<StackId> {
        self.0.iter().filter(|(_, (i, _))| *i != CValue::Bot).map(|(s, _)| *s).collect()
    }

    pub fn restrict(&self, s: StackId) -> Table {
        Table::singleton(s, self.get(s).0.clone(), self.get(s).1.clone())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl CValue {
    pub fn int(n: i64) -> CValue {
        CValue::Const(Const::Int(n))
    }

    pub fn table(entries: impl IntoIterator<Item = (StackId, CValue, CValue)>) -> CValue {
        let mut t = Table::default();
        for (s, i, o) in entries {
            t.set(s, (i, o));
        }
        CValue::Table(t)
    }

    pub fn empty_table() -> CValue {
        CValue::Table(Table::default())
    }

    pub fn is_bot(&self) -> bool {
        matches!(self, CValue::Bot)
    }

    /// Nesting depth of tables.
    pub fn depth(&self) -> usize {
        match self {
            CValue::Table(t) => 1 + t.entries().map(|(_, (i, o))| i.depth().max(o.depth())).max().unwrap_or(0),
            _ => 0,
        }
    }
}

pub fn value_leq(a: &CValue, b: &CValue) -> bool {
    match (a, b) {
        (CValue::Bot, _) | (_, CValue::Err) => true,
        (CValue::Const(x), CValue::Const(y)) => x == y,
        (CValue::Table(t1), CValue::Table(t2)) => t1.entries().all(|(s, (i, o))| {
            let (i2, o2) = t2.get(s);
            value_leq(i, i2) && value_leq(o, o2)
        }),
        _ => false,
    }
}

pub fn value_join(a: &CValue, b: &CValue) -> CValue {
    match (a, b) {
        (CValue::Bot, v) | (v, CValue::Bot) => v.clone(),
        (CValue::Err, _) | (_, CValue::Err) => CValue::Err,
        (CValue::Const(x), CValue::Const(y)) if x == y => a.clone(),
        (CValue::Table(t1), CValue::Table(t2)) => {
            let mut t = t1.clone();
            for (s, (i, o)) in t2.entries() {
                let (i1, o1) = t1.get(s);
                t.set(s, (value_join(i1, i), value_join(o1, o)));
            }
            CValue::Table(t)
        }
        _ => CValue::Err,
    }
}

pub fn value_join_all<'a>(vs: impl IntoIterator<Item = &'a CValue>) -> CValue {
    vs.into_iter().fold(CValue::Bot, |acc, v| value_join(&acc, v))
}

/// Value propagation `v1 ⋉ v2`.
pub fn value_prop(v1: &CValue, v2: &CValue) -> (CValue, CValue) {
    match (v1, v2) {
        (CValue::Table(_), CValue::Bot) => (v1.clone(), CValue::empty_table()),
        (CValue::Table(_), CValue::Err) => (CValue::Err, CValue::Err),
        (CValue::Table(t1), CValue::Table(t2)) => {
            let (mut r1, mut r2) = (t1.clone(), t2.clone());
            for s in t2.called() {
                let (v1i, v1o) = t1.get(s);
                let (v2i, v2o) = t2.get(s);
                if v1i == v2i && v1o == v2o {
                    continue;
                }
                let (v2i2, v1i2) = value_prop(v2i, v1i);
                let (v1o2, v2o2) = value_prop(v1o, v2o);
                r1.set(s, (v1i2, v1o2));
                r2.set(s, (v2i2, v2o2));
            }
            (CValue::Table(r1), CValue::Table(r2))
        }
        _ => (v1.clone(), value_join(v1, v2)),
    }
}

/// True iff ω occurs nowhere inside the value.
pub fn value_safe(v: &CValue) -> bool {
    match v {
        CValue::Err => false,
        CValue::Table(t) => t.entries().all(|(_, (i, o))| value_safe(i) && value_safe(o)),
        _ => true,
    }
}

/// Sparse execution map; `top` represents the map sending every node to ω.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExecMap {
    top: bool,
    map: im::HashMap<NodeId, CValue>,
}

impl ExecMap {
    pub fn bottom() -> Self {
        ExecMap::default()
    }

    pub fn top() -> Self {
        ExecMap { top: true, map: im::HashMap::new() }
    }

    pub fn is_top(&self) -> bool {
        self.top
    }

    pub fn set_top(&mut self) {
        self.top = true;
        self.map.clear();
    }

    pub fn get(&self, n: NodeId) -> CValue {
        if self.top {
            return CValue::Err;
        }
        self.map.get(&n).cloned().unwrap_or(CValue::Bot)
    }

    pub fn set(&mut self, n: NodeId, v: CValue) {
        if self.top {
            return;
        }
        if v.is_bot() {
            self.map.remove(&n);
        } else {
            self.map.insert(n, v);
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &CValue)> {
        self.map.iter().map(|(n, v)| (*n, v))
    }

    pub fn leq(&self, other: &ExecMap) -> bool {
        if other.top {
            return true;
        }
        if self.top {
            return false;
        }
        self.map.iter().all(|(n, v)| value_leq(v, &other.get(*n)))
    }

    pub fn join_with(&mut self, other: &ExecMap) {
        if self.top {
            return;
        }
        if other.top {
            self.set_top();
            return;
        }
        for (n, v) in &other.map {
            let j = value_join(&self.get(*n), v);
            self.set(*n, j);
        }
    }

    /// True iff every node holds a safe value.
    pub fn is_safe(&self) -> bool {
        !self.top && self.map.values().all(value_safe)
    }
}

pub fn concrete_safe(m: &ExecMap) -> bool {
    m.is_safe()
}

#[derive(Clone, Copy, Debug)]
pub struct ConcreteConfig {
    pub fuel: usize,
    /// Seed for the values produced by `nondet`.
    pub seed: u64,
    /// Inclusive range of `nondet` values.
    pub nondet_range: (i64, i64),
    pub record_iterates: bool,
}

impl Default for ConcreteConfig {
    fn default() -> Self {
        ConcreteConfig { fuel: 1000, seed: 0, nondet_range: (-4, 4), record_iterates: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Fixpoint,
    Diverged,
}

/// Result of iterating the concrete transformer from the bottom map.
#[derive(Clone, Debug)]
pub struct ConcreteRun {
    pub outcome: Outcome,
    pub map: ExecMap,
    pub iterations: usize,
    /// Successive iterates when recording was requested, starting with the bottom map.
    pub iterates: Vec<ExecMap>,
    pub ctx: Interner,
}

/// Evaluator state shared across iterations of the transformer.
pub struct Concrete<'p> {
    pub prog: &'p Program,
    pub ctx: Interner,
    seed: u64,
    range: (i64, i64),
    /// Nodes written during the current step.
    writes: Vec<NodeId>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<'p> Concrete<'p> {
    pub fn new(prog: &'p Program, cfg: &ConcreteConfig) -> Self {
        Concrete { prog, ctx: Interner::default(), seed: cfg.seed, range: cfg.nondet_range, writes: Vec::new() }
    }

    /// Evaluator that keeps the nodes interned by an earlier run.
    pub fn resume(prog: &'p Program, cfg: &ConcreteConfig, ctx: Interner) -> Self {
        Concrete { ctx, ..Concrete::new(prog, cfg) }
    }

    /// One application of the transformer to the whole program.
    pub fn step_program(&mut self, m: &ExecMap) -> ExecMap {
        let mut next = m.clone();
        self.writes.clear();
        self.step(&self.prog.root, EMPTY_ENV, EPS, &mut next);
        next
    }

    fn nondet(&self, n: NodeId) -> i64 {
        let (lo, hi) = self.range;
        let width = (hi - lo + 1).max(1) as u64;
        lo + (splitmix(self.seed ^ splitmix(n as u64)) % width) as i64
    }

    fn fail(m: &mut ExecMap) -> CValue {
        m.set_top();
        CValue::Err
    }

    fn upd(&mut self, m: &mut ExecMap, n: NodeId, v: CValue) -> CValue {
        let j = value_join(&m.get(n), &v);
        if !value_safe(&j) {
            return Self::fail(m);
        }
        if m.get(n) != j {
            self.writes.push(n);
            m.set(n, j.clone());
        }
        j
    }

    /// One application of the transformer to `e` under `env` and `stack`.
    pub fn step(&mut self, e: &Expr, env: EnvId, stack: StackId, m: &mut ExecMap) -> CValue {
        if m.is_top() {
            return CValue::Err;
        }
        let n = self.ctx.node(CNode::Expr(e.loc.id, env));
        match &e.kind {
            ExprKind::Const(c) => self.upd(m, n, CValue::Const(*c)),
            ExprKind::Nondet => {
                let c = self.nondet(n);
                self.upd(m, n, CValue::int(c))
            }
            ExprKind::Var(x) => {
                let nx = self.ctx.lookup(env, x.id).expect("well-formed environment");
                let (vx, v) = value_prop(&m.get(nx), &m.get(n));
                if self.upd(m, nx, vx) == CValue::Err {
                    return CValue::Err;
                }
                self.upd(m, n, v)
            }
            ExprKind::App(ei, ej) => {
                let v = m.get(n);
                let vi = self.step(ei, env, stack, m);
                match vi {
                    CValue::Err => return CValue::Err,
                    CValue::Bot => return CValue::Bot,
                    CValue::Table(_) => {}
                    _ => return Self::fail(m),
                }
                let vj = self.step(ej, env, stack, m);
                if vj == CValue::Err {
                    return CValue::Err;
                }
                let cs = self.ctx.push(ei.loc.id, stack);
                let call = CValue::Table(Table::singleton(cs, vj, v));
                let (vi2, call2) = value_prop(&vi, &call);
                let (vj2, v2) = match call2 {
                    CValue::Table(t) => t.get(cs).clone(),
                    _ => return Self::fail(m),
                };
                let ni = self.ctx.node(CNode::Expr(ei.loc.id, env));
                let nj = self.ctx.node(CNode::Expr(ej.loc.id, env));
                if self.upd(m, ni, vi2) == CValue::Err || self.upd(m, nj, vj2) == CValue::Err {
                    return CValue::Err;
                }
                self.upd(m, n, v2)
            }
            ExprKind::Lambda(x, body) => self.lambda(n, None, x.id, body, env, m),
            ExprKind::Rec(f, x, body) => self.lambda(n, Some(f.id), x.id, body, env, m),
            ExprKind::Ite(c, t, f) => {
                let vc = self.step(c, env, stack, m);
                let branch = match vc {
                    CValue::Err => return CValue::Err,
                    CValue::Bot => return CValue::Bot,
                    CValue::Const(Const::Bool(b)) => {
                        if b {
                            t
                        } else {
                            f
                        }
                    }
                    _ => return Self::fail(m),
                };
                let vb = self.step(branch, env, stack, m);
                if vb == CValue::Err {
                    return CValue::Err;
                }
                let (vb2, v2) = value_prop(&vb, &m.get(n));
                let nb = self.ctx.node(CNode::Expr(branch.loc.id, env));
                if self.upd(m, nb, vb2) == CValue::Err {
                    return CValue::Err;
                }
                self.upd(m, n, v2)
            }
            ExprKind::BinOp(op, l, r) => {
                let vl = self.step(l, env, stack, m);
                let a = match vl {
                    CValue::Err => return CValue::Err,
                    CValue::Bot => return CValue::Bot,
                    CValue::Const(c) => c,
                    _ => return Self::fail(m),
                };
                let vr = self.step(r, env, stack, m);
                let b = match vr {
                    CValue::Err => return CValue::Err,
                    CValue::Bot => return CValue::Bot,
                    CValue::Const(c) => c,
                    _ => return Self::fail(m),
                };
                match op.eval(a, b) {
                    Some(c) => self.upd(m, n, CValue::Const(c)),
                    None => Self::fail(m),
                }
            }
            ExprKind::Assert(a) => match self.step(a, env, stack, m) {
                CValue::Err => CValue::Err,
                CValue::Bot => CValue::Bot,
                CValue::Const(Const::Bool(true)) => self.upd(m, n, CValue::Const(Const::Unit)),
                _ => Self::fail(m),
            },
        }
    }

    fn lambda(&mut self, n: NodeId, f: Option<u32>, x: u32, body: &Expr, env: EnvId, m: &mut ExecMap) -> CValue {
        let t = match self.upd(m, n, CValue::empty_table()) {
            CValue::Table(t) => t,
            _ => return CValue::Err,
        };
        let base = m.clone();
        let mut acc_m = m.clone();
        let mut acc_v = CValue::Bot;
        for s in t.called() {
            let mut mi = base.clone();
            let mark = self.writes.len();
            let v = self.body(n, f, x, body, env, s, &t, &mut mi);
            if v == CValue::Err || mi.is_top() {
                return Self::fail(m);
            }
            acc_v = value_join(&acc_v, &v);
            for &w in &self.writes[mark..] {
                acc_m.set(w, value_join(&acc_m.get(w), &mi.get(w)));
            }
        }
        *m = acc_m;
        if m.is_top() {
            return CValue::Err;
        }
        self.upd(m, n, acc_v)
    }

    #[allow(clippy::too_many_arguments)]
    fn body(
        &mut self,
        _n: NodeId,
        f: Option<u32>,
        x: u32,
        body: &Expr,
        env: EnvId,
        s: StackId,
        t: &Table,
        m: &mut ExecMap,
    ) -> CValue {
        let nx = self.ctx.node(CNode::Var(x, env, s));
        let mut benv = env;
        let mut self_flow = None;
        if let Some(f) = f {
            let nf = self.ctx.node(CNode::Var(f, env, s));
            benv = self.ctx.extend(benv, f, nf);
            let (ta, vf) = value_prop(&CValue::Table(t.clone()), &m.get(nf));
            if self.upd(m, nf, vf) == CValue::Err {
                return CValue::Err;
            }
            self_flow = Some((nf, ta));
        }
        benv = self.ctx.extend(benv, x, nx);
        let vx = m.get(nx);
        let vi = self.step(body, benv, s, m);
        if vi == CValue::Err {
            return CValue::Err;
        }
        let (local, tb) = value_prop(&CValue::table([(s, vx, vi)]), &CValue::Table(t.restrict(s)));
        let (vx2, vi2) = match local {
            CValue::Table(l) => l.get(s).clone(),
            _ => return Self::fail(m),
        };
        let ni = self.ctx.node(CNode::Expr(body.loc.id, benv));
        if self.upd(m, nx, vx2) == CValue::Err || self.upd(m, ni, vi2) == CValue::Err {
            return CValue::Err;
        }
        match self_flow {
            None => tb,
            Some((nf, ta)) => {
                let (tc, vf) = value_prop(&value_join(&ta, &tb), &m.get(nf));
                if self.upd(m, nf, vf) == CValue::Err {
                    return CValue::Err;
                }
                tc
            }
        }
    }
}

/// Iterates the transformer from the bottom map until stabilization or fuel exhaustion.
pub fn run_concrete(prog: &Program, cfg: &ConcreteConfig) -> ConcreteRun {
    let mut ev = Concrete::new(prog, cfg);
    let mut m = ExecMap::bottom();
    let mut iterates = Vec::new();
    if cfg.record_iterates {
        iterates.push(m.clone());
    }
    let mut outcome = Outcome::Diverged;
    let mut iterations = 0;
    while iterations < cfg.fuel {
        let next = ev.step_program(&m);
        iterations += 1;
        if next == m {
            outcome = Outcome::Fixpoint;
            break;
        }
        m = next;
        if cfg.record_iterates {
            iterates.push(m.clone());
        }
    }
    ConcreteRun { outcome, map: m, iterations, iterates, ctx: ev.ctx }
}

impl ConcreteRun {
    pub fn root_node(&self, prog: &Program) -> Option<NodeId> {
        self.ctx.find_node(CNode::Expr(prog.root.loc.id, EMPTY_ENV))
    }

    /// All non-⊥ values stored at expression nodes with location `loc`.
    pub fn at_expr(&self, loc: u32) -> Vec<(NodeId, CValue)> {
        self.select(|n| matches!(n, CNode::Expr(l, _) if l == loc))
    }

    /// All non-⊥ values stored at variable nodes of binder `var`.
    pub fn at_var(&self, var: u32) -> Vec<(NodeId, CValue)> {
        self.select(|n| matches!(n, CNode::Var(x, _, _) if x == var))
    }

    fn select(&self, pred: impl Fn(CNode) -> bool) -> Vec<(NodeId, CValue)> {
        let mut out: Vec<_> =
            self.map.iter().filter(|(n, _)| pred(self.ctx.node_of(*n))).map(|(n, v)| (n, v.clone())).collect();
        out.sort_by_key(|(n, _)| *n);
        out
    }

    pub fn stack(&self, locs: &[u32]) -> Option<StackId> {
        self.ctx.find_stack(locs)
    }

    /// Renders a value with each stack location shown through `label`.
    pub fn show_with(&self, v: &CValue, label: &dyn Fn(u32) -> String) -> String {
        match v {
            CValue::Bot => "⊥".into(),
            CValue::Err => "ω".into(),
            CValue::Const(c) => c.to_string(),
            CValue::Table(t) => {
                let mut parts: Vec<String> = t
                    .entries()
                    .map(|(s, (i, o))| {
                        let st: Vec<String> = self.ctx.stack(s).into_iter().map(label).collect();
                        let st = if st.is_empty() { "ε".to_string() } else { st.join("·") };
                        format!("{st}◁{}→{}", self.show_with(i, label), self.show_with(o, label))
                    })
                    .collect();
                parts.sort();
                format!("[{}]", parts.join(", "))
            }
        }
    }

    pub fn show(&self, prog: &Program, v: &CValue) -> String {
        self.show_with(v, &|l| prog.loc(l).to_string())
    }

    fn stack_json(&self, prog: &Program, s: StackId) -> Value {
        Value::Array(self.ctx.stack(s).into_iter().map(|l| json!(prog.loc(l).to_string())).collect())
    }

    fn value_json(&self, prog: &Program, v: &CValue) -> Value {
        match v {
            CValue::Bot => json!("bot"),
            CValue::Err => json!("err"),
            CValue::Const(c) => json!(c),
            CValue::Table(t) => Value::Array(
                t.entries()
                    .map(|(s, (i, o))| {
                        json!({"stack": self.stack_json(prog, s), "in": self.value_json(prog, i), "out": self.value_json(prog, o)})
                    })
                    .collect(),
            ),
        }
    }

    fn env_json(&self, prog: &Program, env: EnvId) -> Value {
        Value::Array(
            self.ctx
                .env(env)
                .iter()
                .map(|(x, n)| {
                    let name = prog.var(*x).map(|v| v.name.to_string()).unwrap_or_default();
                    match self.ctx.node_of(*n) {
                        CNode::Var(_, _, s) => json!({"var": name, "stack": self.stack_json(prog, s)}),
                        CNode::Expr(..) => json!({"var": name}),
                    }
                })
                .collect(),
        )
    }

    /// JSON rendering of the final map.
    pub fn to_json(&self, prog: &Program) -> Value {
        let mut nodes: Vec<_> = self.map.iter().collect();
        nodes.sort_by_key(|(n, _)| *n);
        let entries: Vec<Value> = nodes
            .into_iter()
            .map(|(n, v)| {
                let node = match self.ctx.node_of(n) {
                    CNode::Expr(l, env) => {
                        json!({"kind": "expr", "loc": prog.loc(l).to_string(), "env": self.env_json(prog, env)})
                    }
                    CNode::Var(x, env, s) => json!({
                        "kind": "var",
                        "var": prog.var(x).map(|v| v.name.to_string()).unwrap_or_default(),
                        "loc": prog.loc(x).to_string(),
                        "env": self.env_json(prog, env),
                        "stack": self.stack_json(prog, s),
                    }),
                };
                json!({"node": node, "value": self.value_json(prog, v)})
            })
            .collect();
        json!({
            "outcome": match self.outcome { Outcome::Fixpoint => "fixpoint", Outcome::Diverged => "diverged" },
            "iterations": self.iterations,
            "top": self.map.is_top(),
            "nodes": entries,
        })
    }
}
