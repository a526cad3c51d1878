//! The widened abstract interpreter over refinement type maps.

use crate::base::{BaseDomain, Scope};
use crate::lang::{BinOp, Const, Expr, ExprKind, Kind, Program};
use crate::linear::{self, Constraint, Lin, SVar};
use crate::types::{AStack, RefType, Tag, TypeOps};
use num_bigint::BigInt;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

pub type ANodeId = u32;
pub type AEnvId = u32;

pub const EMPTY_AENV: AEnvId = 0;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ANode {
    /// Expression location and abstract environment.
    Expr(u32, AEnvId),
    /// Binder id, defining environment, and abstract stack.
    Var(u32, AEnvId, AStack),
}

/// Hash-consing tables for abstract environments and nodes.
#[derive(Clone, Debug)]
pub struct AInterner {
    envs: Vec<Arc<[(u32, ANodeId)]>>,
    env_ids: HashMap<Arc<[(u32, ANodeId)]>, AEnvId>,
    scopes: Vec<Scope>,
    nodes: Vec<ANode>,
    node_ids: HashMap<ANode, ANodeId>,
}

impl Default for AInterner {
    fn default() -> Self {
        let empty: Arc<[(u32, ANodeId)]> = Arc::from(Vec::new());
        AInterner {
            envs: vec![empty.clone()],
            env_ids: HashMap::from([(empty, EMPTY_AENV)]),
            scopes: vec![Scope::empty()],
            nodes: Vec::new(),
            node_ids: HashMap::new(),
        }
    }
}

impl AInterner {
    /// Binds `var` (of kind `k`) to `node`. Binders are numbered in scope order.
    pub fn extend(&mut self, env: AEnvId, var: u32, k: Kind, node: ANodeId) -> AEnvId {
        let mut v: Vec<(u32, ANodeId)> = self.envs[env as usize].iter().copied().filter(|(x, _)| *x != var).collect();
        let pos = v.partition_point(|(x, _)| *x < var);
        v.insert(pos, (var, node));
        let key: Arc<[(u32, ANodeId)]> = Arc::from(v);
        if let Some(&id) = self.env_ids.get(&key) {
            return id;
        }
        let id = self.envs.len() as AEnvId;
        let sc = self.scopes[env as usize].without(SVar::P(var));
        let mut vars: Vec<(SVar, Kind)> = sc.iter().collect();
        let pos = vars.partition_point(|(x, _)| *x < SVar::P(var));
        vars.insert(pos, (SVar::P(var), k));
        self.envs.push(key.clone());
        self.env_ids.insert(key, id);
        self.scopes.push(Scope::new(vars));
        id
    }

    pub fn find_env(&self, bindings: &[(u32, ANodeId)]) -> Option<AEnvId> {
        self.env_ids.get(bindings).copied()
    }

    pub fn env(&self, env: AEnvId) -> &[(u32, ANodeId)] {
        &self.envs[env as usize]
    }

    pub fn env_scope(&self, env: AEnvId) -> &Scope {
        &self.scopes[env as usize]
    }

    pub fn lookup(&self, env: AEnvId, var: u32) -> Option<ANodeId> {
        let e = self.env(env);
        e.binary_search_by_key(&var, |(x, _)| *x).ok().map(|i| e[i].1)
    }

    pub fn node(&mut self, n: ANode) -> ANodeId {
        if let Some(&id) = self.node_ids.get(&n) {
            return id;
        }
        let id = self.nodes.len() as ANodeId;
        self.nodes.push(n.clone());
        self.node_ids.insert(n, id);
        id
    }

    pub fn find_node(&self, n: &ANode) -> Option<ANodeId> {
        self.node_ids.get(n).copied()
    }

    pub fn node_of(&self, id: ANodeId) -> &ANode {
        &self.nodes[id as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Scope of the type stored at a node.
    pub fn scope(&self, id: ANodeId) -> &Scope {
        match &self.nodes[id as usize] {
            ANode::Expr(_, env) | ANode::Var(_, env, _) => self.env_scope(*env),
        }
    }

    /// Location used when reporting a node.
    pub fn loc(&self, id: ANodeId) -> u32 {
        match &self.nodes[id as usize] {
            ANode::Expr(l, _) | ANode::Var(l, _, _) => *l,
        }
    }
}

/// A refinement type map: nodes to types, default ⊥; `top` is the all-⊤err map.
#[derive(Clone, Debug)]
pub struct TypeMap<E> {
    top: bool,
    map: BTreeMap<ANodeId, RefType<E>>,
}

impl<E: Clone> TypeMap<E> {
    pub fn bottom() -> Self {
        TypeMap { top: false, map: BTreeMap::new() }
    }

    pub fn is_top(&self) -> bool {
        self.top
    }

    pub fn set_top(&mut self) {
        self.top = true;
        self.map.clear();
    }

    pub fn get(&self, n: ANodeId) -> RefType<E> {
        if self.top {
            return RefType::Top;
        }
        self.map.get(&n).cloned().unwrap_or(RefType::Bot)
    }

    pub fn set(&mut self, n: ANodeId, t: RefType<E>) {
        if self.top {
            return;
        }
        if t.is_bot() {
            self.map.remove(&n);
        } else {
            self.map.insert(n, t);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ANodeId, &RefType<E>)> {
        self.map.iter().map(|(n, t)| (*n, t))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Whether no node holds ⊤err.
    pub fn is_safe(&self) -> bool {
        !self.top && self.map.values().all(|t| t.is_safe())
    }

    pub fn max_depth(&self) -> usize {
        self.map.values().map(|t| t.depth()).max().unwrap_or(0)
    }
}

/// Why the analysis could not prove safety.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSite {
    pub loc: u32,
    pub reason: String,
}

/// Marker for a step that reached the all-⊤err map.
#[derive(Clone, Copy, Debug)]
pub struct Unsafe;

type Ty<D> = RefType<<D as BaseDomain>::Elem>;
type Res<T> = Result<T, Unsafe>;

const T0: SVar = SVar::T(0);
const T1: SVar = SVar::T(1);

fn rename_nu(cs: &[Constraint], to: SVar) -> Vec<Constraint> {
    linear::rename_all(cs, &|v| if v == SVar::Nu { to } else { v })
}

fn conj(a: Option<Vec<Constraint>>, b: Option<Vec<Constraint>>) -> Option<Vec<Constraint>> {
    let mut a = a?;
    a.extend(b?);
    linear::simplify(&a, true)
}

fn disj(a: Option<Vec<Constraint>>, b: Option<Vec<Constraint>>) -> Option<Vec<Constraint>> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => linear::hull(&x, &y),
    }
}

fn relation(op: BinOp, l: &Lin, r: &Lin, want: bool) -> Option<Constraint> {
    let op = if want {
        op
    } else {
        match op {
            BinOp::Lt => BinOp::Ge,
            BinOp::Le => BinOp::Gt,
            BinOp::Gt => BinOp::Le,
            BinOp::Ge => BinOp::Lt,
            BinOp::Eq => BinOp::Ne,
            BinOp::Ne => BinOp::Eq,
            other => other,
        }
    };
    match op {
        BinOp::Lt => Some(Constraint::lt(l, r)),
        BinOp::Le => Some(Constraint::le(l, r)),
        BinOp::Gt => Some(Constraint::gt(l, r)),
        BinOp::Ge => Some(Constraint::ge(l, r)),
        BinOp::Eq => Some(Constraint::eq(l, r)),
        _ => None,
    }
}

/// Constant value of `ν` in `cs`, if fixed.
fn fixed_value(cs: &[Constraint]) -> Option<BigInt> {
    match linear::bounds(cs, &Lin::var(SVar::Nu)) {
        (Some(a), Some(b)) if a == b => Some(a),
        _ => None,
    }
}

/// The base result of a primitive operation on base operand types, or an error message.
pub fn binop_type<D: BaseDomain>(ops: &TypeOps<D>, sc: &Scope, op: BinOp, ta: &Ty<D>, tb: &Ty<D>) -> Result<Ty<D>, String> {
    let (ka, ea, kb, eb) = match (ta, tb) {
        (RefType::Bot, _) | (_, RefType::Bot) => return Ok(RefType::Bot),
        (RefType::Base(ka, ea), RefType::Base(kb, eb)) => (*ka, ea, *kb, eb),
        _ => return Err(format!("operator {} applied to a non-base value", op.symbol())),
    };
    let (ga, gb) = match (ops.dom.gamma(ea), ops.dom.gamma(eb)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Ok(RefType::Bot),
    };
    let ints = ka == Kind::Int && kb == Kind::Int;
    let bools = ka == Kind::Bool && kb == Kind::Bool;
    let mut sys = rename_nu(&ga, T0);
    sys.extend(rename_nu(&gb, T1));
    let (l, r, nu) = (Lin::var(T0), Lin::var(T1), Lin::var(SVar::Nu));
    let (kind, extra): (Kind, Vec<Vec<Constraint>>) = match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul if ints => {
            let rel = match op {
                BinOp::Add => vec![Constraint::eq(&nu, &l.add(&r))],
                BinOp::Sub => vec![Constraint::eq(&nu, &l.sub(&r))],
                _ => match (fixed_value(&ga), fixed_value(&gb)) {
                    (Some(c), _) => vec![Constraint::eq(&nu, &r.scale(&c))],
                    (_, Some(c)) => vec![Constraint::eq(&nu, &l.scale(&c))],
                    _ => vec![],
                },
            };
            (Kind::Int, vec![rel])
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge if ints => (Kind::Bool, compare(op, &sys, &l, &r)),
        BinOp::Eq | BinOp::Ne if ints || bools => (Kind::Bool, compare(op, &sys, &l, &r)),
        BinOp::And | BinOp::Or if bools => {
            let one = |v: SVar| Constraint::var_eq_const(v, 1);
            let zero = |v: SVar| Constraint::var_eq_const(v, 0);
            let nu1 = Constraint::var_eq_const(SVar::Nu, 1);
            let nu0 = Constraint::var_eq_const(SVar::Nu, 0);
            let cases = if op == BinOp::And {
                vec![vec![one(T0), one(T1), nu1], vec![zero(T0), nu0.clone()], vec![zero(T1), nu0]]
            } else {
                vec![vec![zero(T0), zero(T1), nu0], vec![one(T0), nu1.clone()], vec![one(T1), nu1]]
            };
            (Kind::Bool, cases)
        }
        _ => return Err(format!("operator {} applied to operands of kinds {:?} and {:?}", op.symbol(), ka, kb)),
    };
    let mut acc: Option<Vec<Constraint>> = None;
    for case in extra {
        let mut s = sys.clone();
        s.extend(case);
        if kind != Kind::Int {
            s.push(Constraint::ge(&nu, &Lin::constant(0)));
            s.push(Constraint::le(&nu, &Lin::constant(1)));
        }
        let p = linear::project_out(&s, &|v| v == T0 || v == T1, true).filter(|p| linear::feasible(p));
        acc = disj(acc, p);
    }
    Ok(match acc {
        None => RefType::Bot,
        Some(cs) => ops.base_of(sc, kind, &cs),
    })
}

fn compare(op: BinOp, sys: &[Constraint], l: &Lin, r: &Lin) -> Vec<Vec<Constraint>> {
    let nu1 = Constraint::var_eq_const(SVar::Nu, 1);
    let nu0 = Constraint::var_eq_const(SVar::Nu, 0);
    let can = |want: bool| -> bool {
        match relation(op, l, r, want) {
            Some(c) => {
                let mut s = sys.to_vec();
                s.push(c);
                linear::feasible(&s)
            }
            None => {
                let eq = Constraint::eq(l, r);
                !linear::entails(sys, &eq)
            }
        }
    };
    let mut cases = Vec::new();
    if can(true) {
        cases.push(vec![nu1]);
    }
    if can(false) {
        cases.push(vec![nu0]);
    }
    cases
}

/// Comparisons in conditional guards, with their negations, over program variables.
pub fn guard_thresholds(prog: &Program) -> Vec<Constraint> {
    fn lin_of(e: &Expr) -> Option<Lin> {
        match &e.kind {
            ExprKind::Const(Const::Int(n)) => Some(Lin::constant(*n)),
            ExprKind::Var(v) => Some(Lin::var(SVar::P(v.id))),
            ExprKind::BinOp(BinOp::Add, a, b) => Some(lin_of(a)?.add(&lin_of(b)?)),
            ExprKind::BinOp(BinOp::Sub, a, b) => Some(lin_of(a)?.sub(&lin_of(b)?)),
            ExprKind::BinOp(BinOp::Mul, a, b) => {
                let (x, y) = (lin_of(a)?, lin_of(b)?);
                if x.is_constant() {
                    Some(y.scale(x.constant_term()))
                } else if y.is_constant() {
                    Some(x.scale(y.constant_term()))
                } else {
                    None
                }
            }
            _ => None,
        }
    }
    fn guard(e: &Expr, out: &mut Vec<Constraint>) {
        if let ExprKind::BinOp(op, a, b) = &e.kind {
            if op.is_logic() {
                guard(a, out);
                guard(b, out);
            } else if op.is_cmp() {
                if let (Some(l), Some(r)) = (lin_of(a), lin_of(b)) {
                    for want in [true, false] {
                        if let Some(c) = relation(*op, &l, &r, want) {
                            out.extend(c.as_inequalities());
                        }
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    prog.root.walk(&mut |e| {
        if let ExprKind::Ite(c, _, _) = &e.kind {
            guard(c, &mut out);
        }
    });
    out.retain(|c| !c.lin.is_constant());
    out.sort();
    out.dedup();
    out
}

/// The abstract transformer and its state.
pub struct Analyzer<'p, D: BaseDomain> {
    pub prog: &'p Program,
    pub ops: TypeOps<D>,
    pub k: usize,
    pub ctx: AInterner,
    pub error: Option<ErrorSite>,
}

impl<'p, D: BaseDomain> Analyzer<'p, D> {
    pub fn new(prog: &'p Program, ops: TypeOps<D>, k: usize) -> Self {
        Analyzer { prog, ops, k, ctx: AInterner::default(), error: None }
    }

    fn fail(&mut self, m: &mut TypeMap<D::Elem>, loc: u32, reason: impl Into<String>) -> Unsafe {
        if self.error.is_none() {
            self.error = Some(ErrorSite { loc, reason: reason.into() });
        }
        m.set_top();
        Unsafe
    }

    fn update(&mut self, m: &mut TypeMap<D::Elem>, n: ANodeId, t: &Ty<D>) -> Res<Ty<D>> {
        if m.is_top() {
            return Err(Unsafe);
        }
        let old = m.get(n);
        let j = self.ops.join(self.ctx.scope(n), &old, t);
        if !j.is_safe() {
            let loc = self.ctx.loc(n);
            return Err(self.fail(m, loc, "incompatible values flow to the same point"));
        }
        m.set(n, j.clone());
        Ok(j)
    }

    fn gamma_env(&self, env: AEnvId, m: &TypeMap<D::Elem>) -> Vec<(SVar, Ty<D>)> {
        self.ctx.env(env).iter().map(|(x, n)| (SVar::P(*x), m.get(*n))).collect()
    }

    /// `t[Γ]` conjoined with the path condition.
    pub(crate) fn strengthen_here(&self, t: &Ty<D>, env: AEnvId, pc: &[Constraint], m: &TypeMap<D::Elem>) -> Ty<D> {
        let sc = self.ctx.env_scope(env);
        let t = self.ops.strengthen_env(t, sc, &self.gamma_env(env, m));
        self.ops.meet_cons(&t, sc, pc)
    }

    /// One application of the transformer to `e` under `env` and `stack`.
    pub fn step(
        &mut self,
        e: &Expr,
        env: AEnvId,
        stack: &AStack,
        pc: &[Constraint],
        m: &mut TypeMap<D::Elem>,
    ) -> Res<Ty<D>> {
        if m.is_top() {
            return Err(Unsafe);
        }
        let n = self.ctx.node(ANode::Expr(e.loc.id, env));
        let sc = self.ctx.env_scope(env).clone();
        match &e.kind {
            ExprKind::Const(c) => {
                let t = self.strengthen_here(&self.ops.of_const(&sc, *c), env, pc, m);
                self.update(m, n, &t)
            }
            ExprKind::Nondet => {
                let t = self.strengthen_here(&self.ops.base_top(&sc, Kind::Int), env, pc, m);
                self.update(m, n, &t)
            }
            ExprKind::Var(x) => {
                let nx = self.ctx.lookup(env, x.id).expect("well-formed environment");
                let sc_x = self.ctx.scope(nx).clone();
                let xv = SVar::P(x.id);
                let tx = self.ops.extend(&m.get(nx), &sc_x, &sc);
                let tx = self.strengthen_here(&self.ops.eq_var(&tx, &sc, xv), env, pc, m);
                let t = self.strengthen_here(&self.ops.eq_var(&m.get(n), &sc, xv), env, pc, m);
                let (tx2, t2) = self.ops.prop(&sc, &tx, &t);
                let back = self.ops.project_to(&tx2, &sc, &sc_x);
                self.update(m, nx, &back)?;
                self.update(m, n, &t2)
            }
            ExprKind::App(ei, ej) => {
                let t = m.get(n);
                let ti = self.step(ei, env, stack, pc, m)?;
                match ti {
                    RefType::Bot => return Ok(RefType::Bot),
                    RefType::Fun(_) => {}
                    _ => return Err(self.fail(m, ei.loc.id, "application of a non-function")),
                }
                let tj = self.step(ej, env, stack, pc, m)?;
                let s2 = stack.push(ei.loc.id, self.k);
                let out = TypeOps::<D>::out_scope(&sc);
                let z = TypeOps::<D>::dep_var(&sc);
                let tags: BTreeSet<Tag> = BTreeSet::from([(ei.loc.id, stack.clone())]);
                let call = RefType::fun(tags, BTreeMap::from([(s2.clone(), (tj, self.ops.extend(&t, &sc, &out)))]));
                let (ti2, call2) = self.ops.prop(&sc, &ti, &call);
                let (tj2, to2) = call2.entry(&s2);
                let t2 = self.ops.project(&to2, &out, z);
                let ni = self.ctx.node(ANode::Expr(ei.loc.id, env));
                let nj = self.ctx.node(ANode::Expr(ej.loc.id, env));
                self.update(m, ni, &ti2)?;
                self.update(m, nj, &tj2)?;
                self.update(m, n, &t2)
            }
            ExprKind::Lambda(x, body) => self.lambda(n, e.loc.id, None, x.id, body, env, stack, pc, m),
            ExprKind::Rec(f, x, body) => self.lambda(n, e.loc.id, Some(f.id), x.id, body, env, stack, pc, m),
            ExprKind::Ite(c, bt, bf) => {
                let tc = self.step(c, env, stack, pc, m)?;
                let ec = match &tc {
                    RefType::Bot => return Ok(RefType::Bot),
                    RefType::Base(Kind::Bool, ec) => ec.clone(),
                    _ => return Err(self.fail(m, c.loc.id, "non-boolean guard")),
                };
                let mut result = RefType::Bot;
                for (want, branch) in [(true, bt), (false, bf)] {
                    let Some(cond) = self.condition(c, env, &ec, want, m) else { continue };
                    let mut pc2 = pc.to_vec();
                    pc2.extend(cond);
                    let Some(pc2) = linear::simplify(&pc2, true) else { continue };
                    let tb = self.step(branch, env, stack, &pc2, m)?;
                    let (tb2, t2) = self.ops.prop(&sc, &tb, &m.get(n));
                    let nb = self.ctx.node(ANode::Expr(branch.loc.id, env));
                    self.update(m, nb, &tb2)?;
                    result = self.update(m, n, &t2)?;
                }
                Ok(result)
            }
            ExprKind::BinOp(op, a, b) => {
                let ta = self.step(a, env, stack, pc, m)?;
                if ta.is_bot() {
                    return Ok(RefType::Bot);
                }
                let tb = self.step(b, env, stack, pc, m)?;
                if tb.is_bot() {
                    return Ok(RefType::Bot);
                }
                match binop_type(&self.ops, &sc, *op, &ta, &tb) {
                    Ok(t) => {
                        let t = self.ops.meet_cons(&t, &sc, pc);
                        self.update(m, n, &t)
                    }
                    Err(msg) => Err(self.fail(m, e.loc.id, msg)),
                }
            }
            ExprKind::Assert(a) => {
                let ta = self.step(a, env, stack, pc, m)?;
                let ea = match &ta {
                    RefType::Bot => return Ok(RefType::Bot),
                    RefType::Base(Kind::Bool, ea) => ea.clone(),
                    _ => return Err(self.fail(m, a.loc.id, "assertion on a non-boolean value")),
                };
                let holds = self.ops.dom.entails(&ea, &Constraint::var_eq_const(SVar::Nu, 1))
                    || self.condition(a, env, &ea, false, m).is_none_or(|c| {
                        let mut s = pc.to_vec();
                        s.extend(c);
                        !linear::feasible(&s)
                    });
                if !holds {
                    return Err(self.fail(m, e.loc.id, "assertion may fail"));
                }
                let t = self.strengthen_here(&self.ops.of_const(&sc, Const::Unit), env, pc, m);
                self.update(m, n, &t)
            }
        }
    }

    /// Constraints on scope variables under which guard `c` evaluates to `want`; `None` if impossible.
    pub(crate) fn condition(
        &mut self,
        c: &Expr,
        env: AEnvId,
        ec: &D::Elem,
        want: bool,
        m: &TypeMap<D::Elem>,
    ) -> Option<Vec<Constraint>> {
        let generic = {
            let mut g = self.ops.dom.gamma(ec)?;
            g.push(Constraint::var_eq_const(SVar::Nu, want as i64));
            linear::project_out(&g, &|v| v == SVar::Nu, true).filter(|p| linear::feasible(p))
        };
        let structural = self.structural_condition(c, env, want, m);
        conj(generic, structural)
    }

    fn structural_condition(&mut self, c: &Expr, env: AEnvId, want: bool, m: &TypeMap<D::Elem>) -> Option<Vec<Constraint>> {
        let ExprKind::BinOp(op, a, b) = &c.kind else { return Some(Vec::new()) };
        match op {
            BinOp::And | BinOp::Or => {
                let ca = self.structural_condition(a, env, want, m);
                let cb = self.structural_condition(b, env, want, m);
                if (*op == BinOp::And) == want {
                    conj(ca, cb)
                } else {
                    disj(ca, cb)
                }
            }
            _ if op.is_cmp() => {
                let na = self.ctx.node(ANode::Expr(a.loc.id, env));
                let nb = self.ctx.node(ANode::Expr(b.loc.id, env));
                let (RefType::Base(_, ea), RefType::Base(_, eb)) = (m.get(na), m.get(nb)) else {
                    return Some(Vec::new());
                };
                let (ga, gb) = (self.ops.dom.gamma(&ea)?, self.ops.dom.gamma(&eb)?);
                let Some(rel) = relation(*op, &Lin::var(T0), &Lin::var(T1), want) else { return Some(Vec::new()) };
                let mut sys = rename_nu(&ga, T0);
                sys.extend(rename_nu(&gb, T1));
                sys.push(rel);
                linear::project_out(&sys, &|v| v == T0 || v == T1 || v == SVar::Nu, true)
                    .filter(|p| linear::feasible(p))
            }
            _ => Some(Vec::new()),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn lambda(
        &mut self,
        n: ANodeId,
        loc: u32,
        f: Option<u32>,
        x: u32,
        body: &Expr,
        env: AEnvId,
        stack: &AStack,
        pc: &[Constraint],
        m: &mut TypeMap<D::Elem>,
    ) -> Res<Ty<D>> {
        let tags = BTreeSet::from([(loc, stack.clone())]);
        let t = self.update(m, n, &RefType::empty_fun(tags))?;
        let sc = self.ctx.env_scope(env).clone();
        let base = m.clone();
        let mut acc_m = m.clone();
        let mut acc_t = RefType::Bot;
        for s in t.called() {
            let mut mi = base.clone();
            let v = match self.body(f, x, body, env, &s, &t, pc, &mut mi) {
                Ok(v) => v,
                Err(_) => {
                    m.set_top();
                    return Err(Unsafe);
                }
            };
            acc_t = self.ops.join(&sc, &acc_t, &v);
            if !self.join_maps(&mut acc_m, &mi) {
                let reason = "incompatible values flow to the same point";
                return Err(self.fail(m, loc, reason));
            }
        }
        *m = acc_m;
        self.update(m, n, &acc_t)
    }

    fn join_maps(&self, acc: &mut TypeMap<D::Elem>, other: &TypeMap<D::Elem>) -> bool {
        if other.top {
            acc.set_top();
            return false;
        }
        for (n, t) in other.iter() {
            let old = acc.get(n);
            if old == *t {
                continue;
            }
            let j = self.ops.join(self.ctx.scope(n), &old, t);
            if !j.is_safe() {
                acc.set_top();
                return false;
            }
            acc.set(n, j);
        }
        true
    }

    #[allow(clippy::too_many_arguments)]
    fn body(
        &mut self,
        f: Option<u32>,
        x: u32,
        body: &Expr,
        env: AEnvId,
        s: &AStack,
        t: &Ty<D>,
        pc: &[Constraint],
        m: &mut TypeMap<D::Elem>,
    ) -> Res<Ty<D>> {
        let sc = self.ctx.env_scope(env).clone();
        let out = TypeOps::<D>::out_scope(&sc);
        let z = TypeOps::<D>::dep_var(&sc);
        let nx = self.ctx.node(ANode::Var(x, env, s.clone()));
        let mut benv = env;
        let mut self_flow = None;
        if let Some(f) = f {
            let nf = self.ctx.node(ANode::Var(f, env, s.clone()));
            benv = self.ctx.extend(benv, f, Kind::Fun, nf);
            let (ta, vf) = self.ops.prop(&sc, t, &m.get(nf));
            self.update(m, nf, &vf)?;
            self_flow = Some((nf, ta));
        }
        let sc_x = self.ctx.env_scope(benv).clone();
        let kx = self.prog.kinds.of_id(x);
        benv = self.ctx.extend(benv, x, kx, nx);
        let bsc = self.ctx.env_scope(benv).clone();
        let tx = m.get(nx);
        let ti = self.step(body, benv, s, pc, m)?;
        let xv = SVar::P(x);
        let tx_sc = self.ops.project_to(&tx, &sc_x, &sc);
        let ti_out = {
            let no_f = self.ops.project_to(&ti, &bsc, &sc.with(xv, kx));
            self.ops.retype(&no_f, &sc.with(xv, kx), &out, &BTreeMap::from([(xv, z)]))
        };
        let tags = t.as_fun().map(|f| f.tags.clone()).unwrap_or_default();
        let local = RefType::fun(tags, BTreeMap::from([(s.clone(), (tx_sc, ti_out))]));
        let (local2, tb) = self.ops.prop(&sc, &local, &t.restrict(s));
        let (tx2, ti2) = local2.entry(s);
        let ni = self.ctx.node(ANode::Expr(body.loc.id, benv));
        let tx_back = self.ops.extend(&tx2, &sc, &sc_x);
        let ti_back = self.ops.retype(&ti2, &out, &bsc, &BTreeMap::from([(z, xv)]));
        self.update(m, nx, &tx_back)?;
        self.update(m, ni, &ti_back)?;
        match self_flow {
            None => Ok(tb),
            Some((nf, ta)) => {
                let joined = self.ops.join(&sc, &ta, &tb);
                let (tc, vf) = self.ops.prop(&sc, &joined, &m.get(nf));
                self.update(m, nf, &vf)?;
                Ok(tc)
            }
        }
    }

    /// Pointwise `a ∇ᵗ b`; returns `None` when some node widens to ⊤err.
    pub fn widen_maps(&self, a: &TypeMap<D::Elem>, b: &TypeMap<D::Elem>) -> Option<TypeMap<D::Elem>> {
        if a.top || b.top {
            return None;
        }
        let mut out = a.clone();
        for (n, tb) in b.iter() {
            let ta = a.get(n);
            if ta == *tb {
                continue;
            }
            let w = self.ops.widen(self.ctx.scope(n), &ta, tb);
            if !w.is_safe() {
                return None;
            }
            out.set(n, w);
        }
        Some(out)
    }

    /// Pointwise order on maps.
    pub fn map_leq(&self, a: &TypeMap<D::Elem>, b: &TypeMap<D::Elem>) -> bool {
        if b.top {
            return true;
        }
        if a.top {
            return false;
        }
        a.iter().all(|(n, ta)| {
            let tb = b.get(n);
            *ta == tb || self.ops.leq(self.ctx.scope(n), ta, &tb)
        })
    }

    /// Runs the transformer once on the whole program.
    pub fn step_program(&mut self, m: &TypeMap<D::Elem>) -> (Ty<D>, TypeMap<D::Elem>) {
        let mut next = m.clone();
        let t = self.step(&self.prog.root, EMPTY_AENV, &AStack::eps(), &[], &mut next).unwrap_or(RefType::Top);
        (t, next)
    }

    /// Node of the program root.
    pub fn root_node(&self) -> Option<ANodeId> {
        self.ctx.find_node(&ANode::Expr(self.prog.root.loc.id, EMPTY_AENV))
    }

    /// Display name of a refinement variable.
    pub fn var_name(&self, v: SVar) -> String {
        match v {
            SVar::Nu => "ν".into(),
            SVar::P(id) => self.prog.var(id).map(|x| x.name.to_string()).unwrap_or_else(|| format!("x{id}")),
            SVar::D(l) => format!("z{l}"),
            SVar::T(i) => format!("t{i}"),
        }
    }

    pub fn show_type(&self, n: ANodeId, t: &Ty<D>) -> String {
        self.ops.show(t, self.ctx.scope(n), &|v| self.var_name(v))
    }
}

/// Outcome of the widened fixpoint iteration.
pub struct Analysis<'p, D: BaseDomain> {
    pub az: Analyzer<'p, D>,
    pub map: TypeMap<D::Elem>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest table depth seen in any iterate.
    pub max_depth: usize,
    /// Widened iterates when recording was requested, starting with the bottom map.
    pub iterates: Vec<TypeMap<D::Elem>>,
}

/// Iterates `M ← M ∇̇ᵗ step(M)` from the bottom map until stabilization.
pub fn analyze<'p, D: BaseDomain>(
    prog: &'p Program,
    ops: TypeOps<D>,
    k: usize,
    max_iters: usize,
    record: bool,
) -> Analysis<'p, D> {
    let mut az = Analyzer::new(prog, ops, k);
    let mut m = TypeMap::bottom();
    let mut iterates = Vec::new();
    if record {
        iterates.push(m.clone());
    }
    let mut converged = false;
    let mut iterations = 0;
    let mut max_depth = 0;
    while iterations < max_iters {
        iterations += 1;
        let (_, next) = az.step_program(&m);
        max_depth = max_depth.max(next.max_depth());
        let w = if next.top {
            None
        } else {
            match az.widen_maps(&m, &next) {
                Some(w) => Some(w),
                None => {
                    let (loc, reason) = widening_site(&az, &m, &next);
                    if az.error.is_none() {
                        az.error = Some(ErrorSite { loc, reason });
                    }
                    None
                }
            }
        };
        let Some(w) = w else {
            m.set_top();
            if record {
                iterates.push(m.clone());
            }
            converged = true;
            break;
        };
        max_depth = max_depth.max(w.max_depth());
        if az.map_leq(&w, &m) {
            converged = true;
            break;
        }
        m = w;
        if record {
            iterates.push(m.clone());
        }
    }
    Analysis { az, map: m, iterations, converged, max_depth, iterates }
}

fn widening_site<D: BaseDomain>(az: &Analyzer<'_, D>, a: &TypeMap<D::Elem>, b: &TypeMap<D::Elem>) -> (u32, String) {
    for (n, tb) in b.iter() {
        let w = az.ops.widen(az.ctx.scope(n), &a.get(n), tb);
        if !w.is_safe() {
            return (az.ctx.loc(n), "table shape widened to an error (unbounded nesting)".into());
        }
    }
    (az.prog.root.loc.id, "widening produced an error".into())
}

/// Safety verdict of an analysis.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Safe,
    Unsafe(ErrorSite),
}

impl Verdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, Verdict::Safe)
    }
}

impl<D: BaseDomain> Analysis<'_, D> {
    pub fn verdict(&self) -> Verdict {
        if !self.converged {
            return Verdict::Unsafe(ErrorSite {
                loc: self.az.prog.root.loc.id,
                reason: format!("no fixpoint within {} iterations", self.iterations),
            });
        }
        if self.map.is_safe() {
            return Verdict::Safe;
        }
        if let Some(e) = &self.az.error {
            return Verdict::Unsafe(e.clone());
        }
        let loc = self.map.iter().filter(|(_, t)| !t.is_safe()).map(|(n, _)| self.az.ctx.loc(n)).min();
        Verdict::Unsafe(ErrorSite { loc: loc.unwrap_or(self.az.prog.root.loc.id), reason: "error type".into() })
    }

    /// Non-⊥ types at expression nodes with location `loc`.
    pub fn at_expr(&self, loc: u32) -> Vec<(ANodeId, Ty<D>)> {
        self.select(|n| matches!(n, ANode::Expr(l, _) if *l == loc))
    }

    /// Non-⊥ types at variable nodes of binder `var`.
    pub fn at_var(&self, var: u32) -> Vec<(ANodeId, Ty<D>)> {
        self.select(|n| matches!(n, ANode::Var(x, _, _) if *x == var))
    }

    fn select(&self, pred: impl Fn(&ANode) -> bool) -> Vec<(ANodeId, Ty<D>)> {
        self.map.iter().filter(|(n, _)| pred(self.az.ctx.node_of(*n))).map(|(n, t)| (n, t.clone())).collect()
    }

    pub fn scope(&self, n: ANodeId) -> &Scope {
        self.az.ctx.scope(n)
    }

    pub fn show(&self, n: ANodeId) -> String {
        self.az.show_type(n, &self.map.get(n))
    }
}
