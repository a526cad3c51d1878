//! The declarative subtyping and typing rules, checked against a witness type
//! map that supplies the types of subexpressions and bound variables.

use crate::absint::{binop_type, AEnvId, ANode, Analysis, Analyzer, TypeMap, EMPTY_AENV};
use crate::base::BaseDomain;
use crate::config::{run_with, AnalysisConfig, AnalysisVisitor};
use crate::lang::{Const, Expr, ExprKind, Kind, Program};
use crate::linear::{self, Constraint, SVar};
use crate::types::{AStack, RefType, TypeOps};
use std::collections::BTreeMap;
use std::fmt;

type Ty<D> = RefType<<D as BaseDomain>::Elem>;

/// A judgement that could not be derived.
#[derive(Clone, Debug, PartialEq)]
pub struct Underivable {
    pub loc: u32,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Underivable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} fails at location {}: {}", self.rule, self.loc, self.detail)
    }
}

/// `Γ, ŝ ⊢ e : t` where `Γ` is the witness map composed with `env`.
#[derive(Clone, Debug)]
pub struct Judgement<'e, E> {
    pub env: AEnvId,
    pub stack: AStack,
    pub expr: &'e Expr,
    pub ty: RefType<E>,
}

struct Deriver<'a, 'p, D: BaseDomain> {
    az: &'a mut Analyzer<'p, D>,
    w: &'a TypeMap<D::Elem>,
}

type Res = Result<(), Underivable>;

fn fail(loc: u32, rule: &'static str, detail: impl Into<String>) -> Underivable {
    Underivable { loc, rule, detail: detail.into() }
}

impl<D: BaseDomain> Deriver<'_, '_, D> {
    fn witness(&mut self, e: &Expr, env: AEnvId) -> Ty<D> {
        let n = self.az.ctx.node(ANode::Expr(e.loc.id, env));
        self.w.get(n)
    }

    fn sub(&self, env: AEnvId, a: &Ty<D>, b: &Ty<D>, loc: u32, rule: &'static str) -> Res {
        let sc = self.az.ctx.env_scope(env);
        if self.az.ops.subtype(sc, a, b) {
            return Ok(());
        }
        let name = |v| self.az.var_name(v);
        let (sa, sb) = (self.az.ops.show(a, sc, &name), self.az.ops.show(b, sc, &name));
        Err(fail(loc, rule, format!("{sa} is not a subtype of {sb}")))
    }

    /// `⊥` is derivable for subterms the transformer never reaches.
    fn unreached(&self, t: &Ty<D>, loc: u32, rule: &'static str) -> Res {
        if t.is_top() {
            Err(fail(loc, rule, "⊤err is not derivable"))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self, e: &Expr, env: AEnvId, stack: &AStack, pc: &[Constraint], t: &Ty<D>) -> Res {
        let loc = e.loc.id;
        let sc = self.az.ctx.env_scope(env).clone();
        match &e.kind {
            ExprKind::Const(c) => {
                let tc = self.az.strengthen_here(&self.az.ops.of_const(&sc, *c), env, pc, self.w);
                self.sub(env, &tc, t, loc, "t-const")
            }
            ExprKind::Nondet => {
                let tc = self.az.strengthen_here(&self.az.ops.base_top(&sc, Kind::Int), env, pc, self.w);
                self.sub(env, &tc, t, loc, "t-const")
            }
            ExprKind::Var(x) => {
                let nx = self.az.ctx.lookup(env, x.id).ok_or_else(|| fail(loc, "t-var", "unbound variable"))?;
                let sc_x = self.az.ctx.scope(nx).clone();
                let xv = SVar::P(x.id);
                let tx = self.az.ops.extend(&self.w.get(nx), &sc_x, &sc);
                let lhs = self.az.strengthen_here(&self.az.ops.eq_var(&tx, &sc, xv), env, pc, self.w);
                let rhs = self.az.strengthen_here(&self.az.ops.eq_var(t, &sc, xv), env, pc, self.w);
                self.sub(env, &lhs, &rhs, loc, "t-var")
            }
            ExprKind::App(ei, ej) => {
                let ti = self.witness(ei, env);
                self.expr(ei, env, stack, pc, &ti)?;
                match &ti {
                    RefType::Bot => return self.unreached(t, loc, "t-app"),
                    RefType::Fun(_) => {}
                    _ => return Err(fail(loc, "t-app", "operator type is not a function type")),
                }
                let tj = self.witness(ej, env);
                self.expr(ej, env, stack, pc, &tj)?;
                let s2 = stack.push(ei.loc.id, self.az.k);
                let out = TypeOps::<D>::out_scope(&sc);
                let tags = [(ei.loc.id, stack.clone())].into();
                let call = RefType::fun(tags, BTreeMap::from([(s2, (tj, self.az.ops.extend(t, &sc, &out)))]));
                self.sub(env, &ti, &call, loc, "t-app")
            }
            ExprKind::Lambda(x, body) => self.abs(loc, None, x.id, body, env, pc, t),
            ExprKind::Rec(f, x, body) => self.abs(loc, Some(f.id), x.id, body, env, pc, t),
            ExprKind::Ite(c, bt, bf) => {
                let tc = self.witness(c, env);
                self.expr(c, env, stack, pc, &tc)?;
                let ec = match &tc {
                    RefType::Bot => return self.unreached(t, loc, "t-ite"),
                    RefType::Base(Kind::Bool, ec) => ec.clone(),
                    _ => return Err(fail(loc, "t-ite", "guard type is not boolean")),
                };
                for (want, branch) in [(true, bt), (false, bf)] {
                    let Some(cond) = self.az.condition(c, env, &ec, want, self.w) else { continue };
                    let mut pc2 = pc.to_vec();
                    pc2.extend(cond);
                    let Some(pc2) = linear::simplify(&pc2, true) else { continue };
                    let tb = self.witness(branch, env);
                    self.expr(branch, env, stack, &pc2, &tb)?;
                    self.sub(env, &tb, t, loc, "t-ite")?;
                }
                self.unreached(t, loc, "t-ite")
            }
            ExprKind::BinOp(op, a, b) => {
                let ta = self.witness(a, env);
                self.expr(a, env, stack, pc, &ta)?;
                if ta.is_bot() {
                    return self.unreached(t, loc, "t-op");
                }
                let tb = self.witness(b, env);
                self.expr(b, env, stack, pc, &tb)?;
                if tb.is_bot() {
                    return self.unreached(t, loc, "t-op");
                }
                let r = binop_type(&self.az.ops, &sc, *op, &ta, &tb).map_err(|m| fail(loc, "t-op", m))?;
                let r = self.az.ops.meet_cons(&r, &sc, pc);
                self.sub(env, &r, t, loc, "t-op")
            }
            ExprKind::Assert(a) => {
                let ta = self.witness(a, env);
                self.expr(a, env, stack, pc, &ta)?;
                let ea = match &ta {
                    RefType::Bot => return self.unreached(t, loc, "t-assert"),
                    RefType::Base(Kind::Bool, ea) => ea.clone(),
                    _ => return Err(fail(loc, "t-assert", "asserted type is not boolean")),
                };
                let holds = self.az.ops.dom.entails(&ea, &Constraint::var_eq_const(SVar::Nu, 1))
                    || self.az.condition(a, env, &ea, false, self.w).is_none_or(|c| {
                        let mut s = pc.to_vec();
                        s.extend(c);
                        !linear::feasible(&s)
                    });
                if !holds {
                    return Err(fail(loc, "t-assert", "asserted type admits false"));
                }
                let tu = self.az.strengthen_here(&self.az.ops.of_const(&sc, Const::Unit), env, pc, self.w);
                self.sub(env, &tu, t, loc, "t-assert")
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn abs(&mut self, loc: u32, f: Option<u32>, x: u32, body: &Expr, env: AEnvId, pc: &[Constraint], t: &Ty<D>) -> Res {
        if !matches!(t, RefType::Fun(_)) {
            return Err(fail(loc, "t-abs", "abstraction typed with a non-function type"));
        }
        let sc = self.az.ctx.env_scope(env).clone();
        let out = TypeOps::<D>::out_scope(&sc);
        let z = TypeOps::<D>::dep_var(&sc);
        for s in t.called() {
            let nx = self.az.ctx.node(ANode::Var(x, env, s.clone()));
            let mut benv = env;
            if let Some(f) = f {
                let nf = self.az.ctx.node(ANode::Var(f, env, s.clone()));
                benv = self.az.ctx.extend(benv, f, Kind::Fun, nf);
                self.sub(env, t, &self.w.get(nf), loc, "t-rec")?;
            }
            let sc_x = self.az.ctx.env_scope(benv).clone();
            let kx = self.az.prog.kinds.of_id(x);
            benv = self.az.ctx.extend(benv, x, kx, nx);
            let bsc = self.az.ctx.env_scope(benv).clone();
            let ti = self.witness(body, benv);
            self.expr(body, benv, &s, pc, &ti)?;
            let xv = SVar::P(x);
            let tx = self.az.ops.project_to(&self.w.get(nx), &sc_x, &sc);
            let ti_out = {
                let no_f = self.az.ops.project_to(&ti, &bsc, &sc.with(xv, kx));
                self.az.ops.retype(&no_f, &sc.with(xv, kx), &out, &BTreeMap::from([(xv, z)]))
            };
            let tags = t.as_fun().map(|f| f.tags.clone()).unwrap_or_default();
            let local = RefType::fun(tags, BTreeMap::from([(s.clone(), (tx, ti_out))]));
            self.sub(env, &local, &t.restrict(&s), loc, "t-abs")?;
        }
        Ok(())
    }
}

/// Re-derives `j` using `witness` for the types of subterms and variables.
pub fn derive_typing<D: BaseDomain>(
    az: &mut Analyzer<'_, D>,
    j: &Judgement<'_, D::Elem>,
    witness: &TypeMap<D::Elem>,
) -> Result<(), Underivable> {
    if witness.is_top() {
        return Err(fail(j.expr.loc.id, "t-env", "witness map is ⊤"));
    }
    Deriver { az, w: witness }.expr(j.expr, j.env, &j.stack, &[], &j.ty)
}

/// Derives the root judgement of the program with the witness's root type.
pub fn derive_root<D: BaseDomain>(az: &mut Analyzer<'_, D>, witness: &TypeMap<D::Elem>) -> Result<(), Underivable> {
    let prog = az.prog;
    let n = az.ctx.node(ANode::Expr(prog.root.loc.id, EMPTY_AENV));
    let j = Judgement { env: EMPTY_AENV, stack: AStack::eps(), expr: &prog.root, ty: witness.get(n) };
    derive_typing(az, &j, witness)
}

/// Whether `m` is a safe fixpoint of the transformer.
pub fn is_safe_fixpoint<D: BaseDomain>(az: &mut Analyzer<'_, D>, m: &TypeMap<D::Elem>) -> bool {
    if !m.is_safe() {
        return false;
    }
    let saved = az.error.take();
    let (_, next) = az.step_program(m);
    az.error = saved;
    next.is_safe() && az.map_leq(&next, m)
}

/// Outcome of checking the fixpoint/typing correspondence on one program.
#[derive(Clone, Debug, Default)]
pub struct EquivReport {
    /// Whether the analysis result was safe; otherwise nothing is claimed.
    pub safe: bool,
    pub fixpoint: bool,
    pub root_derivable: Option<Underivable>,
    /// Perturbed maps examined.
    pub perturbations: usize,
    /// Perturbations where derivability and the fixpoint property disagree.
    pub counterexamples: Vec<String>,
}

impl EquivReport {
    pub fn holds(&self) -> bool {
        !self.safe || (self.fixpoint && self.root_derivable.is_none() && self.counterexamples.is_empty())
    }
}

/// One-position variants of `t`: a base refinement weakened to ⊤ or dropped to ⊥.
fn perturb<D: BaseDomain>(ops: &TypeOps<D>, sc: &crate::base::Scope, t: &Ty<D>) -> Vec<Ty<D>> {
    match t {
        RefType::Base(k, e) => {
            let top = ops.dom.top(sc);
            let mut v = vec![RefType::Bot];
            if *e != top {
                v.push(RefType::Base(*k, top));
            }
            v
        }
        RefType::Fun(f) => {
            let out = TypeOps::<D>::out_scope(sc);
            let mut v = Vec::new();
            for (s, (i, o)) in &f.table {
                for i2 in perturb(ops, sc, i) {
                    let mut table = f.table.clone();
                    table.insert(s.clone(), (i2, o.clone()));
                    v.push(RefType::fun(f.tags.clone(), table));
                }
                for o2 in perturb(ops, &out, o) {
                    let mut table = f.table.clone();
                    table.insert(s.clone(), (i.clone(), o2));
                    v.push(RefType::fun(f.tags.clone(), table));
                }
            }
            v
        }
        _ => Vec::new(),
    }
}

struct Equiv {
    max_perturbations: usize,
}

impl AnalysisVisitor for Equiv {
    type Output = EquivReport;

    fn visit<D: BaseDomain>(self, mut an: Analysis<'_, D>) -> EquivReport {
        let mut rep = EquivReport { safe: an.converged && an.map.is_safe(), ..Default::default() };
        if !rep.safe {
            return rep;
        }
        let w = an.map.clone();
        rep.fixpoint = is_safe_fixpoint(&mut an.az, &w);
        rep.root_derivable = derive_root(&mut an.az, &w).err();
        let nodes: Vec<(u32, Ty<D>)> = w.iter().map(|(n, t)| (n, t.clone())).collect();
        'outer: for (n, t) in nodes {
            let sc = an.az.ctx.scope(n).clone();
            for t2 in perturb(&an.az.ops, &sc, &t) {
                if rep.perturbations >= self.max_perturbations {
                    break 'outer;
                }
                rep.perturbations += 1;
                let mut w2 = w.clone();
                w2.set(n, t2);
                let derivable = derive_root(&mut an.az, &w2);
                let fix = is_safe_fixpoint(&mut an.az, &w2);
                if derivable.is_ok() != fix {
                    let what = match &derivable {
                        Ok(()) => "derivable but not a fixpoint".to_string(),
                        Err(u) => format!("fixpoint but not derivable ({u})"),
                    };
                    rep.counterexamples.push(format!("perturbing {}: {what}", an.az.show_type(n, &w2.get(n))));
                }
            }
        }
        rep
    }
}

/// Checks on `prog` that a safe analysis result is a fixpoint whose root
/// judgement is derivable, and that derivability tracks the fixpoint property
/// under one-position perturbations of the map.
pub fn verify_fixpoint_typing_equiv(prog: &Program, cfg: &AnalysisConfig, max_perturbations: usize) -> EquivReport {
    run_with(prog, cfg, Equiv { max_perturbations })
}
