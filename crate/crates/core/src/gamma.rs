//! Concretization membership: does a concrete execution map lie in the
//! concretization of an inferred refinement type map?

use crate::absint::{AEnvId, ANode, Analysis, EMPTY_AENV};
use crate::base::{BaseDomain, Scope};
use crate::concrete::{CNode, CValue, ConcreteRun, EnvId, Interner, EMPTY_ENV};
use crate::linear::SVar;
use crate::types::{AStack, RefType, TypeOps};
use num_bigint::BigInt;
use std::collections::HashMap;
use std::fmt;

/// A concrete node whose value escapes the inferred type.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Location of the offending node.
    pub loc: u32,
    pub concrete: String,
    pub abstract_type: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at location {}: {} ∉ γ({}): {}", self.loc, self.concrete, self.abstract_type, self.reason)
    }
}

type Ty<D> = RefType<<D as BaseDomain>::Elem>;

struct Checker<'a, D: BaseDomain> {
    run: &'a ConcreteRun,
    an: &'a Analysis<'a, D>,
    k: usize,
    envs: HashMap<EnvId, Option<AEnvId>>,
}

impl<D: BaseDomain> Checker<'_, D> {
    fn ctx(&self) -> &Interner {
        &self.run.ctx
    }

    /// `ρₖ` on environments; `None` if the abstraction never built that environment.
    fn env(&mut self, env: EnvId) -> Option<AEnvId> {
        if env == EMPTY_ENV {
            return Some(EMPTY_AENV);
        }
        if let Some(r) = self.envs.get(&env) {
            return *r;
        }
        let bindings: Vec<(u32, u32)> = self.ctx().env(env).to_vec();
        let mut abs = Vec::with_capacity(bindings.len());
        let mut ok = true;
        for (x, n) in bindings {
            match self.node(n) {
                Some(a) => abs.push((x, a)),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        let r = if ok { self.an.az.ctx.find_env(&abs) } else { None };
        self.envs.insert(env, r);
        r
    }

    /// `ρₖ` on nodes.
    fn node(&mut self, n: u32) -> Option<u32> {
        let an = match self.ctx().node_of(n) {
            CNode::Expr(l, env) => ANode::Expr(l, self.env(env)?),
            CNode::Var(x, env, s) => {
                let st = AStack::truncate(&self.ctx().stack(s), self.k);
                ANode::Var(x, self.env(env)?, st)
            }
        };
        self.an.az.ctx.find_node(&an)
    }

    fn env_of(&self, n: u32) -> EnvId {
        match self.ctx().node_of(n) {
            CNode::Expr(_, env) | CNode::Var(_, env, _) => env,
        }
    }

    fn assignment(&self, env: EnvId) -> HashMap<SVar, BigInt> {
        self.ctx()
            .env(env)
            .iter()
            .filter_map(|(x, n)| match self.run.map.get(*n) {
                CValue::Const(c) => Some((SVar::P(*x), BigInt::from(c.encode()))),
                _ => None,
            })
            .collect()
    }

    fn show_value(&self, v: &CValue) -> String {
        self.run.show(self.an.az.prog, v)
    }

    fn member(&self, v: &CValue, t: &Ty<D>, sc: &Scope, asg: &HashMap<SVar, BigInt>) -> Result<(), String> {
        match (v, t) {
            (CValue::Bot, _) | (_, RefType::Top) => Ok(()),
            (CValue::Err, _) => Err("error value outside ⊤err".into()),
            (_, RefType::Bot) => Err("reached value at a ⊥ type".into()),
            (CValue::Const(c), RefType::Base(k, e)) => {
                if c.kind() != *k {
                    return Err(format!("constant of kind {:?} at a {:?} refinement", c.kind(), k));
                }
                let nu = BigInt::from(c.encode());
                let lookup = |x: SVar| if x == SVar::Nu { Some(nu.clone()) } else { asg.get(&x).cloned() };
                if self.an.az.ops.dom.member(e, &lookup) {
                    Ok(())
                } else {
                    Err("refinement violated".into())
                }
            }
            (CValue::Table(tab), RefType::Fun(_)) => {
                let out = TypeOps::<D>::out_scope(sc);
                let z = TypeOps::<D>::dep_var(sc);
                for (s, (vi, vo)) in tab.entries() {
                    let st = AStack::truncate(&self.ctx().stack(s), self.k);
                    let (ti, to) = t.entry(&st);
                    self.member(vi, &ti, sc, asg).map_err(|e| format!("input at stack {st}: {e}"))?;
                    let mut asg2 = asg.clone();
                    if let CValue::Const(c) = vi {
                        asg2.insert(z, BigInt::from(c.encode()));
                    }
                    self.member(vo, &to, &out, &asg2).map_err(|e| format!("output at stack {st}: {e}"))?;
                }
                Ok(())
            }
            _ => Err("value and type have different shapes".into()),
        }
    }
}

/// Checks that every node of the concrete map is abstracted by the type map
/// under `ρₖ`, with scope variables bound to the concrete environment values.
pub fn gamma_member<D: BaseDomain>(run: &ConcreteRun, an: &Analysis<'_, D>, k: usize) -> Result<(), Violation> {
    if an.map.is_top() {
        return Ok(());
    }
    let prog = an.az.prog;
    if run.map.is_top() {
        return Err(Violation {
            loc: prog.root.loc.id,
            concrete: "ω".into(),
            abstract_type: "safe map".into(),
            reason: "concrete run is in error".into(),
        });
    }
    let mut ck = Checker { run, an, k, envs: HashMap::new() };
    for (n, v) in run.map.iter() {
        if v.is_bot() {
            continue;
        }
        let loc = match run.ctx.node_of(n) {
            CNode::Expr(l, _) | CNode::Var(l, _, _) => l,
        };
        let Some(a) = ck.node(n) else {
            return Err(Violation {
                loc,
                concrete: ck.show_value(v),
                abstract_type: "⊥".into(),
                reason: "no abstract node for this execution node".into(),
            });
        };
        let t = an.map.get(a);
        let sc = an.az.ctx.scope(a).clone();
        let asg = ck.assignment(ck.env_of(n));
        if let Err(reason) = ck.member(v, &t, &sc, &asg) {
            return Err(Violation { loc, concrete: ck.show_value(v), abstract_type: an.show(a), reason });
        }
    }
    Ok(())
}
