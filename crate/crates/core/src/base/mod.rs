//! Basic refinement domains: relational lattices over a scope of variables plus ν.

mod oct;
mod poly;
mod pred;
pub mod template;

pub use oct::{Oct, OctElem};
pub use poly::{Poly, PolyElem};
pub use pred::{Pred, PredElem};
pub use template::{parse_templates, Atom, Rel, TTerm, Template, TemplateError};

use crate::lang::Kind;
use crate::linear::{self, Constraint, SVar};
use num_bigint::BigInt;
use std::fmt::Debug;
use std::sync::Arc;

/// Ordered set of kinded variables a refinement may mention besides ν.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Scope(Arc<Vec<(SVar, Kind)>>);

impl Scope {
    pub fn new(vars: Vec<(SVar, Kind)>) -> Scope {
        Scope(Arc::new(vars))
    }

    pub fn empty() -> Scope {
        Scope::default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SVar, Kind)> + '_ {
        self.0.iter().copied()
    }

    pub fn vars(&self) -> impl Iterator<Item = SVar> + '_ {
        self.0.iter().map(|(v, _)| *v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: SVar) -> bool {
        self.0.iter().any(|(v, _)| *v == x)
    }

    pub fn kind(&self, x: SVar) -> Option<Kind> {
        self.0.iter().find(|(v, _)| *v == x).map(|(_, k)| *k)
    }

    pub fn with(&self, x: SVar, k: Kind) -> Scope {
        if self.contains(x) {
            return self.clone();
        }
        let mut v = (*self.0).clone();
        v.push((x, k));
        Scope::new(v)
    }

    pub fn without(&self, x: SVar) -> Scope {
        if !self.contains(x) {
            return self.clone();
        }
        Scope::new(self.0.iter().copied().filter(|(v, _)| *v != x).collect())
    }

    pub fn rename(&self, f: &dyn Fn(SVar) -> SVar) -> Scope {
        Scope::new(self.0.iter().map(|(v, k)| (f(*v), *k)).collect())
    }

    /// Variables that numeric domains track, ν first.
    pub fn numeric(&self) -> Vec<SVar> {
        std::iter::once(SVar::Nu).chain(self.0.iter().filter(|(_, k)| k.is_numeric()).map(|(v, _)| *v)).collect()
    }

    /// Number of dependency variables; the next one gets this level.
    pub fn dep_level(&self) -> u32 {
        self.0.iter().filter(|(v, _)| matches!(v, SVar::D(_))).count() as u32
    }
}

/// Assignment of concrete numeric values; `None` means unknown.
pub type Assignment<'a> = &'a dyn Fn(SVar) -> Option<BigInt>;

/// A lattice of basic refinement types. Elements are interpreted over a scope
/// passed to every operation; variables outside the scope are unconstrained.
pub trait BaseDomain: Send + Sync {
    type Elem: Clone + Debug + PartialEq + Send + Sync;

    fn name(&self) -> &'static str;

    fn bottom(&self, sc: &Scope) -> Self::Elem;

    fn top(&self, sc: &Scope) -> Self::Elem;

    fn is_bottom(&self, e: &Self::Elem) -> bool;

    /// Abstraction of a linear system over `sc ∪ {ν}`.
    fn alpha(&self, sc: &Scope, cs: &[Constraint]) -> Self::Elem;

    /// Linear constraints implied by the element, `None` for bottom.
    fn gamma(&self, e: &Self::Elem) -> Option<Vec<Constraint>>;

    fn leq(&self, sc: &Scope, a: &Self::Elem, b: &Self::Elem) -> bool;

    fn join(&self, sc: &Scope, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;

    fn widen(&self, sc: &Scope, a: &Self::Elem, b: &Self::Elem, thresholds: &[Constraint]) -> Self::Elem;

    fn meet(&self, sc: &Scope, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        match (self.gamma(a), self.gamma(b)) {
            (Some(mut x), Some(y)) => {
                x.extend(y);
                self.alpha(sc, &x)
            }
            _ => self.bottom(sc),
        }
    }

    /// Conjoins linear constraints.
    fn meet_cons(&self, sc: &Scope, a: &Self::Elem, cs: &[Constraint]) -> Self::Elem {
        match self.gamma(a) {
            Some(mut x) => {
                x.extend_from_slice(cs);
                self.alpha(sc, &x)
            }
            None => self.bottom(sc),
        }
    }

    /// Existentially quantifies `x`; `sc` is the scope without `x`.
    fn project(&self, sc: &Scope, a: &Self::Elem, x: SVar) -> Self::Elem {
        match self.gamma(a).and_then(|g| linear::project(&g, x)) {
            Some(p) => self.alpha(sc, &p),
            None => self.bottom(sc),
        }
    }

    /// Renames variables; `sc` is the renamed scope.
    fn rename(&self, sc: &Scope, a: &Self::Elem, f: &dyn Fn(SVar) -> SVar) -> Self::Elem {
        match self.gamma(a) {
            Some(g) => self.alpha(sc, &linear::rename_all(&g, f)),
            None => self.bottom(sc),
        }
    }

    /// Reinterprets an element over a larger scope `sc`.
    fn extend(&self, sc: &Scope, a: &Self::Elem) -> Self::Elem;

    /// Membership of a partial assignment; unknown variables are existential.
    fn member(&self, a: &Self::Elem, asg: Assignment) -> bool {
        let Some(g) = self.gamma(a) else { return false };
        let mut sys = Vec::with_capacity(g.len());
        for c in &g {
            let mut c2 = c.clone();
            for v in c.vars().collect::<Vec<_>>() {
                if let Some(val) = asg(v) {
                    c2 = c2.subst(v, &linear::Lin::constant(val));
                }
            }
            sys.push(c2);
        }
        linear::feasible(&sys)
    }

    fn equivalent(&self, sc: &Scope, a: &Self::Elem, b: &Self::Elem) -> bool {
        self.leq(sc, a, b) && self.leq(sc, b, a)
    }

    /// `a ⊨ c`.
    fn entails(&self, a: &Self::Elem, c: &Constraint) -> bool {
        match self.gamma(a) {
            None => true,
            Some(g) => linear::entails(&g, c),
        }
    }

    fn show(&self, a: &Self::Elem, name: &dyn Fn(SVar) -> String) -> String;
}
