use super::template::{Atom, Template};
use super::{Assignment, BaseDomain, Scope};
use crate::linear::{self, Constraint, SVar};
use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

/// Predicate abstraction over a finite set of qualifier templates.
#[derive(Clone, Debug, Default)]
pub struct Pred {
    quals: Arc<Vec<Template>>,
    names: Arc<HashMap<SVar, String>>,
    cache: Arc<Mutex<HashMap<Scope, Arc<Vec<Atom>>>>>,
    closures: Arc<Mutex<HashMap<(Scope, Vec<Constraint>), Option<BTreeSet<Atom>>>>>,
    entailed: Arc<Mutex<HashMap<(Arc<BTreeSet<Atom>>, Atom), bool>>>,
}

/// Conjunction of the qualifier instances entailed by the element; `None` is false.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PredElem(Option<Arc<BTreeSet<Atom>>>);

impl PredElem {
    pub fn atoms(&self) -> Option<&BTreeSet<Atom>> {
        self.0.as_deref()
    }
}

impl Pred {
    pub fn new(quals: Vec<Template>) -> Pred {
        Pred { quals: Arc::new(quals), ..Default::default() }
    }

    /// Names used to resolve program variables mentioned in qualifiers.
    pub fn with_names(mut self, names: HashMap<SVar, String>) -> Pred {
        self.names = Arc::new(names);
        self
    }

    pub fn qualifiers(&self) -> &[Template] {
        &self.quals
    }

    /// Instances of all qualifiers over the scope.
    pub fn candidates(&self, sc: &Scope) -> Arc<Vec<Atom>> {
        if let Some(c) = self.cache.lock().expect("qualifier cache").get(sc) {
            return c.clone();
        }
        let names = |v: SVar| self.names.get(&v).cloned();
        let mut all: Vec<Atom> = self.quals.iter().flat_map(|q| q.instantiate(sc, &names)).collect();
        all.sort();
        all.dedup();
        let all = Arc::new(all);
        self.cache.lock().expect("qualifier cache").insert(sc.clone(), all.clone());
        all
    }

    fn holds(sys: &[Constraint], a: &Atom) -> bool {
        match a {
            Atom::C(c) => linear::entails(sys, c),
            Atom::Ne(l) => linear::entails_ne(sys, l),
        }
    }

    /// Candidate atoms entailed by `cs` over `sc`; `None` if `cs` is infeasible.
    fn entailed_candidates(&self, sc: &Scope, cs: &[Constraint]) -> Option<BTreeSet<Atom>> {
        let key = (sc.clone(), cs.to_vec());
        if let Some(r) = self.closures.lock().expect("closure cache").get(&key) {
            return r.clone();
        }
        let keep = |v: SVar| v == SVar::Nu || sc.kind(v).is_some_and(|k| k.is_numeric());
        let r = linear::project_out(cs, &|v| !keep(v), true)
            .filter(|p| linear::feasible(p))
            .map(|p| self.candidates(sc).iter().filter(|a| Pred::holds(&p, a)).cloned().collect());
        self.closures.lock().expect("closure cache").insert(key, r.clone());
        r
    }

    fn close(&self, sc: &Scope, cs: &[Constraint], extra: impl IntoIterator<Item = Atom>) -> PredElem {
        let Some(mut atoms) = self.entailed_candidates(sc, cs) else { return PredElem(None) };
        let cands = self.candidates(sc);
        for a in extra {
            if cands.contains(&a) {
                atoms.insert(a);
            }
        }
        PredElem(Some(Arc::new(atoms)))
    }

    fn neqs(e: &PredElem) -> Vec<Atom> {
        e.0.iter().flat_map(|s| s.iter()).filter(|a| matches!(a, Atom::Ne(_))).cloned().collect()
    }

    fn entails_atom(&self, e: &PredElem, a: &Atom) -> bool {
        match &e.0 {
            None => true,
            Some(s) if s.contains(a) => true,
            Some(s) => {
                let key = (s.clone(), a.clone());
                if let Some(r) = self.entailed.lock().expect("entailment cache").get(&key) {
                    return *r;
                }
                let r = Pred::holds(&self.gamma(e).unwrap_or_default(), a);
                self.entailed.lock().expect("entailment cache").insert(key, r);
                r
            }
        }
    }
}

impl BaseDomain for Pred {
    type Elem = PredElem;

    fn name(&self) -> &'static str {
        "pred"
    }

    fn bottom(&self, _sc: &Scope) -> PredElem {
        PredElem(None)
    }

    fn top(&self, _sc: &Scope) -> PredElem {
        PredElem(Some(Arc::new(BTreeSet::new())))
    }

    fn is_bottom(&self, e: &PredElem) -> bool {
        e.0.is_none()
    }

    fn alpha(&self, sc: &Scope, cs: &[Constraint]) -> PredElem {
        self.close(sc, cs, [])
    }

    fn gamma(&self, e: &PredElem) -> Option<Vec<Constraint>> {
        e.0.as_ref().map(|s| {
            s.iter()
                .filter_map(|a| match a {
                    Atom::C(c) => Some(c.clone()),
                    Atom::Ne(_) => None,
                })
                .collect()
        })
    }

    fn leq(&self, _sc: &Scope, a: &PredElem, b: &PredElem) -> bool {
        match (&a.0, &b.0) {
            (None, _) => true,
            (_, None) => false,
            (Some(_), Some(y)) => y.iter().all(|q| self.entails_atom(a, q)),
        }
    }

    fn join(&self, _sc: &Scope, a: &PredElem, b: &PredElem) -> PredElem {
        match (&a.0, &b.0) {
            (None, _) => b.clone(),
            (_, None) => a.clone(),
            (Some(x), Some(y)) => {
                if x == y {
                    return a.clone();
                }
                let mut out: BTreeSet<Atom> = x.iter().filter(|q| self.entails_atom(b, q)).cloned().collect();
                let more: Vec<Atom> = y.iter().filter(|q| !out.contains(*q) && self.entails_atom(a, q)).cloned().collect();
                out.extend(more);
                PredElem(Some(Arc::new(out)))
            }
        }
    }

    fn widen(&self, sc: &Scope, a: &PredElem, b: &PredElem, _thresholds: &[Constraint]) -> PredElem {
        self.join(sc, a, b)
    }

    fn meet(&self, sc: &Scope, a: &PredElem, b: &PredElem) -> PredElem {
        match (self.gamma(a), self.gamma(b)) {
            (Some(mut x), Some(y)) => {
                x.extend(y);
                self.close(sc, &x, Pred::neqs(a).into_iter().chain(Pred::neqs(b)))
            }
            _ => PredElem(None),
        }
    }

    fn meet_cons(&self, sc: &Scope, a: &PredElem, cs: &[Constraint]) -> PredElem {
        match self.gamma(a) {
            Some(mut x) => {
                x.extend_from_slice(cs);
                self.close(sc, &x, Pred::neqs(a))
            }
            None => PredElem(None),
        }
    }

    fn project(&self, sc: &Scope, a: &PredElem, x: SVar) -> PredElem {
        match self.gamma(a).map(|g| linear::project(&g, x)) {
            Some(Some(p)) => {
                let keep = Pred::neqs(a).into_iter().filter(|q| !q.vars().contains(&x));
                self.close(sc, &p, keep)
            }
            _ => PredElem(None),
        }
    }

    fn rename(&self, sc: &Scope, a: &PredElem, f: &dyn Fn(SVar) -> SVar) -> PredElem {
        match self.gamma(a) {
            Some(g) => {
                let ne: Vec<Atom> = Pred::neqs(a).iter().map(|q| q.rename(f)).collect();
                self.close(sc, &linear::rename_all(&g, f), ne)
            }
            None => PredElem(None),
        }
    }

    fn extend(&self, sc: &Scope, a: &PredElem) -> PredElem {
        match self.gamma(a) {
            Some(g) => self.close(sc, &g, Pred::neqs(a)),
            None => PredElem(None),
        }
    }

    fn member(&self, a: &PredElem, asg: Assignment) -> bool {
        let Some(s) = &a.0 else { return false };
        for q in s.iter() {
            if let Atom::Ne(l) = q {
                if let Some(v) = l.eval(asg) {
                    if v == 0.into() {
                        return false;
                    }
                }
            }
        }
        let g = self.gamma(a).unwrap_or_default();
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

    fn show(&self, a: &PredElem, name: &dyn Fn(SVar) -> String) -> String {
        match &a.0 {
            None => "false".into(),
            Some(s) if s.is_empty() => "true".into(),
            Some(s) => s.iter().map(|q| q.fmt_with(name)).collect::<Vec<_>>().join(" ∧ "),
        }
    }
}
