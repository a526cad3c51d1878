use super::{BaseDomain, Scope};
use crate::linear::{self, Constraint, SVar};
use std::sync::Arc;

/// Convex polyhedra in constraint form.
#[derive(Clone, Copy, Debug, Default)]
pub struct Poly;

/// `None` is the empty polyhedron.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolyElem(Option<Arc<Vec<Constraint>>>);

impl PolyElem {
    pub fn constraints(&self) -> Option<&[Constraint]> {
        self.0.as_deref().map(|v| v.as_slice())
    }
}

fn in_scope(sc: &Scope) -> impl Fn(SVar) -> bool + '_ {
    move |v| v == SVar::Nu || sc.kind(v).is_some_and(|k| k.is_numeric())
}

impl Poly {
    fn make(cs: Vec<Constraint>) -> PolyElem {
        PolyElem(Some(Arc::new(cs)))
    }
}

impl BaseDomain for Poly {
    type Elem = PolyElem;

    fn name(&self) -> &'static str {
        "poly"
    }

    fn bottom(&self, _sc: &Scope) -> PolyElem {
        PolyElem(None)
    }

    fn top(&self, _sc: &Scope) -> PolyElem {
        Poly::make(Vec::new())
    }

    fn is_bottom(&self, e: &PolyElem) -> bool {
        e.0.is_none()
    }

    fn alpha(&self, sc: &Scope, cs: &[Constraint]) -> PolyElem {
        let keep = in_scope(sc);
        let Some(p) = linear::project_out(cs, &|v| !keep(v), true) else { return PolyElem(None) };
        if !linear::feasible(&p) {
            return PolyElem(None);
        }
        let mut r = linear::remove_redundant(&p);
        r.sort();
        Poly::make(r)
    }

    fn gamma(&self, e: &PolyElem) -> Option<Vec<Constraint>> {
        e.0.as_ref().map(|v| v.to_vec())
    }

    fn leq(&self, _sc: &Scope, a: &PolyElem, b: &PolyElem) -> bool {
        match (&a.0, &b.0) {
            (None, _) => true,
            (_, None) => false,
            (Some(x), Some(y)) => y.iter().all(|c| linear::entails(x, c)),
        }
    }

    fn join(&self, sc: &Scope, a: &PolyElem, b: &PolyElem) -> PolyElem {
        match (&a.0, &b.0) {
            (None, _) => b.clone(),
            (_, None) => a.clone(),
            (Some(x), Some(y)) => {
                if x == y {
                    return a.clone();
                }
                match linear::hull(x, y) {
                    Some(h) => self.alpha(sc, &h),
                    None => PolyElem(None),
                }
            }
        }
    }

    fn widen(&self, sc: &Scope, a: &PolyElem, b: &PolyElem, thresholds: &[Constraint]) -> PolyElem {
        let (x, y) = match (&a.0, &b.0) {
            (None, _) => return b.clone(),
            (_, None) => return a.clone(),
            (Some(x), Some(y)) => (x, y),
        };
        if self.leq(sc, b, a) {
            return a.clone();
        }
        let xs: Vec<Constraint> = x.iter().flat_map(|c| c.as_inequalities()).collect();
        let mut out: Vec<Constraint> = xs.iter().filter(|c| linear::entails(y, c)).cloned().collect();
        for c in y.iter().flat_map(|c| c.as_inequalities()) {
            if out.contains(&c) || !linear::entails(x, &c) {
                continue;
            }
            let swaps = xs.iter().enumerate().any(|(i, old)| {
                let mut sys: Vec<Constraint> = xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, d)| d.clone()).collect();
                sys.push(c.clone());
                linear::entails(&sys, old)
            });
            if swaps {
                out.push(c);
            }
        }
        let keep = in_scope(sc);
        for t in thresholds {
            if t.vars().all(&keep) && linear::entails(x, t) && linear::entails(y, t) {
                out.push(t.clone());
            }
        }
        let Some(s) = linear::simplify(&out, true) else { return b.clone() };
        let mut r = linear::remove_redundant(&s);
        r.sort();
        Poly::make(r)
    }

    fn meet_cons(&self, sc: &Scope, a: &PolyElem, cs: &[Constraint]) -> PolyElem {
        match &a.0 {
            None => PolyElem(None),
            Some(x) => {
                let mut sys = x.to_vec();
                sys.extend_from_slice(cs);
                self.alpha(sc, &sys)
            }
        }
    }

    fn extend(&self, _sc: &Scope, a: &PolyElem) -> PolyElem {
        a.clone()
    }

    fn show(&self, a: &PolyElem, name: &dyn Fn(SVar) -> String) -> String {
        match &a.0 {
            None => "false".into(),
            Some(cs) => linear::fmt_system(cs, name),
        }
    }
}
