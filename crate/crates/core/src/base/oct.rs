use super::{BaseDomain, Scope};
use crate::linear::{self, Constraint, Lin, SVar};
use num_bigint::BigInt;
use num_traits::One;
use std::sync::Arc;

/// Octagons as integer difference-bound matrices.
#[derive(Clone, Copy, Debug, Default)]
pub struct Oct;

type Mat = Vec<Option<i64>>;

/// Entry `(i, j)` bounds `V_j - V_i` where `V_2k = x_k` and `V_2k+1 = -x_k`; `None` is +∞.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OctElem {
    dims: Arc<Vec<SVar>>,
    m: Option<Arc<Mat>>,
}

fn idx(n: usize, i: usize, j: usize) -> usize {
    i * 2 * n + j
}

fn add(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    a?.checked_add(b?)
}

fn min(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => Some(x.min(y)),
    }
}

fn max(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    }
}

fn le(a: Option<i64>, b: Option<i64>) -> bool {
    match (a, b) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(x), Some(y)) => x <= y,
    }
}

fn top_mat(n: usize) -> Mat {
    let mut m = vec![None; 4 * n * n];
    for i in 0..2 * n {
        m[idx(n, i, i)] = Some(0);
    }
    m
}

fn set(m: &mut Mat, n: usize, i: usize, j: usize, c: i64) {
    let a = idx(n, i, j);
    m[a] = min(m[a], Some(c));
    let b = idx(n, j ^ 1, i ^ 1);
    m[b] = min(m[b], Some(c));
}

/// Tight closure; `None` when empty.
fn close(mut m: Mat, n: usize) -> Option<Mat> {
    let d = 2 * n;
    for k in 0..d {
        for i in 0..d {
            let ik = m[idx(n, i, k)];
            if ik.is_none() {
                continue;
            }
            for j in 0..d {
                let v = add(ik, m[idx(n, k, j)]);
                let a = idx(n, i, j);
                m[a] = min(m[a], v);
            }
        }
    }
    for i in 0..d {
        if let Some(c) = m[idx(n, i, i ^ 1)] {
            m[idx(n, i, i ^ 1)] = Some(2 * c.div_euclid(2));
        }
    }
    for i in 0..d {
        for j in 0..d {
            if let (Some(a), Some(b)) = (m[idx(n, i, i ^ 1)], m[idx(n, j ^ 1, j)]) {
                if let Some(s) = a.checked_add(b) {
                    let k = idx(n, i, j);
                    m[k] = min(m[k], Some(s.div_euclid(2)));
                }
            }
        }
    }
    for i in 0..d {
        if m[idx(n, i, i)].is_some_and(|c| c < 0) {
            return None;
        }
        m[idx(n, i, i)] = Some(0);
    }
    Some(m)
}

/// Signed index of a unit-coefficient term.
fn lit(dims: &[SVar], v: SVar, a: &BigInt) -> Option<usize> {
    let k = dims.iter().position(|d| *d == v)?;
    if a.is_one() {
        Some(2 * k)
    } else if *a == -BigInt::one() {
        Some(2 * k + 1)
    } else {
        None
    }
}

/// Adds an octagonal inequality `lin ≤ 0`; false if not octagonal.
fn add_ineq(m: &mut Mat, dims: &[SVar], lin: &Lin) -> bool {
    let n = dims.len();
    let Ok(k) = i64::try_from(-lin.constant_term()) else { return false };
    match lin.terms() {
        [(v, a)] => {
            // V_p ≤ k, as V_p - V_{p^1} ≤ 2k
            let Some(p) = lit(dims, *v, a) else { return false };
            let Some(k2) = k.checked_mul(2) else { return false };
            set(m, n, p ^ 1, p, k2);
            true
        }
        [(v, a), (w, b)] => {
            let (Some(p), Some(q)) = (lit(dims, *v, a), lit(dims, *w, b)) else { return false };
            // V_p + V_q ≤ k, as V_p - V_{q^1} ≤ k
            set(m, n, q ^ 1, p, k);
            true
        }
        _ => false,
    }
}

fn var_lin(dims: &[SVar], i: usize) -> Lin {
    let v = Lin::var(dims[i / 2]);
    if i % 2 == 0 {
        v
    } else {
        v.neg()
    }
}

impl Oct {
    fn elem(dims: Vec<SVar>, m: Option<Mat>) -> OctElem {
        OctElem { dims: Arc::new(dims), m: m.map(Arc::new) }
    }

    /// The matrix of `e` over `dims`, closed if `closed`.
    fn mat(&self, e: &OctElem, dims: &[SVar], closed: bool) -> Option<Mat> {
        let src = e.m.as_ref()?;
        let n0 = e.dims.len();
        let n = dims.len();
        if *e.dims == dims {
            return if closed { close(src.to_vec(), n) } else { Some(src.to_vec()) };
        }
        let drops = e.dims.iter().any(|d| !dims.contains(d));
        let src: Mat = if drops || closed { close(src.to_vec(), n0)? } else { src.to_vec() };
        let pos: Vec<Option<usize>> = dims.iter().map(|d| e.dims.iter().position(|x| x == d)).collect();
        let mut m = top_mat(n);
        for i in 0..2 * n {
            let Some(oi) = pos[i / 2] else { continue };
            let si = 2 * oi + i % 2;
            for j in 0..2 * n {
                let Some(oj) = pos[j / 2] else { continue };
                let sj = 2 * oj + j % 2;
                m[idx(n, i, j)] = src[idx(n0, si, sj)];
            }
        }
        Some(m)
    }

    fn from_cons(&self, dims: &[SVar], cs: &[Constraint]) -> Option<Mat> {
        let n = dims.len();
        let mut m = top_mat(n);
        let mut exact = true;
        for c in cs {
            for ineq in c.as_inequalities() {
                if !add_ineq(&mut m, dims, &ineq.lin) {
                    exact = false;
                }
            }
        }
        if !exact {
            let used: Vec<usize> =
                (0..n).filter(|i| cs.iter().any(|c| c.mentions(dims[*i]))).collect();
            let bound = |m: &mut Mat, e: Lin| {
                let (lo, hi) = linear::bounds(cs, &e);
                if let Some(h) = hi.and_then(|h| i64::try_from(&h).ok()) {
                    add_ineq(m, dims, &e.plus_const(-h));
                }
                if let Some(l) = lo.and_then(|l| i64::try_from(&l).ok()) {
                    add_ineq(m, dims, &e.neg().plus_const(l));
                }
            };
            for (a, &i) in used.iter().enumerate() {
                bound(&mut m, Lin::var(dims[i]));
                for &j in &used[a + 1..] {
                    bound(&mut m, Lin::var(dims[i]).add(&Lin::var(dims[j])));
                    bound(&mut m, Lin::var(dims[i]).sub(&Lin::var(dims[j])));
                }
            }
        }
        close(m, n)
    }

    fn threshold_entries(dims: &[SVar], ts: &[Constraint]) -> Vec<(usize, i64)> {
        let n = dims.len();
        let mut out = Vec::new();
        for t in ts {
            for ineq in t.as_inequalities() {
                let mut m = vec![None; 4 * n * n];
                if add_ineq(&mut m, dims, &ineq.lin) {
                    for (k, v) in m.iter().enumerate() {
                        if let Some(c) = v {
                            out.push((k, *c));
                        }
                    }
                }
            }
        }
        out
    }
}

impl BaseDomain for Oct {
    type Elem = OctElem;

    fn name(&self) -> &'static str {
        "oct"
    }

    fn bottom(&self, sc: &Scope) -> OctElem {
        Oct::elem(sc.numeric(), None)
    }

    fn top(&self, sc: &Scope) -> OctElem {
        let dims = sc.numeric();
        let n = dims.len();
        Oct::elem(dims, Some(top_mat(n)))
    }

    fn is_bottom(&self, e: &OctElem) -> bool {
        e.m.is_none()
    }

    fn alpha(&self, sc: &Scope, cs: &[Constraint]) -> OctElem {
        let dims = sc.numeric();
        let Some(p) = linear::project_out(cs, &|v| !dims.contains(&v), true) else { return Oct::elem(dims, None) };
        let m = self.from_cons(&dims, &p);
        Oct::elem(dims, m)
    }

    fn gamma(&self, e: &OctElem) -> Option<Vec<Constraint>> {
        let m = e.m.as_ref()?;
        let n = e.dims.len();
        let mut out = Vec::new();
        for i in 0..2 * n {
            for j in 0..2 * n {
                if i == j {
                    continue;
                }
                if let Some(c) = m[idx(n, i, j)] {
                    let lin = var_lin(&e.dims, j).sub(&var_lin(&e.dims, i)).plus_const(-c);
                    out.push(Constraint { lin, eq: false });
                }
            }
        }
        linear::simplify(&out, true)
    }

    fn leq(&self, sc: &Scope, a: &OctElem, b: &OctElem) -> bool {
        let dims = sc.numeric();
        let Some(x) = self.mat(a, &dims, true) else { return true };
        let Some(y) = self.mat(b, &dims, false) else { return false };
        x.iter().zip(&y).all(|(p, q)| le(*p, *q))
    }

    fn join(&self, sc: &Scope, a: &OctElem, b: &OctElem) -> OctElem {
        let dims = sc.numeric();
        let x = self.mat(a, &dims, true);
        let y = self.mat(b, &dims, true);
        let m = match (x, y) {
            (None, y) => y,
            (x, None) => x,
            (Some(x), Some(y)) => Some(x.iter().zip(&y).map(|(p, q)| max(*p, *q)).collect()),
        };
        Oct::elem(dims, m)
    }

    fn meet(&self, sc: &Scope, a: &OctElem, b: &OctElem) -> OctElem {
        let dims = sc.numeric();
        let n = dims.len();
        let m = match (self.mat(a, &dims, false), self.mat(b, &dims, false)) {
            (Some(x), Some(y)) => close(x.iter().zip(&y).map(|(p, q)| min(*p, *q)).collect(), n),
            _ => None,
        };
        Oct::elem(dims, m)
    }

    fn widen(&self, sc: &Scope, a: &OctElem, b: &OctElem, thresholds: &[Constraint]) -> OctElem {
        let dims = sc.numeric();
        let Some(x) = self.mat(a, &dims, false) else { return self.join(sc, a, b) };
        let Some(y) = self.mat(b, &dims, true) else { return a.clone() };
        let ths = Oct::threshold_entries(&dims, thresholds);
        let m: Mat = x
            .iter()
            .zip(&y)
            .enumerate()
            .map(|(k, (p, q))| {
                if le(*q, *p) {
                    *p
                } else {
                    ths.iter().filter(|(e, c)| *e == k && le(*q, Some(*c))).map(|(_, c)| *c).min()
                }
            })
            .collect();
        Oct::elem(dims, Some(m))
    }

    fn meet_cons(&self, sc: &Scope, a: &OctElem, cs: &[Constraint]) -> OctElem {
        let dims = sc.numeric();
        let n = dims.len();
        let Some(mut m) = self.mat(a, &dims, false) else { return Oct::elem(dims, None) };
        let local = cs.iter().all(|c| c.vars().all(|v| dims.contains(&v)));
        if local && cs.iter().flat_map(|c| c.as_inequalities()).all(|c| add_ineq(&mut m, &dims, &c.lin)) {
            return Oct::elem(dims, close(m, n));
        }
        match self.gamma(a) {
            Some(mut g) => {
                g.extend_from_slice(cs);
                self.alpha(sc, &g)
            }
            None => Oct::elem(dims, None),
        }
    }

    fn project(&self, sc: &Scope, a: &OctElem, _x: SVar) -> OctElem {
        let dims = sc.numeric();
        let m = self.mat(a, &dims, true);
        Oct::elem(dims, m)
    }

    fn rename(&self, sc: &Scope, a: &OctElem, f: &dyn Fn(SVar) -> SVar) -> OctElem {
        let renamed = OctElem { dims: Arc::new(a.dims.iter().map(|d| f(*d)).collect()), m: a.m.clone() };
        let dims = sc.numeric();
        let m = self.mat(&renamed, &dims, false);
        Oct::elem(dims, m)
    }

    fn extend(&self, sc: &Scope, a: &OctElem) -> OctElem {
        let dims = sc.numeric();
        let m = self.mat(a, &dims, false);
        Oct::elem(dims, m)
    }

    fn show(&self, a: &OctElem, name: &dyn Fn(SVar) -> String) -> String {
        match self.mat(a, &a.dims, true) {
            None => "false".into(),
            Some(m) => {
                let e = OctElem { dims: a.dims.clone(), m: Some(Arc::new(m)) };
                let g = self.gamma(&e).unwrap_or_default();
                let mut r = linear::remove_redundant(&g);
                r.sort();
                linear::fmt_system(&r, name)
            }
        }
    }
}
