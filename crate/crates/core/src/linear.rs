//! Exact linear constraint systems over integer-valued variables.
//!
//! A constraint is `Σ aᵢ·xᵢ + c ≤ 0` or `= 0` with arbitrary precision
//! integer coefficients. Projection uses Fourier–Motzkin elimination.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeSet, HashMap};
use std::fmt;

/// Variables of refinement formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SVar {
    /// The refined value ν.
    Nu,
    /// A program binder, by id.
    P(u32),
    /// A dependency variable, by de Bruijn level.
    D(u32),
    /// A temporary.
    T(u32),
}

impl fmt::Display for SVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SVar::Nu => f.write_str("ν"),
            SVar::P(i) => write!(f, "x{i}"),
            SVar::D(l) => write!(f, "z{l}"),
            SVar::T(i) => write!(f, "t{i}"),
        }
    }
}

const FRESH: u32 = 1 << 30;

/// An affine expression `Σ aᵢ·xᵢ + k`, terms sorted by variable with nonzero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Lin {
    terms: Vec<(SVar, BigInt)>,
    k: BigInt,
}

impl Lin {
    pub fn constant(k: impl Into<BigInt>) -> Lin {
        Lin { terms: Vec::new(), k: k.into() }
    }

    pub fn var(x: SVar) -> Lin {
        Lin::term(x, 1)
    }

    pub fn term(x: SVar, a: impl Into<BigInt>) -> Lin {
        let a = a.into();
        if a.is_zero() {
            return Lin::default();
        }
        Lin { terms: vec![(x, a)], k: BigInt::zero() }
    }

    pub fn terms(&self) -> &[(SVar, BigInt)] {
        &self.terms
    }

    pub fn constant_term(&self) -> &BigInt {
        &self.k
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, x: SVar) -> BigInt {
        match self.terms.binary_search_by(|(v, _)| v.cmp(&x)) {
            Ok(i) => self.terms[i].1.clone(),
            Err(_) => BigInt::zero(),
        }
    }

    pub fn mentions(&self, x: SVar) -> bool {
        self.terms.binary_search_by(|(v, _)| v.cmp(&x)).is_ok()
    }

    pub fn vars(&self) -> impl Iterator<Item = SVar> + '_ {
        self.terms.iter().map(|(v, _)| *v)
    }

    fn from_terms(mut terms: Vec<(SVar, BigInt)>, k: BigInt) -> Lin {
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(SVar, BigInt)> = Vec::with_capacity(terms.len());
        for (v, a) in terms {
            match out.last_mut() {
                Some((w, b)) if *w == v => *b += a,
                _ => out.push((v, a)),
            }
        }
        out.retain(|(_, a)| !a.is_zero());
        Lin { terms: out, k }
    }

    pub fn add(&self, o: &Lin) -> Lin {
        let mut terms = Vec::with_capacity(self.terms.len() + o.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() || j < o.terms.len() {
            if j >= o.terms.len() || (i < self.terms.len() && self.terms[i].0 < o.terms[j].0) {
                terms.push(self.terms[i].clone());
                i += 1;
            } else if i >= self.terms.len() || o.terms[j].0 < self.terms[i].0 {
                terms.push(o.terms[j].clone());
                j += 1;
            } else {
                let a = &self.terms[i].1 + &o.terms[j].1;
                if !a.is_zero() {
                    terms.push((self.terms[i].0, a));
                }
                i += 1;
                j += 1;
            }
        }
        Lin { terms, k: &self.k + &o.k }
    }

    pub fn scale(&self, a: &BigInt) -> Lin {
        if a.is_zero() {
            return Lin::default();
        }
        Lin { terms: self.terms.iter().map(|(v, b)| (*v, b * a)).collect(), k: &self.k * a }
    }

    pub fn neg(&self) -> Lin {
        self.scale(&-BigInt::one())
    }

    pub fn sub(&self, o: &Lin) -> Lin {
        self.add(&o.neg())
    }

    pub fn plus_const(&self, c: impl Into<BigInt>) -> Lin {
        Lin { terms: self.terms.clone(), k: &self.k + c.into() }
    }

    pub fn rename(&self, f: &dyn Fn(SVar) -> SVar) -> Lin {
        Lin::from_terms(self.terms.iter().map(|(v, a)| (f(*v), a.clone())).collect(), self.k.clone())
    }

    /// Replaces `x` by `e`.
    pub fn subst(&self, x: SVar, e: &Lin) -> Lin {
        let a = self.coeff(x);
        if a.is_zero() {
            return self.clone();
        }
        let rest = Lin { terms: self.terms.iter().filter(|(v, _)| *v != x).cloned().collect(), k: self.k.clone() };
        rest.add(&e.scale(&a))
    }

    pub fn eval(&self, a: &dyn Fn(SVar) -> Option<BigInt>) -> Option<BigInt> {
        let mut s = self.k.clone();
        for (v, c) in &self.terms {
            s += c * a(*v)?;
        }
        Some(s)
    }

    pub fn fmt_with(&self, name: &dyn Fn(SVar) -> String) -> String {
        let mut s = String::new();
        for (v, a) in &self.terms {
            let n = name(*v);
            if s.is_empty() {
                if a.is_one() {
                    s = n;
                } else if *a == -BigInt::one() {
                    s = format!("-{n}");
                } else {
                    s = format!("{a}{n}");
                }
            } else if a.is_one() {
                s += &format!(" + {n}");
            } else if *a == -BigInt::one() {
                s += &format!(" - {n}");
            } else if a.is_negative() {
                s += &format!(" - {}{n}", -a);
            } else {
                s += &format!(" + {a}{n}");
            }
        }
        if s.is_empty() {
            return self.k.to_string();
        }
        if self.k.is_positive() {
            s += &format!(" + {}", self.k);
        } else if self.k.is_negative() {
            s += &format!(" - {}", -&self.k);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub lin: Lin,
    /// `lin = 0` when set, `lin ≤ 0` otherwise.
    pub eq: bool,
}

enum Norm {
    True,
    False,
    C(Constraint),
}

impl Constraint {
    pub fn le(a: &Lin, b: &Lin) -> Constraint {
        Constraint { lin: a.sub(b), eq: false }
    }

    pub fn lt(a: &Lin, b: &Lin) -> Constraint {
        Constraint { lin: a.sub(b).plus_const(1), eq: false }
    }

    pub fn ge(a: &Lin, b: &Lin) -> Constraint {
        Constraint::le(b, a)
    }

    pub fn gt(a: &Lin, b: &Lin) -> Constraint {
        Constraint::lt(b, a)
    }

    pub fn eq(a: &Lin, b: &Lin) -> Constraint {
        Constraint { lin: a.sub(b), eq: true }
    }

    pub fn var_eq_const(x: SVar, c: i64) -> Constraint {
        Constraint::eq(&Lin::var(x), &Lin::constant(c))
    }

    pub fn var_eq_var(x: SVar, y: SVar) -> Constraint {
        Constraint::eq(&Lin::var(x), &Lin::var(y))
    }

    pub fn vars(&self) -> impl Iterator<Item = SVar> + '_ {
        self.lin.vars()
    }

    pub fn mentions(&self, x: SVar) -> bool {
        self.lin.mentions(x)
    }

    pub fn rename(&self, f: &dyn Fn(SVar) -> SVar) -> Constraint {
        Constraint { lin: self.lin.rename(f), eq: self.eq }
    }

    pub fn subst(&self, x: SVar, e: &Lin) -> Constraint {
        Constraint { lin: self.lin.subst(x, e), eq: self.eq }
    }

    /// Splits an equality into its two inequalities.
    pub fn as_inequalities(&self) -> Vec<Constraint> {
        if self.eq {
            vec![Constraint { lin: self.lin.clone(), eq: false }, Constraint { lin: self.lin.neg(), eq: false }]
        } else {
            vec![self.clone()]
        }
    }

    /// Integer negation of an inequality: `lin ≤ 0` becomes `lin ≥ 1`.
    pub fn negate_ineq(&self) -> Constraint {
        Constraint { lin: self.lin.neg().plus_const(1), eq: false }
    }

    pub fn holds(&self, a: &dyn Fn(SVar) -> Option<BigInt>) -> Option<bool> {
        let v = self.lin.eval(a)?;
        Some(if self.eq { v.is_zero() } else { !v.is_positive() })
    }

    fn normalize(&self, tighten: bool) -> Norm {
        if self.lin.terms.is_empty() {
            let ok = if self.eq { self.lin.k.is_zero() } else { !self.lin.k.is_positive() };
            return if ok { Norm::True } else { Norm::False };
        }
        let mut g = BigInt::zero();
        for (_, a) in &self.lin.terms {
            g = g.gcd(a);
        }
        let mut lin = self.lin.clone();
        if tighten || self.eq {
            if self.eq && !(&lin.k % &g).is_zero() {
                return if tighten { Norm::False } else { Norm::C(self.clone()) };
            }
            if !g.is_one() {
                for t in &mut lin.terms {
                    t.1 = &t.1 / &g;
                }
                lin.k = if self.eq { &lin.k / &g } else { lin.k.div_ceil(&g) };
            }
        } else {
            let g2 = g.gcd(&lin.k);
            if !g2.is_one() {
                for t in &mut lin.terms {
                    t.1 = &t.1 / &g2;
                }
                lin.k = &lin.k / &g2;
            }
        }
        if self.eq && lin.terms[0].1.is_negative() {
            lin = lin.neg();
        }
        Norm::C(Constraint { lin, eq: self.eq })
    }

    pub fn fmt_with(&self, name: &dyn Fn(SVar) -> String) -> String {
        let terms = Lin { terms: self.lin.terms.clone(), k: BigInt::zero() };
        let neg_k = -&self.lin.k;
        let all_neg = terms.terms.iter().all(|(_, a)| a.is_negative());
        if all_neg && !self.eq {
            format!("{} ≤ {}", terms.neg().fmt_with(name), Lin::constant(neg_k).neg().fmt_with(name))
                .replacen(" ≤ ", " ≥ ", 1)
        } else {
            format!("{} {} {}", terms.fmt_with(name), if self.eq { "=" } else { "≤" }, neg_k)
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fmt_with(&|v| v.to_string()))
    }
}

/// Normalizes, deduplicates and merges opposite bounds. `None` means infeasible.
pub fn simplify(cs: &[Constraint], tighten: bool) -> Option<Vec<Constraint>> {
    let mut eqs: HashMap<Vec<(SVar, BigInt)>, BigInt> = HashMap::new();
    let mut les: HashMap<Vec<(SVar, BigInt)>, BigInt> = HashMap::new();
    for c in cs {
        match c.normalize(tighten) {
            Norm::True => {}
            Norm::False => return None,
            Norm::C(c) => {
                if c.eq {
                    match eqs.get(&c.lin.terms) {
                        Some(k) if *k != c.lin.k => return None,
                        _ => {
                            eqs.insert(c.lin.terms, c.lin.k);
                        }
                    }
                } else {
                    let e = les.entry(c.lin.terms).or_insert_with(|| c.lin.k.clone());
                    if c.lin.k > *e {
                        *e = c.lin.k;
                    }
                }
            }
        }
    }
    // opposite inequalities either contradict or form an equality
    let keys: Vec<_> = les.keys().cloned().collect();
    for t in keys {
        let Some(k1) = les.get(&t).cloned() else { continue };
        let nt: Vec<(SVar, BigInt)> = t.iter().map(|(v, a)| (*v, -a)).collect();
        if let Some(k2) = les.get(&nt).cloned() {
            // t + k1 ≤ 0 and -t + k2 ≤ 0, so k2 ≤ t ≤ -k1
            if &k1 + &k2 > BigInt::zero() {
                return None;
            }
            if (&k1 + &k2).is_zero() {
                les.remove(&t);
                les.remove(&nt);
                let c = Constraint { lin: Lin { terms: t, k: k1 }, eq: true };
                let Norm::C(c) = c.normalize(tighten) else { unreachable!() };
                match eqs.get(&c.lin.terms) {
                    Some(k) if *k != c.lin.k => return None,
                    _ => {
                        eqs.insert(c.lin.terms, c.lin.k);
                    }
                }
            }
        }
    }
    let mut out = Vec::with_capacity(eqs.len() + les.len());
    for (t, k) in &eqs {
        let nt: Vec<(SVar, BigInt)> = t.iter().map(|(v, a)| (*v, -a)).collect();
        // inequalities over the same terms are decided by the equality
        if let Some(k2) = les.remove(t) {
            if k2 > *k {
                return None;
            }
        }
        if let Some(k2) = les.remove(&nt) {
            if &k2 + k > BigInt::zero() {
                return None;
            }
        }
    }
    for (t, k) in eqs {
        out.push(Constraint { lin: Lin { terms: t, k }, eq: true });
    }
    for (t, k) in les {
        out.push(Constraint { lin: Lin { terms: t, k }, eq: false });
    }
    out.sort();
    Some(out)
}

fn sign_of(a: &BigInt) -> BigInt {
    if a.is_negative() {
        -BigInt::one()
    } else {
        BigInt::one()
    }
}

/// Fourier–Motzkin elimination of `x`.
pub fn eliminate(cs: &[Constraint], x: SVar, tighten: bool) -> Option<Vec<Constraint>> {
    if let Some(pivot) = cs.iter().filter(|c| c.eq && c.mentions(x)).min_by_key(|c| c.lin.terms.len()) {
        let a = pivot.lin.coeff(x);
        let sa = sign_of(&a);
        let abs_a = a.abs();
        let out: Vec<Constraint> = cs
            .iter()
            .filter(|c| *c != pivot)
            .map(|c| {
                let b = c.lin.coeff(x);
                if b.is_zero() {
                    c.clone()
                } else {
                    let lin = c.lin.scale(&abs_a).sub(&pivot.lin.scale(&(&sa * &b)));
                    Constraint { lin, eq: c.eq }
                }
            })
            .collect();
        return simplify(&out, tighten);
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut out = Vec::new();
    for c in cs {
        let a = c.lin.coeff(x);
        if a.is_positive() {
            pos.push((a, c));
        } else if a.is_negative() {
            neg.push((a, c));
        } else {
            out.push(c.clone());
        }
    }
    for (a, p) in &pos {
        for (b, n) in &neg {
            let lin = p.lin.scale(&-b).add(&n.lin.scale(a));
            out.push(Constraint { lin, eq: false });
        }
    }
    simplify(&out, tighten)
}

fn all_vars(cs: &[Constraint]) -> BTreeSet<SVar> {
    cs.iter().flat_map(|c| c.vars()).collect()
}

fn pick_var(cs: &[Constraint], cands: &BTreeSet<SVar>) -> Option<SVar> {
    if let Some(v) = cs.iter().filter(|c| c.eq).flat_map(|c| c.vars()).find(|v| cands.contains(v)) {
        return Some(v);
    }
    cands
        .iter()
        .copied()
        .min_by_key(|v| {
            let (mut p, mut n) = (0usize, 0usize);
            for c in cs {
                let a = c.lin.coeff(*v);
                if a.is_positive() {
                    p += 1;
                } else if a.is_negative() {
                    n += 1;
                }
            }
            p * n
        })
}

const REDUNDANCY_THRESHOLD: usize = 24;

/// Eliminates every variable for which `drop` holds.
pub fn project_out(cs: &[Constraint], drop: &dyn Fn(SVar) -> bool, tighten: bool) -> Option<Vec<Constraint>> {
    let mut cur = simplify(cs, tighten)?;
    loop {
        let cands: BTreeSet<SVar> = all_vars(&cur).into_iter().filter(|v| drop(*v)).collect();
        let Some(x) = pick_var(&cur, &cands) else { return Some(cur) };
        cur = eliminate(&cur, x, tighten)?;
        if cur.len() > REDUNDANCY_THRESHOLD {
            cur = remove_redundant_mode(&cur, tighten);
        }
    }
}

pub fn project(cs: &[Constraint], x: SVar) -> Option<Vec<Constraint>> {
    project_out(cs, &|v| v == x, true)
}

fn feasible_mode(cs: &[Constraint], tighten: bool) -> bool {
    let Some(mut cur) = simplify(cs, tighten) else { return false };
    loop {
        let cands = all_vars(&cur);
        let Some(x) = pick_var(&cur, &cands) else { return true };
        match eliminate(&cur, x, tighten) {
            None => return false,
            Some(next) => cur = next,
        }
    }
}

/// Satisfiability over the integers, as decided by tightened elimination.
pub fn feasible(cs: &[Constraint]) -> bool {
    feasible_mode(cs, true)
}

fn entails_mode(cs: &[Constraint], c: &Constraint, tighten: bool) -> bool {
    c.as_inequalities().iter().all(|ineq| {
        if tighten {
            let mut sys = cs.to_vec();
            sys.push(ineq.negate_ineq());
            !feasible_mode(&sys, true)
        } else {
            rational_max_nonpositive(cs, &ineq.lin)
        }
    })
}

/// Over the rationals, `max(e) ≤ 0` on `cs` (vacuous when infeasible).
fn rational_max_nonpositive(cs: &[Constraint], e: &Lin) -> bool {
    let t = SVar::T(FRESH + 7);
    let mut sys = cs.to_vec();
    sys.push(Constraint { lin: Lin::var(t).sub(e), eq: true });
    let Some(res) = project_out(&sys, &|v| v != t, false) else { return true };
    res.iter().any(|c| {
        let a = c.lin.coeff(t);
        // a·t + k ≤ 0 with a > 0 bounds t by -k/a
        (a.is_positive() || (c.eq && !a.is_zero())) && {
            let k = &c.lin.k;
            if a.is_positive() {
                !k.is_negative()
            } else {
                !k.is_positive()
            }
        }
    })
}

/// `cs ⊨ c`.
pub fn entails(cs: &[Constraint], c: &Constraint) -> bool {
    entails_mode(cs, c, true)
}

pub fn entails_all(cs: &[Constraint], ds: &[Constraint]) -> bool {
    if !feasible(cs) {
        return true;
    }
    ds.iter().all(|d| entails(cs, d))
}

/// True iff `cs ∧ lin = 0` is infeasible.
pub fn entails_ne(cs: &[Constraint], lin: &Lin) -> bool {
    let mut sys = cs.to_vec();
    sys.push(Constraint { lin: lin.clone(), eq: true });
    !feasible(&sys)
}

fn remove_redundant_mode(cs: &[Constraint], tighten: bool) -> Vec<Constraint> {
    let mut cur: Vec<Constraint> = cs.to_vec();
    let mut i = 0;
    while i < cur.len() {
        let c = cur[i].clone();
        let rest: Vec<Constraint> = cur.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, d)| d.clone()).collect();
        if entails_mode(&rest, &c, tighten) {
            cur = rest;
        } else {
            i += 1;
        }
    }
    cur
}

/// Drops constraints implied by the others.
pub fn remove_redundant(cs: &[Constraint]) -> Vec<Constraint> {
    remove_redundant_mode(cs, true)
}

/// Integer bounds of `e` over `cs`; `None` on a side means unbounded.
pub fn bounds(cs: &[Constraint], e: &Lin) -> (Option<BigInt>, Option<BigInt>) {
    let t = SVar::T(FRESH + 7);
    let mut sys = cs.to_vec();
    sys.push(Constraint { lin: Lin::var(t).sub(e), eq: true });
    let Some(res) = project_out(&sys, &|v| v != t, true) else { return (None, None) };
    let (mut lo, mut hi): (Option<BigInt>, Option<BigInt>) = (None, None);
    for c in res {
        let a = c.lin.coeff(t);
        let k = &c.lin.k;
        if a.is_zero() {
            continue;
        }
        // a·t + k ≤ 0 (or = 0)
        let upper = if a.is_positive() { Some((-k).div_floor(&a)) } else { None };
        let lower = if a.is_negative() { Some((-k).div_ceil(&a)) } else { None };
        let (upper, lower) = if c.eq {
            let v = (-k).div_floor(&a);
            (Some(v.clone()), Some(v))
        } else {
            (upper, lower)
        };
        if let Some(u) = upper {
            hi = Some(hi.map_or(u.clone(), |h| h.min(u)));
        }
        if let Some(l) = lower {
            lo = Some(lo.map_or(l.clone(), |h| h.max(l)));
        }
    }
    (lo, hi)
}

/// Closed convex hull of two systems. `None` iff both are infeasible.
pub fn hull(a: &[Constraint], b: &[Constraint]) -> Option<Vec<Constraint>> {
    let fa = feasible(a);
    let fb = feasible(b);
    match (fa, fb) {
        (false, false) => return None,
        (false, true) => return simplify(b, true),
        (true, false) => return simplify(a, true),
        _ => {}
    }
    if entails_all(a, b) {
        return simplify(b, true);
    }
    if entails_all(b, a) {
        return simplify(a, true);
    }
    let vars: Vec<SVar> = all_vars(a).union(&all_vars(b)).copied().collect();
    let lam = SVar::T(FRESH);
    let y = |i: usize| SVar::T(FRESH + 16 + i as u32);
    let idx: HashMap<SVar, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut sys = Vec::new();
    // a holds for y scaled by λ, b for (x - y) scaled by 1 - λ
    for c in a {
        let mut lin = Lin::term(lam, c.lin.k.clone());
        for (v, k) in &c.lin.terms {
            lin = lin.add(&Lin::term(y(idx[v]), k.clone()));
        }
        sys.push(Constraint { lin, eq: c.eq });
    }
    for c in b {
        let mut lin = Lin::constant(c.lin.k.clone()).sub(&Lin::term(lam, c.lin.k.clone()));
        for (v, k) in &c.lin.terms {
            lin = lin.add(&Lin::term(*v, k.clone())).sub(&Lin::term(y(idx[v]), k.clone()));
        }
        sys.push(Constraint { lin, eq: c.eq });
    }
    sys.push(Constraint { lin: Lin::var(lam).neg(), eq: false });
    sys.push(Constraint { lin: Lin::var(lam).plus_const(-1), eq: false });
    let res = project_out(&sys, &|v| matches!(v, SVar::T(n) if n >= FRESH), false)?;
    let res = simplify(&res, true)?;
    Some(remove_redundant(&res))
}

/// Constraints of `a` entailed by `b` together with constraints of `b` entailed by `a`.
pub fn weak_join(a: &[Constraint], b: &[Constraint]) -> Vec<Constraint> {
    let mut out: Vec<Constraint> = Vec::new();
    for c in a.iter().flat_map(|c| c.as_inequalities()) {
        if entails(b, &c) {
            out.push(c);
        }
    }
    for c in b.iter().flat_map(|c| c.as_inequalities()) {
        if entails(a, &c) {
            out.push(c);
        }
    }
    simplify(&out, true).unwrap_or_default()
}

pub fn rename_all(cs: &[Constraint], f: &dyn Fn(SVar) -> SVar) -> Vec<Constraint> {
    cs.iter().map(|c| c.rename(f)).collect()
}

pub fn fmt_system(cs: &[Constraint], name: &dyn Fn(SVar) -> String) -> String {
    if cs.is_empty() {
        return "true".into();
    }
    cs.iter().map(|c| c.fmt_with(name)).collect::<Vec<_>>().join(" ∧ ")
}
