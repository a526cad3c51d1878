//! Data flow refinement types: dependent function tables indexed by abstract
//! call stacks over a pluggable base domain.
//!
//! A type is interpreted over a scope `X`. The inputs of a table live in `X`;
//! its outputs live in `X ∪ {z_l}` where `z_l = SVar::D(l)` and `l` is the
//! number of dependency variables already in `X`.

use crate::base::{Atom, BaseDomain, Scope, Template};
use crate::lang::{Const, Kind};
use crate::linear::{Constraint, Lin, SVar};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

/// A call stack summary: at most `k` call-site locations, most recent first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct AStack(pub Vec<u32>);

impl AStack {
    pub fn eps() -> AStack {
        AStack(Vec::new())
    }

    /// `loc ⌢̂ self` truncated to `k` entries.
    pub fn push(&self, loc: u32, k: usize) -> AStack {
        let mut v = Vec::with_capacity(k);
        if k > 0 {
            v.push(loc);
            v.extend(self.0.iter().copied().take(k - 1));
        }
        AStack(v)
    }

    /// Abstraction of a concrete stack.
    pub fn truncate(concrete: &[u32], k: usize) -> AStack {
        AStack(concrete.iter().copied().take(k).collect())
    }
}

impl fmt::Display for AStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join("·"))
    }
}

/// Tag of a dependency variable: the call sites or abstractions it stems from.
pub type Tag = (u32, AStack);

#[derive(Clone, Debug, PartialEq)]
pub enum RefType<E> {
    Bot,
    Top,
    /// Never holds a bottom refinement; see [`TypeOps::base`].
    Base(Kind, E),
    Fun(Arc<FunType<E>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunType<E> {
    pub tags: BTreeSet<Tag>,
    /// Entries whose input and output are both ⊥ are omitted.
    pub table: BTreeMap<AStack, (RefType<E>, RefType<E>)>,
}

impl<E: Clone> RefType<E> {
    pub fn fun(tags: BTreeSet<Tag>, table: BTreeMap<AStack, (RefType<E>, RefType<E>)>) -> RefType<E> {
        let table = table.into_iter().filter(|(_, (i, o))| !(i.is_bot() && o.is_bot())).collect();
        RefType::Fun(Arc::new(FunType { tags, table }))
    }

    pub fn empty_fun(tags: BTreeSet<Tag>) -> RefType<E> {
        RefType::Fun(Arc::new(FunType { tags, table: BTreeMap::new() }))
    }

    pub fn is_bot(&self) -> bool {
        matches!(self, RefType::Bot)
    }

    pub fn is_top(&self) -> bool {
        matches!(self, RefType::Top)
    }

    pub fn as_fun(&self) -> Option<&FunType<E>> {
        match self {
            RefType::Fun(f) => Some(f),
            _ => None,
        }
    }

    /// Entry at `s`, defaulting to `(⊥, ⊥)`.
    pub fn entry(&self, s: &AStack) -> (RefType<E>, RefType<E>) {
        match self {
            RefType::Fun(f) => f.table.get(s).cloned().unwrap_or((RefType::Bot, RefType::Bot)),
            _ => (RefType::Bot, RefType::Bot),
        }
    }

    /// Stacks at which the table has been called.
    pub fn called(&self) -> Vec<AStack> {
        match self {
            RefType::Fun(f) => f.table.iter().filter(|(_, (i, _))| !i.is_bot()).map(|(s, _)| s.clone()).collect(),
            _ => Vec::new(),
        }
    }

    /// The table restricted to the single stack `s`.
    pub fn restrict(&self, s: &AStack) -> RefType<E> {
        match self {
            RefType::Fun(f) => {
                let table = f.table.get(s).map(|e| (s.clone(), e.clone())).into_iter().collect();
                RefType::Fun(Arc::new(FunType { tags: f.tags.clone(), table }))
            }
            other => other.clone(),
        }
    }

    /// Whether ⊤err occurs nowhere inside.
    pub fn is_safe(&self) -> bool {
        match self {
            RefType::Top => false,
            RefType::Fun(f) => f.table.values().all(|(i, o)| i.is_safe() && o.is_safe()),
            _ => true,
        }
    }

    /// Nesting depth of tables.
    pub fn depth(&self) -> usize {
        match self {
            RefType::Fun(f) => 1 + f.table.values().map(|(i, o)| i.depth().max(o.depth())).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Erases base refinements.
    pub fn shape(&self) -> RefType<E> {
        match self {
            RefType::Base(..) | RefType::Bot => RefType::Bot,
            RefType::Top => RefType::Top,
            RefType::Fun(f) => RefType::fun(
                f.tags.clone(),
                f.table.iter().map(|(s, (i, o))| (s.clone(), (i.shape(), o.shape()))).collect(),
            ),
        }
    }

    fn tag_clash<'a>(&'a self, path: &mut Vec<&'a BTreeSet<Tag>>) -> bool {
        let RefType::Fun(f) = self else { return false };
        if path.iter().any(|t| **t == f.tags) {
            return true;
        }
        path.push(&f.tags);
        let clash = f.table.values().any(|(i, o)| i.tag_clash(path) || o.tag_clash(path));
        path.pop();
        clash
    }

    /// Whether a table is nested inside another table with the same tag set.
    pub fn has_tag_clash(&self) -> bool {
        self.tag_clash(&mut Vec::new())
    }
}

/// Threshold constraints for widening.
#[derive(Clone, Debug, Default)]
pub struct Thresholds {
    pub fixed: Vec<Constraint>,
    /// Instantiated over each scope; `⋆` ranges over the int-kinded variables.
    pub templates: Vec<Template>,
    /// Names used to resolve program variables in templates.
    pub names: Arc<HashMap<SVar, String>>,
    /// Adds `ν ≤ x`, `x ≤ ν` and `x ≤ y` for all numeric scope variables.
    pub pairwise: bool,
}

impl Thresholds {
    pub fn none() -> Thresholds {
        Thresholds::default()
    }

    pub fn for_scope(&self, sc: &Scope) -> Vec<Constraint> {
        let mut out: Vec<Constraint> =
            self.fixed.iter().filter(|c| c.vars().all(|v| v == SVar::Nu || sc.contains(v))).cloned().collect();
        let names = |v: SVar| self.names.get(&v).cloned();
        for t in &self.templates {
            for a in t.instantiate(sc, &names) {
                if let Atom::C(c) = a {
                    out.extend(c.as_inequalities());
                }
            }
        }
        if self.pairwise {
            let vars: Vec<SVar> = sc.iter().filter(|(_, k)| *k == Kind::Int).map(|(v, _)| v).collect();
            for (a, &x) in vars.iter().enumerate() {
                out.push(Constraint::le(&Lin::var(SVar::Nu), &Lin::var(x)));
                out.push(Constraint::le(&Lin::var(x), &Lin::var(SVar::Nu)));
                for &y in &vars[a + 1..] {
                    out.push(Constraint::le(&Lin::var(x), &Lin::var(y)));
                    out.push(Constraint::le(&Lin::var(y), &Lin::var(x)));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Operations on refinement types over a base domain.
#[derive(Clone, Debug)]
pub struct TypeOps<D> {
    pub dom: D,
    /// Tables nested deeper than this are widened to ⊤err.
    pub depth_cap: usize,
    pub thresholds: Thresholds,
}

type Ty<D> = RefType<<D as BaseDomain>::Elem>;

fn rename_fn(map: &BTreeMap<SVar, SVar>) -> impl Fn(SVar) -> SVar + '_ {
    move |v| map.get(&v).copied().unwrap_or(v)
}

fn union_tags(a: &BTreeSet<Tag>, b: &BTreeSet<Tag>) -> BTreeSet<Tag> {
    if a == b {
        return a.clone();
    }
    a.union(b).cloned().collect()
}

impl<D: BaseDomain> TypeOps<D> {
    pub fn new(dom: D) -> TypeOps<D> {
        TypeOps { dom, depth_cap: 20, thresholds: Thresholds::none() }
    }

    /// The dependency variable of tables at scope `sc`.
    pub fn dep_var(sc: &Scope) -> SVar {
        SVar::D(sc.dep_level())
    }

    /// Scope of table outputs at scope `sc`.
    pub fn out_scope(sc: &Scope) -> Scope {
        sc.with(Self::dep_var(sc), Kind::Int)
    }

    pub fn base(&self, k: Kind, e: D::Elem) -> Ty<D> {
        if self.dom.is_bottom(&e) {
            RefType::Bot
        } else {
            RefType::Base(k, e)
        }
    }

    pub fn base_top(&self, sc: &Scope, k: Kind) -> Ty<D> {
        RefType::Base(k, self.dom.top(sc))
    }

    /// The base type `{ν | cs}`.
    pub fn base_of(&self, sc: &Scope, k: Kind, cs: &[Constraint]) -> Ty<D> {
        self.base(k, self.dom.alpha(sc, cs))
    }

    /// `{ν | ν = c}`.
    pub fn of_const(&self, sc: &Scope, c: Const) -> Ty<D> {
        self.base_of(sc, c.kind(), &[Constraint::var_eq_const(SVar::Nu, c.encode())])
    }

    pub fn leq(&self, sc: &Scope, a: &Ty<D>, b: &Ty<D>) -> bool {
        match (a, b) {
            (RefType::Bot, _) | (_, RefType::Top) => true,
            (RefType::Top, _) | (_, RefType::Bot) => false,
            (RefType::Base(k1, e1), RefType::Base(k2, e2)) => k1 == k2 && self.dom.leq(sc, e1, e2),
            (RefType::Fun(f1), RefType::Fun(f2)) => {
                if Arc::ptr_eq(f1, f2) {
                    return true;
                }
                let out = Self::out_scope(sc);
                f1.table.iter().all(|(s, (i1, o1))| {
                    let (i2, o2) = b.entry(s);
                    self.leq(sc, i1, &i2) && self.leq(&out, o1, &o2)
                })
            }
            _ => false,
        }
    }

    pub fn equiv(&self, sc: &Scope, a: &Ty<D>, b: &Ty<D>) -> bool {
        a == b || (self.leq(sc, a, b) && self.leq(sc, b, a))
    }

    pub fn join(&self, sc: &Scope, a: &Ty<D>, b: &Ty<D>) -> Ty<D> {
        match (a, b) {
            (RefType::Bot, t) | (t, RefType::Bot) => t.clone(),
            (RefType::Top, _) | (_, RefType::Top) => RefType::Top,
            (RefType::Base(k1, e1), RefType::Base(k2, e2)) => {
                if k1 != k2 {
                    RefType::Top
                } else {
                    self.base(*k1, self.dom.join(sc, e1, e2))
                }
            }
            (RefType::Fun(f1), RefType::Fun(f2)) => {
                if Arc::ptr_eq(f1, f2) {
                    return a.clone();
                }
                self.pointwise(sc, f1, f2, &|s, x, y| self.join(s, x, y))
            }
            _ => RefType::Top,
        }
    }

    fn pointwise(
        &self,
        sc: &Scope,
        f1: &FunType<D::Elem>,
        f2: &FunType<D::Elem>,
        op: &dyn Fn(&Scope, &Ty<D>, &Ty<D>) -> Ty<D>,
    ) -> Ty<D> {
        let out = Self::out_scope(sc);
        let keys: BTreeSet<&AStack> = f1.table.keys().chain(f2.table.keys()).collect();
        let bot = (RefType::Bot, RefType::Bot);
        let table = keys
            .into_iter()
            .map(|s| {
                let (i1, o1) = f1.table.get(s).unwrap_or(&bot);
                let (i2, o2) = f2.table.get(s).unwrap_or(&bot);
                (s.clone(), (op(sc, i1, i2), op(&out, o1, o2)))
            })
            .collect();
        RefType::fun(union_tags(&f1.tags, &f2.tags), table)
    }

    pub fn meet(&self, sc: &Scope, a: &Ty<D>, b: &Ty<D>) -> Ty<D> {
        match (a, b) {
            (RefType::Top, t) | (t, RefType::Top) => t.clone(),
            (RefType::Bot, _) | (_, RefType::Bot) => RefType::Bot,
            (RefType::Base(k1, e1), RefType::Base(k2, e2)) => {
                if k1 != k2 {
                    RefType::Bot
                } else {
                    self.base(*k1, self.dom.meet(sc, e1, e2))
                }
            }
            (RefType::Fun(f1), RefType::Fun(f2)) => {
                let out = Self::out_scope(sc);
                let table = f1
                    .table
                    .iter()
                    .filter_map(|(s, (i1, o1))| {
                        let (i2, o2) = f2.table.get(s)?;
                        Some((s.clone(), (self.meet(sc, i1, i2), self.meet(&out, o1, o2))))
                    })
                    .collect();
                RefType::fun(union_tags(&f1.tags, &f2.tags), table)
            }
            _ => RefType::Bot,
        }
    }

    /// Moves `t` from scope `from` to scope `to`, renaming free variables by `map`.
    /// Dependency variables of nested tables are relabelled to match `to`.
    pub fn retype(&self, t: &Ty<D>, from: &Scope, to: &Scope, map: &BTreeMap<SVar, SVar>) -> Ty<D> {
        match t {
            RefType::Bot | RefType::Top => t.clone(),
            RefType::Base(k, e) => {
                if map.is_empty() {
                    if from == to {
                        return t.clone();
                    }
                    self.base(*k, self.dom.extend(to, e))
                } else {
                    self.base(*k, self.dom.rename(to, e, &rename_fn(map)))
                }
            }
            RefType::Fun(f) => {
                let (fo, to_out) = (Self::out_scope(from), Self::out_scope(to));
                let (zf, zt) = (Self::dep_var(from), Self::dep_var(to));
                let mut inner = map.clone();
                if zf != zt || inner.contains_key(&zf) {
                    inner.insert(zf, zt);
                }
                let table = f
                    .table
                    .iter()
                    .map(|(s, (i, o))| (s.clone(), (self.retype(i, from, to, map), self.retype(o, &fo, &to_out, &inner))))
                    .collect();
                RefType::fun(f.tags.clone(), table)
            }
        }
    }

    /// Reinterprets `t` over a larger scope.
    pub fn extend(&self, t: &Ty<D>, from: &Scope, to: &Scope) -> Ty<D> {
        self.retype(t, from, to, &BTreeMap::new())
    }

    /// `∃x. t`, moving `t` to `sc` without `x`.
    pub fn project(&self, t: &Ty<D>, sc: &Scope, x: SVar) -> Ty<D> {
        if !sc.contains(x) {
            return t.clone();
        }
        let sc2 = sc.without(x);
        match t {
            RefType::Bot | RefType::Top => t.clone(),
            RefType::Base(k, e) => self.base(*k, self.dom.project(&sc2, e, x)),
            RefType::Fun(f) => {
                let out = Self::out_scope(sc);
                let out_proj = out.without(x);
                let out2 = Self::out_scope(&sc2);
                let (z, z2) = (Self::dep_var(sc), Self::dep_var(&sc2));
                let mut map = BTreeMap::new();
                if z != z2 {
                    map.insert(z, z2);
                }
                let table = f
                    .table
                    .iter()
                    .map(|(s, (i, o))| {
                        let o2 = self.project(o, &out, x);
                        (s.clone(), (self.project(i, sc, x), self.retype(&o2, &out_proj, &out2, &map)))
                    })
                    .collect();
                RefType::fun(f.tags.clone(), table)
            }
        }
    }

    /// Projects every variable of `sc` missing from `target`, innermost first.
    pub fn project_to(&self, t: &Ty<D>, sc: &Scope, target: &Scope) -> Ty<D> {
        let mut t = t.clone();
        let mut cur = sc.clone();
        let vars: Vec<SVar> = sc.vars().collect();
        for v in vars.into_iter().rev() {
            if !target.contains(v) {
                t = self.project(&t, &cur, v);
                cur = cur.without(v);
            }
        }
        if cur != *target {
            t = self.extend(&t, &cur, target);
        }
        t
    }

    fn meet_elem(&self, t: &Ty<D>, sc: &Scope, c: &D::Elem) -> Ty<D> {
        match t {
            RefType::Base(k, e) => self.base(*k, self.dom.meet(sc, e, c)),
            RefType::Fun(f) => {
                let out = Self::out_scope(sc);
                let c_out = self.dom.extend(&out, c);
                let table = f
                    .table
                    .iter()
                    .map(|(s, (i, o))| (s.clone(), (self.meet_elem(i, sc, c), self.meet_elem(o, &out, &c_out))))
                    .collect();
                RefType::fun(f.tags.clone(), table)
            }
            _ => t.clone(),
        }
    }

    /// Conjoins linear constraints into every base refinement of `t`.
    pub fn meet_cons(&self, t: &Ty<D>, sc: &Scope, cs: &[Constraint]) -> Ty<D> {
        if cs.is_empty() {
            return t.clone();
        }
        match t {
            RefType::Base(k, e) => self.base(*k, self.dom.meet_cons(sc, e, cs)),
            RefType::Fun(_) => self.meet_elem(t, sc, &self.dom.alpha(sc, cs)),
            _ => t.clone(),
        }
    }

    /// `t[x ← t2]` where `t` lives in `sc ∋ x` and `t2` in `sc2 ⊆ sc ∖ {x}`.
    pub fn strengthen(&self, t: &Ty<D>, sc: &Scope, x: SVar, t2: &Ty<D>) -> Ty<D> {
        match t2 {
            RefType::Bot => RefType::Bot,
            RefType::Fun(_) | RefType::Top => t.clone(),
            RefType::Base(_, b) => match t {
                RefType::Base(..) | RefType::Fun(_) => {
                    let c = self.dom.rename(sc, b, &|v| if v == SVar::Nu { x } else { v });
                    self.meet_elem(t, sc, &c)
                }
                _ => t.clone(),
            },
        }
    }

    /// `t[Γ]` for an environment given as `(x, Γ(x))` pairs.
    pub fn strengthen_env(&self, t: &Ty<D>, sc: &Scope, env: &[(SVar, Ty<D>)]) -> Ty<D> {
        let mut t = t.clone();
        for (x, tx) in env {
            if t.is_bot() {
                break;
            }
            t = self.strengthen(&t, sc, *x, tx);
        }
        t
    }

    /// `t⟨ν = x⟩`; function types pass through unchanged.
    pub fn eq_var(&self, t: &Ty<D>, sc: &Scope, x: SVar) -> Ty<D> {
        match t {
            RefType::Base(k, e) if sc.kind(x).is_some_and(|k| k.is_numeric()) => {
                self.base(*k, self.dom.meet_cons(sc, e, &[Constraint::var_eq_var(SVar::Nu, x)]))
            }
            _ => t.clone(),
        }
    }

    /// Abstract value propagation `t1 ⋉ᵗ t2`.
    pub fn prop(&self, sc: &Scope, t1: &Ty<D>, t2: &Ty<D>) -> (Ty<D>, Ty<D>) {
        match (t1, t2) {
            (RefType::Fun(f1), RefType::Bot) => (t1.clone(), RefType::empty_fun(f1.tags.clone())),
            (RefType::Fun(_), RefType::Top) => (RefType::Top, RefType::Top),
            (RefType::Fun(f1), RefType::Fun(f2)) => {
                let out = Self::out_scope(sc);
                let z = Self::dep_var(sc);
                let tags = union_tags(&f1.tags, &f2.tags);
                let keys: BTreeSet<&AStack> = f1.table.keys().chain(f2.table.keys()).collect();
                let bot = (RefType::Bot, RefType::Bot);
                let mut r1 = BTreeMap::new();
                let mut r2 = BTreeMap::new();
                for s in keys {
                    let (t1i, t1o) = f1.table.get(s).unwrap_or(&bot);
                    let (t2i, t2o) = f2.table.get(s).unwrap_or(&bot);
                    let (t2i2, t1i2) = self.prop(sc, t2i, t1i);
                    let (t1o2, t2o2) =
                        self.prop(&out, &self.strengthen(t1o, &out, z, t2i), &self.strengthen(t2o, &out, z, t2i));
                    r1.insert(s.clone(), (t1i2, self.join(&out, t1o, &t1o2)));
                    r2.insert(s.clone(), (t2i2, self.join(&out, t2o, &t2o2)));
                }
                (RefType::fun(tags.clone(), r1), RefType::fun(tags, r2))
            }
            _ => (t1.clone(), self.join(sc, t1, t2)),
        }
    }

    /// The subtype relation of the declarative rules.
    pub fn subtype(&self, sc: &Scope, t1: &Ty<D>, t2: &Ty<D>) -> bool {
        match (t1, t2) {
            (RefType::Bot, t) => !t.is_top(),
            (RefType::Base(k1, e1), RefType::Base(k2, e2)) => k1 == k2 && self.dom.leq(sc, e1, e2),
            (RefType::Fun(f1), RefType::Fun(f2)) => {
                let out = Self::out_scope(sc);
                let z = Self::dep_var(sc);
                let keys: BTreeSet<&AStack> = f1.table.keys().chain(f2.table.keys()).collect();
                keys.into_iter().all(|s| {
                    let (i1, o1) = t1.entry(s);
                    let (i2, o2) = t2.entry(s);
                    self.subtype(sc, &i2, &i1)
                        && self.subtype(&out, &self.strengthen(&o1, &out, z, &i2), &self.strengthen(&o2, &out, z, &i2))
                })
            }
            _ => false,
        }
    }

    /// Join followed by the occurs check on tags and the depth cap.
    pub fn shape_widen(&self, sc: &Scope, a: &Ty<D>, b: &Ty<D>) -> Ty<D> {
        let t = self.join(sc, a, b);
        if t.depth() > self.depth_cap || t.has_tag_clash() {
            RefType::Top
        } else {
            t
        }
    }

    /// Base widening lifted through tables.
    pub fn rel_widen(&self, sc: &Scope, a: &Ty<D>, b: &Ty<D>) -> Ty<D> {
        match (a, b) {
            (RefType::Base(k1, e1), RefType::Base(k2, e2)) if k1 == k2 => {
                let th = self.thresholds.for_scope(sc);
                self.base(*k1, self.dom.widen(sc, e1, e2, &th))
            }
            (RefType::Fun(f1), RefType::Fun(f2)) => self.pointwise(sc, f1, f2, &|s, x, y| self.rel_widen(s, x, y)),
            _ => self.join(sc, a, b),
        }
    }

    /// `a ∇ᵗ b = a ∇ʳᵉˡ (a ∇ˢʰ b)`.
    pub fn widen(&self, sc: &Scope, a: &Ty<D>, b: &Ty<D>) -> Ty<D> {
        if a == b {
            return a.clone();
        }
        let s = self.shape_widen(sc, a, b);
        self.rel_widen(sc, a, &s)
    }

    /// Whether the base refinements of `t` entail `c` (vacuous for non-base types).
    pub fn entails(&self, t: &Ty<D>, c: &Constraint) -> bool {
        match t {
            RefType::Bot => true,
            RefType::Base(_, e) => self.dom.entails(e, c),
            _ => false,
        }
    }

    /// Renders `t` in table notation.
    pub fn show(&self, t: &Ty<D>, sc: &Scope, name: &dyn Fn(SVar) -> String) -> String {
        match t {
            RefType::Bot => "⊥".into(),
            RefType::Top => "⊤".into(),
            RefType::Base(k, e) => {
                let s = self.dom.show(e, name);
                if s == "true" {
                    format!("{{ν:{} | true}}", kind_name(*k))
                } else {
                    format!("{{ν:{} | {s}}}", kind_name(*k))
                }
            }
            RefType::Fun(f) => {
                let out = Self::out_scope(sc);
                let z = name(Self::dep_var(sc));
                let entries: Vec<String> = f
                    .table
                    .iter()
                    .map(|(s, (i, o))| format!("{s} ◁ {} → {}", self.show(i, sc, name), self.show(o, &out, name)))
                    .collect();
                format!("{z}:[{}]", entries.join(", "))
            }
        }
    }

    /// Structured rendering for machine consumption.
    pub fn to_json(&self, t: &Ty<D>, sc: &Scope, name: &dyn Fn(SVar) -> String) -> Value {
        match t {
            RefType::Bot => json!({"kind": "bot"}),
            RefType::Top => json!({"kind": "err"}),
            RefType::Base(k, e) => json!({"kind": "base", "sort": kind_name(*k), "refinement": self.dom.show(e, name)}),
            RefType::Fun(f) => {
                let out = Self::out_scope(sc);
                let table: Vec<Value> = f
                    .table
                    .iter()
                    .map(|(s, (i, o))| {
                        json!({"stack": s.0, "in": self.to_json(i, sc, name), "out": self.to_json(o, &out, name)})
                    })
                    .collect();
                let tags: Vec<Value> = f.tags.iter().map(|(l, s)| json!({"loc": l, "stack": s.0})).collect();
                json!({"kind": "fun", "depvar": name(Self::dep_var(sc)), "tags": tags, "table": table})
            }
        }
    }
}

pub fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::Int => "int",
        Kind::Bool => "bool",
        Kind::Unit => "unit",
        Kind::Fun => "fun",
    }
}
