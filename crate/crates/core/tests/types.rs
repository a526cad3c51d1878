mod common;

use common::{konst, nu, Ty};
use refty::base::{parse_templates, BaseDomain, Poly, Pred, Scope};
use refty::lang::Kind;
use refty::linear::{entails_all, Constraint, Lin, SVar};
use refty::types::{AStack, RefType, TypeOps};
use std::collections::{BTreeMap, BTreeSet};

const X: SVar = SVar::P(1);
const U: SVar = SVar::P(2);

fn ops() -> TypeOps<Poly> {
    TypeOps::new(Poly)
}

fn base(o: &TypeOps<Poly>, sc: &Scope, cs: &[Constraint]) -> Ty<Poly> {
    o.base_of(sc, Kind::Int, cs)
}

fn same(o: &TypeOps<Poly>, t: &Ty<Poly>, want: &[Constraint]) -> bool {
    match t {
        RefType::Base(_, e) => {
            let g = o.dom.gamma(e).unwrap_or_default();
            entails_all(&g, want) && entails_all(want, &g)
        }
        _ => false,
    }
}

fn fun1(i: Ty<Poly>, out: Ty<Poly>) -> Ty<Poly> {
    RefType::fun(BTreeSet::new(), BTreeMap::from([(AStack::eps(), (i, out))]))
}

fn eq(a: Lin, b: Lin) -> Constraint {
    Constraint::eq(&a, &b)
}

#[test]
fn order_and_join() {
    let o = ops();
    let sc = Scope::empty();
    let one = base(&o, &sc, &[eq(nu(), konst(1))]);
    let le2 = base(&o, &sc, &[Constraint::le(&nu(), &konst(2))]);
    assert!(o.leq(&sc, &one, &le2));
    assert!(!o.leq(&sc, &le2, &one));
    let f = fun1(one.clone(), le2.clone());
    assert_eq!(o.join(&sc, &one, &f), RefType::Top);
    assert_eq!(o.join(&sc, &f, &RefType::empty_fun(BTreeSet::new())), f);
    assert_eq!(o.join(&sc, &RefType::Bot, &f), f);
    assert!(o.leq(&sc, &f, &RefType::Top));
    assert_eq!(o.meet(&sc, &one, &f), RefType::Bot);
}

#[test]
fn constants_strengthened_with_the_environment() {
    let o = ops();
    let sc = Scope::new(vec![(U, Kind::Int)]);
    let c = o.of_const(&sc, refty::lang::Const::Int(1));
    let tu = base(&o, &Scope::empty(), &[eq(nu(), konst(1))]);
    let t = o.strengthen_env(&c, &sc, &[(U, tu)]);
    assert!(same(&o, &t, &[eq(nu(), konst(1)), eq(Lin::var(U), konst(1))]));
    assert_eq!(o.strengthen_env(&c, &sc, &[]), c);
    let with_f = Scope::new(vec![(U, Kind::Fun)]);
    let c = o.of_const(&with_f, refty::lang::Const::Bool(true));
    assert_eq!(o.strengthen_env(&c, &with_f, &[(U, fun1(RefType::Bot, RefType::Bot))]), c);
}

#[test]
fn strengthening() {
    let o = ops();
    let sc = Scope::new(vec![(X, Kind::Int)]);
    let t = base(&o, &sc, &[Constraint::le(&Lin::var(X), &nu())]);
    assert_eq!(o.strengthen(&t, &sc, X, &RefType::Bot), RefType::Bot);
    let ge0 = base(&o, &Scope::empty(), &[Constraint::ge(&nu(), &konst(0))]);
    let s = o.strengthen(&t, &sc, X, &ge0);
    assert!(same(&o, &s, &[Constraint::le(&Lin::var(X), &nu()), Constraint::ge(&Lin::var(X), &konst(0))]));
    assert_eq!(o.strengthen(&t, &sc, X, &fun1(RefType::Bot, RefType::Bot)), t);
}

#[test]
fn environment_strengthening_is_order_independent() {
    let o = ops();
    let sc = Scope::new(vec![(X, Kind::Int), (U, Kind::Int)]);
    let t = base(&o, &sc, &[Constraint::le(&Lin::var(X), &nu()), Constraint::le(&Lin::var(U), &nu())]);
    let tx = base(&o, &Scope::empty(), &[Constraint::ge(&nu(), &konst(3))]);
    let tu = base(&o, &Scope::new(vec![(X, Kind::Int)]), &[eq(nu(), Lin::var(X))]);
    let a = o.strengthen_env(&t, &sc, &[(X, tx.clone()), (U, tu.clone())]);
    let b = o.strengthen_env(&t, &sc, &[(U, tu), (X, tx)]);
    assert!(o.equiv(&sc, &a, &b));
    assert!(o.entails(&a, &Constraint::ge(&nu(), &konst(3))));
}

#[test]
fn eq_var_passes_functions_through() {
    let o = ops();
    let sc = Scope::new(vec![(X, Kind::Int)]);
    let f = fun1(RefType::Bot, RefType::Bot);
    assert_eq!(o.eq_var(&f, &sc, X), f);
    assert_eq!(o.eq_var(&RefType::Bot, &sc, X), RefType::Bot);
    assert_eq!(o.eq_var(&RefType::Top, &sc, X), RefType::Top);
    let ge0 = base(&o, &sc, &[Constraint::ge(&nu(), &konst(0))]);
    assert!(same(&o, &o.eq_var(&ge0, &sc, X), &[Constraint::ge(&nu(), &konst(0)), eq(nu(), Lin::var(X))]));
}

#[test]
fn projection() {
    let o = ops();
    let sc = Scope::new(vec![(X, Kind::Int)]);
    let t = base(&o, &sc, &[eq(nu(), Lin::var(X)), Constraint::le(&Lin::var(X), &konst(3))]);
    assert!(same(&o, &o.project(&t, &sc, X), &[Constraint::le(&nu(), &konst(3))]));
    assert_eq!(o.project(&RefType::Bot, &sc, X), RefType::Bot);
    let f = fun1(t.clone(), base(&o, &TypeOps::<Poly>::out_scope(&sc), &[eq(nu(), Lin::var(X))]));
    let p = o.project(&f, &sc, X);
    let (i, out) = p.entry(&AStack::eps());
    assert!(same(&o, &i, &[Constraint::le(&nu(), &konst(3))]));
    assert_eq!(out, base(&o, &TypeOps::<Poly>::out_scope(&Scope::empty()), &[]));
}

#[test]
fn subtyping() {
    let o = ops();
    let sc = Scope::empty();
    let one = base(&o, &sc, &[eq(nu(), konst(1))]);
    let le2 = base(&o, &sc, &[Constraint::le(&nu(), &konst(2))]);
    assert!(o.subtype(&sc, &RefType::Bot, &one));
    assert!(!o.subtype(&sc, &RefType::Bot, &RefType::Top));
    assert!(o.subtype(&sc, &one, &le2));
    assert!(!o.subtype(&sc, &le2, &one));
    let out = TypeOps::<Poly>::out_scope(&sc);
    let z = Lin::var(TypeOps::<Poly>::dep_var(&sc));
    let f1 = fun1(one.clone(), base(&o, &out, &[eq(nu(), z)]));
    let f2 = fun1(one, base(&o, &out, &[Constraint::le(&nu(), &konst(2))]));
    assert!(o.subtype(&sc, &f1, &f2));
    assert!(!o.subtype(&sc, &f2, &f1));
}

#[test]
fn propagation() {
    let o = ops();
    let sc = Scope::empty();
    let one = base(&o, &sc, &[eq(nu(), konst(1))]);
    let f = fun1(one.clone(), one.clone());
    assert_eq!(o.prop(&sc, &f, &RefType::Bot), (f.clone(), RefType::empty_fun(BTreeSet::new())));
    assert_eq!(o.prop(&sc, &one, &RefType::Bot), (one.clone(), one.clone()));
    assert_eq!(o.prop(&sc, &f, &RefType::Top), (RefType::Top, RefType::Top));
    let le2 = base(&o, &sc, &[Constraint::le(&nu(), &konst(2))]);
    let (a, b) = o.prop(&sc, &one, &le2);
    assert!(o.equiv(&sc, &a, &one) && o.equiv(&sc, &b, &le2));
    let caller = fun1(one.clone(), RefType::Bot);
    let callee = RefType::empty_fun(BTreeSet::new());
    let (callee2, caller2) = o.prop(&sc, &callee, &caller);
    assert_eq!(callee2.entry(&AStack::eps()).0, one);
    assert_eq!(caller2, caller);
}

#[test]
fn shapes_and_widening() {
    let o = ops();
    let sc = Scope::empty();
    let one = base(&o, &sc, &[eq(nu(), konst(1))]);
    assert_eq!(one.shape(), RefType::Bot);
    assert_eq!(RefType::<<Poly as BaseDomain>::Elem>::Top.shape(), RefType::Top);
    let two = base(&o, &sc, &[Constraint::ge(&nu(), &konst(1)), Constraint::le(&nu(), &konst(2))]);
    assert!(same(&o, &o.widen(&sc, &one, &two), &[Constraint::ge(&nu(), &konst(1))]));
    assert_eq!(o.widen(&sc, &one, &one), one);
    let f = fun1(one.clone(), one.clone());
    let g = fun1(two.clone(), one.clone());
    assert_eq!(o.shape_widen(&sc, &f, &g), o.join(&sc, &f, &g));
    assert_eq!(o.widen(&sc, &one, &f), RefType::Top);
    let mut capped = TypeOps::new(Poly);
    capped.depth_cap = 1;
    let nested = fun1(f.clone(), RefType::Bot);
    assert_eq!(capped.shape_widen(&sc, &nested, &nested), RefType::Top);
    let tag = BTreeSet::from([(5, AStack::eps())]);
    let inner = RefType::fun(tag.clone(), BTreeMap::new());
    let outer = RefType::fun(tag, BTreeMap::from([(AStack::eps(), (inner, RefType::Bot))]));
    assert_eq!(o.shape_widen(&sc, &outer, &outer), RefType::Top);
}

#[test]
fn safety() {
    let o = ops();
    let sc = Scope::empty();
    let one = base(&o, &sc, &[eq(nu(), konst(1))]);
    assert!(!RefType::<<Poly as BaseDomain>::Elem>::Top.is_safe());
    assert!(one.is_safe());
    assert!(!fun1(one, RefType::Top).is_safe());
}

#[test]
fn predicate_types_print_in_table_notation() {
    let o = TypeOps::new(Pred::new(parse_templates("nu <= 2\nnu = *").unwrap()));
    let sc = Scope::empty();
    let out = TypeOps::<Pred>::out_scope(&sc);
    let z = TypeOps::<Pred>::dep_var(&sc);
    let t = RefType::fun(
        BTreeSet::new(),
        BTreeMap::from([(
            AStack::eps(),
            (o.base_of(&sc, Kind::Int, &[Constraint::le(&nu(), &konst(2))]), o.base_of(&out, Kind::Int, &[eq(nu(), Lin::var(z))])),
        )]),
    );
    let s = o.show(&t, &sc, &|v| v.to_string());
    assert!(s.starts_with("z0:[ε ◁ {ν:int | ν ≤ 2} → {ν:int | "), "{s}");
    assert!(s.contains("ν - z0 = 0"), "{s}");
}
