mod common;

use common::{konst, nu};
use num_bigint::BigInt;
use refty::base::{parse_templates, BaseDomain, Oct, Poly, Pred, Scope};
use refty::lang::Kind;
use refty::linear::{entails_all, Constraint, Lin, SVar};

const X: SVar = SVar::P(1);
const Y: SVar = SVar::P(2);
const F: SVar = SVar::P(3);

fn x() -> Lin {
    Lin::var(X)
}

fn sc_x() -> Scope {
    Scope::new(vec![(X, Kind::Int)])
}

fn sc_xy() -> Scope {
    Scope::new(vec![(X, Kind::Int), (Y, Kind::Int)])
}

fn pred() -> Pred {
    Pred::new(parse_templates("nu >= 0\nnu <= 0\nnu <= 2\nnu >= 1\nnu = 1\nnu = *\nnu <= *\nnu >= *\n* <= 3").unwrap())
}

fn same<D: BaseDomain>(d: &D, e: &D::Elem, want: &[Constraint]) -> bool {
    let g = d.gamma(e).expect("not bottom");
    entails_all(&g, want) && entails_all(want, &g)
}

fn asg(pairs: &[(SVar, i64)]) -> impl Fn(SVar) -> Option<BigInt> + '_ {
    move |v| pairs.iter().find(|(w, _)| *w == v).map(|(_, c)| BigInt::from(*c))
}

fn check_common<D: BaseDomain>(d: &D) {
    let sc = Scope::empty();
    let one = d.alpha(&sc, &[Constraint::eq(&nu(), &konst(1))]);
    let le2 = d.alpha(&sc, &[Constraint::le(&nu(), &konst(2))]);
    assert!(same(d, &one, &[Constraint::eq(&nu(), &konst(1))]), "{}", d.name());
    assert!(d.leq(&sc, &one, &le2), "{}", d.name());
    assert!(!d.leq(&sc, &le2, &one), "{}", d.name());
    let bot = d.bottom(&sc);
    assert_eq!(d.join(&sc, &one, &bot), one, "{}", d.name());
    assert!(d.leq(&sc, &bot, &one) && d.leq(&sc, &one, &d.top(&sc)), "{}", d.name());
    let ge0 = d.alpha(&sc, &[Constraint::ge(&nu(), &konst(0))]);
    let le0 = d.alpha(&sc, &[Constraint::le(&nu(), &konst(0))]);
    assert!(same(d, &d.meet(&sc, &ge0, &le0), &[Constraint::eq(&nu(), &konst(0))]), "{}", d.name());
    assert!(d.member(&ge0, &asg(&[(SVar::Nu, 1)])), "{}", d.name());
    assert!(!d.member(&ge0, &asg(&[(SVar::Nu, -1)])), "{}", d.name());
    let eqx = d.alpha(&sc_x(), &[Constraint::eq(&nu(), &x())]);
    assert!(!d.member(&eqx, &asg(&[(X, 2), (SVar::Nu, 3)])), "{}", d.name());
    assert!(d.member(&eqx, &asg(&[(X, 3), (SVar::Nu, 3)])), "{}", d.name());
    let with_f = Scope::new(vec![(X, Kind::Int), (F, Kind::Fun)]);
    let e = d.alpha(&with_f, &[Constraint::eq(&nu(), &x())]);
    assert!(d.member(&e, &asg(&[(X, 3), (SVar::Nu, 3)])), "{}: fun-kinded variables are unconstrained", d.name());
}

#[test]
fn lattice_examples_in_every_domain() {
    check_common(&Poly);
    check_common(&Oct);
    check_common(&pred());
}

#[test]
fn constants() {
    let sc = Scope::empty();
    let c1 = Poly.alpha(&sc, &[Constraint::eq(&nu(), &konst(1))]);
    assert_eq!(Poly.show(&c1, &|v| v.to_string()), "ν = 1");
    let c0 = Oct.alpha(&sc, &[Constraint::eq(&nu(), &konst(0))]);
    assert!(same(&Oct, &c0, &[Constraint::le(&nu(), &konst(0)), Constraint::ge(&nu(), &konst(0))]));
    let q = Pred::new(parse_templates("nu = 1\nnu >= 0\nnu <= 0").unwrap());
    let t = q.alpha(&sc, &[Constraint::eq(&nu(), &konst(1))]);
    assert!(same(&q, &t, &[Constraint::eq(&nu(), &konst(1))]));
}

#[test]
fn strengthen_with_equalities() {
    let sc = sc_x();
    for_each(|d| {
        let ge0 = d.0(&sc, &[Constraint::ge(&nu(), &konst(0))]);
        let s = d.1(&sc, &ge0, &[Constraint::eq(&nu(), &x())]);
        assert!(d.2(&s, &[Constraint::ge(&nu(), &konst(0)), Constraint::eq(&nu(), &x())]));
    });
    let q = Pred::new(parse_templates("nu = *\nnu <= 2").unwrap());
    let top = q.top(&sc);
    assert!(same(&q, &q.meet_cons(&sc, &top, &[Constraint::eq(&nu(), &x())]), &[Constraint::eq(&nu(), &x())]));
    assert!(Poly.is_bottom(&Poly.meet_cons(&sc, &Poly.bottom(&sc), &[Constraint::eq(&nu(), &x())])));
    let xle = Poly.alpha(&sc, &[Constraint::le(&x(), &nu())]);
    let s = Poly.meet_cons(&sc, &xle, &[Constraint::eq(&x(), &konst(1))]);
    assert!(same(&Poly, &s, &[Constraint::le(&x(), &nu()), Constraint::eq(&x(), &konst(1))]));
    let s = Oct.meet_cons(&sc, &Oct.top(&sc), &[Constraint::eq(&x(), &konst(0))]);
    assert!(same(&Oct, &s, &[Constraint::le(&x(), &konst(0)), Constraint::ge(&x(), &konst(0))]));
}

type Ops<'a> = (
    &'a dyn Fn(&Scope, &[Constraint]) -> Vec<Constraint>,
    &'a dyn Fn(&Scope, &Vec<Constraint>, &[Constraint]) -> Vec<Constraint>,
    &'a dyn Fn(&Vec<Constraint>, &[Constraint]) -> bool,
);

fn for_each(f: impl Fn(Ops)) {
    fn run<D: BaseDomain>(d: &D, f: &dyn Fn(Ops)) {
        let alpha = |sc: &Scope, cs: &[Constraint]| d.gamma(&d.alpha(sc, cs)).unwrap_or_default();
        let meet = |sc: &Scope, a: &Vec<Constraint>, cs: &[Constraint]| {
            let e = d.meet_cons(sc, &d.alpha(sc, a), cs);
            d.gamma(&e).unwrap_or_default()
        };
        let eq = |a: &Vec<Constraint>, want: &[Constraint]| entails_all(a, want) && entails_all(want, a);
        f((&alpha, &meet, &eq));
    }
    run(&Poly, &f);
    run(&Oct, &f);
    run(&pred(), &f);
}

#[test]
fn substitution_of_nu() {
    let y2 = Lin::term(Y, 2);
    let sc = Scope::new(vec![(Y, Kind::Int)]);
    let to = sc.with(X, Kind::Int);
    let e = Poly.alpha(&sc, &[Constraint::eq(&nu(), &y2)]);
    let r = Poly.rename(&to, &e, &|v| if v == SVar::Nu { X } else { v });
    assert!(same(&Poly, &r, &[Constraint::eq(&x(), &y2)]));
    let ge = Poly.alpha(&Scope::empty(), &[Constraint::ge(&nu(), &konst(0))]);
    let r = Poly.rename(&sc_x(), &ge, &|v| if v == SVar::Nu { X } else { v });
    assert!(same(&Poly, &r, &[Constraint::ge(&x(), &konst(0))]));
    let b = Poly.rename(&sc_x(), &Poly.bottom(&Scope::empty()), &|v| if v == SVar::Nu { X } else { v });
    assert!(Poly.is_bottom(&b));
}

#[test]
fn projection() {
    let sc = sc_x();
    let e = Poly.alpha(&sc, &[Constraint::eq(&nu(), &x()), Constraint::le(&x(), &konst(3))]);
    assert!(same(&Poly, &Poly.project(&Scope::empty(), &e, X), &[Constraint::le(&nu(), &konst(3))]));
    let e = Oct.alpha(&sc, &[Constraint::eq(&nu(), &x()), Constraint::le(&x(), &konst(3))]);
    assert!(same(&Oct, &Oct.project(&Scope::empty(), &e, X), &[Constraint::le(&nu(), &konst(3))]));
    let top = Poly.project(&Scope::empty(), &Poly.top(&sc), X);
    assert_eq!(top, Poly.top(&Scope::empty()));
    let ge = Poly.alpha(&sc, &[Constraint::ge(&nu(), &konst(0))]);
    assert!(same(&Poly, &Poly.project(&Scope::empty(), &ge, X), &[Constraint::ge(&nu(), &konst(0))]));
}

#[test]
fn widening() {
    let sc = Scope::empty();
    let a = Poly.alpha(&sc, &[Constraint::eq(&nu(), &konst(1))]);
    let b = Poly.alpha(&sc, &[Constraint::ge(&nu(), &konst(1)), Constraint::le(&nu(), &konst(2))]);
    assert!(same(&Poly, &Poly.widen(&sc, &a, &b, &[]), &[Constraint::ge(&nu(), &konst(1))]));
    let sx = sc_x();
    let th = [Constraint::le(&nu(), &x())];
    let a = Poly.alpha(&sx, &[Constraint::eq(&nu(), &konst(1)), Constraint::le(&nu(), &x())]);
    let b = Poly.alpha(&sx, &[Constraint::ge(&nu(), &konst(1)), Constraint::le(&nu(), &konst(2)), Constraint::le(&nu(), &x())]);
    assert!(same(&Poly, &Poly.widen(&sx, &a, &b, &th), &[Constraint::ge(&nu(), &konst(1)), Constraint::le(&nu(), &x())]));
    let q = pred();
    let a = q.alpha(&sx, &[Constraint::eq(&nu(), &konst(1))]);
    let b = q.alpha(&sx, &[Constraint::eq(&nu(), &konst(0))]);
    assert_eq!(q.widen(&sx, &a, &b, &[]), q.join(&sx, &a, &b));
    let a = Oct.alpha(&sc, &[Constraint::eq(&nu(), &konst(1))]);
    assert_eq!(Oct.widen(&sc, &a, &a, &[]), a);
    let a = Poly.alpha(&sc, &[Constraint::eq(&nu(), &konst(1))]);
    assert_eq!(Poly.widen(&sc, &a, &a, &[]), a);
}

#[test]
fn relational_join_keeps_shared_relations() {
    let sc = sc_xy();
    let a = Poly.alpha(&sc, &[Constraint::eq(&nu(), &x()), Constraint::eq(&x(), &konst(0))]);
    let b = Poly.alpha(&sc, &[Constraint::eq(&nu(), &x()), Constraint::eq(&x(), &konst(5))]);
    let j = Poly.join(&sc, &a, &b);
    assert!(same(
        &Poly,
        &j,
        &[Constraint::eq(&nu(), &x()), Constraint::ge(&x(), &konst(0)), Constraint::le(&x(), &konst(5))]
    ));
}
