mod common;

use refty::corpus::load_corpus;
use refty::lang::{check_well_formed, pretty, BinOp, Const, Expr, ExprKind, LangError, Loc, Program, Var};
use std::collections::HashSet;
use std::sync::Arc;

fn shape(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Const(Const::Int(n)) => n.to_string(),
        ExprKind::Const(c) => format!("{c:?}"),
        ExprKind::Var(x) => x.name.to_string(),
        ExprKind::App(a, b) => format!("App({}, {})", shape(a), shape(b)),
        ExprKind::Lambda(x, b) => format!("Lambda({}, {})", x.name, shape(b)),
        ExprKind::Rec(f, x, b) => format!("Rec({}, {}, {})", f.name, x.name, shape(b)),
        ExprKind::Ite(c, t, f) => format!("Ite({}, {}, {})", shape(c), shape(t), shape(f)),
        ExprKind::BinOp(op, a, b) => format!("BinOp({}, {}, {})", op.symbol(), shape(a), shape(b)),
        ExprKind::Assert(a) => format!("Assert({})", shape(a)),
        ExprKind::Nondet => "nondet".into(),
    }
}

#[test]
fn let_desugars_to_application_of_lambda() {
    let p = Program::parse("let id x = x in (id 1) + (id 2)").unwrap();
    assert_eq!(shape(&p.root), "App(Lambda(id, BinOp(+, App(id, 1), App(id, 2))), Lambda(x, x))");
}

#[test]
fn let_rec_desugars_to_rec() {
    let p = Program::parse("let rec fib x = if x >= 2 then fib (x-1) + fib (x-2) else 1 in fib").unwrap();
    assert_eq!(
        shape(&p.root),
        "App(Lambda(fib, fib), Rec(fib, x, Ite(BinOp(>=, x, 2), BinOp(+, App(fib, BinOp(-, x, 1)), App(fib, BinOp(-, x, 2))), 1)))"
    );
}

#[test]
fn unbound_variable_is_reported_with_position() {
    let err = Program::parse("let x = 1 in y").err();
    assert_eq!(err, Some(LangError::Unbound { name: "y".into(), line: 1, col: 14 }));
}

#[test]
fn syntax_errors_carry_positions() {
    match Program::parse("let x = in 1") {
        Err(LangError::Syntax { line, col, .. }) => assert_eq!((line, col), (1, 9)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn multi_argument_functions_curry() {
    let p = Program::parse("let f x y = x + y in f 1 2").unwrap();
    assert_eq!(shape(&p.root), "App(Lambda(f, App(App(f, 1), 2)), Lambda(x, Lambda(y, BinOp(+, x, y))))");
}

#[test]
fn shadowed_binders_are_freshened() {
    let p = Program::parse("let x = 1 in let x = x + 1 in x").unwrap();
    let ids: Vec<u32> = p.binders().iter().map(|v| v.id).collect();
    assert_eq!(ids.len(), 2);
    assert_ne!(ids[0], ids[1]);
}

fn var(id: u32, name: &str) -> Var {
    Var { id, name: Arc::from(name), line: 1, col: 1 }
}

fn expr(id: u32, kind: ExprKind) -> Expr {
    Expr::new(Loc::new(id, 1, 1), kind)
}

#[test]
fn well_formedness() {
    let closed = expr(0, ExprKind::Lambda(var(1, "x"), Box::new(expr(2, ExprKind::Var(var(1, "x"))))));
    assert_eq!(check_well_formed(&closed), Ok(()));
    let free = expr(0, ExprKind::Var(var(7, "z")));
    assert!(matches!(check_well_formed(&free), Err(LangError::Unbound { name, .. }) if name == "z"));
    let dup = expr(
        0,
        ExprKind::BinOp(BinOp::Add, Box::new(expr(1, ExprKind::Const(Const::Int(1)))), Box::new(expr(1, ExprKind::Const(Const::Int(2))))),
    );
    assert_eq!(check_well_formed(&dup), Err(LangError::DuplicateLoc(1)));
}

fn locs(e: &Expr) -> Vec<u32> {
    let mut out = Vec::new();
    e.walk(&mut |x| out.push(x.loc.id));
    out.extend(e.binders().iter().map(|v| v.id));
    out
}

#[test]
fn corpus_locations_are_unique() {
    for e in load_corpus(&common::corpus_dir()).unwrap() {
        let ls = locs(&e.program.root);
        let set: HashSet<u32> = ls.iter().copied().collect();
        assert_eq!(set.len(), ls.len(), "{}", e.name);
    }
}

#[test]
fn pretty_then_parse_is_identity_up_to_locations() {
    for e in load_corpus(&common::corpus_dir()).unwrap() {
        let printed = pretty(&e.program.root);
        let again = Program::parse(&printed).unwrap_or_else(|err| panic!("{}: {err}\n{printed}", e.name));
        assert_eq!(shape(&again.root), shape(&e.program.root), "{}", e.name);
        assert_eq!(pretty(&again.root), printed, "{}", e.name);
    }
}
