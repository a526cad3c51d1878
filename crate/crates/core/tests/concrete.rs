use refty::concrete::{
    concrete_safe, run_concrete, value_join, value_join_all, value_leq, value_prop, CNode, CValue, ConcreteConfig, ExecMap,
    Interner, Outcome, EMPTY_ENV, EPS,
};
use refty::lang::{Const, Program};

fn stacks() -> (u32, u32) {
    let mut ctx = Interner::default();
    let q = ctx.push(10, EPS);
    let a = ctx.push(7, q);
    (q, a)
}

fn int(n: i64) -> CValue {
    CValue::int(n)
}

fn t1(s: u32, i: CValue, o: CValue) -> CValue {
    CValue::table([(s, i, o)])
}

#[test]
fn order_examples() {
    let (q, _) = stacks();
    assert!(value_leq(&CValue::Bot, &t1(q, int(1), int(1))));
    assert!(!value_leq(&int(1), &int(2)));
    assert!(value_leq(&t1(q, int(1), CValue::Bot), &t1(q, int(1), int(1))));
    assert!(value_leq(&t1(q, int(1), int(1)), &CValue::Err));
    assert!(!value_leq(&CValue::Err, &int(1)));
}

#[test]
fn join_examples() {
    let (q, a) = stacks();
    let v = t1(q, int(1), int(1));
    assert_eq!(value_join(&CValue::Bot, &v), v);
    assert_eq!(value_join(&int(1), &int(2)), CValue::Err);
    assert_eq!(
        value_join(&v, &t1(a, int(2), CValue::Bot)),
        CValue::table([(q, int(1), int(1)), (a, int(2), CValue::Bot)])
    );
    assert_eq!(value_join_all([&int(3), &CValue::Bot, &int(3)]), int(3));
    assert_eq!(value_join(&int(1), &v), CValue::Err);
}

#[test]
fn propagation_examples() {
    let (q, _) = stacks();
    let t = t1(q, int(1), int(1));
    assert_eq!(value_prop(&t, &CValue::Bot), (t.clone(), CValue::empty_table()));
    assert_eq!(value_prop(&int(5), &CValue::Bot), (int(5), int(5)));
    assert_eq!(value_prop(&t, &t1(q, int(1), CValue::Bot)), (t.clone(), t.clone()));
    assert_eq!(value_prop(&t, &CValue::Err), (CValue::Err, CValue::Err));
}

#[test]
fn inputs_flow_backwards_through_tables() {
    let (q, _) = stacks();
    let callee = CValue::empty_table();
    let caller = t1(q, int(4), CValue::Bot);
    let (callee2, caller2) = value_prop(&callee, &caller);
    assert_eq!(callee2, t1(q, int(4), CValue::Bot));
    assert_eq!(caller2, caller);
}

#[test]
fn first_iterate_of_the_id_program() {
    let p = Program::parse("let id x = x in\nlet u = id 1 in\nid 2").unwrap();
    let run = run_concrete(&p, &ConcreteConfig { fuel: 1, record_iterates: true, ..Default::default() });
    assert_eq!(run.outcome, Outcome::Diverged);
    let m = &run.iterates[1];
    assert_eq!(m.len(), 2);
    let h = run.ctx.find_node(CNode::Expr(1, EMPTY_ENV)).unwrap();
    let o = run.ctx.find_node(CNode::Expr(12, EMPTY_ENV)).unwrap();
    assert_eq!(m.get(h), t1(run.stack(&[1]).unwrap(), CValue::empty_table(), CValue::Bot));
    assert_eq!(m.get(o), CValue::empty_table());
}

#[test]
fn constant_program() {
    let p = Program::parse("1").unwrap();
    let run = run_concrete(&p, &ConcreteConfig { record_iterates: true, ..Default::default() });
    assert_eq!(run.outcome, Outcome::Fixpoint);
    assert_eq!(run.iterates.len(), 2);
    assert_eq!(run.iterates[1], run.map);
    assert_eq!(run.map.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>(), vec![int(1)]);
}

#[test]
fn safety_examples() {
    let p = Program::parse("let id x = x in\nlet u = id 1 in\nid 2").unwrap();
    assert!(concrete_safe(&run_concrete(&p, &ConcreteConfig::default()).map));
    assert!(!concrete_safe(&ExecMap::top()));
    let (q, _) = stacks();
    let mut m = ExecMap::bottom();
    m.set(0, t1(q, CValue::Err, CValue::Bot));
    assert!(!concrete_safe(&m));
}

fn ends_in_error(src: &str) -> bool {
    let p = Program::parse(src).unwrap();
    run_concrete(&p, &ConcreteConfig::default()).map.is_top()
}

#[test]
fn errors_yield_the_top_map() {
    assert!(ends_in_error("1 2"));
    assert!(ends_in_error("if 1 then 2 else 3"));
    assert!(ends_in_error("assert (1 > 2)"));
    assert!(ends_in_error("true + 1"));
    assert!(ends_in_error("(fun x -> x) && true"));
    assert!(!ends_in_error("assert (2 > 1)"));
    assert!(!ends_in_error("if 1 < 2 then 2 else 3 2"));
}

#[test]
fn nondet_is_deterministic_per_seed() {
    let p = Program::parse("let x = nondet in x + 1").unwrap();
    let cfg = ConcreteConfig { seed: 7, ..Default::default() };
    let a = run_concrete(&p, &cfg);
    let b = run_concrete(&p, &cfg);
    assert_eq!(a.map, b.map);
    let x = a.at_var(2)[0].1.clone();
    match x {
        CValue::Const(Const::Int(n)) => assert!((-4..=4).contains(&n)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn recursion_fixture_under_fuel() {
    let p = Program::parse("let rec f n =\n  if n = 1 then 0 else f (n - 1)\nin (f 2) + (f 0)").unwrap();
    let run = run_concrete(&p, &ConcreteConfig { fuel: 60, ..Default::default() });
    assert_eq!(run.outcome, Outcome::Diverged);
    assert!(run.map.is_safe());
    assert!(run.at_expr(7).is_empty() && run.at_expr(3).is_empty() && run.at_expr(0).is_empty());
    assert_eq!(run.at_expr(4).len(), 1);
}

#[test]
fn json_dump_lists_nodes_and_tables() {
    let p = Program::parse("let id x = x in\nlet u = id 1 in\nid 2").unwrap();
    let run = run_concrete(&p, &ConcreteConfig::default());
    let j = run.to_json(&p);
    assert_eq!(j["outcome"], "fixpoint");
    assert_eq!(j["nodes"].as_array().unwrap().len(), 17);
    let tables = j["nodes"].as_array().unwrap().iter().filter(|n| n["value"].is_array()).count();
    assert_eq!(tables, 6);
    let entry = &j["nodes"].as_array().unwrap().iter().find(|n| n["value"].is_array()).unwrap()["value"][0];
    assert!(entry.get("stack").is_some() && entry.get("in").is_some() && entry.get("out").is_some());
}
