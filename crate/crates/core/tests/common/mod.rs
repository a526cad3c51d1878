#![allow(dead_code)]

use proptest::prelude::*;
use refty::base::{BaseDomain, Scope};
use refty::concrete::{CValue, Interner, StackId, EPS};
use refty::lang::{Const, Kind};
use refty::linear::{Constraint, Lin, SVar};
use refty::types::{AStack, RefType, TypeOps};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

pub type Ty<D> = RefType<<D as BaseDomain>::Elem>;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus_quals() -> String {
    std::fs::read_to_string(corpus_dir().join("quals.txt")).expect("corpus qualifiers")
}

pub const ID_PROGRAM: &str = "let id x = x in\nlet u = id 1 in\nid 2";
pub const LIQUID_QUALS: &str = "nu <= 2\nnu <= 1\nnu = *\nnu = 1\nnu = 2\n";

pub fn nu() -> Lin {
    Lin::var(SVar::Nu)
}

pub fn konst(c: i64) -> Lin {
    Lin::constant(c)
}

/// Atoms `ν ≥ 0` and `ν = v` for each numeric scope variable `v`.
pub fn small_atoms(sc: &Scope) -> Vec<Constraint> {
    let mut atoms = vec![Constraint::ge(&nu(), &konst(0))];
    atoms.extend(sc.numeric().into_iter().map(|v| Constraint::eq(&nu(), &Lin::var(v))));
    atoms
}

/// Distinct int refinements generated by conjunctions of `small_atoms`, plus ⊥.
pub fn enum_bases<D: BaseDomain>(ops: &TypeOps<D>, sc: &Scope) -> Vec<Ty<D>> {
    let atoms = small_atoms(sc);
    let mut out: Vec<Ty<D>> = vec![RefType::Bot];
    for mask in 0..(1u32 << atoms.len()) {
        let cs: Vec<Constraint> =
            atoms.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, c)| c.clone()).collect();
        let t = RefType::Base(Kind::Int, ops.dom.alpha(sc, &cs));
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

/// All safe types of table depth at most `depth` whose tables have at most
/// one entry, at stack `stack`.
pub fn enum_types<D: BaseDomain>(ops: &TypeOps<D>, sc: &Scope, depth: usize, stack: &AStack) -> Vec<Ty<D>> {
    let mut out = enum_bases(ops, sc);
    if depth == 0 {
        return out;
    }
    let ins = enum_types(ops, sc, depth - 1, stack);
    let outs = enum_types(ops, &TypeOps::<D>::out_scope(sc), depth - 1, stack);
    out.push(RefType::empty_fun(BTreeSet::new()));
    for i in &ins {
        for o in &outs {
            out.push(RefType::fun(BTreeSet::new(), BTreeMap::from([(stack.clone(), (i.clone(), o.clone()))])));
        }
    }
    out
}

/// Shape of a random concrete value; stacks are indices into a fixed list.
#[derive(Clone, Debug)]
pub enum ValSk {
    Bot,
    Err,
    Int(i64),
    Bool(bool),
    Table(Vec<(usize, ValSk, ValSk)>),
}

pub fn val_sk() -> impl Strategy<Value = ValSk> {
    let leaf = prop_oneof![
        4 => Just(ValSk::Bot),
        1 => Just(ValSk::Err),
        6 => (-2i64..=2).prop_map(ValSk::Int),
        2 => any::<bool>().prop_map(ValSk::Bool),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop::collection::vec((0usize..3, inner.clone(), inner), 0..=3).prop_map(ValSk::Table)
    })
}

/// Interner with the stacks used by `ValSk`.
pub fn value_stacks() -> (Interner, Vec<StackId>) {
    let mut ctx = Interner::default();
    let s1 = ctx.push(1, EPS);
    let s2 = ctx.push(2, s1);
    (ctx, vec![EPS, s1, s2])
}

pub fn value_of(sk: &ValSk, stacks: &[StackId]) -> CValue {
    match sk {
        ValSk::Bot => CValue::Bot,
        ValSk::Err => CValue::Err,
        ValSk::Int(n) => CValue::int(*n),
        ValSk::Bool(b) => CValue::Const(Const::Bool(*b)),
        ValSk::Table(es) => {
            let mut entries: BTreeMap<StackId, (CValue, CValue)> = BTreeMap::new();
            for (s, i, o) in es {
                entries.insert(stacks[*s % stacks.len()], (value_of(i, stacks), value_of(o, stacks)));
            }
            CValue::table(entries.into_iter().map(|(s, (i, o))| (s, i, o)))
        }
    }
}

/// Shape of a random refinement type; base refinements select atoms of `type_atoms`.
#[derive(Clone, Debug)]
pub enum TySk {
    Bot,
    Top,
    Base(u16),
    Fun(Vec<(usize, TySk, TySk)>),
}

pub fn ty_sk() -> impl Strategy<Value = TySk> {
    let leaf = prop_oneof![
        3 => Just(TySk::Bot),
        1 => Just(TySk::Top),
        8 => any::<u16>().prop_map(TySk::Base),
    ];
    leaf.prop_recursive(2, 12, 2, |inner| {
        prop::collection::vec((0usize..2, inner.clone(), inner), 0..=2).prop_map(TySk::Fun)
    })
}

/// Candidate atoms for random base refinements over `sc`.
pub fn type_atoms(sc: &Scope) -> Vec<Constraint> {
    let mut atoms = vec![
        Constraint::ge(&nu(), &konst(0)),
        Constraint::le(&nu(), &konst(2)),
        Constraint::eq(&nu(), &konst(1)),
        Constraint::ge(&nu(), &konst(-1)),
    ];
    for v in sc.numeric() {
        atoms.push(Constraint::eq(&nu(), &Lin::var(v)));
        atoms.push(Constraint::le(&Lin::var(v), &nu()));
    }
    atoms
}

pub fn type_stacks() -> Vec<AStack> {
    vec![AStack::eps(), AStack(vec![7])]
}

pub fn type_of<D: BaseDomain>(ops: &TypeOps<D>, sk: &TySk, sc: &Scope) -> Ty<D> {
    match sk {
        TySk::Bot => RefType::Bot,
        TySk::Top => RefType::Top,
        TySk::Base(bits) => {
            let atoms = type_atoms(sc);
            let cs: Vec<Constraint> =
                atoms.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, c)| c.clone()).collect();
            RefType::Base(Kind::Int, ops.dom.alpha(sc, &cs))
        }
        TySk::Fun(es) => {
            let stacks = type_stacks();
            let out = TypeOps::<D>::out_scope(sc);
            let mut table = BTreeMap::new();
            for (s, i, o) in es {
                table.insert(stacks[*s % stacks.len()].clone(), (type_of(ops, i, sc), type_of(ops, o, &out)));
            }
            RefType::fun(BTreeSet::new(), table)
        }
    }
}

/// Small closed programs; variables are de Bruijn-style indices resolved when rendered.
#[derive(Clone, Debug)]
pub enum ProgSk {
    Int(i64),
    Nondet,
    Var(usize),
    Add(Box<ProgSk>, Box<ProgSk>),
    Sub(Box<ProgSk>, Box<ProgSk>),
    Ite(Box<ProgSk>, Box<ProgSk>, Box<ProgSk>, Box<ProgSk>),
    Let(Box<ProgSk>, Box<ProgSk>),
    LetFun(Box<ProgSk>, Box<ProgSk>),
    LetRec(Box<ProgSk>, Box<ProgSk>),
    App(usize, Box<ProgSk>),
    /// `(let h g z = g z in h f a)` for a function `f` in scope.
    HigherOrder(usize, Box<ProgSk>),
    Assert(Box<ProgSk>, Box<ProgSk>),
}

pub fn prog_sk() -> impl Strategy<Value = ProgSk> {
    let leaf = prop_oneof![
        4 => (-2i64..=3).prop_map(ProgSk::Int),
        1 => Just(ProgSk::Nondet),
        4 => (0usize..4).prop_map(ProgSk::Var),
    ];
    leaf.prop_recursive(4, 24, 4, |inner| {
        let b = |s: BoxedStrategy<ProgSk>| s.prop_map(Box::new);
        let i = inner.boxed();
        prop_oneof![
            1 => (b(i.clone()), b(i.clone())).prop_map(|(x, y)| ProgSk::Add(x, y)),
            1 => (b(i.clone()), b(i.clone())).prop_map(|(x, y)| ProgSk::Sub(x, y)),
            1 => (b(i.clone()), b(i.clone()), b(i.clone()), b(i.clone())).prop_map(|(a, c, t, e)| ProgSk::Ite(a, c, t, e)),
            1 => (b(i.clone()), b(i.clone())).prop_map(|(x, y)| ProgSk::Let(x, y)),
            2 => (b(i.clone()), b(i.clone())).prop_map(|(x, y)| ProgSk::LetFun(x, y)),
            1 => (b(i.clone()), b(i.clone())).prop_map(|(x, y)| ProgSk::LetRec(x, y)),
            3 => (0usize..4, b(i.clone())).prop_map(|(f, x)| ProgSk::App(f, x)),
            1 => (0usize..4, b(i.clone())).prop_map(|(f, x)| ProgSk::HigherOrder(f, x)),
            1 => (b(i.clone()), b(i)).prop_map(|(x, y)| ProgSk::Assert(x, y)),
        ]
    })
}

pub fn render(sk: &ProgSk) -> String {
    struct Env {
        ints: Vec<String>,
        funs: Vec<String>,
        fresh: usize,
    }
    fn pick(vs: &[String], i: usize) -> Option<String> {
        (!vs.is_empty()).then(|| vs[vs.len() - 1 - i % vs.len()].clone())
    }
    fn scoped(env: &mut Env, x: &str, fun: bool, e: &ProgSk) -> String {
        let vs = if fun { &mut env.funs } else { &mut env.ints };
        vs.push(x.to_string());
        let out = go(e, env);
        let vs = if fun { &mut env.funs } else { &mut env.ints };
        vs.pop();
        out
    }
    fn bind(env: &mut Env, p: &str) -> String {
        env.fresh += 1;
        format!("{p}{}", env.fresh)
    }
    fn go(sk: &ProgSk, env: &mut Env) -> String {
        match sk {
            ProgSk::Int(n) if *n < 0 => format!("({n})"),
            ProgSk::Int(n) => n.to_string(),
            ProgSk::Nondet => "nondet".into(),
            ProgSk::Var(i) => pick(&env.ints, *i).unwrap_or_else(|| "0".into()),
            ProgSk::Add(a, b) => format!("({} + {})", go(a, env), go(b, env)),
            ProgSk::Sub(a, b) => format!("({} - {})", go(a, env), go(b, env)),
            ProgSk::Ite(a, c, t, e) => {
                format!("(if {} <= {} then {} else {})", go(a, env), go(c, env), go(t, env), go(e, env))
            }
            ProgSk::Let(a, b) => {
                let x = bind(env, "x");
                let a = go(a, env);
                let b = scoped(env, &x, false, b);
                format!("(let {x} = {a} in {b})")
            }
            ProgSk::LetFun(body, rest) => {
                let f = bind(env, "f");
                let y = bind(env, "y");
                let body = scoped(env, &y, false, body);
                let rest = scoped(env, &f, true, rest);
                format!("(let {f} {y} = {body} in {rest})")
            }
            ProgSk::LetRec(body, rest) => {
                let f = bind(env, "r");
                let y = bind(env, "y");
                env.funs.push(f.clone());
                let body = scoped(env, &y, false, body);
                env.funs.pop();
                let rest = scoped(env, &f, true, rest);
                format!("(let rec {f} {y} = if {y} <= 0 then {body} else {f} ({y} - 1) in {rest})")
            }
            ProgSk::App(i, a) => {
                let arg = go(a, env);
                match pick(&env.funs, *i) {
                    Some(f) => format!("({f} {arg})"),
                    None => {
                        let y = bind(env, "y");
                        format!("((fun {y} -> {y} + 1) {arg})")
                    }
                }
            }
            ProgSk::HigherOrder(i, a) => {
                let arg = go(a, env);
                let (h, g, z) = (bind(env, "h"), bind(env, "g"), bind(env, "z"));
                let f = pick(&env.funs, *i).unwrap_or_else(|| "(fun w -> w - 1)".into());
                format!("(let {h} {g} {z} = {g} {z} in {h} {f} {arg})")
            }
            ProgSk::Assert(a, b) => format!("(assert ({} <= {}))", go(a, env), go(b, env)),
        }
    }
    go(sk, &mut Env { ints: Vec::new(), funs: Vec::new(), fresh: 0 })
}
