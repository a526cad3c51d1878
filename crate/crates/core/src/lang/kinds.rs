use super::ast::{BinOp, Expr, ExprKind, Kind, Var};
use std::collections::HashMap;

/// Binder kinds assigned by a syntactic pre-pass. Unconstrained binders default to `Int`.
#[derive(Clone, Debug, Default)]
pub struct Kinds {
    map: HashMap<u32, Kind>,
}

impl Kinds {
    pub fn of(&self, v: &Var) -> Kind {
        self.of_id(v.id)
    }

    pub fn of_id(&self, id: u32) -> Kind {
        self.map.get(&id).copied().unwrap_or(Kind::Int)
    }

    pub fn set(&mut self, id: u32, k: Kind) {
        self.map.insert(id, k);
    }
}

/// Infers binder kinds from how they are used and what they are bound to.
pub fn infer_kinds(e: &Expr) -> Kinds {
    let mut kinds = Kinds::default();
    // iterate because let-bound kinds can depend on kinds of other binders
    for _ in 0..8 {
        let before = kinds.map.clone();
        visit(e, &mut kinds);
        if kinds.map == before {
            break;
        }
    }
    kinds
}

fn note(kinds: &mut Kinds, e: &Expr, k: Kind) {
    if let ExprKind::Var(v) = &e.kind {
        if k == Kind::Fun {
            kinds.map.insert(v.id, k);
        } else {
            kinds.map.entry(v.id).or_insert(k);
        }
    }
}

fn expr_kind(e: &Expr, kinds: &Kinds) -> Option<Kind> {
    match &e.kind {
        ExprKind::Const(c) => Some(c.kind()),
        ExprKind::Nondet => Some(Kind::Int),
        ExprKind::Lambda(..) | ExprKind::Rec(..) => Some(Kind::Fun),
        ExprKind::BinOp(op, ..) if op.is_arith() => Some(Kind::Int),
        ExprKind::BinOp(..) => Some(Kind::Bool),
        ExprKind::Var(v) => kinds.map.get(&v.id).copied(),
        ExprKind::Ite(_, t, f) => expr_kind(t, kinds).or_else(|| expr_kind(f, kinds)),
        ExprKind::Assert(_) => Some(Kind::Unit),
        ExprKind::App(f, _) => match &f.kind {
            ExprKind::Lambda(_, body) => expr_kind(body, kinds),
            _ => None,
        },
    }
}

fn visit(e: &Expr, kinds: &mut Kinds) {
    match &e.kind {
        ExprKind::App(f, a) => {
            note(kinds, f, Kind::Fun);
            if let ExprKind::Lambda(x, _) = &f.kind {
                if let Some(k) = expr_kind(a, kinds) {
                    kinds.map.entry(x.id).or_insert(k);
                }
            }
        }
        ExprKind::Rec(f, _, _) => {
            kinds.map.insert(f.id, Kind::Fun);
        }
        ExprKind::BinOp(op, l, r) => {
            if op.is_arith() || matches!(op, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge) {
                note(kinds, l, Kind::Int);
                note(kinds, r, Kind::Int);
            } else if op.is_logic() {
                note(kinds, l, Kind::Bool);
                note(kinds, r, Kind::Bool);
            } else if let Some(k) = expr_kind(l, kinds).or_else(|| expr_kind(r, kinds)) {
                note(kinds, l, k);
                note(kinds, r, k);
            }
        }
        ExprKind::Ite(c, _, _) => note(kinds, c, Kind::Bool),
        ExprKind::Assert(c) => note(kinds, c, Kind::Bool),
        _ => {}
    }
    for c in e.children() {
        visit(c, kinds);
    }
}
