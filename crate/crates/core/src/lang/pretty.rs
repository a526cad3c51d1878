use super::ast::{Const, Expr, ExprKind, Var};

const OPEN: u8 = 0;
const APP: u8 = 6;
const ATOM: u8 = 7;

/// Renders an expression as parseable source, re-sugaring `let` forms.
pub fn pretty(e: &Expr) -> String {
    go(e, OPEN)
}

fn paren(s: String, level: u8, ctx: u8) -> String {
    if level < ctx {
        format!("({s})")
    } else {
        s
    }
}

fn open(s: String, ctx: u8) -> String {
    if ctx > OPEN {
        format!("({s})")
    } else {
        s
    }
}

fn lambda_chain(e: &Expr) -> (Vec<&Var>, &Expr) {
    let mut params = Vec::new();
    let mut cur = e;
    while let ExprKind::Lambda(x, b) = &cur.kind {
        params.push(x);
        cur = b;
    }
    (params, cur)
}

fn join_params(ps: &[&Var]) -> String {
    ps.iter().map(|v| format!(" {}", v.name)).collect()
}

fn go(e: &Expr, ctx: u8) -> String {
    match &e.kind {
        ExprKind::Const(Const::Int(n)) if *n < 0 => paren(n.to_string(), APP, ctx),
        ExprKind::Const(c) => c.to_string(),
        ExprKind::Nondet => "nondet".into(),
        ExprKind::Var(v) => v.name.to_string(),
        ExprKind::App(f, a) => {
            if let ExprKind::Lambda(v, body) = &f.kind {
                let s = match &a.kind {
                    ExprKind::Rec(g, x, inner) if g.name == v.name => {
                        let (ps, b) = lambda_chain(inner);
                        format!(
                            "let rec {} {}{} = {} in\n{}",
                            g.name,
                            x.name,
                            join_params(&ps),
                            go(b, OPEN),
                            go(body, OPEN)
                        )
                    }
                    _ => {
                        let (ps, b) = lambda_chain(a);
                        format!("let {}{} = {} in\n{}", v.name, join_params(&ps), go(b, OPEN), go(body, OPEN))
                    }
                };
                return open(s, ctx);
            }
            let s = format!("{} {}", go(f, APP), go(a, ATOM));
            paren(s, APP, ctx)
        }
        ExprKind::Lambda(..) => {
            let (ps, b) = lambda_chain(e);
            let s = format!("fun{} -> {}", join_params(&ps), go(b, OPEN));
            open(s, ctx)
        }
        ExprKind::Rec(f, x, b) => {
            let (ps, body) = lambda_chain(b);
            let s = format!("let rec {} {}{} = {} in {}", f.name, x.name, join_params(&ps), go(body, OPEN), f.name);
            open(s, ctx)
        }
        ExprKind::Ite(c, t, f) => {
            let s = format!("if {} then {} else {}", go(c, OPEN), go(t, OPEN), go(f, OPEN));
            open(s, ctx)
        }
        ExprKind::BinOp(op, l, r) => {
            let p = op.precedence();
            let s = format!("{} {} {}", go(l, p), op.symbol(), go(r, p + 1));
            paren(s, p, ctx)
        }
        ExprKind::Assert(a) => paren(format!("assert {}", go(a, ATOM)), APP, ctx),
    }
}
