use super::ast::{BinOp, Const, Expr, ExprKind, Loc, Var};
use super::LangError;
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Let,
    Rec,
    And,
    In,
    Fun,
    If,
    Then,
    Else,
    Assert,
    True,
    False,
    Nondet,
    LParen,
    RParen,
    Arrow,
    Op(BinOp),
    Minus,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(src: &str) -> Result<Vec<Token>, LangError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let syntax = |line, col, msg: String| LangError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let bump = |i: &mut usize, line: &mut u32, col: &mut u32| {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };
        if c.is_whitespace() {
            bump(&mut i, &mut line, &mut col);
            continue;
        }
        if c == '(' && chars.get(i + 1) == Some(&'*') {
            let mut depth = 0;
            loop {
                if i >= chars.len() {
                    return Err(syntax(tl, tc, "unterminated comment".into()));
                }
                if chars[i] == '(' && chars.get(i + 1) == Some(&'*') {
                    depth += 1;
                    bump(&mut i, &mut line, &mut col);
                    bump(&mut i, &mut line, &mut col);
                } else if chars[i] == '*' && chars.get(i + 1) == Some(&')') {
                    depth -= 1;
                    bump(&mut i, &mut line, &mut col);
                    bump(&mut i, &mut line, &mut col);
                    if depth == 0 {
                        break;
                    }
                } else {
                    bump(&mut i, &mut line, &mut col);
                }
            }
            continue;
        }
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, col: tc });
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump(&mut i, &mut line, &mut col);
            }
            let text: String = chars[start..i].iter().collect();
            let n = text
                .parse::<i64>()
                .map_err(|_| syntax(tl, tc, format!("integer literal out of range: {text}")))?;
            push(&mut out, Tok::Int(n));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                bump(&mut i, &mut line, &mut col);
            }
            let text: String = chars[start..i].iter().collect();
            let tok = match text.as_str() {
                "let" => Tok::Let,
                "rec" => Tok::Rec,
                "and" => Tok::And,
                "in" => Tok::In,
                "fun" => Tok::Fun,
                "if" => Tok::If,
                "then" => Tok::Then,
                "else" => Tok::Else,
                "assert" => Tok::Assert,
                "true" => Tok::True,
                "false" => Tok::False,
                "nondet" => Tok::Nondet,
                _ => Tok::Ident(text),
            };
            push(&mut out, tok);
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let tok2 = match two.as_str() {
            "->" => Some(Tok::Arrow),
            "<=" => Some(Tok::Op(BinOp::Le)),
            ">=" => Some(Tok::Op(BinOp::Ge)),
            "<>" | "!=" => Some(Tok::Op(BinOp::Ne)),
            "&&" => Some(Tok::Op(BinOp::And)),
            "||" => Some(Tok::Op(BinOp::Or)),
            _ => None,
        };
        if let Some(tok) = tok2 {
            bump(&mut i, &mut line, &mut col);
            bump(&mut i, &mut line, &mut col);
            push(&mut out, tok);
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '+' => Tok::Op(BinOp::Add),
            '-' => Tok::Minus,
            '*' => Tok::Op(BinOp::Mul),
            '=' => Tok::Op(BinOp::Eq),
            '<' => Tok::Op(BinOp::Lt),
            '>' => Tok::Op(BinOp::Gt),
            _ => return Err(syntax(tl, tc, format!("unexpected character '{c}'"))),
        };
        bump(&mut i, &mut line, &mut col);
        push(&mut out, tok);
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    next_id: u32,
    scope: Vec<(String, Var)>,
}

/// A `let` definition before desugaring.
struct Def {
    name: String,
    line: u32,
    col: u32,
    params: Vec<(String, u32, u32)>,
    rhs: Option<Expr>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, LangError> {
        let (line, col) = self.here();
        Err(LangError::Syntax { line, col, msg: msg.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, LangError> {
        if *self.peek() == tok {
            Ok(self.advance())
        } else {
            self.err(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn loc(&mut self, line: u32, col: u32) -> Loc {
        let id = self.next_id;
        self.next_id += 1;
        Loc::new(id, line, col)
    }

    fn fresh_var(&mut self, name: &str, line: u32, col: u32) -> Var {
        let loc = self.loc(line, col);
        Var { id: loc.id, name: Arc::from(name), line, col }
    }

    fn ident(&mut self) -> Result<(String, u32, u32), LangError> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok((s, line, col))
            }
            other => self.err(format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn lookup(&self, name: &str) -> Option<Var> {
        self.scope.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v.clone())
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        match self.peek() {
            Tok::Let => self.let_expr(),
            Tok::Fun => self.fun_expr(),
            Tok::If => self.if_expr(),
            _ => self.binary(0),
        }
    }

    fn fun_expr(&mut self) -> Result<Expr, LangError> {
        let (line, col) = self.here();
        self.advance();
        let mut params = vec![self.ident()?];
        while let Tok::Ident(_) = self.peek() {
            params.push(self.ident()?);
        }
        self.expect(Tok::Arrow, "'->'")?;
        let mark = self.scope.len();
        let vars: Vec<Var> = params
            .iter()
            .map(|(n, l, c)| {
                let v = self.fresh_var(n, *l, *c);
                self.scope.push((n.clone(), v.clone()));
                v
            })
            .collect();
        let body = self.expr()?;
        self.scope.truncate(mark);
        Ok(self.curry(vars, body, line, col))
    }

    fn curry(&mut self, vars: Vec<Var>, body: Expr, line: u32, col: u32) -> Expr {
        let mut e = body;
        for v in vars.into_iter().rev() {
            let loc = self.loc(line, col);
            e = Expr::new(loc, ExprKind::Lambda(v, Box::new(e)));
        }
        e
    }

    fn if_expr(&mut self) -> Result<Expr, LangError> {
        let (line, col) = self.here();
        self.advance();
        let c = self.expr()?;
        self.expect(Tok::Then, "'then'")?;
        let t = self.expr()?;
        self.expect(Tok::Else, "'else'")?;
        let e = self.expr()?;
        let loc = self.loc(line, col);
        Ok(Expr::new(loc, ExprKind::Ite(Box::new(c), Box::new(t), Box::new(e))))
    }

    fn let_expr(&mut self) -> Result<Expr, LangError> {
        let (line, col) = self.here();
        self.advance();
        let rec = if *self.peek() == Tok::Rec {
            self.advance();
            true
        } else {
            false
        };
        let mut defs = Vec::new();
        loop {
            let (name, l, c) = self.ident()?;
            let mut params = Vec::new();
            while let Tok::Ident(_) = self.peek() {
                params.push(self.ident()?);
            }
            if rec && params.is_empty() {
                return self.err(format!("recursive definition of '{name}' needs a parameter"));
            }
            self.expect(Tok::Op(BinOp::Eq), "'='")?;
            defs.push(Def { name, line: l, col: c, params, rhs: None });
            let idx = defs.len() - 1;
            let rhs = self.def_rhs(&defs[idx], rec)?;
            defs[idx].rhs = Some(rhs);
            if *self.peek() == Tok::And {
                self.advance();
                continue;
            }
            break;
        }
        self.expect(Tok::In, "'in'")?;
        let mark = self.scope.len();
        let mut outer = Vec::new();
        for d in &defs {
            let v = self.fresh_var(&d.name, d.line, d.col);
            outer.push(v);
        }
        for (d, v) in defs.iter().zip(&outer) {
            self.scope.push((d.name.clone(), v.clone()));
        }
        let body = self.expr()?;
        self.scope.truncate(mark);
        let mut e = body;
        for (d, v) in defs.into_iter().zip(outer).rev() {
            let lam_loc = self.loc(line, col);
            let lam = Expr::new(lam_loc, ExprKind::Lambda(v, Box::new(e)));
            let app_loc = self.loc(line, col);
            e = Expr::new(app_loc, ExprKind::App(Box::new(lam), Box::new(d.rhs.expect("parsed"))));
        }
        Ok(e)
    }

    fn def_rhs(&mut self, def: &Def, rec: bool) -> Result<Expr, LangError> {
        let mark = self.scope.len();
        let self_var = rec.then(|| self.fresh_var(&def.name, def.line, def.col));
        if let Some(f) = &self_var {
            self.scope.push((def.name.clone(), f.clone()));
        }
        let params: Vec<Var> = def
            .params
            .iter()
            .map(|(n, l, c)| {
                let v = self.fresh_var(n, *l, *c);
                self.scope.push((n.clone(), v.clone()));
                v
            })
            .collect();
        let body = self.expr()?;
        self.scope.truncate(mark);
        match self_var {
            Some(f) => {
                let mut params = params.into_iter();
                let x = params.next().expect("rec has a parameter");
                let rest: Vec<Var> = params.collect();
                let inner = self.curry(rest, body, def.line, def.col);
                let loc = self.loc(def.line, def.col);
                Ok(Expr::new(loc, ExprKind::Rec(f, x, Box::new(inner))))
            }
            None => Ok(self.curry(params, body, def.line, def.col)),
        }
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, LangError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op(op) => *op,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            let prec = op.precedence();
            if prec <= min_prec {
                break;
            }
            let (line, col) = self.here();
            self.advance();
            let rhs = match self.peek() {
                Tok::Let | Tok::Fun | Tok::If => self.expr()?,
                _ => self.binary(prec)?,
            };
            let loc = self.loc(line, col);
            lhs = Expr::new(loc, ExprKind::BinOp(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        match self.peek() {
            Tok::Minus => {
                let (line, col) = self.here();
                self.advance();
                if let Tok::Int(n) = *self.peek() {
                    self.advance();
                    let loc = self.loc(line, col);
                    return Ok(Expr::new(loc, ExprKind::Const(Const::Int(-n))));
                }
                let operand = self.unary()?;
                let zero = self.loc(line, col);
                let loc = self.loc(line, col);
                Ok(Expr::new(
                    loc,
                    ExprKind::BinOp(
                        BinOp::Sub,
                        Box::new(Expr::new(zero, ExprKind::Const(Const::Int(0)))),
                        Box::new(operand),
                    ),
                ))
            }
            Tok::Let | Tok::Fun | Tok::If => self.expr(),
            _ => self.app(),
        }
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Int(_) | Tok::Ident(_) | Tok::True | Tok::False | Tok::Nondet | Tok::LParen | Tok::Assert
        )
    }

    fn app(&mut self) -> Result<Expr, LangError> {
        let mut f = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            let loc = self.loc(f.loc.line, f.loc.col);
            f = Expr::new(loc, ExprKind::App(Box::new(f), Box::new(arg)));
        }
        Ok(f)
    }

    fn atom(&mut self) -> Result<Expr, LangError> {
        let (line, col) = self.here();
        let kind = match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                ExprKind::Const(Const::Int(n))
            }
            Tok::True => {
                self.advance();
                ExprKind::Const(Const::Bool(true))
            }
            Tok::False => {
                self.advance();
                ExprKind::Const(Const::Bool(false))
            }
            Tok::Nondet => {
                self.advance();
                ExprKind::Nondet
            }
            Tok::Ident(name) => {
                self.advance();
                match self.lookup(&name) {
                    Some(v) => ExprKind::Var(v),
                    None => return Err(LangError::Unbound { name, line, col }),
                }
            }
            Tok::Assert => {
                self.advance();
                let arg = self.atom()?;
                ExprKind::Assert(Box::new(arg))
            }
            Tok::LParen => {
                self.advance();
                if *self.peek() == Tok::RParen {
                    self.advance();
                    ExprKind::Const(Const::Unit)
                } else {
                    let e = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(e);
                }
            }
            other => return self.err(format!("expected an expression, found {}", describe(&other))),
        };
        let loc = self.loc(line, col);
        Ok(Expr::new(loc, kind))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Int(n) => format!("integer {n}"),
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Eof => "end of input".into(),
        Tok::Op(op) => format!("'{}'", op.symbol()),
        Tok::Minus => "'-'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Arrow => "'->'".into(),
        other => format!("keyword '{}'", format!("{other:?}").to_lowercase()),
    }
}

/// Parses a mini-ML program into a located, alpha-unique core expression.
pub fn parse_program(source: &str) -> Result<Expr, LangError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0, next_id: 0, scope: Vec::new() };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("unexpected {} after expression", describe(p.peek())));
    }
    Ok(renumber(&e))
}

/// Reassigns ids in pre-order so that ids follow source order.
pub fn renumber(e: &Expr) -> Expr {
    fn go(e: &Expr, next: &mut u32, map: &mut HashMap<u32, Var>) -> Expr {
        let id = *next;
        *next += 1;
        let loc = Loc::new(id, e.loc.line, e.loc.col);
        let bind = |v: &Var, next: &mut u32, map: &mut HashMap<u32, Var>| {
            let nv = Var { id: *next, name: v.name.clone(), line: v.line, col: v.col };
            *next += 1;
            map.insert(v.id, nv.clone());
            nv
        };
        let kind = match &e.kind {
            ExprKind::Const(c) => ExprKind::Const(*c),
            ExprKind::Nondet => ExprKind::Nondet,
            ExprKind::Var(v) => ExprKind::Var(map.get(&v.id).cloned().unwrap_or_else(|| v.clone())),
            ExprKind::App(a, b) => {
                let a = go(a, next, map);
                ExprKind::App(Box::new(a), Box::new(go(b, next, map)))
            }
            ExprKind::Lambda(x, b) => {
                let x = bind(x, next, map);
                ExprKind::Lambda(x, Box::new(go(b, next, map)))
            }
            ExprKind::Rec(f, x, b) => {
                let f = bind(f, next, map);
                let x = bind(x, next, map);
                ExprKind::Rec(f, x, Box::new(go(b, next, map)))
            }
            ExprKind::Ite(c, t, f) => {
                let c = go(c, next, map);
                let t = go(t, next, map);
                ExprKind::Ite(Box::new(c), Box::new(t), Box::new(go(f, next, map)))
            }
            ExprKind::BinOp(op, a, b) => {
                let a = go(a, next, map);
                ExprKind::BinOp(*op, Box::new(a), Box::new(go(b, next, map)))
            }
            ExprKind::Assert(a) => ExprKind::Assert(Box::new(go(a, next, map))),
        };
        Expr::new(loc, kind)
    }
    let mut next = 0;
    go(e, &mut next, &mut HashMap::new())
}
