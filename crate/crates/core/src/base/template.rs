use super::Scope;
use crate::lang::Kind;
use crate::linear::{Constraint, Lin, SVar};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {msg}")]
pub struct TemplateError {
    pub line: usize,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TTerm {
    Nu,
    /// Instantiated with every int-kinded scope variable.
    Star,
    /// A program variable referred to by name.
    Named(String),
    /// A fixed variable.
    Var(SVar),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rel {
    Le,
    Lt,
    Eq,
    Ne,
    Ge,
    Gt,
}

/// `Σ cᵢ·termᵢ + k rel Σ dⱼ·termⱼ + l`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Template {
    pub lhs: Vec<(i64, TTerm)>,
    pub lk: i64,
    pub rel: Rel,
    pub rhs: Vec<(i64, TTerm)>,
    pub rk: i64,
}

/// An instantiated qualifier: `lin rel 0` with `rel ∈ {≤, =, ≠}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    C(Constraint),
    Ne(Lin),
}

impl Atom {
    pub fn vars(&self) -> Vec<SVar> {
        match self {
            Atom::C(c) => c.vars().collect(),
            Atom::Ne(l) => l.vars().collect(),
        }
    }

    pub fn rename(&self, f: &dyn Fn(SVar) -> SVar) -> Atom {
        match self {
            Atom::C(c) => Atom::C(c.rename(f)),
            Atom::Ne(l) => Atom::Ne(l.rename(f)),
        }
    }

    pub fn fmt_with(&self, name: &dyn Fn(SVar) -> String) -> String {
        match self {
            Atom::C(c) => c.fmt_with(name),
            Atom::Ne(l) => {
                let t = l.plus_const(-l.constant_term().clone());
                format!("{} ≠ {}", t.fmt_with(name), -l.constant_term())
            }
        }
    }
}

impl Template {
    pub fn new(lhs: Lin, rel: Rel, rhs: Lin) -> Template {
        let conv = |l: &Lin| -> (Vec<(i64, TTerm)>, i64) {
            (
                l.terms().iter().map(|(v, a)| (i64::try_from(a).unwrap_or(1), TTerm::Var(*v))).collect(),
                i64::try_from(l.constant_term()).unwrap_or(0),
            )
        };
        let (lhs, lk) = conv(&lhs);
        let (rhs, rk) = conv(&rhs);
        Template { lhs, lk, rel, rhs, rk }
    }

    fn has_star(&self) -> bool {
        self.lhs.iter().chain(&self.rhs).any(|(_, t)| *t == TTerm::Star)
    }

    fn build(&self, star: Option<SVar>, resolve: &dyn Fn(&str) -> Option<SVar>) -> Option<Atom> {
        let side = |ts: &[(i64, TTerm)], k: i64| -> Option<Lin> {
            let mut l = Lin::constant(k);
            for (c, t) in ts {
                let v = match t {
                    TTerm::Nu => SVar::Nu,
                    TTerm::Star => star?,
                    TTerm::Named(n) => resolve(n)?,
                    TTerm::Var(v) => *v,
                };
                l = l.add(&Lin::term(v, *c));
            }
            Some(l)
        };
        let (a, b) = (side(&self.lhs, self.lk)?, side(&self.rhs, self.rk)?);
        Some(match self.rel {
            Rel::Le => Atom::C(Constraint::le(&a, &b)),
            Rel::Lt => Atom::C(Constraint::lt(&a, &b)),
            Rel::Ge => Atom::C(Constraint::ge(&a, &b)),
            Rel::Gt => Atom::C(Constraint::gt(&a, &b)),
            Rel::Eq => Atom::C(Constraint::eq(&a, &b)),
            Rel::Ne => Atom::Ne(a.sub(&b)),
        })
    }

    /// All instances over the scope; instances mentioning variables outside the scope are dropped.
    pub fn instantiate(&self, sc: &Scope, names: &dyn Fn(SVar) -> Option<String>) -> Vec<Atom> {
        let resolve = |n: &str| sc.vars().find(|v| names(*v).as_deref() == Some(n));
        let in_scope = |a: &Atom| a.vars().iter().all(|v| *v == SVar::Nu || sc.contains(*v));
        let stars: Vec<Option<SVar>> = if self.has_star() {
            sc.iter().filter(|(_, k)| *k == Kind::Int).map(|(v, _)| Some(v)).collect()
        } else {
            vec![None]
        };
        let mut out: Vec<Atom> = stars
            .into_iter()
            .filter_map(|s| self.build(s, &resolve))
            .filter(|a| in_scope(a))
            .filter(|a| match a {
                Atom::C(c) => !c.lin.is_constant(),
                Atom::Ne(l) => !l.is_constant(),
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |ts: &[(i64, TTerm)], k: i64| -> String {
            let mut parts: Vec<String> = ts
                .iter()
                .map(|(c, t)| {
                    let n = match t {
                        TTerm::Nu => "ν".to_string(),
                        TTerm::Star => "⋆".to_string(),
                        TTerm::Named(n) => n.clone(),
                        TTerm::Var(v) => v.to_string(),
                    };
                    if *c == 1 {
                        n
                    } else {
                        format!("{c}*{n}")
                    }
                })
                .collect();
            if k != 0 || parts.is_empty() {
                parts.push(k.to_string());
            }
            parts.join(" + ")
        };
        let rel = match self.rel {
            Rel::Le => "≤",
            Rel::Lt => "<",
            Rel::Eq => "=",
            Rel::Ne => "≠",
            Rel::Ge => "≥",
            Rel::Gt => ">",
        };
        write!(f, "{} {rel} {}", side(&self.lhs, self.lk), side(&self.rhs, self.rk))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum QTok {
    Num(i64),
    Word(String),
    Star,
    Plus,
    Minus,
    Times,
    Rel(Rel),
}

fn lex_line(s: &str) -> Result<Vec<QTok>, String> {
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < cs.len() {
        let c = cs[i];
        let next = cs.get(i + 1).copied();
        match c {
            ' ' | '\t' => i += 1,
            '0'..='9' => {
                let st = i;
                while i < cs.len() && cs[i].is_ascii_digit() {
                    i += 1;
                }
                let t: String = cs[st..i].iter().collect();
                out.push(QTok::Num(t.parse().map_err(|_| format!("integer out of range: {t}"))?));
            }
            '*' if out.last().is_some_and(|t| matches!(t, QTok::Num(_) | QTok::Word(_))) => {
                out.push(QTok::Times);
                i += 1;
            }
            '*' | '⋆' | '_' => {
                out.push(QTok::Star);
                i += 1;
            }
            '+' => {
                out.push(QTok::Plus);
                i += 1;
            }
            '-' => {
                out.push(QTok::Minus);
                i += 1;
            }
            '<' if next == Some('=') => {
                out.push(QTok::Rel(Rel::Le));
                i += 2;
            }
            '<' if next == Some('>') => {
                out.push(QTok::Rel(Rel::Ne));
                i += 2;
            }
            '<' => {
                out.push(QTok::Rel(Rel::Lt));
                i += 1;
            }
            '>' if next == Some('=') => {
                out.push(QTok::Rel(Rel::Ge));
                i += 2;
            }
            '>' => {
                out.push(QTok::Rel(Rel::Gt));
                i += 1;
            }
            '!' if next == Some('=') => {
                out.push(QTok::Rel(Rel::Ne));
                i += 2;
            }
            '=' if next == Some('=') => {
                out.push(QTok::Rel(Rel::Eq));
                i += 2;
            }
            '=' => {
                out.push(QTok::Rel(Rel::Eq));
                i += 1;
            }
            '≤' => {
                out.push(QTok::Rel(Rel::Le));
                i += 1;
            }
            '≥' => {
                out.push(QTok::Rel(Rel::Ge));
                i += 1;
            }
            '≠' => {
                out.push(QTok::Rel(Rel::Ne));
                i += 1;
            }
            c if c.is_alphabetic() || c == 'ν' => {
                let st = i;
                while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_' || cs[i] == '\'') {
                    i += 1;
                }
                out.push(QTok::Word(cs[st..i].iter().collect()));
            }
            _ => return Err(format!("unexpected character '{c}'")),
        }
    }
    Ok(out)
}

fn parse_side(ts: &[QTok]) -> Result<(Vec<(i64, TTerm)>, i64), String> {
    let mut terms = Vec::new();
    let mut k = 0i64;
    let mut i = 0;
    let mut sign = 1i64;
    let mut expect_term = true;
    while i < ts.len() {
        match &ts[i] {
            QTok::Plus if !expect_term => {
                sign = 1;
                expect_term = true;
                i += 1;
            }
            QTok::Minus if !expect_term => {
                sign = -1;
                expect_term = true;
                i += 1;
            }
            QTok::Minus if expect_term => {
                sign = -sign;
                i += 1;
            }
            _ if expect_term => {
                let mut coeff = sign;
                if let QTok::Num(n) = &ts[i] {
                    if matches!(ts.get(i + 1), Some(QTok::Times)) {
                        coeff *= n;
                        i += 2;
                    } else {
                        k += sign * n;
                        i += 1;
                        expect_term = false;
                        continue;
                    }
                }
                let term = match ts.get(i) {
                    Some(QTok::Star) => TTerm::Star,
                    Some(QTok::Word(w)) if w == "nu" || w == "ν" || w == "v" || w == "V" => TTerm::Nu,
                    Some(QTok::Word(w)) if w == "true" => {
                        k += coeff;
                        i += 1;
                        expect_term = false;
                        continue;
                    }
                    Some(QTok::Word(w)) if w == "false" => {
                        i += 1;
                        expect_term = false;
                        continue;
                    }
                    Some(QTok::Word(w)) => TTerm::Named(w.clone()),
                    _ => return Err("expected a term".into()),
                };
                terms.push((coeff, term));
                i += 1;
                expect_term = false;
            }
            _ => return Err("expected '+' or '-'".into()),
        }
    }
    if expect_term {
        return Err("incomplete expression".into());
    }
    Ok((terms, k))
}

pub fn parse_template(line: &str) -> Result<Template, String> {
    let toks = lex_line(line)?;
    let pos = toks.iter().position(|t| matches!(t, QTok::Rel(_))).ok_or("missing relation")?;
    let QTok::Rel(rel) = toks[pos] else { unreachable!() };
    if toks[pos + 1..].iter().any(|t| matches!(t, QTok::Rel(_))) {
        return Err("more than one relation".into());
    }
    let (lhs, lk) = parse_side(&toks[..pos])?;
    let (rhs, rk) = parse_side(&toks[pos + 1..])?;
    Ok(Template { lhs, lk, rel, rhs, rk })
}

/// Parses a qualifier or threshold file: one template per line, `#` starts a comment.
pub fn parse_templates(src: &str) -> Result<Vec<Template>, TemplateError> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_template(line).map_err(|msg| TemplateError { line: i + 1, msg })?);
    }
    Ok(out)
}
