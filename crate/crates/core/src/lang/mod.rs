//! The analyzed language: located syntax trees, the parser, and well-formedness.

mod ast;
mod kinds;
mod parser;
mod pretty;

pub use ast::{BinOp, Const, Expr, ExprKind, Kind, Loc, Var};
pub use kinds::{infer_kinds, Kinds};
pub use parser::{parse_program, renumber};
pub use pretty::pretty;

use crate::linear::SVar;
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LangError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("unbound variable '{name}' at {line}:{col}")]
    Unbound { name: String, line: u32, col: u32 },
    #[error("duplicate location id {0}")]
    DuplicateLoc(u32),
}

/// Checks that `e` is closed and that all locations (including binders) are distinct.
pub fn check_well_formed(e: &Expr) -> Result<(), LangError> {
    fn go(e: &Expr, scope: &mut Vec<u32>, seen: &mut HashSet<u32>) -> Result<(), LangError> {
        if !seen.insert(e.loc.id) {
            return Err(LangError::DuplicateLoc(e.loc.id));
        }
        if let ExprKind::Var(v) = &e.kind {
            if !scope.contains(&v.id) {
                return Err(LangError::Unbound { name: v.name.to_string(), line: e.loc.line, col: e.loc.col });
            }
        }
        let binders = e.binders();
        for b in &binders {
            if !seen.insert(b.id) {
                return Err(LangError::DuplicateLoc(b.id));
            }
            scope.push(b.id);
        }
        for c in e.children() {
            go(c, scope, seen)?;
        }
        scope.truncate(scope.len() - binders.len());
        Ok(())
    }
    go(e, &mut Vec::new(), &mut HashSet::new())
}

/// A parsed program together with its binder kinds.
#[derive(Clone, Debug)]
pub struct Program {
    pub root: Expr,
    pub kinds: Kinds,
    locs: HashMap<u32, Loc>,
    vars: HashMap<u32, Var>,
}

impl Program {
    pub fn new(root: Expr) -> Result<Self, LangError> {
        check_well_formed(&root)?;
        let kinds = infer_kinds(&root);
        let mut locs = HashMap::new();
        let mut vars = HashMap::new();
        root.walk(&mut |e| {
            locs.insert(e.loc.id, e.loc);
            for b in e.binders() {
                locs.insert(b.id, b.loc());
                vars.insert(b.id, b.clone());
            }
        });
        Ok(Program { root, kinds, locs, vars })
    }

    pub fn parse(src: &str) -> Result<Self, LangError> {
        Program::new(parse_program(src)?)
    }

    /// Location of an expression or binder id.
    pub fn loc(&self, id: u32) -> Loc {
        self.locs.get(&id).copied().unwrap_or(Loc::new(id, 0, 0))
    }

    /// The binder with the given id.
    pub fn var(&self, id: u32) -> Option<&Var> {
        self.vars.get(&id)
    }

    /// All binders of the program in id order.
    pub fn binders(&self) -> Vec<&Var> {
        let mut v: Vec<&Var> = self.vars.values().collect();
        v.sort_by_key(|x| x.id);
        v
    }

    /// Names of the program variables as refinement variables.
    pub fn var_names(&self) -> HashMap<SVar, String> {
        self.vars.values().map(|x| (SVar::P(x.id), x.name.to_string())).collect()
    }

    /// Finds the subexpression with the given id.
    pub fn expr(&self, id: u32) -> Option<&Expr> {
        self.root.find(self.loc(id))
    }
}
