use serde::Serialize;
use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// A program point. Identity is the numeric id; line and column are for display.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Loc {
    pub id: u32,
    pub line: u32,
    pub col: u32,
}

impl Loc {
    pub fn new(id: u32, line: u32, col: u32) -> Self {
        Loc { id, line, col }
    }
}

impl PartialEq for Loc {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Loc {}
impl Hash for Loc {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}
impl PartialOrd for Loc {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Loc {
    fn cmp(&self, other: &Self) -> Ordering {
        self.id.cmp(&other.id)
    }
}
impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A bound variable. The id is drawn from the same counter as expression
/// locations, so a binder is itself a location.
#[derive(Clone, Debug)]
pub struct Var {
    pub id: u32,
    pub name: Arc<str>,
    pub line: u32,
    pub col: u32,
}

impl Var {
    pub fn loc(&self) -> Loc {
        Loc::new(self.id, self.line, self.col)
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Var {}
impl Hash for Var {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}
impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Var {
    fn cmp(&self, other: &Self) -> Ordering {
        self.id.cmp(&other.id)
    }
}
impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(untagged)]
pub enum Const {
    Int(i64),
    Bool(bool),
    #[serde(serialize_with = "ser_unit")]
    Unit,
}

fn ser_unit<S: serde::Serializer>(s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str("()")
}

impl Const {
    /// Numeric encoding used by the relational domains.
    pub fn encode(self) -> i64 {
        match self {
            Const::Int(n) => n,
            Const::Bool(b) => b as i64,
            Const::Unit => 0,
        }
    }

    pub fn kind(self) -> Kind {
        match self {
            Const::Int(_) => Kind::Int,
            Const::Bool(_) => Kind::Bool,
            Const::Unit => Kind::Unit,
        }
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Int(n) => write!(f, "{n}"),
            Const::Bool(b) => write!(f, "{b}"),
            Const::Unit => f.write_str("()"),
        }
    }
}

/// Syntactic kind of a binder or value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Int,
    Bool,
    Unit,
    Fun,
}

impl Kind {
    pub fn is_numeric(self) -> bool {
        !matches!(self, Kind::Fun)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_arith(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul)
    }

    pub fn is_cmp(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn is_logic(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    /// Binding strength, larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul => 5,
        }
    }

    /// Concrete semantics of the operator; `None` on a kind mismatch or overflow.
    pub fn eval(self, l: Const, r: Const) -> Option<Const> {
        use Const::*;
        match (self, l, r) {
            (BinOp::Add, Int(a), Int(b)) => a.checked_add(b).map(Int),
            (BinOp::Sub, Int(a), Int(b)) => a.checked_sub(b).map(Int),
            (BinOp::Mul, Int(a), Int(b)) => a.checked_mul(b).map(Int),
            (BinOp::Lt, Int(a), Int(b)) => Some(Bool(a < b)),
            (BinOp::Le, Int(a), Int(b)) => Some(Bool(a <= b)),
            (BinOp::Gt, Int(a), Int(b)) => Some(Bool(a > b)),
            (BinOp::Ge, Int(a), Int(b)) => Some(Bool(a >= b)),
            (BinOp::Eq, Int(a), Int(b)) => Some(Bool(a == b)),
            (BinOp::Ne, Int(a), Int(b)) => Some(Bool(a != b)),
            (BinOp::Eq, Bool(a), Bool(b)) => Some(Bool(a == b)),
            (BinOp::Ne, Bool(a), Bool(b)) => Some(Bool(a != b)),
            (BinOp::And, Bool(a), Bool(b)) => Some(Bool(a && b)),
            (BinOp::Or, Bool(a), Bool(b)) => Some(Bool(a || b)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Expr {
    pub loc: Loc,
    pub kind: ExprKind,
}

#[derive(Clone, Debug)]
pub enum ExprKind {
    Const(Const),
    Var(Var),
    App(Box<Expr>, Box<Expr>),
    Lambda(Var, Box<Expr>),
    Rec(Var, Var, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    BinOp(BinOp, Box<Expr>, Box<Expr>),
    Assert(Box<Expr>),
    /// An unknown integer input.
    Nondet,
}

impl Expr {
    pub fn new(loc: Loc, kind: ExprKind) -> Self {
        Expr { loc, kind }
    }

    /// Direct subexpressions in evaluation order.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Const(_) | ExprKind::Var(_) | ExprKind::Nondet => vec![],
            ExprKind::App(a, b) | ExprKind::BinOp(_, a, b) => vec![a, b],
            ExprKind::Lambda(_, b) | ExprKind::Rec(_, _, b) | ExprKind::Assert(b) => vec![b],
            ExprKind::Ite(c, t, e) => vec![c, t, e],
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    /// Finds the subexpression carrying `loc`.
    pub fn find(&self, loc: Loc) -> Option<&Expr> {
        if self.loc == loc {
            return Some(self);
        }
        self.children().into_iter().find_map(|c| c.find(loc))
    }

    /// Binders introduced by this node, in scope order.
    pub fn binders(&self) -> Vec<&Var> {
        match &self.kind {
            ExprKind::Lambda(x, _) => vec![x],
            ExprKind::Rec(f, x, _) => vec![f, x],
            _ => vec![],
        }
    }
}
