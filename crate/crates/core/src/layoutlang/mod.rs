//! A small, sandboxed language for describing conductor placements.
//!
//! Scripts bind values with `let`, iterate over half-open integer ranges with
//! `for i in a..b { .. }`, branch with `if`, and produce conductor centers with
//! `emit point(x, y)`. Arithmetic is double precision; `^` is real power and
//! the only callable functions are `sin cos tan sqrt abs min max floor`. There
//! are no statements that touch files, the network, or the environment, and
//! evaluation is bounded by a step budget.
//!
//! ```text
//! # twelve conductors on a circle of radius 3 cm
//! for i in 0..12 {
//!     emit point(0.03*cos(2*pi*i/12), 0.03*sin(2*pi*i/12))
//! }
//! ```

mod interp;
mod lexer;
mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;

pub use interp::evaluate_layout;

/// Default interpreter step budget.
pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;
/// Longest allowed single loop range.
pub const MAX_LOOP_LEN: i64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{pos}: {message}")]
pub struct LayoutSyntaxError {
    pub pos: Pos,
    pub message: String,
}

impl LayoutSyntaxError {
    pub(crate) fn new(pos: Pos, message: impl Into<String>) -> Self {
        Self { pos, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RuntimeErrorKind {
    DivisionByZero,
    NonFinite,
    BudgetExceeded,
    TypeMismatch(String),
    UnknownIdentifier(String),
    LoopTooLong(i64),
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuntimeErrorKind::DivisionByZero => write!(f, "division by zero"),
            RuntimeErrorKind::NonFinite => write!(f, "non-finite value"),
            RuntimeErrorKind::BudgetExceeded => write!(f, "step budget exceeded"),
            RuntimeErrorKind::TypeMismatch(m) => write!(f, "type mismatch: {m}"),
            RuntimeErrorKind::UnknownIdentifier(n) => write!(f, "unknown identifier '{n}'"),
            RuntimeErrorKind::LoopTooLong(n) => {
                write!(f, "loop range of {n} iterations exceeds the limit of {MAX_LOOP_LEN}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{pos}: {kind}")]
pub struct LayoutRuntimeError {
    pub pos: Pos,
    pub kind: RuntimeErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Sin,
    Cos,
    Tan,
    Sqrt,
    Abs,
    Min,
    Max,
    Floor,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Builtin::Sin,
            "cos" => Builtin::Cos,
            "tan" => Builtin::Tan,
            "sqrt" => Builtin::Sqrt,
            "abs" => Builtin::Abs,
            "min" => Builtin::Min,
            "max" => Builtin::Max,
            "floor" => Builtin::Floor,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Min | Builtin::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Real(f64),
    Pi,
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
    Point(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Let { name: String, value: Expr, pos: Pos },
    For { var: String, start: Expr, end: Expr, body: Vec<Stmt>, pos: Pos },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Option<Vec<Stmt>>, pos: Pos },
    Emit { point: Expr, pos: Pos },
}

/// A parsed layout program.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutScript {
    pub source: String,
    pub body: Vec<Stmt>,
}

pub fn parse_layout(source: &str) -> Result<LayoutScript, LayoutSyntaxError> {
    let body = parser::Parser::new(lexer::tokenize(source)?).program()?;
    Ok(LayoutScript { source: source.to_string(), body })
}

/// Coarse structural pattern of a script, used to describe layouts in prose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutPattern {
    Single,
    ExplicitList,
    Circular,
    Grid,
    Linear,
    Custom,
}

impl LayoutPattern {
    pub fn describe(self) -> &'static str {
        match self {
            LayoutPattern::Single => "single conductor",
            LayoutPattern::ExplicitList => "explicit list of conductor positions",
            LayoutPattern::Circular => "circular arrangement",
            LayoutPattern::Grid => "grid arrangement",
            LayoutPattern::Linear => "linear arrangement",
            LayoutPattern::Custom => "custom arrangement",
        }
    }
}

impl LayoutScript {
    /// Classifies the script by the shape of its emitting statements.
    pub fn pattern(&self) -> LayoutPattern {
        let mut emits = Vec::new();
        collect_emits(&self.body, 0, &mut emits);
        if emits.is_empty() {
            return LayoutPattern::Custom;
        }
        let max_depth = emits.iter().map(|(d, _)| *d).max().unwrap_or(0);
        if max_depth == 0 {
            return if emits.len() == 1 { LayoutPattern::Single } else { LayoutPattern::ExplicitList };
        }
        let looped: Vec<&Expr> = emits.iter().filter(|(d, _)| *d > 0).map(|(_, e)| *e).collect();
        let trig = |e: &Expr| {
            let (mut sin, mut cos) = (false, false);
            visit_calls(e, &mut |b| match b {
                Builtin::Sin => sin = true,
                Builtin::Cos => cos = true,
                _ => {}
            });
            sin && cos
        };
        if looped.iter().all(|e| trig(e)) {
            LayoutPattern::Circular
        } else if max_depth >= 2 {
            LayoutPattern::Grid
        } else if looped.iter().all(|e| !has_any_call(e)) {
            LayoutPattern::Linear
        } else {
            LayoutPattern::Custom
        }
    }
}

fn collect_emits<'a>(body: &'a [Stmt], depth: usize, out: &mut Vec<(usize, &'a Expr)>) {
    for s in body {
        match s {
            Stmt::Emit { point, .. } => out.push((depth, point)),
            Stmt::For { body, .. } => collect_emits(body, depth + 1, out),
            Stmt::If { then_body, else_body, .. } => {
                collect_emits(then_body, depth, out);
                if let Some(e) = else_body {
                    collect_emits(e, depth, out);
                }
            }
            Stmt::Let { .. } => {}
        }
    }
}

fn visit_calls(e: &Expr, f: &mut impl FnMut(Builtin)) {
    match &e.kind {
        ExprKind::Call(b, args) => {
            f(*b);
            args.iter().for_each(|a| visit_calls(a, f));
        }
        ExprKind::Neg(a) => visit_calls(a, f),
        ExprKind::Binary(_, a, b) | ExprKind::Point(a, b) => {
            visit_calls(a, f);
            visit_calls(b, f);
        }
        _ => {}
    }
}

fn has_any_call(e: &Expr) -> bool {
    let mut any = false;
    visit_calls(e, &mut |_| any = true);
    any
}

/// Emitted conductor centers.
pub type PointList = Vec<Point2>;
