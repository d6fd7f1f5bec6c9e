//! Subset of the GetDP `PostProcessing` / `PostOperation` language.
//!
//! Only element-local quantities of the built-in `MagDyn_a` formulation are
//! supported. Field references are `{a}` (the z-directed vector potential),
//! `{grad_phi}` (the per-conductor electric potential gradient) and `{d a}`
//! (the in-plane flux density). Coefficients are `sigma[]`, `nu[]`, `mu[]`.
//!
//! ```text
//! PostProcessing {
//!   { Name MagDyn_b; NameOfFormulation MagDyn_a;
//!     PostQuantity {
//!       { Name p; Value { Local { [ sigma[]/2 * Norm[-Dt[{a}] - {grad_phi}]^2 ];
//!         In Region[{Omega_c_1}]; Jacobian Vol; } } }
//!     }
//!   }
//! }
//! PostOperation {
//!   { Name MagDyn_b; NameOfPostProcessing MagDyn_b;
//!     Operation { Print[ p, OnElementsOf Omega, File "Results/p.pos", Format Gmsh ]; }
//!   }
//! }
//! ```
//!
//! Complex vectors are normed as `sqrt(Σ|c|²)`, so with peak phasors
//! `sigma[]/2 * Norm[E]^2` is the time-averaged loss density.

mod check;
mod eval;
mod lexer;
mod parser;
mod pretty;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::layoutlang::Pos;
pub use check::{physics_lint, validate_post, Formulation, Kind};
pub use eval::{
    evaluate_post, evaluate_post_with, region_conductor, region_mask, ElementData, EvalError, PostEvaluation, QuantityValues,
};
pub use parser::parse_post;
pub use pretty::pretty_print;

/// Source location attached to AST nodes. Always compares equal, so ASTs
/// compare structurally regardless of layout.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl From<Span> for Pos {
    fn from(s: Span) -> Pos {
        Pos { line: s.line, col: s.col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PostProgram {
    pub post_processings: Vec<PostProcessing>,
    pub post_operations: Vec<PostOperation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostProcessing {
    pub name: String,
    pub formulation_ref: String,
    pub quantities: Vec<PostQuantity>,
    pub span: Span,
}

/// `Local` and `Term` wrappers are synonyms; the spelling is kept for printing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueWrapper {
    Local,
    Term,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostQuantity {
    pub name: String,
    pub wrapper: ValueWrapper,
    pub expr: Expr,
    pub regions: Vec<String>,
    pub jacobian: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostOperation {
    pub name: String,
    pub processing_ref: String,
    pub prints: Vec<PrintSpec>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintSpec {
    pub quantity: String,
    pub on_elements_of: Option<String>,
    pub file: Option<String>,
    pub label: Option<String>,
    pub format: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

/// Field reference inside braces: `{a}` or `{d a}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldRef {
    pub derivative: bool,
    pub name: String,
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.derivative {
            write!(f, "{{d {}}}", self.name)
        } else {
            write!(f, "{{{}}}", self.name)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64, Span),
    Field(FieldRef, Span),
    /// Material function `name[]`.
    Coef(String, Span),
    /// Function call `Name[args]`.
    Call(String, Vec<Expr>, Span),
    Neg(Box<Expr>, Span),
    Bin(BinOp, Box<Expr>, Box<Expr>, Span),
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Num(_, s) | Expr::Field(_, s) | Expr::Coef(_, s) | Expr::Call(_, _, s) => *s,
            Expr::Neg(_, s) | Expr::Bin(_, _, _, s) => *s,
        }
    }

    /// All field references in evaluation order.
    pub fn fields(&self) -> Vec<&FieldRef> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Field(f, _) = e {
                out.push(f);
            }
        });
        out
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Call(_, args, _) => args.iter().for_each(|a| a.walk(f)),
            Expr::Neg(x, _) => x.walk(f),
            Expr::Bin(_, l, r, _) => {
                l.walk(f);
                r.walk(f);
            }
            _ => {}
        }
    }
}

/// Parse failure with location and a bracket-balance hint.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{pos}: {message}")]
pub struct DslSyntaxError {
    pub pos: Pos,
    pub message: String,
    pub hint: Option<String>,
}

impl DslSyntaxError {
    pub(crate) fn new(pos: Pos, message: impl Into<String>) -> Self {
        Self { pos, message: message.into(), hint: None }
    }
}

/// Verdict layer a DSL diagnostic belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DslLayer {
    DslSyntax,
    DslSemantics,
    PhysicsSyntax,
    PhysicsSemantics,
}

impl DslLayer {
    pub fn as_str(self) -> &'static str {
        match self {
            DslLayer::DslSyntax => "dsl_syntax",
            DslLayer::DslSemantics => "dsl_semantics",
            DslLayer::PhysicsSyntax => "physics_syntax",
            DslLayer::PhysicsSemantics => "physics_semantics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub layer: DslLayer,
    pub severity: Severity,
    /// Stable machine-readable identifier, e.g. `unknown-region`.
    pub code: String,
    pub pos: Pos,
    pub message: String,
    pub hint: Option<String>,
}

impl Diagnostic {
    pub(crate) fn new(layer: DslLayer, severity: Severity, code: &str, span: Span, message: impl Into<String>) -> Self {
        Self { layer, severity, code: code.to_string(), pos: span.into(), message: message.into(), hint: None }
    }
}

impl From<&DslSyntaxError> for Diagnostic {
    fn from(e: &DslSyntaxError) -> Self {
        Diagnostic {
            layer: DslLayer::DslSyntax,
            severity: Severity::Error,
            code: "syntax".into(),
            pos: e.pos,
            message: e.message.clone(),
            hint: e.hint.clone(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "[{}] {sev} {}: {}", self.layer.as_str(), self.pos, self.message)?;
        if let Some(h) = &self.hint {
            write!(f, " ({h})")?;
        }
        Ok(())
    }
}
