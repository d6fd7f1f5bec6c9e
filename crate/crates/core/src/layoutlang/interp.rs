use std::f64::consts::PI;

use super::{
    BinOp, Builtin, Expr, ExprKind, LayoutRuntimeError, LayoutScript, Pos, RuntimeErrorKind, Stmt, MAX_LOOP_LEN,
};
use crate::geometry::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Value {
    Int(i64),
    Real(f64),
    Point(f64, f64),
    Bool(bool),
}

impl Value {
    fn type_name(self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Real(_) => "real",
            Value::Point(..) => "point",
            Value::Bool(_) => "boolean",
        }
    }

    fn as_real(self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(v as f64),
            Value::Real(v) => Some(v),
            _ => None,
        }
    }
}

struct Interp {
    steps: u64,
    budget: u64,
    scopes: Vec<Vec<(String, Value)>>,
    points: Vec<Point2>,
}

type RResult<T> = Result<T, LayoutRuntimeError>;

fn fail<T>(pos: Pos, kind: RuntimeErrorKind) -> RResult<T> {
    Err(LayoutRuntimeError { pos, kind })
}

fn mismatch<T>(pos: Pos, msg: String) -> RResult<T> {
    fail(pos, RuntimeErrorKind::TypeMismatch(msg))
}

fn finite(pos: Pos, v: f64) -> RResult<Value> {
    if v.is_finite() {
        Ok(Value::Real(v))
    } else {
        fail(pos, RuntimeErrorKind::NonFinite)
    }
}

/// Runs a parsed script and returns the emitted points in emission order.
///
/// Every statement and every expression node costs one step; exceeding
/// `step_budget` aborts with [`RuntimeErrorKind::BudgetExceeded`].
pub fn evaluate_layout(script: &LayoutScript, step_budget: u64) -> Result<Vec<Point2>, LayoutRuntimeError> {
    let mut it = Interp { steps: 0, budget: step_budget, scopes: vec![Vec::new()], points: Vec::new() };
    it.block(&script.body, false)?;
    Ok(it.points)
}

impl Interp {
    fn tick(&mut self, pos: Pos) -> RResult<()> {
        self.steps += 1;
        if self.steps > self.budget {
            return fail(pos, RuntimeErrorKind::BudgetExceeded);
        }
        Ok(())
    }

    fn lookup(&self, name: &str) -> Option<Value> {
        self.scopes.iter().rev().flat_map(|s| s.iter().rev()).find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    fn bind(&mut self, name: &str, v: Value) {
        let scope = self.scopes.last_mut().expect("scope stack is never empty");
        if let Some(slot) = scope.iter_mut().find(|(n, _)| n == name) {
            slot.1 = v;
        } else {
            scope.push((name.to_string(), v));
        }
    }

    /// Assignment to a name bound in an enclosing scope updates that binding,
    /// so accumulators declared before a loop work as expected.
    fn assign(&mut self, name: &str, v: Value) {
        for scope in self.scopes.iter_mut().rev() {
            if let Some(slot) = scope.iter_mut().find(|(n, _)| n == name) {
                slot.1 = v;
                return;
            }
        }
        self.bind(name, v);
    }

    fn block(&mut self, body: &[Stmt], scoped: bool) -> RResult<()> {
        if scoped {
            self.scopes.push(Vec::new());
        }
        let res = body.iter().try_for_each(|s| self.stmt(s));
        if scoped {
            self.scopes.pop();
        }
        res
    }

    fn stmt(&mut self, s: &Stmt) -> RResult<()> {
        match s {
            Stmt::Let { name, value, pos } => {
                self.tick(*pos)?;
                let v = self.expr(value)?;
                if matches!(v, Value::Bool(_)) {
                    return mismatch(*pos, "cannot bind a boolean".into());
                }
                self.assign(name, v);
            }
            Stmt::Emit { point, pos } => {
                self.tick(*pos)?;
                match self.expr(point)? {
                    Value::Point(x, y) => self.points.push(Point2::new(x, y)),
                    other => return mismatch(*pos, format!("emit expects a point, got {}", other.type_name())),
                }
            }
            Stmt::If { cond, then_body, else_body, pos } => {
                self.tick(*pos)?;
                match self.expr(cond)? {
                    Value::Bool(true) => self.block(then_body, true)?,
                    Value::Bool(false) => {
                        if let Some(e) = else_body {
                            self.block(e, true)?;
                        }
                    }
                    other => return mismatch(cond.pos, format!("condition must be boolean, got {}", other.type_name())),
                }
            }
            Stmt::For { var, start, end, body, pos } => {
                self.tick(*pos)?;
                let lo = self.int_bound(start)?;
                let hi = self.int_bound(end)?;
                let len = hi.saturating_sub(lo);
                if len > MAX_LOOP_LEN {
                    return fail(*pos, RuntimeErrorKind::LoopTooLong(len));
                }
                for i in lo..hi {
                    self.scopes.push(vec![(var.clone(), Value::Int(i))]);
                    let res = self.block(body, false);
                    self.scopes.pop();
                    res?;
                }
            }
        }
        Ok(())
    }

    fn int_bound(&mut self, e: &Expr) -> RResult<i64> {
        match self.expr(e)? {
            Value::Int(v) => Ok(v),
            Value::Real(v) if v.fract() == 0.0 && v.abs() < 1e15 => Ok(v as i64),
            other => mismatch(e.pos, format!("loop bounds must be integers, got {}", other.type_name())),
        }
    }

    fn expr(&mut self, e: &Expr) -> RResult<Value> {
        self.tick(e.pos)?;
        let pos = e.pos;
        match &e.kind {
            ExprKind::Int(v) => Ok(Value::Int(*v)),
            ExprKind::Real(v) => finite(pos, *v),
            ExprKind::Pi => Ok(Value::Real(PI)),
            ExprKind::Var(name) => self
                .lookup(name)
                .map_or_else(|| fail(pos, RuntimeErrorKind::UnknownIdentifier(name.clone())), Ok),
            ExprKind::Neg(inner) => match self.expr(inner)? {
                Value::Int(v) => v.checked_neg().map(Value::Int).map_or_else(|| fail(pos, RuntimeErrorKind::NonFinite), Ok),
                Value::Real(v) => Ok(Value::Real(-v)),
                Value::Point(x, y) => Ok(Value::Point(-x, -y)),
                Value::Bool(_) => mismatch(pos, "cannot negate a boolean".into()),
            },
            ExprKind::Point(x, y) => {
                let xv = self.expr(x)?;
                let yv = self.expr(y)?;
                match (xv.as_real(), yv.as_real()) {
                    (Some(a), Some(b)) => Ok(Value::Point(a, b)),
                    _ => mismatch(pos, format!("point coordinates must be numbers, got {} and {}", xv.type_name(), yv.type_name())),
                }
            }
            ExprKind::Call(b, args) => {
                let vals = args.iter().map(|a| self.expr(a)).collect::<RResult<Vec<_>>>()?;
                self.call(*b, &vals, pos)
            }
            ExprKind::Binary(op, lhs, rhs) => {
                // short-circuit logic
                if matches!(op, BinOp::And | BinOp::Or) {
                    let l = self.expect_bool(lhs)?;
                    if (*op == BinOp::And && !l) || (*op == BinOp::Or && l) {
                        return Ok(Value::Bool(l));
                    }
                    return Ok(Value::Bool(self.expect_bool(rhs)?));
                }
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                binary(*op, l, r, pos)
            }
        }
    }

    fn expect_bool(&mut self, e: &Expr) -> RResult<bool> {
        match self.expr(e)? {
            Value::Bool(b) => Ok(b),
            other => mismatch(e.pos, format!("expected boolean, got {}", other.type_name())),
        }
    }

    fn call(&mut self, b: Builtin, args: &[Value], pos: Pos) -> RResult<Value> {
        let nums: Vec<f64> = args
            .iter()
            .map(|v| v.as_real().ok_or(()))
            .collect::<Result<_, _>>()
            .or_else(|_| mismatch(pos, "builtin functions take numbers".into()))?;
        match b {
            Builtin::Sin => finite(pos, nums[0].sin()),
            Builtin::Cos => finite(pos, nums[0].cos()),
            Builtin::Tan => finite(pos, nums[0].tan()),
            Builtin::Sqrt => finite(pos, nums[0].sqrt()),
            Builtin::Abs => match args[0] {
                Value::Int(v) => v.checked_abs().map(Value::Int).map_or_else(|| fail(pos, RuntimeErrorKind::NonFinite), Ok),
                _ => finite(pos, nums[0].abs()),
            },
            Builtin::Min | Builtin::Max => match (args[0], args[1]) {
                (Value::Int(a), Value::Int(c)) => Ok(Value::Int(if b == Builtin::Min { a.min(c) } else { a.max(c) })),
                _ => finite(pos, if b == Builtin::Min { nums[0].min(nums[1]) } else { nums[0].max(nums[1]) }),
            },
            Builtin::Floor => {
                let f = nums[0].floor();
                if f.abs() < 9.0e15 {
                    Ok(Value::Int(f as i64))
                } else {
                    fail(pos, RuntimeErrorKind::NonFinite)
                }
            }
        }
    }
}

fn binary(op: BinOp, l: Value, r: Value, pos: Pos) -> RResult<Value> {
    use Value::*;
    let overflow = || LayoutRuntimeError { pos, kind: RuntimeErrorKind::NonFinite };
    match (op, l, r) {
        (BinOp::Add, Int(a), Int(b)) => a.checked_add(b).map(Int).ok_or_else(overflow),
        (BinOp::Sub, Int(a), Int(b)) => a.checked_sub(b).map(Int).ok_or_else(overflow),
        (BinOp::Mul, Int(a), Int(b)) => a.checked_mul(b).map(Int).ok_or_else(overflow),
        (BinOp::Add, Point(a, b), Point(c, d)) => point(pos, a + c, b + d),
        (BinOp::Sub, Point(a, b), Point(c, d)) => point(pos, a - c, b - d),
        (BinOp::Mul, Point(a, b), s) | (BinOp::Mul, s, Point(a, b)) if s.as_real().is_some() => {
            let s = s.as_real().unwrap();
            point(pos, a * s, b * s)
        }
        (BinOp::Div, Point(a, b), s) if s.as_real().is_some() => {
            let s = s.as_real().unwrap();
            if s == 0.0 {
                return fail(pos, RuntimeErrorKind::DivisionByZero);
            }
            point(pos, a / s, b / s)
        }
        (_, a, b) if a.as_real().is_some() && b.as_real().is_some() => {
            let (x, y) = (a.as_real().unwrap(), b.as_real().unwrap());
            match op {
                BinOp::Add => finite(pos, x + y),
                BinOp::Sub => finite(pos, x - y),
                BinOp::Mul => finite(pos, x * y),
                BinOp::Div => {
                    if y == 0.0 {
                        fail(pos, RuntimeErrorKind::DivisionByZero)
                    } else {
                        finite(pos, x / y)
                    }
                }
                BinOp::Pow => finite(pos, x.powf(y)),
                BinOp::Lt => Ok(Bool(x < y)),
                BinOp::Le => Ok(Bool(x <= y)),
                BinOp::Gt => Ok(Bool(x > y)),
                BinOp::Ge => Ok(Bool(x >= y)),
                BinOp::Eq => Ok(Bool(x == y)),
                BinOp::Ne => Ok(Bool(x != y)),
                BinOp::And | BinOp::Or => unreachable!("handled before operand evaluation"),
            }
        }
        (op, a, b) => mismatch(pos, format!("operator {op:?} not defined for {} and {}", a.type_name(), b.type_name())),
    }
}

fn point(pos: Pos, x: f64, y: f64) -> RResult<Value> {
    if x.is_finite() && y.is_finite() {
        Ok(Value::Point(x, y))
    } else {
        fail(pos, RuntimeErrorKind::NonFinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layoutlang::{parse_layout, DEFAULT_STEP_BUDGET};

    fn run(src: &str) -> RResult<Vec<Point2>> {
        evaluate_layout(&parse_layout(src).unwrap(), DEFAULT_STEP_BUDGET)
    }

    #[test]
    fn circle_matches_closed_form() {
        let pts = run("for i in 0..12 { emit point(0.03*cos(2*pi*i/12), 0.03*sin(2*pi*i/12)) }").unwrap();
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[0], Point2::new(0.03, 0.0));
        for (k, p) in pts.iter().enumerate() {
            let t = 2.0 * PI * k as f64 / 12.0;
            assert!((p.x - 0.03 * t.cos()).abs() < 1e-12);
            assert!((p.y - 0.03 * t.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn division_by_zero() {
        let err = run("let x = 1/0").unwrap_err();
        assert_eq!(err.kind, RuntimeErrorKind::DivisionByZero);
        let err = run("emit point(1, 0) / 0").unwrap_err();
        assert_eq!(err.kind, RuntimeErrorKind::DivisionByZero);
    }

    #[test]
    fn hexagonal_grid() {
        let src = "
            let s = 0.02
            for i in 0..10 {
                for j in 0..10 {
                    let y = j*s
                    if i - 2*floor(i/2) == 1 { let y = y + s/2 }
                    emit point(i*s, y)
                }
            }";
        let pts = run(src).unwrap();
        assert_eq!(pts.len(), 100);
        for i in 0..10 {
            for j in 0..10 {
                let p = pts[i * 10 + j];
                let shift = if i % 2 == 1 { 0.01 } else { 0.0 };
                assert!((p.x - i as f64 * 0.02).abs() < 1e-15);
                assert!((p.y - (j as f64 * 0.02 + shift)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn runtime_errors() {
        assert_eq!(run("emit point(0, x)").unwrap_err().kind, RuntimeErrorKind::UnknownIdentifier("x".into()));
        assert!(matches!(run("emit 1").unwrap_err().kind, RuntimeErrorKind::TypeMismatch(_)));
        assert!(matches!(run("for i in 0..0.5 { }").unwrap_err().kind, RuntimeErrorKind::TypeMismatch(_)));
        assert_eq!(run("let x = sqrt(-1)").unwrap_err().kind, RuntimeErrorKind::NonFinite);
        assert_eq!(run("let x = 10^400").unwrap_err().kind, RuntimeErrorKind::NonFinite);
        assert_eq!(run("for i in 0..10001 { }").unwrap_err().kind, RuntimeErrorKind::LoopTooLong(10001));
        assert!(matches!(run("if 1 { }").unwrap_err().kind, RuntimeErrorKind::TypeMismatch(_)));
    }

    #[test]
    fn budget_is_enforced() {
        let script = parse_layout("for i in 0..10000 { for j in 0..10000 { let x = i } }").unwrap();
        let err = evaluate_layout(&script, 10_000).unwrap_err();
        assert_eq!(err.kind, RuntimeErrorKind::BudgetExceeded);
        let small = parse_layout("emit point(0, 0)").unwrap();
        assert!(evaluate_layout(&small, 3).is_err());
        assert_eq!(evaluate_layout(&small, 10).unwrap().len(), 1);
    }

    #[test]
    fn scoping_and_point_arithmetic() {
        let pts = run("
            let c = point(0.1, 0.2)
            let acc = 0
            for i in 0..3 { let acc = acc + 1 }
            emit c + point(acc, 0) * 2
            for k in 0..2 { let tmp = 5 }
            emit point(min(1, 2), max(0.5, -1))
        ")
        .unwrap();
        assert_eq!(pts[0], Point2::new(6.1, 0.2));
        assert_eq!(pts[1], Point2::new(1.0, 0.5));
        assert_eq!(run("for k in 0..2 { let tmp = 5 }\nemit point(tmp, 0)").unwrap_err().kind,
            RuntimeErrorKind::UnknownIdentifier("tmp".into()));
    }

    #[test]
    fn emission_count_matches_executions() {
        let pts = run("for i in 0..7 { if i < 3 { emit point(i, 0) } else { emit point(0, i) emit point(i, i) } }").unwrap();
        assert_eq!(pts.len(), 3 + 2 * 4);
    }
}
