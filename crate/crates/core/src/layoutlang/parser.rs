use super::lexer::{Tok, Token};
use super::{BinOp, Builtin, Expr, ExprKind, LayoutSyntaxError, Pos, Stmt};

pub(crate) struct Parser {
    toks: Vec<Token>,
    at: usize,
    /// Open `{` and `(` with what they belong to, for end-of-input diagnostics.
    open: Vec<(Pos, char, &'static str)>,
}

type PResult<T> = Result<T, LayoutSyntaxError>;

impl Parser {
    pub(crate) fn new(toks: Vec<Token>) -> Self {
        Self { toks, at: 0, open: Vec::new() }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error_here(&self, expected: &str) -> LayoutSyntaxError {
        if *self.peek() == Tok::Eof {
            // report against the outermost unclosed brace, else the innermost paren
            let culprit = self
                .open
                .iter()
                .find(|(_, c, _)| *c == '{')
                .or_else(|| self.open.last());
            if let Some((pos, c, what)) = culprit {
                return LayoutSyntaxError::new(
                    *pos,
                    format!("unexpected end of input: unclosed '{c}' of {what} (expected {expected})"),
                );
            }
        }
        LayoutSyntaxError::new(self.pos(), format!("expected {expected}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<Pos> {
        if *self.peek() == t {
            Ok(self.advance().pos)
        } else {
            Err(self.error_here(what))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let pos = self.advance().pos;
                Ok((name, pos))
            }
            _ => Err(self.error_here(what)),
        }
    }

    pub(crate) fn program(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while *self.peek() != Tok::Eof {
            if *self.peek() == Tok::RBrace {
                return Err(LayoutSyntaxError::new(self.pos(), "unmatched '}'"));
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn block(&mut self, what: &'static str) -> PResult<Vec<Stmt>> {
        let open = self.expect(Tok::LBrace, "'{'")?;
        self.open.push((open, '{', what));
        let mut body = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error_here("'}'"));
            }
            body.push(self.stmt()?);
        }
        self.advance();
        self.open.pop();
        Ok(body)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let stmt = match self.peek() {
            Tok::Let => {
                self.advance();
                let (name, npos) = self.ident("a variable name after 'let'")?;
                if name == "pi" || Builtin::from_name(&name).is_some() || name == "point" {
                    return Err(LayoutSyntaxError::new(npos, format!("'{name}' is reserved")));
                }
                self.expect(Tok::Assign, "'='")?;
                let value = self.expr()?;
                Stmt::Let { name, value, pos }
            }
            Tok::For => {
                self.advance();
                let (var, _) = self.ident("a loop variable after 'for'")?;
                self.expect(Tok::In, "'in'")?;
                let start = self.additive()?;
                self.expect(Tok::DotDot, "'..'")?;
                let end = self.additive()?;
                let body = self.block("for-loop body")?;
                Stmt::For { var, start, end, body, pos }
            }
            Tok::If => self.if_stmt()?,
            Tok::Emit => {
                self.advance();
                let point = self.expr()?;
                Stmt::Emit { point, pos }
            }
            _ => return Err(self.error_here("a statement ('let', 'for', 'if' or 'emit')")),
        };
        while self.eat(&Tok::Semi) {}
        Ok(stmt)
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let pos = self.expect(Tok::If, "'if'")?;
        let cond = self.expr()?;
        let then_body = self.block("if body")?;
        let else_body = if self.eat(&Tok::Else) {
            if *self.peek() == Tok::If {
                Some(vec![self.if_stmt()?])
            } else {
                Some(self.block("else body")?)
            }
        } else {
            None
        };
        Ok(Stmt::If { cond, then_body, else_body, pos })
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::OrOr {
            let pos = self.advance().pos;
            let rhs = self.and_expr()?;
            lhs = bin(BinOp::Or, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.comparison()?;
        while *self.peek() == Tok::AndAnd {
            let pos = self.advance().pos;
            let rhs = self.comparison()?;
            lhs = bin(BinOp::And, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            _ => return Ok(lhs),
        };
        let pos = self.advance().pos;
        let rhs = self.additive()?;
        if matches!(self.peek(), Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge | Tok::EqEq | Tok::Ne) {
            return Err(LayoutSyntaxError::new(self.pos(), "comparisons cannot be chained"));
        }
        Ok(bin(op, lhs, rhs, pos))
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let pos = self.advance().pos;
            let rhs = self.term()?;
            lhs = bin(op, lhs, rhs, pos);
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let pos = self.advance().pos;
            let rhs = self.unary()?;
            lhs = bin(op, lhs, rhs, pos);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            let pos = self.advance().pos;
            let inner = self.unary()?;
            return Ok(Expr { kind: ExprKind::Neg(Box::new(inner)), pos });
        }
        if *self.peek() == Tok::Plus {
            self.advance();
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            let pos = self.advance().pos;
            // right associative, and binds tighter than unary minus on its left
            let exp = self.unary()?;
            return Ok(bin(BinOp::Pow, base, exp, pos));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr { kind: ExprKind::Int(v), pos })
            }
            Tok::Real(v) => {
                self.advance();
                Ok(Expr { kind: ExprKind::Real(v), pos })
            }
            Tok::LParen => {
                self.advance();
                self.open.push((pos, '(', "parenthesized expression"));
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                self.open.pop();
                Ok(e)
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() == Tok::LParen {
                    return self.call(name, pos);
                }
                if name == "pi" {
                    return Ok(Expr { kind: ExprKind::Pi, pos });
                }
                Ok(Expr { kind: ExprKind::Var(name), pos })
            }
            _ => Err(self.error_here("an expression")),
        }
    }

    fn call(&mut self, name: String, pos: Pos) -> PResult<Expr> {
        let open = self.expect(Tok::LParen, "'('")?;
        self.open.push((open, '(', "call arguments"));
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "')' or ','")?;
        self.open.pop();
        if name == "point" {
            if args.len() != 2 {
                return Err(LayoutSyntaxError::new(pos, format!("point expects 2 arguments, got {}", args.len())));
            }
            let y = args.pop().unwrap();
            let x = args.pop().unwrap();
            return Ok(Expr { kind: ExprKind::Point(Box::new(x), Box::new(y)), pos });
        }
        let Some(b) = Builtin::from_name(&name) else {
            return Err(LayoutSyntaxError::new(pos, format!("unknown function '{name}'")));
        };
        if args.len() != b.arity() {
            return Err(LayoutSyntaxError::new(
                pos,
                format!("{name} expects {} argument(s), got {}", b.arity(), args.len()),
            ));
        }
        Ok(Expr { kind: ExprKind::Call(b, args), pos })
    }
}

fn bin(op: BinOp, lhs: Expr, rhs: Expr, pos: Pos) -> Expr {
    Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos }
}
