use super::lexer::{check_balance, lex, Tok, Token};
use super::{
    BinOp, DslSyntaxError, Expr, FieldRef, Pos, PostOperation, PostProcessing, PostProgram, PostQuantity, PrintSpec, Span,
    ValueWrapper,
};

/// Parses a program. Bracket balance is checked before the grammar so that a
/// missing or superfluous bracket is reported as such rather than as whatever
/// token happens to follow it.
pub fn parse_post(source: &str) -> Result<PostProgram, DslSyntaxError> {
    let tokens = lex(source)?;
    check_balance(&tokens)?;
    let mut p = Parser { toks: tokens, i: 0 };
    p.program()
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
}

fn span(pos: Pos) -> Span {
    Span { line: pos.line, col: pos.col }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, DslSyntaxError> {
        Err(DslSyntaxError::new(self.pos(), msg))
    }

    fn expect(&mut self, tok: Tok, context: &str) -> Result<Pos, DslSyntaxError> {
        if *self.peek() == tok {
            Ok(self.advance().pos)
        } else {
            self.err(format!("expected '{}' {context}, found {}", tok.symbol(), self.peek().describe()))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, context: &str) -> Result<String, DslSyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            other => self.err(format!("expected identifier {context}, found {}", other.describe())),
        }
    }

    fn string(&mut self, context: &str) -> Result<String, DslSyntaxError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.advance();
                Ok(s)
            }
            other => self.err(format!("expected string {context}, found {}", other.describe())),
        }
    }

    fn keyword_is(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn program(&mut self) -> Result<PostProgram, DslSyntaxError> {
        let mut prog = PostProgram::default();
        loop {
            match self.peek().clone() {
                Tok::Eof => return Ok(prog),
                Tok::Ident(s) if s == "PostProcessing" => {
                    self.advance();
                    self.expect(Tok::LBrace, "after 'PostProcessing'")?;
                    while !self.eat(&Tok::RBrace) {
                        prog.post_processings.push(self.processing()?);
                    }
                }
                Tok::Ident(s) if s == "PostOperation" => {
                    self.advance();
                    self.expect(Tok::LBrace, "after 'PostOperation'")?;
                    while !self.eat(&Tok::RBrace) {
                        prog.post_operations.push(self.operation()?);
                    }
                }
                other => {
                    return self.err(format!("expected 'PostProcessing' or 'PostOperation', found {}", other.describe()))
                }
            }
        }
    }

    fn named_value(&mut self, kw: &str, slot: &mut Option<String>) -> Result<(), DslSyntaxError> {
        if slot.is_some() {
            return self.err(format!("duplicate '{kw}'"));
        }
        self.advance();
        *slot = Some(self.ident(&format!("after '{kw}'"))?);
        self.expect(Tok::Semi, &format!("after the '{kw}' value"))?;
        Ok(())
    }

    fn processing(&mut self) -> Result<PostProcessing, DslSyntaxError> {
        let start = self.expect(Tok::LBrace, "to open a PostProcessing entry")?;
        let (mut name, mut formulation, mut quantities) = (None, None, None);
        loop {
            match self.peek().clone() {
                Tok::RBrace => {
                    self.advance();
                    break;
                }
                Tok::Ident(k) if k == "Name" => self.named_value("Name", &mut name)?,
                Tok::Ident(k) if k == "NameOfFormulation" => self.named_value("NameOfFormulation", &mut formulation)?,
                Tok::Ident(k) if k == "PostQuantity" => {
                    if quantities.is_some() {
                        return self.err("duplicate 'PostQuantity'");
                    }
                    self.advance();
                    self.expect(Tok::LBrace, "after 'PostQuantity'")?;
                    let mut qs = Vec::new();
                    while !self.eat(&Tok::RBrace) {
                        qs.push(self.quantity()?);
                    }
                    quantities = Some(qs);
                }
                other => {
                    return self.err(format!(
                        "unexpected {} in PostProcessing entry; expected Name, NameOfFormulation or PostQuantity",
                        other.describe()
                    ))
                }
            }
        }
        let missing = |what: &str| DslSyntaxError::new(start, format!("PostProcessing entry is missing '{what}'"));
        Ok(PostProcessing {
            name: name.ok_or_else(|| missing("Name"))?,
            formulation_ref: formulation.ok_or_else(|| missing("NameOfFormulation"))?,
            quantities: quantities.ok_or_else(|| missing("PostQuantity"))?,
            span: span(start),
        })
    }

    fn quantity(&mut self) -> Result<PostQuantity, DslSyntaxError> {
        let start = self.expect(Tok::LBrace, "to open a PostQuantity entry")?;
        let mut name = None;
        let mut value = None;
        loop {
            match self.peek().clone() {
                Tok::RBrace => {
                    self.advance();
                    break;
                }
                Tok::Ident(k) if k == "Name" => self.named_value("Name", &mut name)?,
                Tok::Ident(k) if k == "Value" => {
                    if value.is_some() {
                        return self.err("duplicate 'Value'");
                    }
                    self.advance();
                    self.expect(Tok::LBrace, "after 'Value'")?;
                    value = Some(self.term()?);
                    if !matches!(self.peek(), Tok::RBrace) {
                        return self.err(format!(
                            "expected '}}' to close 'Value', found {}; only one Local or Term per quantity is supported",
                            self.peek().describe()
                        ));
                    }
                    self.advance();
                }
                other => {
                    return self.err(format!("unexpected {} in PostQuantity entry; expected Name or Value", other.describe()))
                }
            }
        }
        let name = name.ok_or_else(|| DslSyntaxError::new(start, "PostQuantity entry is missing 'Name'"))?;
        let (wrapper, expr, regions, jacobian) =
            value.ok_or_else(|| DslSyntaxError::new(start, format!("PostQuantity '{name}' is missing 'Value'")))?;
        Ok(PostQuantity { name, wrapper, expr, regions, jacobian, span: span(start) })
    }

    #[allow(clippy::type_complexity)]
    fn term(&mut self) -> Result<(ValueWrapper, Expr, Vec<String>, String), DslSyntaxError> {
        let wrapper = match self.peek() {
            Tok::Ident(k) if k == "Local" => ValueWrapper::Local,
            Tok::Ident(k) if k == "Term" => ValueWrapper::Term,
            other => return self.err(format!("expected 'Local' or 'Term' inside 'Value', found {}", other.describe())),
        };
        self.advance();
        let open = self.expect(Tok::LBrace, "after the value wrapper")?;
        self.expect(Tok::LBrack, "to open the value expression")?;
        let expr = self.expr()?;
        self.expect(Tok::RBrack, "to close the value expression")?;
        self.expect(Tok::Semi, "after the value expression")?;
        let (mut regions, mut jacobian) = (None, None);
        loop {
            match self.peek().clone() {
                Tok::RBrace => {
                    self.advance();
                    break;
                }
                Tok::Ident(k) if k == "In" => {
                    if regions.is_some() {
                        return self.err("duplicate 'In'");
                    }
                    self.advance();
                    regions = Some(self.region_list()?);
                    self.semi_or_close("after the region")?;
                }
                Tok::Ident(k) if k == "Jacobian" => {
                    if jacobian.is_some() {
                        return self.err("duplicate 'Jacobian'");
                    }
                    self.advance();
                    jacobian = Some(self.ident("after 'Jacobian'")?);
                    self.semi_or_close("after the Jacobian")?;
                }
                other => return self.err(format!("unexpected {} in value term; expected In or Jacobian", other.describe())),
            }
        }
        let regions = regions.ok_or_else(|| DslSyntaxError::new(open, "value term is missing 'In'"))?;
        Ok((wrapper, expr, regions, jacobian.unwrap_or_else(|| "Vol".into())))
    }

    fn semi_or_close(&mut self, context: &str) -> Result<(), DslSyntaxError> {
        if self.eat(&Tok::Semi) || matches!(self.peek(), Tok::RBrace) {
            Ok(())
        } else {
            self.err(format!("expected ';' {context}, found {}", self.peek().describe()))
        }
    }

    fn region_list(&mut self) -> Result<Vec<String>, DslSyntaxError> {
        if !self.keyword_is("Region") {
            return Ok(vec![self.ident("naming a region")?]);
        }
        self.advance();
        self.expect(Tok::LBrack, "after 'Region'")?;
        let names = if self.eat(&Tok::LBrace) {
            let mut names = vec![self.ident("in the region list")?];
            while self.eat(&Tok::Comma) {
                names.push(self.ident("in the region list")?);
            }
            self.expect(Tok::RBrace, "to close the region list")?;
            names
        } else {
            vec![self.ident("inside 'Region[ ]'")?]
        };
        self.expect(Tok::RBrack, "to close 'Region['")?;
        Ok(names)
    }

    fn operation(&mut self) -> Result<PostOperation, DslSyntaxError> {
        let start = self.expect(Tok::LBrace, "to open a PostOperation entry")?;
        let (mut name, mut processing, mut prints) = (None, None, None);
        loop {
            match self.peek().clone() {
                Tok::RBrace => {
                    self.advance();
                    break;
                }
                Tok::Ident(k) if k == "Name" => self.named_value("Name", &mut name)?,
                Tok::Ident(k) if k == "NameOfPostProcessing" => self.named_value("NameOfPostProcessing", &mut processing)?,
                Tok::Ident(k) if k == "Operation" => {
                    if prints.is_some() {
                        return self.err("duplicate 'Operation'");
                    }
                    self.advance();
                    self.expect(Tok::LBrace, "after 'Operation'")?;
                    let mut ps = Vec::new();
                    while !self.eat(&Tok::RBrace) {
                        ps.push(self.print()?);
                    }
                    prints = Some(ps);
                }
                other => {
                    return self.err(format!(
                        "unexpected {} in PostOperation entry; expected Name, NameOfPostProcessing or Operation",
                        other.describe()
                    ))
                }
            }
        }
        let missing = |what: &str| DslSyntaxError::new(start, format!("PostOperation entry is missing '{what}'"));
        Ok(PostOperation {
            name: name.ok_or_else(|| missing("Name"))?,
            processing_ref: processing.ok_or_else(|| missing("NameOfPostProcessing"))?,
            prints: prints.ok_or_else(|| missing("Operation"))?,
            span: span(start),
        })
    }

    fn print(&mut self) -> Result<PrintSpec, DslSyntaxError> {
        let start = self.pos();
        if !self.keyword_is("Print") {
            return self.err(format!("expected 'Print' in Operation block, found {}", self.peek().describe()));
        }
        self.advance();
        self.expect(Tok::LBrack, "after 'Print'")?;
        let quantity = self.ident("naming the printed quantity")?;
        let mut spec = PrintSpec { quantity, on_elements_of: None, file: None, label: None, format: None, span: span(start) };
        while self.eat(&Tok::Comma) {
            let opt_pos = self.pos();
            let key = self.ident("as a Print option")?;
            let (slot, value) = match key.as_str() {
                "OnElementsOf" => (&mut spec.on_elements_of, self.ident("after 'OnElementsOf'")?),
                "File" => (&mut spec.file, self.string("after 'File'")?),
                "Name" => (&mut spec.label, self.string("after 'Name'")?),
                "Format" => (&mut spec.format, self.ident("after 'Format'")?),
                other => {
                    return Err(DslSyntaxError::new(
                        opt_pos,
                        format!("unsupported Print option '{other}'; expected OnElementsOf, File, Name or Format"),
                    ))
                }
            };
            if slot.is_some() {
                return Err(DslSyntaxError::new(opt_pos, format!("duplicate Print option '{key}'")));
            }
            *slot = Some(value);
        }
        self.expect(Tok::RBrack, "to close 'Print['")?;
        self.expect(Tok::Semi, "after 'Print[ ]'")?;
        Ok(spec)
    }

    fn expr(&mut self) -> Result<Expr, DslSyntaxError> {
        let mut lhs = self.mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let pos = self.advance().pos;
            let rhs = self.mul()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs), span(pos));
        }
    }

    fn mul(&mut self) -> Result<Expr, DslSyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let pos = self.advance().pos;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs), span(pos));
        }
    }

    fn unary(&mut self) -> Result<Expr, DslSyntaxError> {
        match self.peek() {
            Tok::Minus => {
                let pos = self.advance().pos;
                Ok(Expr::Neg(Box::new(self.unary()?), span(pos)))
            }
            Tok::Plus => {
                self.advance();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, DslSyntaxError> {
        let base = self.primary()?;
        if matches!(self.peek(), Tok::Caret) {
            let pos = self.advance().pos;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp), span(pos)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, DslSyntaxError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.advance();
                Ok(Expr::Num(v, span(pos)))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "to close the parenthesis")?;
                Ok(e)
            }
            Tok::LBrace => {
                self.advance();
                let first = self.ident("inside a field reference")?;
                let field = if first == "d" && matches!(self.peek(), Tok::Ident(_)) {
                    FieldRef { derivative: true, name: self.ident("after 'd'")? }
                } else {
                    FieldRef { derivative: false, name: first }
                };
                self.expect(Tok::RBrace, "to close the field reference")?;
                Ok(Expr::Field(field, span(pos)))
            }
            Tok::Ident(name) => {
                self.advance();
                if !matches!(self.peek(), Tok::LBrack) {
                    return Err(DslSyntaxError::new(
                        pos,
                        format!("bare identifier '{name}' in expression; write '{name}[]' for a function or '{{{name}}}' for a field"),
                    ));
                }
                self.advance();
                if self.eat(&Tok::RBrack) {
                    return Ok(Expr::Coef(name, span(pos)));
                }
                let mut args = vec![self.expr()?];
                while self.eat(&Tok::Comma) {
                    args.push(self.expr()?);
                }
                self.expect(Tok::RBrack, &format!("to close '{name}['"))?;
                Ok(Expr::Call(name, args, span(pos)))
            }
            other => self.err(format!("expected an expression, found {}", other.describe())),
        }
    }
}
