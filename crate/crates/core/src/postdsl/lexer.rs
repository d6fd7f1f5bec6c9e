use super::{DslSyntaxError, Pos};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    LBrace,
    RBrace,
    LBrack,
    RBrack,
    LParen,
    RParen,
    Semi,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Num(v) => format!("number {v}"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Eof => "end of input".into(),
            other => format!("'{}'", other.symbol()),
        }
    }

    pub(crate) fn symbol(&self) -> &'static str {
        match self {
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBrack => "[",
            Tok::RBrack => "]",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Caret => "^",
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, DslSyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(DslSyntaxError::new(pos, "unterminated block comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(DslSyntaxError::new(pos, "unterminated string literal")),
                    Some('"') => {
                        bump!();
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), pos });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), pos });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            if i < chars.len() && chars[i] == '.' {
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while i < j {
                        bump!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| DslSyntaxError::new(pos, format!("invalid number '{text}'")))?;
            out.push(Token { tok: Tok::Num(v), pos });
            continue;
        }
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            other => return Err(DslSyntaxError::new(pos, format!("unexpected character '{other}'"))),
        };
        bump!();
        out.push(Token { tok, pos });
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(out)
}

fn closer(open: &Tok) -> Tok {
    match open {
        Tok::LBrace => Tok::RBrace,
        Tok::LBrack => Tok::RBrack,
        _ => Tok::RParen,
    }
}

/// Checks that brackets of all three kinds nest properly. The error names the
/// construct whose bracket is unbalanced and carries a count-based hint.
pub(crate) fn check_balance(tokens: &[Token]) -> Result<(), DslSyntaxError> {
    let mut stack: Vec<(Tok, Pos, String)> = Vec::new();
    let hint = || {
        let count = |t: Tok| tokens.iter().filter(|x| x.tok == t).count();
        let mut parts = Vec::new();
        for (o, c, name) in [(Tok::LBrace, Tok::RBrace, "curly"), (Tok::LBrack, Tok::RBrack, "square"), (Tok::LParen, Tok::RParen, "round")] {
            let (no, nc) = (count(o.clone()), count(c.clone()));
            if no != nc {
                parts.push(format!("{no} '{}' vs {nc} '{}' {name} brackets", o.symbol(), c.symbol()));
            }
        }
        if parts.is_empty() {
            "bracket counts match but nesting is crossed".to_string()
        } else {
            format!("bracket balance: {}", parts.join(", "))
        }
    };
    for (k, t) in tokens.iter().enumerate() {
        match &t.tok {
            Tok::LBrace | Tok::LBrack | Tok::LParen => stack.push((t.tok.clone(), t.pos, construct_name(tokens, k))),
            Tok::RBrace | Tok::RBrack | Tok::RParen => match stack.pop() {
                None => {
                    let mut e =
                        DslSyntaxError::new(t.pos, format!("superfluous '{}' with no matching opening bracket", t.tok.symbol()));
                    e.hint = Some(hint());
                    return Err(e);
                }
                Some((open, opos, name)) if closer(&open) != t.tok => {
                    let mut e = DslSyntaxError::new(
                        t.pos,
                        format!(
                            "'{}' does not match '{}' of {name} opened at {opos}",
                            t.tok.symbol(),
                            open.symbol()
                        ),
                    );
                    e.hint = Some(hint());
                    return Err(e);
                }
                Some(_) => {}
            },
            _ => {}
        }
    }
    if let Some((open, opos, name)) = stack.pop() {
        let mut e = DslSyntaxError::new(opos, format!("'{}' of {name} is never closed", open.symbol()));
        e.hint = Some(hint());
        return Err(e);
    }
    Ok(())
}

/// Human-readable name of the construct opened by the bracket at `k`.
fn construct_name(tokens: &[Token], k: usize) -> String {
    let at = |j: usize| tokens.get(j).map(|t| &t.tok);
    let prev = k.checked_sub(1).and_then(at);
    let prev2 = k.checked_sub(2).and_then(at);
    if tokens[k].tok == Tok::LBrace {
        if let (Some(Tok::Ident(n)), Some(Tok::RBrace)) = (at(k + 1), at(k + 2)) {
            return format!("the field reference '{{{n}}}'");
        }
        if let (Some(Tok::Ident(d)), Some(Tok::Ident(n)), Some(Tok::RBrace)) = (at(k + 1), at(k + 2), at(k + 3)) {
            return format!("the field reference '{{{d} {n}}}'");
        }
    }
    match (prev2, prev, at(k + 1)) {
        (_, Some(Tok::Ident(p)), _) => format!("'{p}'"),
        (Some(Tok::Ident(p)), Some(Tok::LBrack), _) => format!("the list inside '{p}[ ]'"),
        (_, _, Some(Tok::Ident(n))) if tokens[k].tok == Tok::LBrace => format!("the block starting with '{n}'"),
        _ => match tokens[k].tok {
            Tok::LBrace => "a block".into(),
            Tok::LBrack => "an expression".into(),
            _ => "a parenthesized expression".into(),
        },
    }
}
