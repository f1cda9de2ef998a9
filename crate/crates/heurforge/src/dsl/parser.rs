//! Hand-rolled lexer and recursive-descent parser for the heuristic DSL.

use thiserror::Error;

use super::ast::{BinOp, Expr, Lit, Mode, Program, ProgramAst, Stmt, UnOp};

#[derive(Debug, Clone, Error, PartialEq)]
#[error("syntax error at line {line}, col {col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Float(f64),
    Ident(String),
    KwLet,
    KwIf,
    KwElse,
    KwReturn,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    PlusEq,
    MinusEq,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Question,
    Colon,
    Semi,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn err(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn lex(mut self) -> Result<Vec<Spanned>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            // Skip whitespace and `//` line comments.
            loop {
                match self.peek() {
                    Some(c) if c.is_ascii_whitespace() => {
                        self.bump();
                    }
                    Some(b'/') if self.src.get(self.pos + 1) == Some(&b'/') => {
                        while let Some(c) = self.peek() {
                            if c == b'\n' {
                                break;
                            }
                            self.bump();
                        }
                    }
                    _ => break,
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else { break };
            let tok = if c.is_ascii_digit() {
                self.lex_number()?
            } else if c.is_ascii_alphabetic() || c == b'_' {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == b'_' {
                        s.push(c as char);
                        self.bump();
                    } else {
                        break;
                    }
                }
                match s.as_str() {
                    "let" => Tok::KwLet,
                    "if" => Tok::KwIf,
                    "else" => Tok::KwElse,
                    "return" => Tok::KwReturn,
                    _ => Tok::Ident(s),
                }
            } else {
                self.bump();
                match c {
                    b'+' => {
                        if self.peek() == Some(b'=') {
                            self.bump();
                            Tok::PlusEq
                        } else {
                            Tok::Plus
                        }
                    }
                    b'-' => {
                        if self.peek() == Some(b'=') {
                            self.bump();
                            Tok::MinusEq
                        } else {
                            Tok::Minus
                        }
                    }
                    b'*' => Tok::Star,
                    b'/' => Tok::Slash,
                    b'%' => Tok::Percent,
                    b'=' => {
                        if self.peek() == Some(b'=') {
                            self.bump();
                            Tok::EqEq
                        } else {
                            Tok::Assign
                        }
                    }
                    b'!' => {
                        if self.peek() == Some(b'=') {
                            self.bump();
                            Tok::NotEq
                        } else {
                            Tok::Bang
                        }
                    }
                    b'<' => {
                        if self.peek() == Some(b'=') {
                            self.bump();
                            Tok::Le
                        } else {
                            Tok::Lt
                        }
                    }
                    b'>' => {
                        if self.peek() == Some(b'=') {
                            self.bump();
                            Tok::Ge
                        } else {
                            Tok::Gt
                        }
                    }
                    b'&' => {
                        if self.peek() == Some(b'&') {
                            self.bump();
                            Tok::AndAnd
                        } else {
                            return Err(self.err("expected '&&'"));
                        }
                    }
                    b'|' => {
                        if self.peek() == Some(b'|') {
                            self.bump();
                            Tok::OrOr
                        } else {
                            return Err(self.err("expected '||'"));
                        }
                    }
                    b'?' => Tok::Question,
                    b':' => Tok::Colon,
                    b';' => Tok::Semi,
                    b',' => Tok::Comma,
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    b'{' => Tok::LBrace,
                    b'}' => Tok::RBrace,
                    other => {
                        return Err(self.err(format!("unexpected character '{}'", other as char)))
                    }
                }
            };
            out.push(Spanned { tok, line, col });
        }
        Ok(out)
    }

    fn lex_number(&mut self) -> Result<Tok, SyntaxError> {
        let mut digits = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                digits.push(c as char);
                self.bump();
            } else {
                break;
            }
        }
        // A dot followed by a digit makes this a float literal.
        if self.peek() == Some(b'.') && self.src.get(self.pos + 1).is_some_and(u8::is_ascii_digit) {
            digits.push('.');
            self.bump();
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    digits.push(c as char);
                    self.bump();
                } else {
                    break;
                }
            }
            let v: f64 = digits
                .parse()
                .map_err(|_| self.err("invalid float literal"))?;
            if !v.is_finite() {
                return Err(self.err("float literal out of range"));
            }
            Ok(Tok::Float(v))
        } else {
            let v: i64 = digits
                .parse()
                .map_err(|_| self.err("integer literal out of range"))?;
            Ok(Tok::Int(v))
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn err_at(&self, message: impl Into<String>) -> SyntaxError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map(|s| (s.line, s.col))
            .or_else(|| self.toks.last().map(|s| (s.line, s.col + 1)))
            .unwrap_or((1, 1));
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok, what: &str) -> Result<(), SyntaxError> {
        if self.peek() == Some(t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err_at(format!("expected {what}")))
        }
    }

    fn parse_program(&mut self) -> Result<ProgramAst, SyntaxError> {
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::KwReturn) => {
                    self.bump();
                    let ret = self.parse_expr()?;
                    self.eat(&Tok::Semi, "';' after return expression")?;
                    if self.peek().is_some() {
                        return Err(self.err_at("unexpected tokens after return statement"));
                    }
                    return Ok(ProgramAst { stmts, ret });
                }
                Some(_) => stmts.push(self.parse_stmt()?),
                None => return Err(self.err_at("expected 'return' before end of program")),
            }
        }
    }

    fn parse_stmt(&mut self) -> Result<Stmt, SyntaxError> {
        match self.peek() {
            Some(Tok::KwLet) => {
                self.bump();
                let name = self.parse_ident_name()?;
                self.eat(&Tok::Assign, "'=' in let statement")?;
                let e = self.parse_expr()?;
                self.eat(&Tok::Semi, "';' after let statement")?;
                Ok(Stmt::Let(name, e))
            }
            Some(Tok::KwIf) => {
                self.bump();
                self.eat(&Tok::LParen, "'(' after if")?;
                let cond = self.parse_expr()?;
                self.eat(&Tok::RParen, "')' after if condition")?;
                let then_b = self.parse_block()?;
                let else_b = if self.peek() == Some(&Tok::KwElse) {
                    self.bump();
                    // Allow both `else { ... }` and a bare `else stmt;`.
                    if self.peek() == Some(&Tok::LBrace) {
                        self.parse_block()?
                    } else {
                        vec![self.parse_stmt()?]
                    }
                } else {
                    Vec::new()
                };
                Ok(Stmt::If(cond, then_b, else_b))
            }
            Some(Tok::Ident(_)) => {
                let name = self.parse_ident_name()?;
                let mk: fn(String, Expr) -> Stmt = match self.bump() {
                    Some(Tok::Assign) => Stmt::Assign,
                    Some(Tok::PlusEq) => Stmt::AddAssign,
                    Some(Tok::MinusEq) => Stmt::SubAssign,
                    _ => return Err(self.err_at("expected '=', '+=' or '-=' after identifier")),
                };
                let e = self.parse_expr()?;
                self.eat(&Tok::Semi, "';' after assignment")?;
                Ok(mk(name, e))
            }
            _ => Err(self.err_at("expected statement or 'return'")),
        }
    }

    fn parse_block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        if self.peek() == Some(&Tok::LBrace) {
            self.bump();
            let mut stmts = Vec::new();
            while self.peek() != Some(&Tok::RBrace) {
                if self.peek().is_none() {
                    return Err(self.err_at("unterminated block, expected '}'"));
                }
                stmts.push(self.parse_stmt()?);
            }
            self.bump();
            Ok(stmts)
        } else {
            // Single-statement body without braces.
            Ok(vec![self.parse_stmt()?])
        }
    }

    fn parse_ident_name(&mut self) -> Result<String, SyntaxError> {
        match self.bump() {
            Some(Tok::Ident(s)) => Ok(s),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err_at("expected identifier"))
            }
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, SyntaxError> {
        self.parse_ternary()
    }

    fn parse_ternary(&mut self) -> Result<Expr, SyntaxError> {
        let cond = self.parse_or()?;
        if self.peek() == Some(&Tok::Question) {
            self.bump();
            let a = self.parse_expr()?;
            self.eat(&Tok::Colon, "':' in ternary expression")?;
            let b = self.parse_expr()?;
            Ok(Expr::Ternary(Box::new(cond), Box::new(a), Box::new(b)))
        } else {
            Ok(cond)
        }
    }

    fn parse_or(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.parse_and()?;
        while self.peek() == Some(&Tok::OrOr) {
            self.bump();
            let rhs = self.parse_and()?;
            e = Expr::bin(BinOp::Or, e, rhs);
        }
        Ok(e)
    }

    fn parse_and(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.parse_cmp()?;
        while self.peek() == Some(&Tok::AndAnd) {
            self.bump();
            let rhs = self.parse_cmp()?;
            e = Expr::bin(BinOp::And, e, rhs);
        }
        Ok(e)
    }

    fn parse_cmp(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.parse_add()?;
        let op = match self.peek() {
            Some(Tok::Lt) => Some(BinOp::Lt),
            Some(Tok::Le) => Some(BinOp::Le),
            Some(Tok::Gt) => Some(BinOp::Gt),
            Some(Tok::Ge) => Some(BinOp::Ge),
            Some(Tok::EqEq) => Some(BinOp::Eq),
            Some(Tok::NotEq) => Some(BinOp::Ne),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let rhs = self.parse_add()?;
            Ok(Expr::bin(op, lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn parse_add(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.parse_mul()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_mul()?;
            e = Expr::bin(op, e, rhs);
        }
        Ok(e)
    }

    fn parse_mul(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                Some(Tok::Percent) => BinOp::Mod,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_unary()?;
            e = Expr::bin(op, e, rhs);
        }
        Ok(e)
    }

    fn parse_unary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.bump();
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.parse_unary()?)))
            }
            Some(Tok::Bang) => {
                self.bump();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.parse_unary()?)))
            }
            _ => self.parse_primary(),
        }
    }

    fn parse_primary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.bump();
                Ok(Expr::Lit(Lit::Int(v)))
            }
            Some(Tok::Float(v)) => {
                self.bump();
                Ok(Expr::Lit(Lit::Float(v)))
            }
            Some(Tok::LParen) => {
                self.bump();
                let e = self.parse_expr()?;
                self.eat(&Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.bump();
                if self.peek() == Some(&Tok::LParen) {
                    self.bump();
                    let mut args = Vec::new();
                    if self.peek() != Some(&Tok::RParen) {
                        loop {
                            args.push(self.parse_expr()?);
                            if self.peek() == Some(&Tok::Comma) {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.eat(&Tok::RParen, "')' after call arguments")?;
                    Ok(Expr::Call(name, args))
                } else {
                    Ok(Expr::Ident(name))
                }
            }
            _ => Err(self.err_at("expected expression")),
        }
    }
}

/// Parse DSL source into a [`Program`]. The original source text is kept;
/// use [`super::ast::render`] for the canonical form.
pub fn parse(source: &str, mode: Mode) -> Result<Program, SyntaxError> {
    let toks = Lexer::new(source).lex()?;
    let mut p = Parser { toks, pos: 0 };
    let ast = p.parse_program()?;
    Ok(Program {
        source: source.to_string(),
        ast,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::ast::render;

    #[test]
    fn parse_lru_seed() {
        let p = parse("return last_access_time;", Mode::Cache).unwrap();
        assert_eq!(p.ast.stmts.len(), 0);
        assert_eq!(p.ast.ret, Expr::ident("last_access_time"));
    }

    #[test]
    fn parse_two_statements() {
        let p = parse("let s = count * 20; return s;", Mode::Cache).unwrap();
        assert_eq!(p.ast.stmts.len(), 1);
        assert_eq!(
            p.ast.stmts[0],
            Stmt::Let(
                "s".into(),
                Expr::bin(BinOp::Mul, Expr::ident("count"), Expr::int(20))
            )
        );
    }

    #[test]
    fn parse_unbalanced_fails() {
        let e = parse("return (1 +", Mode::Cache).unwrap_err();
        assert!(e.message.contains("expected expression"));
    }

    #[test]
    fn parse_missing_return_fails() {
        assert!(parse("let x = 1;", Mode::Cache).is_err());
    }

    #[test]
    fn parse_trailing_tokens_fail() {
        assert!(parse("return 1; return 2;", Mode::Cache).is_err());
    }

    #[test]
    fn canonicalizes_whitespace() {
        let p = parse("return  count ;", Mode::Cache).unwrap();
        assert_eq!(render(&p), "return count;\n");
    }

    #[test]
    fn precedence_and_parens() {
        let a = parse("return (1 + 2) * 3;", Mode::Cache).unwrap();
        let b = parse("return 1 + 2 * 3;", Mode::Cache).unwrap();
        assert_ne!(a.ast, b.ast);
        let re_a = parse(&render(&a), Mode::Cache).unwrap();
        assert_eq!(re_a.ast, a.ast);
    }

    #[test]
    fn ternary_and_calls() {
        let src = "return count > percentile(counts, 0.7) ? 50 : -5;";
        let p = parse(src, Mode::Cache).unwrap();
        let rt = parse(&render(&p), Mode::Cache).unwrap();
        assert_eq!(rt.ast, p.ast);
    }

    #[test]
    fn if_else_blocks_roundtrip() {
        let src = "let s = 0; if (count > 3) { s += 1; } else { s -= 2; } return s;";
        let p = parse(src, Mode::Cache).unwrap();
        let rt = parse(&render(&p), Mode::Cache).unwrap();
        assert_eq!(rt.ast, p.ast);
    }

    #[test]
    fn braceless_else_stmt() {
        let src = "let s = 0; if (count > 3) { s += 1; } else s -= 40; return s;";
        let p = parse(src, Mode::Cache).unwrap();
        match &p.ast.stmts[1] {
            Stmt::If(_, _, else_b) => assert_eq!(else_b.len(), 1),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn comments_ignored() {
        let p = parse("// lru\nreturn last_access_time; // tail", Mode::Cache).unwrap();
        assert_eq!(p.ast.ret, Expr::ident("last_access_time"));
    }

    #[test]
    fn float_literal_rendering_roundtrips() {
        for src in ["return 0.75;", "return 2.0;", "return 0.5 * size;"] {
            let p = parse(src, Mode::Cache).unwrap();
            let rt = parse(&render(&p), Mode::Cache).unwrap();
            assert_eq!(rt.ast, p.ast, "source {src:?}");
        }
    }
}
