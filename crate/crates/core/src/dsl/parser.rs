//! Recursive-descent parser for field expressions.
//!
//! ```text
//! expr     := term (('+'|'-') term)*
//! term     := factor (('*'|'/') factor)*
//! factor   := '-' factor | base ('^' exponent)?
//! base     := number | ident | '(' expr ')'
//! exponent := number | ident | '-' exponent | '(' constant expr ')'
//! ```
//!
//! Exponents may only mention numbers and bound parameters; they are folded
//! to a literal while parsing.

use crate::error::ParseError;
use crate::vf::{Expr, Params};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, toks: Vec::new() };
        let bytes = src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            let tok = match c {
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ if c.is_ascii_digit() || c == '.' => {
                    i = lx.number_end(i);
                    let text = &src[start..i];
                    let x: f64 = text.parse().map_err(|_| lx.syntax(start, "a number", text))?;
                    if !x.is_finite() {
                        return Err(lx.syntax(start, "a finite number", text));
                    }
                    lx.toks.push((Tok::Num(x), start));
                    continue;
                }
                _ if c.is_ascii_alphabetic() || c == '_' => {
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                        i += 1;
                    }
                    lx.toks.push((Tok::Ident(src[start..i].to_string()), start));
                    continue;
                }
                _ => {
                    let ch = src[start..].chars().next().unwrap_or(c);
                    return Err(lx.syntax(start, "an operator, number or identifier", &ch.to_string()));
                }
            };
            lx.toks.push((tok, start));
            i += 1;
        }
        lx.toks.push((Tok::End, src.len()));
        Ok(lx.toks)
    }

    fn number_end(&self, mut i: usize) -> usize {
        let b = self.src.as_bytes();
        while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
            i += 1;
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            if j < b.len() && b[j].is_ascii_digit() {
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                return j;
            }
        }
        i
    }

    fn syntax(&self, pos: usize, expected: &str, found: &str) -> ParseError {
        let (line, column) = line_col(self.src, pos);
        ParseError::Syntax { line, column, expected: expected.into(), found: found.into() }
    }
}

fn line_col(src: &str, pos: usize) -> (usize, usize) {
    let before = &src[..pos.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(pos, |nl| pos - nl - 1) + 1;
    (line, column)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [String],
    params: &'a Params,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let (line, column) = line_col(self.src, self.offset());
        ParseError::Syntax {
            line,
            column,
            expected: expected.into(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::add(lhs, self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::mul(lhs, self.factor()?);
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::div(lhs, self.factor()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::neg(self.factor()?));
        }
        let base = self.base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let r = self.exponent()?;
        if *self.peek() == Tok::Caret {
            return Err(self.error("an operator (parenthesize chained powers)"));
        }
        Ok(Expr::pow(base, r))
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(x) => Ok(Expr::Const(x)),
            Tok::Ident(name) => self.resolve(name, at),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => {
                self.pos -= 1;
                Err(self.error("a number, identifier or `(`"))
            }
        }
    }

    fn resolve(&self, name: String, at: usize) -> Result<Expr, ParseError> {
        if let Some(i) = self.vars.iter().position(|v| *v == name) {
            Ok(Expr::Var(i))
        } else if self.params.contains_key(&name) {
            Ok(Expr::Param(name))
        } else {
            let (line, column) = line_col(self.src, at);
            Err(ParseError::UnknownIdentifier { name, line, column })
        }
    }

    fn exponent(&mut self) -> Result<f64, ParseError> {
        let at = self.offset();
        let e = match self.peek() {
            Tok::Minus => {
                self.bump();
                return Ok(-self.exponent()?);
            }
            Tok::Num(_) | Tok::Ident(_) => self.base()?,
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                e
            }
            _ => return Err(self.error("an exponent")),
        };
        let (line, column) = line_col(self.src, at);
        if e.has_vars() {
            return Err(ParseError::NonLiteralExponent { line, column });
        }
        match e.eval(&[], self.params) {
            Ok(r) if r.is_finite() => Ok(r),
            _ => Err(ParseError::NonLiteralExponent { line, column }),
        }
    }
}

/// Parses `text` over the given variable names and parameter bindings.
pub fn parse_expr(text: &str, vars: &[String], params: &Params) -> Result<Expr, ParseError> {
    let toks = Lexer::run(text)?;
    let mut p = Parser { src: text, toks, pos: 0, vars, params };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error("an operator or end of input"));
    }
    Ok(e)
}

/// Evaluates a constant expression over parameters, e.g. `1/a`.
pub fn parse_constant(text: &str, params: &Params) -> Result<f64, ParseError> {
    let e = parse_expr(text, &[], params)?;
    e.eval(&[], params)
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ParseError::Document(format!("`{text}` does not evaluate to a finite number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uv() -> Vec<String> {
        vec!["u".into(), "v".into()]
    }

    #[test]
    fn parses_difference() {
        let e = parse_expr("u^2 - v", &uv(), &Params::new()).unwrap();
        assert_eq!(e, Expr::add(Expr::pow(Expr::Var(0), 2.0), Expr::neg(Expr::Var(1))));
    }

    #[test]
    fn caret_binds_tighter_than_unary_minus() {
        let e = parse_expr("-u^2", &uv(), &Params::new()).unwrap();
        assert_eq!(e, Expr::neg(Expr::pow(Expr::Var(0), 2.0)));
        let x = e.eval(&[3.0, 0.0], &Params::new()).unwrap();
        assert_eq!(x, -9.0);
    }

    #[test]
    fn operators_are_left_associative() {
        let e = parse_expr("u - v - 1", &uv(), &Params::new()).unwrap();
        assert_eq!(e.eval(&[5.0, 3.0], &Params::new()).unwrap(), 1.0);
        let e = parse_expr("u / v / 2", &uv(), &Params::new()).unwrap();
        assert_eq!(e.eval(&[12.0, 3.0], &Params::new()).unwrap(), 2.0);
    }

    #[test]
    fn keyfitz_kranser_second_component() {
        let e = parse_expr("(1/3)*u^3 - u", &uv(), &Params::new()).unwrap();
        let x = e.eval(&[1.0, 1.0], &Params::new()).unwrap();
        assert!((x + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn andrews_quotient() {
        let vars = vec!["w".to_string(), "u".to_string(), "v".to_string()];
        let e = parse_expr("u*v^3/(v + 2*w)", &vars, &Params::new()).unwrap();
        assert!(matches!(e, Expr::Div(..)));
        let x = e.eval(&[1.0, 2.0, 1.0], &Params::new()).unwrap();
        assert!((x - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn parameter_exponents_fold() {
        let params = Params::from([("a".to_string(), 0.5)]);
        let e = parse_expr("u^((a+1)/a)", &uv(), &params).unwrap();
        assert_eq!(e, Expr::pow(Expr::Var(0), 3.0));
        let e = parse_expr("u^-1.5e0", &uv(), &params).unwrap();
        assert_eq!(e, Expr::pow(Expr::Var(0), -1.5));
    }

    #[test]
    fn error_cases() {
        let p = Params::new();
        assert!(matches!(parse_expr("u^v", &uv(), &p), Err(ParseError::NonLiteralExponent { .. })));
        assert!(matches!(
            parse_expr("u + w", &uv(), &p),
            Err(ParseError::UnknownIdentifier { column: 5, .. })
        ));
        assert!(matches!(
            parse_expr("u + * v", &uv(), &p),
            Err(ParseError::Syntax { column: 5, .. })
        ));
        assert!(matches!(parse_expr("(u", &uv(), &p), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_expr("u $ v", &uv(), &p), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn scientific_literals() {
        let e = parse_expr("2.5e-3*u", &uv(), &Params::new()).unwrap();
        assert_eq!(e, Expr::mul(Expr::Const(2.5e-3), Expr::Var(0)));
    }

    #[test]
    fn printer_round_trip() {
        let params = Params::from([("c".to_string(), 1.0)]);
        for text in [
            "u^2 - v",
            "-u^2 + (-v)^3",
            "u/(v/2)*c - -u",
            "(u - (v + 1))^(-0.5)/u^0.25",
            "u*v^3/(v + 2*u) - c*(u + v)",
        ] {
            let e = parse_expr(text, &uv(), &params).unwrap();
            let printed = e.display(&uv()).to_string();
            let again = parse_expr(&printed, &uv(), &params).unwrap();
            assert_eq!(e, again, "{text} -> {printed}");
        }
    }
}
