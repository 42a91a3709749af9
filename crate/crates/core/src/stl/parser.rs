//! Text syntax for bounded STL formulas.
//!
//! ```text
//! formula   := or ( "U" window or )*
//! or        := and ( "or" and )*
//! and       := unary ( "and" unary )*
//! unary     := "not" unary | "F" window unary | "G" window unary | primary
//! primary   := "true" | "false" | "(" predicate ")" | "(" formula ")"
//! predicate := linear ( ">" | ">=" | "<" | "<=" ) linear
//! linear    := ["+"|"-"] term ( ("+"|"-") term )*
//! term      := number [ "*" var ] | var
//! window    := "[" integer "," integer "]"
//! var       := "y" integer              (output coordinate, 0-based)
//! ```
//!
//! Binding strength, tightest first: `not`/`F`/`G`, `and`, `or`, `U`.
//! Binary operators associate to the left. Predicates are normalized to
//! `a . y >= c`; `>` and `>=` are the same predicate, as are `<` and `<=`.

use std::fmt;

use super::formula::{Formula, Interval};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub message: String,
    /// Byte offset into the input.
    pub position: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at position {}", self.message, self.position)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    Not,
    And,
    Or,
    True,
    False,
    Until,
    Eventually,
    Always,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Gt,
    Lt,
    Star,
    Plus,
    Minus,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Var(i) => write!(f, "y{i}"),
            Tok::Not => f.write_str("'not'"),
            Tok::And => f.write_str("'and'"),
            Tok::Or => f.write_str("'or'"),
            Tok::True => f.write_str("'true'"),
            Tok::False => f.write_str("'false'"),
            Tok::Until => f.write_str("'U'"),
            Tok::Eventually => f.write_str("'F'"),
            Tok::Always => f.write_str("'G'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::LBracket => f.write_str("'['"),
            Tok::RBracket => f.write_str("']'"),
            Tok::Comma => f.write_str("','"),
            Tok::Gt => f.write_str("'>'"),
            Tok::Lt => f.write_str("'<'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn err<T>(message: impl Into<String>, position: usize) -> Result<T, ParseError> {
    Err(ParseError {
        message: message.into(),
        position,
    })
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'[' => Some(Tok::LBracket),
            b']' => Some(Tok::RBracket),
            b',' => Some(Tok::Comma),
            b'*' => Some(Tok::Star),
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'>' | b'<' => {
                let tok = if c == b'>' { Tok::Gt } else { Tok::Lt };
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                }
                Some(tok)
            }
            _ => None,
        };
        if let Some(tok) = single {
            i += 1;
            out.push((tok, start));
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lexeme = &text[start..i];
            match lexeme.parse::<f64>() {
                Ok(v) => out.push((Tok::Num(v), start)),
                Err(_) => return err(format!("malformed number '{lexeme}'"), start),
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &text[start..i];
            let tok = match word {
                "not" => Tok::Not,
                "and" => Tok::And,
                "or" => Tok::Or,
                "true" => Tok::True,
                "false" => Tok::False,
                "U" => Tok::Until,
                "F" => Tok::Eventually,
                "G" => Tok::Always,
                _ => match word.strip_prefix('y').map(str::parse::<usize>) {
                    Some(Ok(idx)) => Tok::Var(idx),
                    _ => return err(format!("unknown identifier '{word}'"), start),
                },
            };
            out.push((tok, start));
            continue;
        }
        let ch = text[start..].chars().next().unwrap_or('?');
        return err(format!("unexpected character '{ch}'"), start);
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    dim: usize,
}

/// Affine expression `coeffs . y + constant`.
struct Linear {
    coeffs: Vec<f64>,
    constant: f64,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            err(format!("expected {want}, found {}", self.peek()), self.offset())
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.or()?;
        while *self.peek() == Tok::Until {
            self.bump();
            let iv = self.window()?;
            let rhs = self.or()?;
            lhs = Formula::Until(Box::new(lhs), Box::new(rhs), iv);
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            lhs = lhs.or(self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            lhs = lhs.and(self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(self.unary()?.not())
            }
            Tok::Eventually => {
                self.bump();
                let iv = self.window()?;
                Ok(Formula::Eventually(Box::new(self.unary()?), iv))
            }
            Tok::Always => {
                self.bump();
                let iv = self.window()?;
                Ok(Formula::Always(Box::new(self.unary()?), iv))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Tok::True => {
                self.bump();
                Ok(Formula::truth(self.dim))
            }
            Tok::False => {
                self.bump();
                Ok(Formula::falsity(self.dim))
            }
            Tok::LParen => {
                self.bump();
                let inner = if matches!(
                    self.peek(),
                    Tok::Num(_) | Tok::Var(_) | Tok::Plus | Tok::Minus
                ) {
                    self.predicate()?
                } else {
                    self.formula()?
                };
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            other => err(
                format!("expected a predicate or '(', found {other}"),
                self.offset(),
            ),
        }
    }

    fn predicate(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.linear()?;
        let greater = match self.peek() {
            Tok::Gt => true,
            Tok::Lt => false,
            other => {
                return err(format!("expected '>' or '<', found {other}"), self.offset());
            }
        };
        self.bump();
        let rhs = self.linear()?;
        // lhs > rhs  <=>  (lhs.a - rhs.a) . y >= rhs.c - lhs.c
        let sign = if greater { 1.0 } else { -1.0 };
        let coeffs = lhs
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| sign * (a - b) + 0.0)
            .collect();
        let offset = sign * (rhs.constant - lhs.constant) + 0.0;
        Ok(Formula::pred(coeffs, offset))
    }

    fn linear(&mut self) -> Result<Linear, ParseError> {
        let mut acc = Linear {
            coeffs: vec![0.0; self.dim],
            constant: 0.0,
        };
        let mut sign = match self.peek() {
            Tok::Minus => {
                self.bump();
                -1.0
            }
            Tok::Plus => {
                self.bump();
                1.0
            }
            _ => 1.0,
        };
        loop {
            self.term(sign, &mut acc)?;
            sign = match self.peek() {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => return Ok(acc),
            };
            self.bump();
        }
    }

    fn term(&mut self, sign: f64, acc: &mut Linear) -> Result<(), ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => {
                if *self.peek() == Tok::Star {
                    self.bump();
                    let at = self.offset();
                    match self.bump() {
                        Tok::Var(i) => self.add_var(acc, i, sign * v, at),
                        other => err(format!("expected a variable after '*', found {other}"), at),
                    }
                } else {
                    acc.constant += sign * v;
                    Ok(())
                }
            }
            Tok::Var(i) => self.add_var(acc, i, sign, at),
            other => err(format!("expected a number or variable, found {other}"), at),
        }
    }

    fn add_var(&self, acc: &mut Linear, idx: usize, coeff: f64, at: usize) -> Result<(), ParseError> {
        if idx >= self.dim {
            return err(
                format!("variable y{idx} out of range for output dimension {}", self.dim),
                at,
            );
        }
        acc.coeffs[idx] += coeff;
        Ok(())
    }

    fn window(&mut self) -> Result<Interval, ParseError> {
        self.expect(Tok::LBracket)?;
        let start_at = self.offset();
        let a = self.bound()?;
        self.expect(Tok::Comma)?;
        let b = self.bound()?;
        self.expect(Tok::RBracket)?;
        Interval::new(a, b).map_or_else(
            || err(format!("interval [{a},{b}] has start greater than end"), start_at),
            Ok,
        )
    }

    fn bound(&mut self) -> Result<usize, ParseError> {
        let at = self.offset();
        if *self.peek() == Tok::Minus && matches!(self.peek_at(1), Tok::Num(_)) {
            return err("negative time bound", at);
        }
        match self.bump() {
            Tok::Num(v) if v.fract() == 0.0 && v >= 0.0 && v <= u32::MAX as f64 => Ok(v as usize),
            Tok::Num(v) => err(format!("time bound {v} is not a non-negative integer"), at),
            other => err(format!("expected an integer time bound, found {other}"), at),
        }
    }
}

/// Parses `text` into a formula over `dim`-dimensional outputs.
pub fn parse_formula(text: &str, dim: usize) -> Result<Formula, ParseError> {
    if dim == 0 {
        return err("output dimension must be at least 1", 0);
    }
    let mut parser = Parser {
        toks: tokenize(text)?,
        pos: 0,
        dim,
    };
    let f = parser.formula()?;
    if *parser.peek() != Tok::End {
        return err(format!("unexpected {}", parser.peek()), parser.offset());
    }
    Ok(f)
}
