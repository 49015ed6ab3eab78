//! Text format for quantified conjunctions.
//!
//! ```text
//! # comment
//! exists x1 x2;
//! free y;
//! 2x1 + x2 <= y + 3
//! x1^2 + x2^2 - 1 < 0; x1 = 1/2
//! ```
//!
//! Statements are separated by newlines or `;`. The `exists` and `free`
//! declarations are optional and must precede the atoms. Variables are
//! numbered in declaration order, then in order of first appearance. A
//! formula whose atoms all have degree at most one is read in linear mode.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::formula::{Atoms, LinearAtom, PolyAtom, QuantFormula, Rat, Relation, Var, VarTable};
use crate::poly::Poly;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(Rat),
    Op(char),
    Rel(Relation),
    Sep,
    Eof,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let line = li + 1;
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line, column });
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let int_part: String = chars[start..i].iter().collect();
                let mut frac = String::new();
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    let fs = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    frac = chars[fs..i].iter().collect();
                }
                let digits = format!("{int_part}{frac}");
                let numer: BigInt = if digits.is_empty() {
                    BigInt::zero()
                } else {
                    digits.parse().map_err(|_| err(line, column, "bad number"))?
                };
                let denom = num_traits::pow(BigInt::from(10), frac.len());
                push(&mut out, Tok::Num(Rat::new(numer, denom)));
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                    i += 1;
                }
                push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
                continue;
            }
            let next = chars.get(i + 1).copied();
            let (tok, width) = match (c, next) {
                ('<', Some('=')) => (Tok::Rel(Relation::Le), 2),
                ('>', Some('=')) => (Tok::Rel(Relation::Ge), 2),
                ('=', Some('=')) => (Tok::Rel(Relation::Eq), 2),
                ('<', _) => (Tok::Rel(Relation::Lt), 1),
                ('>', _) => (Tok::Rel(Relation::Gt), 1),
                ('=', _) => (Tok::Rel(Relation::Eq), 1),
                (';', _) => (Tok::Sep, 1),
                ('+' | '-' | '*' | '/' | '^' | '(' | ')', _) => (Tok::Op(c), 1),
                _ => return Err(err(line, column, format!("unexpected character '{c}'"))),
            };
            push(&mut out, tok);
            i += width;
        }
        out.push(Spanned {
            tok: Tok::Sep,
            line,
            column: chars.len() + 1,
        });
    }
    let (line, column) = out.last().map_or((1, 1), |s| (s.line, s.column));
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    vars: VarTable,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> Error {
        let s = self.peek();
        err(s.line, s.column, message)
    }

    fn skip_seps(&mut self) {
        while self.peek().tok == Tok::Sep {
            self.bump();
        }
    }

    fn expect_end_of_statement(&mut self) -> Result<()> {
        match self.peek().tok {
            Tok::Sep | Tok::Eof => Ok(()),
            _ => Err(self.error_here("expected end of statement")),
        }
    }

    fn declaration(&mut self) -> Result<Vec<(String, usize, usize)>> {
        let mut names = Vec::new();
        while let Tok::Ident(name) = &self.peek().tok {
            let s = self.peek();
            names.push((name.clone(), s.line, s.column));
            self.bump();
        }
        self.expect_end_of_statement()?;
        Ok(names)
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Op('+') => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Tok::Op('-') => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Poly> {
        let (mut acc, mut last_num) = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Op('*') => {
                    self.bump();
                    let (rhs, _) = self.unary()?;
                    acc = &acc * &rhs;
                    last_num = false;
                }
                Tok::Op('/') => {
                    let at = self.peek().clone();
                    self.bump();
                    let (rhs, _) = self.unary()?;
                    let c = rhs
                        .constant_value()
                        .ok_or_else(|| err(at.line, at.column, "division by a non-constant"))?;
                    if c.is_zero() {
                        return Err(err(at.line, at.column, "division by zero"));
                    }
                    acc = acc.scale(&(Rat::one() / c));
                    last_num = false;
                }
                // `2x`, `3(x + 1)`
                Tok::Ident(_) | Tok::Op('(') if last_num => {
                    let (rhs, _) = self.unary()?;
                    acc = &acc * &rhs;
                    last_num = false;
                }
                _ => return Ok(acc),
            }
        }
    }

    /// Returns the parsed factor and whether it was a bare number literal.
    fn unary(&mut self) -> Result<(Poly, bool)> {
        match self.peek().tok {
            Tok::Op('-') => {
                self.bump();
                let (p, num) = self.unary()?;
                Ok((-&p, num))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<(Poly, bool)> {
        let (base, num) = self.primary()?;
        if self.peek().tok != Tok::Op('^') {
            return Ok((base, num));
        }
        self.bump();
        let at = self.peek().clone();
        match self.bump().tok {
            Tok::Num(e) if e.is_integer() => {
                let e: u32 = e
                    .to_integer()
                    .try_into()
                    .map_err(|_| err(at.line, at.column, "exponent too large"))?;
                Ok((base.pow(e), false))
            }
            _ => Err(err(at.line, at.column, "expected a nonnegative integer exponent")),
        }
    }

    fn primary(&mut self) -> Result<(Poly, bool)> {
        let at = self.peek().clone();
        match at.tok {
            Tok::Num(c) => {
                self.bump();
                Ok((Poly::constant(c), true))
            }
            Tok::Ident(name) => {
                if name == "exists" || name == "free" {
                    return Err(err(at.line, at.column, format!("'{name}' is a keyword")));
                }
                self.bump();
                let v = self.vars.intern(&name);
                Ok((Poly::var(v), false))
            }
            Tok::Op('(') => {
                self.bump();
                let p = self.expr()?;
                if self.peek().tok != Tok::Op(')') {
                    return Err(self.error_here("expected ')'"));
                }
                self.bump();
                Ok((p, false))
            }
            _ => Err(err(at.line, at.column, "expected a number, variable or '('")),
        }
    }

    fn atom(&mut self) -> Result<(Poly, Relation)> {
        let lhs = self.expr()?;
        let rel = match self.peek().tok {
            Tok::Rel(r) => r,
            _ => return Err(self.error_here("expected a relation")),
        };
        self.bump();
        let rhs = self.expr()?;
        self.expect_end_of_statement()?;
        Ok((&lhs - &rhs, rel))
    }
}

/// Parses a formula; see the module docs for the syntax.
pub fn parse_formula(text: &str) -> Result<QuantFormula> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        vars: VarTable::new(),
    };
    let mut quantified: Vec<Var> = Vec::new();
    let mut declared_free = false;
    let mut atoms: Vec<(Poly, Relation)> = Vec::new();
    loop {
        p.skip_seps();
        let at = p.peek().clone();
        match &at.tok {
            Tok::Eof => break,
            Tok::Ident(kw) if kw == "exists" || kw == "free" => {
                if !atoms.is_empty() {
                    return Err(err(at.line, at.column, format!("'{kw}' must precede the atoms")));
                }
                let is_exists = kw == "exists";
                if is_exists && (declared_free || !quantified.is_empty()) {
                    return Err(err(at.line, at.column, "repeated or misplaced 'exists'"));
                }
                p.bump();
                for (name, line, column) in p.declaration()? {
                    if p.vars.get(&name).is_some() {
                        return Err(err(line, column, format!("variable {name} declared twice")));
                    }
                    let v = p.vars.intern(&name);
                    if is_exists {
                        quantified.push(v);
                    }
                }
                declared_free |= !is_exists;
            }
            _ => atoms.push(p.atom()?),
        }
    }
    let linear = atoms.iter().all(|(poly, _)| poly.total_degree() <= 1);
    let atoms = if linear {
        Atoms::Linear(
            atoms
                .into_iter()
                .map(|(poly, rel)| {
                    let terms = poly
                        .terms()
                        .filter(|(m, _)| !m.is_one())
                        .map(|(m, c)| (m.pairs()[0].0, c.clone()))
                        .collect::<Vec<_>>();
                    LinearAtom::from_rational(terms, -poly.constant_term(), rel)
                })
                .collect(),
        )
    } else {
        Atoms::Poly(atoms.into_iter().map(|(poly, rel)| PolyAtom::new(poly, rel)).collect())
    };
    QuantFormula::new(p.vars, quantified, atoms)
}

/// Prints a formula in the syntax accepted by [`parse_formula`]. Variables
/// that are neither quantified nor used by an atom are listed under `free`.
pub fn print_formula(f: &QuantFormula) -> String {
    let names = f.vars();
    let mut out = String::new();
    if !f.quantified().is_empty() {
        out.push_str("exists");
        for v in f.quantified() {
            let _ = write!(out, " {}", names.name(*v));
        }
        out.push_str(";\n");
    }
    let q = f.quantified_set();
    let free: Vec<Var> = names.vars().filter(|v| !q.contains(v)).collect();
    if !free.is_empty() {
        out.push_str("free");
        for v in free {
            let _ = write!(out, " {}", names.name(v));
        }
        out.push_str(";\n");
    }
    match f.atoms() {
        Atoms::Linear(atoms) => {
            for a in atoms {
                let _ = writeln!(out, "{}", a.display(names));
            }
        }
        Atoms::Poly(atoms) => {
            for a in atoms {
                let _ = writeln!(out, "{}", a.display(names));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_with_implicit_products() {
        let f = parse_formula("exists x y\n2x + 3(y - 1) <= 4 # trailing\nx > -1/2").unwrap();
        assert_eq!(f.quantified().len(), 2);
        let atoms = f.linear_atoms().unwrap();
        assert_eq!(atoms.len(), 2);
        assert_eq!(*atoms[0].rhs(), BigInt::from(7));
        assert_eq!(atoms[0].terms().len(), 2);
        // x > -1/2 becomes 2x > -1
        assert_eq!(*atoms[1].rhs(), BigInt::from(-1));
        assert_eq!(atoms[1].terms()[0].1, BigInt::from(2));
    }

    #[test]
    fn polynomial_mode() {
        let f = parse_formula("exists x; x^2 + y^2 < 1; x*y = 0.5").unwrap();
        assert!(!f.atoms().is_linear());
        assert_eq!(f.vars().name(Var(1)), "y");
    }

    #[test]
    fn declared_free_variables_keep_their_slot() {
        let f = parse_formula("exists a; free b c; c + a <= 1").unwrap();
        assert_eq!(f.vars().get("b"), Some(Var(1)));
        assert_eq!(f.vars().get("c"), Some(Var(2)));
    }

    #[test]
    fn errors_carry_positions() {
        match parse_formula("exists x;\nx + <= 2") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 5)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_formula("x ^ y < 1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_formula("x / y < 1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_formula("x $ 1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_formula("x + 1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_formula("x < 1; exists x"), Err(Error::Parse { .. })));
        assert!(matches!(parse_formula("exists x x; x < 1"), Err(Error::Parse { .. })));
    }

    #[test]
    fn print_round_trips() {
        for text in [
            "exists x1 x2; x1 + 2*x2 <= 20; -x1 + x2 > -3; x1 = 0",
            "exists x; free y z; x^2*y - 1/3*z >= 0; x < 0",
            "0 <= 1",
            "",
        ] {
            let f = parse_formula(text).unwrap();
            let printed = print_formula(&f);
            assert_eq!(parse_formula(&printed).unwrap(), f, "{printed}");
        }
    }
}
