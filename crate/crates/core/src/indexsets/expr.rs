//! A small expression language over index sets, used by the command line
//! tool for interactive experimentation.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (("u" | "eu") term)*          union / extended union
//! term    := atom ("+" (atom | number))*        set sum / scalar shift
//! atom    := "F1"                               interior level set {(j,l): l<=j}
//!          | "F2" "(" number "," number ")"     indicial side set for (n, lambda)
//!          | "E" "{" [pair ("," pair)*] "}"     closure of explicit generators
//!          | "empty"
//!          | "push" "(" matrix "," family ")" ["." face]
//!          | "(" expr ")"
//! pair    := "(" number "," integer ")"
//! family  := "{" face ":" expr ("," face ":" expr)* "}"
//! matrix  := "[" face "->" face ":" integer ("," ...)* "]"
//! number  := rational literal: "3", "-1/2", "0.25"
//! ```
//!
//! `push` evaluates to a whole face-indexed family; appending `.face`
//! selects one of its sets so the result can be composed further.

use super::matrix::{pushforward, ExponentMatrix};
use super::{family, IndexSet};
use crate::error::{Error, Result};
use crate::exact::{characteristic_roots_rational, parse_rational, Exponent};
use num_rational::Rational64;
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
enum Token {
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBrack,
    RBrack,
    Comma,
    Colon,
    Dot,
    Arrow,
    Plus,
    Word(String),
    Number(Rational64),
}

const FACE_NAMES: [&str; 9] = [
    "ff+", "ff-", "lf+", "lf-", "rf+", "rf-", "lcf+", "lcf-", "scf",
];

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => { out.push(Token::LParen); i += 1; }
            ')' => { out.push(Token::RParen); i += 1; }
            '{' => { out.push(Token::LBrace); i += 1; }
            '}' => { out.push(Token::RBrace); i += 1; }
            '[' => { out.push(Token::LBrack); i += 1; }
            ']' => { out.push(Token::RBrack); i += 1; }
            ',' => { out.push(Token::Comma); i += 1; }
            ':' => { out.push(Token::Colon); i += 1; }
            '.' if i + 1 < bytes.len() && !bytes[i + 1].is_ascii_digit() => {
                out.push(Token::Dot);
                i += 1;
            }
            '-' if i + 1 < bytes.len() && bytes[i + 1] == '>' => {
                out.push(Token::Arrow);
                i += 2;
            }
            '+' => { out.push(Token::Plus); i += 1; }
            c if c.is_ascii_digit() || c == '-' || c == '.' => {
                let start = i;
                i += 1;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit() || bytes[i] == '.' || bytes[i] == '/')
                {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let value = parse_rational(&text).ok_or_else(|| {
                    Error::Validation(format!("malformed number literal {text:?}"))
                })?;
                out.push(Token::Number(value));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_')
                {
                    i += 1;
                }
                let mut word: String = bytes[start..i].iter().collect();
                // Face names carry a trailing sign: absorb it only when the
                // extended word is one of them, so "lf+" lexes as a word
                // while "F1 + F2" keeps "+" as the operator.
                if i < bytes.len() && (bytes[i] == '+' || bytes[i] == '-') {
                    let mut candidate = word.clone();
                    candidate.push(bytes[i]);
                    if FACE_NAMES.contains(&candidate.as_str()) {
                        word = candidate;
                        i += 1;
                    }
                }
                out.push(Token::Word(word));
            }
            other => {
                return Err(Error::Validation(format!(
                    "unexpected character {other:?} in index set expression"
                )));
            }
        }
    }
    Ok(out)
}

/// Result of evaluating an expression: a single set, or the face-indexed
/// family produced by `push`.
#[derive(Clone, Debug)]
pub enum ExprValue {
    Set(IndexSet),
    Family(BTreeMap<String, IndexSet>),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Result<Token> {
        let t = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Validation("unexpected end of expression".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        let got = self.next()?;
        if got == want {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "expected {want:?}, found {got:?} at token {}",
                self.pos - 1
            )))
        }
    }

    fn number(&mut self) -> Result<Rational64> {
        match self.next()? {
            Token::Number(v) => Ok(v),
            other => Err(Error::Validation(format!("expected a number, found {other:?}"))),
        }
    }

    fn word(&mut self) -> Result<String> {
        match self.next()? {
            Token::Word(w) => Ok(w),
            other => Err(Error::Validation(format!("expected a name, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<ExprValue> {
        let mut lhs = self.term()?;
        while let Some(Token::Word(w)) = self.peek() {
            let op = w.clone();
            if op != "u" && op != "eu" {
                break;
            }
            self.pos += 1;
            let rhs = self.term()?;
            let (a, b) = (as_set(lhs)?, as_set(rhs)?);
            lhs = ExprValue::Set(if op == "u" { a.union(&b) } else { a.extended_union(&b) });
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprValue> {
        let mut lhs = self.atom()?;
        while self.peek() == Some(&Token::Plus) {
            self.pos += 1;
            if let Some(Token::Number(c)) = self.peek() {
                let c = *c;
                self.pos += 1;
                lhs = ExprValue::Set(as_set(lhs)?.shift(c));
            } else {
                let rhs = self.atom()?;
                lhs = ExprValue::Set(as_set(lhs)?.add(&as_set(rhs)?));
            }
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<ExprValue> {
        match self.next()? {
            Token::LParen => {
                let v = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(v)
            }
            Token::Word(w) => match w.as_str() {
                "F1" => Ok(ExprValue::Set(family::level_log_set(
                    Rational64::from_integer(0),
                    family::DEFAULT_MAX_LEVEL,
                ))),
                "F2" => {
                    self.expect(Token::LParen)?;
                    let n = self.number()?;
                    self.expect(Token::Comma)?;
                    let lambda = self.number()?;
                    self.expect(Token::RParen)?;
                    if !n.is_integer() || *n.numer() < 1 {
                        return Err(Error::Validation(format!(
                            "F2 takes a positive integer dimension, got {n}"
                        )));
                    }
                    let roots = characteristic_roots_rational(*n.numer() as u32, lambda);
                    Ok(ExprValue::Set(family::side_face_set(&roots)))
                }
                "E" => {
                    self.expect(Token::LBrace)?;
                    let mut gens = Vec::new();
                    if self.peek() != Some(&Token::RBrace) {
                        loop {
                            self.expect(Token::LParen)?;
                            let z = self.number()?;
                            self.expect(Token::Comma)?;
                            let k = self.number()?;
                            self.expect(Token::RParen)?;
                            if !k.is_integer() || *k.numer() < 0 {
                                return Err(Error::Validation(format!(
                                    "log power must be a nonnegative integer, got {k}"
                                )));
                            }
                            gens.push((Exponent::from_rational(z), *k.numer() as u32));
                            if self.peek() == Some(&Token::Comma) {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Token::RBrace)?;
                    Ok(ExprValue::Set(IndexSet::from_generators(gens)))
                }
                "empty" => Ok(ExprValue::Set(IndexSet::empty())),
                "push" => {
                    self.expect(Token::LParen)?;
                    let matrix = self.matrix()?;
                    self.expect(Token::Comma)?;
                    let fam = self.family()?;
                    self.expect(Token::RParen)?;
                    let pushed = pushforward(&fam, &matrix)?;
                    if self.peek() == Some(&Token::Dot) {
                        self.pos += 1;
                        let face = self.word()?;
                        let set = pushed.get(&face).cloned().ok_or_else(|| {
                            Error::Validation(format!(
                                "face {face:?} is not a target of the pushforward"
                            ))
                        })?;
                        Ok(ExprValue::Set(set))
                    } else {
                        Ok(ExprValue::Family(pushed))
                    }
                }
                other => Err(Error::Validation(format!(
                    "unknown primitive {other:?}; expected F1, F2, E, empty or push"
                ))),
            },
            other => Err(Error::Validation(format!(
                "unexpected token {other:?} at start of an operand"
            ))),
        }
    }

    fn matrix(&mut self) -> Result<ExponentMatrix> {
        self.expect(Token::LBrack)?;
        let mut m = ExponentMatrix::default();
        if self.peek() != Some(&Token::RBrack) {
            loop {
                let source = self.word()?;
                self.expect(Token::Arrow)?;
                let target = self.word()?;
                self.expect(Token::Colon)?;
                let order = self.number()?;
                if !order.is_integer() || *order.numer() < 1 {
                    return Err(Error::Validation(format!(
                        "exponent matrix order must be a positive integer, got {order}"
                    )));
                }
                m = m.entry(&source, &target, *order.numer() as u32);
                if self.peek() == Some(&Token::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(Token::RBrack)?;
        Ok(m)
    }

    fn family(&mut self) -> Result<BTreeMap<String, IndexSet>> {
        self.expect(Token::LBrace)?;
        let mut fam = BTreeMap::new();
        loop {
            let face = self.word()?;
            self.expect(Token::Colon)?;
            let set = as_set(self.expr()?)?;
            if fam.insert(face.clone(), set).is_some() {
                return Err(Error::Validation(format!("face {face:?} listed twice")));
            }
            if self.peek() == Some(&Token::Comma) {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.expect(Token::RBrace)?;
        Ok(fam)
    }
}

fn as_set(v: ExprValue) -> Result<IndexSet> {
    match v {
        ExprValue::Set(s) => Ok(s),
        ExprValue::Family(_) => Err(Error::Validation(
            "a family cannot appear here; select one face with .face".into(),
        )),
    }
}

pub fn eval_expression(src: &str) -> Result<ExprValue> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err(Error::Validation("empty expression".into()));
    }
    let mut parser = Parser { tokens, pos: 0 };
    let value = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(Error::Validation(format!(
            "trailing input after expression at token {}",
            parser.pos
        )));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_set(src: &str) -> IndexSet {
        match eval_expression(src).unwrap() {
            ExprValue::Set(s) => s,
            other => panic!("expected a set from {src:?}, got {other:?}"),
        }
    }

    fn ei(z: i64) -> Exponent {
        Exponent::from_integer(z)
    }

    #[test]
    fn literals() {
        let e = eval_set("E{(0,0),(1/2,2)}");
        assert!(e.contains(&Exponent::from_rational(Rational64::new(1, 2)), 2));
        assert!(e.contains(&ei(3), 0));

        assert!(eval_set("empty").is_empty());
        assert!(eval_set("E{}").is_empty());
        assert!(eval_set("F1").contains(&ei(4), 4));
    }

    #[test]
    fn extended_union_and_shift() {
        let e = eval_set("F1 eu F2(4, 0)");
        assert!(e.contains(&ei(0), 1));
        assert!(e.contains(&ei(3), 0));

        let e = eval_set("E{(0,0)} + 3/2");
        assert!(e.contains(&Exponent::from_rational(Rational64::new(3, 2)), 0));
        assert!(!e.contains(&ei(0), 0));

        let e = eval_set("E{(1,1)} + E{(2,0)}");
        assert_eq!(e, IndexSet::singleton(ei(3), 1));
    }

    #[test]
    fn union_versus_extended_union() {
        let plain = eval_set("E{(0,0)} u E{(0,0)}");
        assert!(!plain.contains(&ei(0), 1));
        let extended = eval_set("E{(0,0)} eu E{(0,0)}");
        assert!(extended.contains(&ei(0), 1));
    }

    #[test]
    fn push_examples() {
        let e = eval_set("push([g1 -> h: 1, g2 -> h: 1], {g1: E{(0,0)}, g2: E{(0,0)}}).h");
        assert!(e.contains(&ei(0), 1));

        let e = eval_set("push([g -> h: 2], {g: E{(2,0)}}).h");
        assert!(e.contains(&ei(1), 0));
        assert!(e.contains(&Exponent::from_rational(Rational64::new(3, 2)), 0));

        match eval_expression("push([g -> h: 1], {g: E{(0,0)}})").unwrap() {
            ExprValue::Family(f) => assert_eq!(f.len(), 1),
            other => panic!("expected family, got {other:?}"),
        }

        // Non-integrable null-set face surfaces as an error.
        assert!(eval_expression("push([g -> h: 1], {g: E{(0,0)}, away: E{(-2,0)}})").is_err());
    }

    #[test]
    fn face_names_with_signs_lex_as_words() {
        let e = eval_set("push([lf+ -> scf: 1], {lf+: E{(1,0)}}).scf");
        assert!(e.contains(&ei(1), 0));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        for bad in [
            "",
            "F1 eu",
            "F2(0, 1)",
            "E{(0,-1)}",
            "push([g -> h: 0], {g: E{(0,0)}})",
            "F1 F2(2,0)",
            "E{(0,0)} + push([g -> h: 1], {g: E{(0,0)}})",
            "(F1",
            "push([g -> h: 1], {g: E{(0,0)}}).z",
        ] {
            assert!(eval_expression(bad).is_err(), "expected failure for {bad:?}");
        }
    }
}
