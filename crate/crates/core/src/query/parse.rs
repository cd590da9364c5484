//! Parser for `SELECT AGG(col) [FROM name] [WHERE predicate]`.
//!
//! ```text
//! query     := SELECT agg '(' (column | 1 | '*') ')' [FROM ident] [WHERE or]
//! or        := and (OR and)*
//! and       := unary (AND unary)*
//! unary     := NOT unary | '(' or ')' | TRUE | FALSE | column op literal
//!            | column CONTAINS string
//! column    := ident | qualifier '.' ident        qualifier: base|aug|R|S
//! ```
//!
//! Keywords are case-insensitive. Strings use single quotes with `''` as
//! the escape; identifiers may be double-quoted.

use super::{Aggregate, AggregateQuery, CmpOp, ColumnRef, Literal, Predicate, Side};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Number(f64),
    Str(String),
    LParen,
    RParen,
    Dot,
    Star,
    Op(CmpOp),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn error<T>(&self, position: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position,
            message: message.into(),
        })
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>> {
        let mut out = Vec::new();
        loop {
            let rest = &self.src[self.pos..];
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            let start = self.pos;
            let Some(c) = trimmed.chars().next() else {
                out.push((start, Tok::End));
                return Ok(out);
            };
            let tok = match c {
                '(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                ')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                '.' if !trimmed[1..].starts_with(|d: char| d.is_ascii_digit()) => {
                    self.pos += 1;
                    Tok::Dot
                }
                '*' => {
                    self.pos += 1;
                    Tok::Star
                }
                '=' => {
                    self.pos += 1;
                    Tok::Op(CmpOp::Eq)
                }
                '!' if trimmed.starts_with("!=") => {
                    self.pos += 2;
                    Tok::Op(CmpOp::Ne)
                }
                '<' | '>' => {
                    let (op, len) = match (c, trimmed[1..].chars().next()) {
                        ('<', Some('=')) => (CmpOp::Le, 2),
                        ('<', Some('>')) => (CmpOp::Ne, 2),
                        ('<', _) => (CmpOp::Lt, 1),
                        ('>', Some('=')) => (CmpOp::Ge, 2),
                        _ => (CmpOp::Gt, 1),
                    };
                    self.pos += len;
                    Tok::Op(op)
                }
                '\'' => Tok::Str(self.delimited('\'')?),
                '"' => Tok::Quoted(self.delimited('"')?),
                c if c.is_ascii_digit() || c == '.' || c == '-' => {
                    let len = trimmed
                        .char_indices()
                        .skip(1)
                        .find(|&(_, ch)| !(ch.is_ascii_digit() || ch == '.' || ch == 'e' || ch == 'E'))
                        .map_or(trimmed.len(), |(i, _)| i);
                    let text = &trimmed[..len];
                    let Ok(x) = text.parse::<f64>() else {
                        return self.error(start, format!("bad number {text:?}"));
                    };
                    self.pos += len;
                    Tok::Number(x)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let len = trimmed
                        .char_indices()
                        .find(|&(_, ch)| !(ch.is_alphanumeric() || ch == '_'))
                        .map_or(trimmed.len(), |(i, _)| i);
                    self.pos += len;
                    Tok::Ident(trimmed[..len].to_string())
                }
                other => return self.error(start, format!("unexpected character {other:?}")),
            };
            out.push((start, tok));
        }
    }

    fn delimited(&mut self, quote: char) -> Result<String> {
        let start = self.pos;
        let mut out = String::new();
        let mut chars = self.src[self.pos + 1..].char_indices().peekable();
        while let Some((i, ch)) = chars.next() {
            if ch == quote {
                if chars.peek().map(|&(_, c)| c) == Some(quote) {
                    chars.next();
                    out.push(quote);
                    continue;
                }
                self.pos += 1 + i + 1;
                return Ok(out);
            }
            out.push(ch);
        }
        self.error(start, "unterminated quote")
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn position(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.position(),
            message: message.into(),
        })
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.error(format!("expected {kw}"))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn query(&mut self) -> Result<AggregateQuery> {
        self.expect_keyword("SELECT")?;
        let agg = match self.peek() {
            Tok::Ident(w) if w.eq_ignore_ascii_case("SUM") => Aggregate::Sum,
            Tok::Ident(w) if w.eq_ignore_ascii_case("COUNT") => Aggregate::Count,
            Tok::Ident(w) if w.eq_ignore_ascii_case("AVG") => Aggregate::Avg,
            _ => return self.error("expected SUM, COUNT or AVG"),
        };
        self.bump();
        self.expect(Tok::LParen, "'('")?;
        let target = match self.peek() {
            Tok::Number(x) if *x == 1.0 => {
                self.bump();
                None
            }
            Tok::Star => {
                self.bump();
                None
            }
            _ => Some(self.column()?),
        };
        self.expect(Tok::RParen, "')'")?;
        if agg != Aggregate::Count && target.is_none() {
            return self.error("SUM and AVG need a column");
        }
        if self.eat_keyword("FROM") {
            match self.bump() {
                Tok::Ident(_) | Tok::Quoted(_) => {}
                _ => return self.error("expected a table name after FROM"),
            }
        }
        let predicate = if self.eat_keyword("WHERE") {
            self.or()?
        } else {
            Predicate::True
        };
        if *self.peek() != Tok::End {
            return self.error("unexpected trailing input");
        }
        Ok(AggregateQuery {
            agg,
            target,
            predicate,
        })
    }

    fn or(&mut self) -> Result<Predicate> {
        let mut left = self.and()?;
        while self.eat_keyword("OR") {
            let right = self.and()?;
            left = Predicate::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Predicate> {
        let mut left = self.unary()?;
        while self.eat_keyword("AND") {
            let right = self.unary()?;
            left = Predicate::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Predicate> {
        if self.eat_keyword("NOT") {
            return Ok(Predicate::Not(Box::new(self.unary()?)));
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let inner = self.or()?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(inner);
        }
        if self.eat_keyword("TRUE") {
            return Ok(Predicate::True);
        }
        if self.eat_keyword("FALSE") {
            return Ok(Predicate::False);
        }
        let column = self.column()?;
        if self.eat_keyword("CONTAINS") {
            return match self.bump() {
                Tok::Str(keyword) => Ok(Predicate::Contains { column, keyword }),
                _ => {
                    self.at -= 1;
                    self.error("expected a quoted keyword after CONTAINS")
                }
            };
        }
        let op = match self.bump() {
            Tok::Op(op) => op,
            _ => {
                self.at -= 1;
                return self.error("expected a comparison operator or CONTAINS");
            }
        };
        let value = match self.bump() {
            Tok::Number(x) => Literal::Number(x),
            Tok::Str(s) => Literal::Text(s),
            _ => {
                self.at -= 1;
                return self.error("expected a number or quoted string");
            }
        };
        Ok(Predicate::Compare { column, op, value })
    }

    fn column(&mut self) -> Result<ColumnRef> {
        let first = match self.bump() {
            Tok::Ident(w) => {
                const RESERVED: [&str; 9] =
                    ["SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "TRUE", "FALSE", "CONTAINS"];
                if RESERVED.iter().any(|k| w.eq_ignore_ascii_case(k)) {
                    self.at -= 1;
                    return self.error(format!("expected a column, found keyword {w}"));
                }
                (w, false)
            }
            Tok::Quoted(w) => (w, true),
            _ => {
                self.at -= 1;
                return self.error("expected a column name");
            }
        };
        if *self.peek() == Tok::Dot {
            let side = match first.0.to_ascii_lowercase().as_str() {
                "base" | "r" if !first.1 => Side::Base,
                "aug" | "augmenting" | "s" if !first.1 => Side::Aug,
                _ => return self.error(format!("unknown qualifier {:?}", first.0)),
            };
            self.bump();
            let name = match self.bump() {
                Tok::Ident(w) | Tok::Quoted(w) => w,
                _ => {
                    self.at -= 1;
                    return self.error("expected a column name after '.'");
                }
            };
            return Ok(ColumnRef {
                side: Some(side),
                name,
            });
        }
        Ok(ColumnRef {
            side: None,
            name: first.0,
        })
    }
}

pub fn parse_query(text: &str) -> Result<AggregateQuery> {
    let toks = Lexer { src: text, pos: 0 }.tokens()?;
    Parser { toks, at: 0 }.query()
}
