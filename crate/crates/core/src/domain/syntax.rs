//! Text syntax for atoms, literals, and axiom formulas used inside domain and
//! problem files.
//!
//! ```text
//! formula := disj
//! disj    := conj ("or" conj)*
//! conj    := unary ("and" unary)*
//! unary   := "not" unary
//!          | ("forall" | "exists") VAR "-" IDENT ":" formula
//!          | "(" formula ")"
//!          | atom
//! atom    := IDENT [ "(" [ term ("," term)* ] ")" ]
//! term    := VAR | IDENT          VAR = "?" IDENT
//! ```

use thiserror::Error;

use super::types::{Atom, Formula, Literal, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error in `{input}`: {message}")]
pub struct SyntaxError {
    pub input: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    Var(String),
    LParen,
    RParen,
    Comma,
    Colon,
    Dash,
}

const KEYWORDS: [&str; 5] = ["not", "and", "or", "forall", "exists"];

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn tokenize(input: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let mut chars = input.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                tokens.push(Token::LParen);
            }
            ')' => {
                chars.next();
                tokens.push(Token::RParen);
            }
            ',' => {
                chars.next();
                tokens.push(Token::Comma);
            }
            ':' => {
                chars.next();
                tokens.push(Token::Colon);
            }
            '-' => {
                chars.next();
                tokens.push(Token::Dash);
            }
            '?' => {
                chars.next();
                let name = take_ident(&mut chars);
                if name.is_empty() {
                    return Err(format!("empty variable name at offset {i}"));
                }
                tokens.push(Token::Var(name));
            }
            c if is_ident_char(c) => {
                tokens.push(Token::Ident(take_ident(&mut chars)));
            }
            other => return Err(format!("unexpected character `{other}` at offset {i}")),
        }
    }
    Ok(tokens)
}

fn take_ident(chars: &mut std::iter::Peekable<std::str::CharIndices<'_>>) -> String {
    let mut name = String::new();
    while let Some(&(_, c)) = chars.peek() {
        if is_ident_char(c) {
            name.push(c);
            chars.next();
        } else {
            break;
        }
    }
    name
}

struct Parser<'a> {
    input: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Result<Self, SyntaxError> {
        let tokens = tokenize(input).map_err(|message| SyntaxError {
            input: input.to_string(),
            message,
        })?;
        Ok(Parser {
            input,
            tokens,
            pos: 0,
        })
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            input: self.input.to_string(),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token::Ident(s)) if s == kw)
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), SyntaxError> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(self.error(format!("expected {what}, found {t:?}"))),
            None => Err(self.error(format!("expected {what}, found end of input"))),
        }
    }

    fn finish(&self) -> Result<(), SyntaxError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.error(format!("trailing input starting at {t:?}"))),
        }
    }

    fn atom(&mut self) -> Result<Atom, SyntaxError> {
        let predicate = match self.next() {
            Some(Token::Ident(name)) if !KEYWORDS.contains(&name.as_str()) => name,
            Some(t) => return Err(self.error(format!("expected a name, found {t:?}"))),
            None => return Err(self.error("expected a name, found end of input")),
        };
        let mut args = Vec::new();
        if self.peek() == Some(&Token::LParen) {
            self.next();
            if self.peek() == Some(&Token::RParen) {
                self.next();
                return Ok(Atom { predicate, args });
            }
            loop {
                args.push(self.term()?);
                match self.next() {
                    Some(Token::Comma) => continue,
                    Some(Token::RParen) => break,
                    Some(t) => return Err(self.error(format!("expected `,` or `)`, found {t:?}"))),
                    None => return Err(self.error("unclosed argument list")),
                }
            }
        }
        Ok(Atom { predicate, args })
    }

    fn term(&mut self) -> Result<Term, SyntaxError> {
        match self.next() {
            Some(Token::Var(v)) => Ok(Term::Variable(v)),
            Some(Token::Ident(c)) if !KEYWORDS.contains(&c.as_str()) => Ok(Term::Constant(c)),
            Some(t) => Err(self.error(format!("expected a term, found {t:?}"))),
            None => Err(self.error("expected a term, found end of input")),
        }
    }

    fn formula(&mut self) -> Result<Formula, SyntaxError> {
        let mut parts = vec![self.conjunction()?];
        while self.peek_keyword("or") {
            self.next();
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        })
    }

    fn conjunction(&mut self) -> Result<Formula, SyntaxError> {
        let mut parts = vec![self.unary()?];
        while self.peek_keyword("and") {
            self.next();
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn unary(&mut self) -> Result<Formula, SyntaxError> {
        if self.peek_keyword("not") {
            self.next();
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.peek_keyword("forall") || self.peek_keyword("exists") {
            let universal = self.peek_keyword("forall");
            self.next();
            let var = match self.next() {
                Some(Token::Var(v)) => v,
                _ => return Err(self.error("quantifier needs a `?variable`")),
            };
            self.expect(Token::Dash, "`-` before the type name")?;
            let ty = match self.next() {
                Some(Token::Ident(t)) => t,
                _ => return Err(self.error("quantifier needs a type name")),
            };
            self.expect(Token::Colon, "`:` after the quantifier")?;
            let body = Box::new(self.formula()?);
            return Ok(if universal {
                Formula::ForAll { var, ty, body }
            } else {
                Formula::Exists { var, ty, body }
            });
        }
        if self.peek() == Some(&Token::LParen) {
            self.next();
            let inner = self.formula()?;
            self.expect(Token::RParen, "`)`")?;
            return Ok(inner);
        }
        Ok(Formula::Atom(self.atom()?))
    }
}

pub fn parse_atom(input: &str) -> Result<Atom, SyntaxError> {
    let mut p = Parser::new(input)?;
    let atom = p.atom()?;
    p.finish()?;
    Ok(atom)
}

/// `atom` or `not atom`.
pub fn parse_literal(input: &str) -> Result<Literal, SyntaxError> {
    let mut p = Parser::new(input)?;
    let positive = if p.peek_keyword("not") {
        p.next();
        false
    } else {
        true
    };
    let atom = p.atom()?;
    p.finish()?;
    Ok(Literal { positive, atom })
}

pub fn parse_formula(input: &str) -> Result<Formula, SyntaxError> {
    let mut p = Parser::new(input)?;
    let f = p.formula()?;
    p.finish()?;
    Ok(f)
}
