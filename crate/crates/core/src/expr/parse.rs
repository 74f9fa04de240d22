//! Tokenizer and recursive-descent parser.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{BinaryOp, ExprError, Node, Params, UnaryOp};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

pub(crate) struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    src: &'a str,
    names: &'a [String],
    params: &'a Params,
}

fn syntax(position: usize, expected: &[&str]) -> ExprError {
    ExprError::Syntax {
        position,
        expected: expected.iter().map(|s| s.to_string()).collect(),
    }
}

const OPERAND: &[&str] = &["number", "identifier", "(", "-"];

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                } else {
                    return Err(syntax(j, &["digit"]));
                }
            }
            let v: f64 = src[start..i].parse().map_err(|_| syntax(start, &["number"]))?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if b"+-*/^(),".contains(&c) {
            out.push((Tok::Sym(c as char), i));
            i += 1;
        } else {
            return Err(syntax(i, &["number", "identifier", "operator"]));
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

impl<'a> Parser<'a> {
    pub fn new(src: &'a str, names: &'a [String], params: &'a Params) -> Self {
        Self {
            toks: Vec::new(),
            pos: 0,
            src,
            names,
            params,
        }
    }

    pub fn parse(mut self) -> Result<Node, ExprError> {
        self.toks = tokenize(self.src)?;
        let node = self.expr()?;
        match self.peek() {
            Tok::End => Ok(node),
            _ => Err(syntax(self.offset(), &["operator", "end of input"])),
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinaryOp::Add
            } else if self.eat('-') {
                BinaryOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinaryOp::Mul
            } else if self.eat('/') {
                BinaryOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat('-') {
            let a = self.unary()?;
            return Ok(Node::Unary(UnaryOp::Neg, Box::new(a)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Binary(BinaryOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(syntax(self.offset(), &[")", "operator"]));
                }
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if *self.peek() == Tok::Sym('(') {
                    self.pos += 1;
                    return self.call(&name, at);
                }
                self.identifier(&name, at)
            }
            _ => Err(syntax(at, OPERAND)),
        }
    }

    fn call(&mut self, name: &str, at: usize) -> Result<Node, ExprError> {
        let mut args = vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        if !self.eat(')') {
            return Err(syntax(self.offset(), &[")", ",", "operator"]));
        }
        let Some(op) = UnaryOp::function(name) else {
            return Err(ExprError::UnknownIdentifier {
                name: name.to_string(),
                position: at,
            });
        };
        if args.len() != 1 {
            return Err(ExprError::Arity {
                function: name.to_string(),
                expected: 1,
                found: args.len(),
            });
        }
        Ok(Node::Unary(op, Box::new(args.pop().unwrap())))
    }

    fn identifier(&self, name: &str, at: usize) -> Result<Node, ExprError> {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return Ok(Node::Var(i));
        }
        if let Some(k) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            if (1..=self.names.len()).contains(&k) && !name[1..].starts_with('0') {
                return Ok(Node::Var(k - 1));
            }
        }
        if self.params.contains_key(name) {
            return Ok(Node::Param(name.to_string()));
        }
        if name == "pi" {
            return Ok(Node::Const(core::f64::consts::PI));
        }
        if UnaryOp::function(name).is_some() {
            return Err(syntax(at + name.len(), &["("]));
        }
        Err(ExprError::UnknownIdentifier {
            name: name.to_string(),
            position: at,
        })
    }
}
