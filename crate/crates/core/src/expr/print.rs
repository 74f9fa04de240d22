//! Infix printer whose output parses back to the same tree.

use alloc::string::String;
use core::fmt::{self, Write};

use super::{BinaryOp, Node, UnaryOp};

const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn prec(node: &Node) -> u8 {
    match node {
        Node::Const(c) if c.is_sign_negative() => NEG,
        Node::Const(_) | Node::Var(_) | Node::Param(_) => ATOM,
        Node::Unary(UnaryOp::Neg, _) => NEG,
        Node::Unary(_, _) => ATOM,
        Node::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => ADD,
        Node::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => MUL,
        Node::Binary(BinaryOp::Pow, _, _) => POW,
    }
}

fn child<W: Write>(w: &mut W, node: &Node, names: &[String], min: u8) -> fmt::Result {
    if prec(node) < min {
        w.write_char('(')?;
        write_node(w, node, names)?;
        w.write_char(')')
    } else {
        write_node(w, node, names)
    }
}

pub(crate) fn write_node<W: Write>(w: &mut W, node: &Node, names: &[String]) -> fmt::Result {
    match node {
        Node::Const(c) => write!(w, "{c}"),
        Node::Var(i) => w.write_str(&names[*i]),
        Node::Param(p) => w.write_str(p),
        Node::Unary(UnaryOp::Neg, a) => {
            w.write_char('-')?;
            child(w, a, names, NEG)
        }
        Node::Unary(op, a) => {
            write!(w, "{}(", op.name())?;
            write_node(w, a, names)?;
            w.write_char(')')
        }
        Node::Binary(op, a, b) => {
            let (l, r, spaced) = match op {
                BinaryOp::Add | BinaryOp::Sub => (ADD, MUL, true),
                BinaryOp::Mul | BinaryOp::Div => (MUL, NEG, false),
                BinaryOp::Pow => (ATOM, NEG, false),
            };
            child(w, a, names, l)?;
            if spaced {
                write!(w, " {} ", op.symbol())?;
            } else {
                w.write_char(op.symbol())?;
            }
            child(w, b, names, r)
        }
    }
}

pub(crate) fn node_to_string(node: &Node, names: &[String]) -> String {
    let mut s = String::new();
    let _ = write_node(&mut s, node, names);
    s
}
