//! Arithmetic expressions over node variables.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := sum (cmp sum)?          cmp: < <= > >= == !=   (yields 1 or 0)
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables: `k` (time index), `t` (time), `S` or `S0`, `S1`, ... (asset
//! prices), `path_max` and `path_min` (running extrema of `S0` along the path,
//! current node included), `N` (horizon), `T` (maturity).
//! Functions: `max`, `min` (one or more arguments), `abs`, `pos` (positive
//! part), `if(c, a, b)` (`a` when `c` is nonzero).
//! Numbers use the same literal syntax as scenario files, so they stay exact
//! in rational mode.

use std::fmt;

use rbsde_core::{Adapted, EventTree, NodeId, Scalar};

use crate::num::parse_scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    /// 1-based character position in the source text.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    K,
    T,
    Price(usize),
    PathMax,
    PathMin,
    Horizon,
    Maturity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Max,
    Min,
    Abs,
    Pos,
    If,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(String),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression, evaluated per node in either numeric mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Name(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            parse_scalar::<f64>(&text).map_err(|m| ExprError { column: col, message: m })?;
            out.push((Tok::Num(text), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Name(chars[start..i].iter().collect()), col));
        } else {
            let next = chars.get(i + 1).copied();
            let (tok, width) = match (c, next) {
                ('<', Some('=')) => (Tok::Op("<="), 2),
                ('>', Some('=')) => (Tok::Op(">="), 2),
                ('=', Some('=')) => (Tok::Op("=="), 2),
                ('!', Some('=')) => (Tok::Op("!="), 2),
                ('<', _) => (Tok::Op("<"), 1),
                ('>', _) => (Tok::Op(">"), 1),
                ('+', _) => (Tok::Op("+"), 1),
                ('-', _) => (Tok::Op("-"), 1),
                ('*', _) => (Tok::Op("*"), 1),
                ('/', _) => (Tok::Op("/"), 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                (',', _) => (Tok::Comma, 1),
                _ => return Err(ExprError { column: col, message: format!("unexpected character {c:?}") }),
            };
            out.push((tok, col));
            i += width;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, c)| *c)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError { column: self.column(), message: message.into() })
    }

    fn eat_op(&mut self, ops: &[&'static str]) -> Option<&'static str> {
        match self.peek() {
            Some(Tok::Op(op)) if ops.contains(op) => {
                let op = *op;
                self.pos += 1;
                Some(op)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let lhs = self.sum()?;
        match self.eat_op(&["<", "<=", ">", ">=", "==", "!="]) {
            Some(op) => {
                let rhs = self.sum()?;
                let op = match op {
                    "<" => BinOp::Lt,
                    "<=" => BinOp::Le,
                    ">" => BinOp::Gt,
                    ">=" => BinOp::Ge,
                    "==" => BinOp::Eq,
                    _ => BinOp::Ne,
                };
                Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)))
            }
            None => Ok(lhs),
        }
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        while let Some(op) = self.eat_op(&["+", "-"]) {
            let rhs = self.product()?;
            let op = if op == "+" { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&["*", "/"]) {
            let rhs = self.unary()?;
            let op = if op == "*" { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat_op(&["-"]).is_some() {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let col = self.column();
        match self.peek().cloned() {
            Some(Tok::Num(text)) => {
                self.pos += 1;
                Ok(Node::Num(text))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(Tok::Name(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let func = match name.as_str() {
                        "max" => Func::Max,
                        "min" => Func::Min,
                        "abs" => Func::Abs,
                        "pos" => Func::Pos,
                        "if" => Func::If,
                        _ => return Err(ExprError { column: col, message: format!("unknown function {name:?}") }),
                    };
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect_rparen()?;
                    let arity_ok = match func {
                        Func::Max | Func::Min => !args.is_empty(),
                        Func::Abs | Func::Pos => args.len() == 1,
                        Func::If => args.len() == 3,
                    };
                    if !arity_ok {
                        return Err(ExprError { column: col, message: format!("wrong number of arguments to {name}") });
                    }
                    return Ok(Node::Call(func, args));
                }
                let var = match name.as_str() {
                    "k" => Var::K,
                    "t" => Var::T,
                    "S" => Var::Price(0),
                    "path_max" => Var::PathMax,
                    "path_min" => Var::PathMin,
                    "N" => Var::Horizon,
                    "T" => Var::Maturity,
                    other => match other.strip_prefix('S').and_then(|d| d.parse::<usize>().ok()) {
                        Some(i) => Var::Price(i),
                        None => return Err(ExprError { column: col, message: format!("unknown variable {name:?}") }),
                    },
                };
                Ok(Node::Var(var))
            }
            Some(_) => self.err("expected a number, variable or '('"),
            None => self.err("unexpected end of expression"),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.err("expected ')'")
        }
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, ExprError> {
        let toks = tokenize(source)?;
        let mut p = Parser { toks, pos: 0, end: source.chars().count() + 1 };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return p.err("unexpected trailing input");
        }
        Ok(Expr { source: source.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates at every node of `tree`.
    pub fn evaluate<S: Scalar>(&self, tree: &EventTree<S>) -> Result<Adapted<S>, ExprError> {
        self.check_dimension(&self.root, tree.dim())?;
        let mut extrema: Vec<(S, S)> = Vec::with_capacity(tree.len());
        let mut out = Vec::with_capacity(tree.len());
        for n in tree.ids() {
            let s = tree.price(n)[0].clone();
            let (hi, lo) = match tree.node(n).parent {
                Some(p) => {
                    let (hi, lo) = &extrema[p.0];
                    (S::max_of(hi, &s), S::min_of(lo, &s))
                }
                None => (s.clone(), s),
            };
            extrema.push((hi, lo));
            out.push(self.eval_node(&self.root, tree, n, &extrema[n.0])?);
        }
        Ok(Adapted::new(out))
    }

    fn check_dimension(&self, node: &Node, dim: usize) -> Result<(), ExprError> {
        match node {
            Node::Var(Var::Price(i)) if *i >= dim => {
                Err(ExprError { column: 1, message: format!("S{i} used but the tree has {dim} asset(s)") })
            }
            Node::Neg(a) => self.check_dimension(a, dim),
            Node::Bin(_, a, b) => {
                self.check_dimension(a, dim)?;
                self.check_dimension(b, dim)
            }
            Node::Call(_, args) => args.iter().try_for_each(|a| self.check_dimension(a, dim)),
            _ => Ok(()),
        }
    }

    fn eval_node<S: Scalar>(&self, node: &Node, tree: &EventTree<S>, n: NodeId, ext: &(S, S)) -> Result<S, ExprError> {
        let rec = |x: &Node| self.eval_node(x, tree, n, ext);
        let flag = |b: bool| if b { S::one() } else { S::zero() };
        Ok(match node {
            Node::Num(text) => parse_scalar(text).map_err(|m| ExprError { column: 1, message: m })?,
            Node::Var(v) => match v {
                Var::K => S::from_int(tree.node(n).step as i64),
                Var::T => tree.time(n).clone(),
                Var::Price(i) => tree.price(n)[*i].clone(),
                Var::PathMax => ext.0.clone(),
                Var::PathMin => ext.1.clone(),
                Var::Horizon => S::from_int(tree.horizon() as i64),
                Var::Maturity => tree.time_grid()[tree.horizon()].clone(),
            },
            Node::Neg(a) => -rec(a)?,
            Node::Bin(op, a, b) => {
                let (x, y) = (rec(a)?, rec(b)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y.is_zero() {
                            return Err(ExprError { column: 1, message: format!("division by zero at node {n}") });
                        }
                        x / y
                    }
                    BinOp::Lt => flag(x < y),
                    BinOp::Le => flag(x <= y),
                    BinOp::Gt => flag(x > y),
                    BinOp::Ge => flag(x >= y),
                    BinOp::Eq => flag(x == y),
                    BinOp::Ne => flag(x != y),
                }
            }
            Node::Call(f, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(rec(a)?);
                }
                match f {
                    Func::Max => vals.iter().skip(1).fold(vals[0].clone(), |m, v| S::max_of(&m, v)),
                    Func::Min => vals.iter().skip(1).fold(vals[0].clone(), |m, v| S::min_of(&m, v)),
                    Func::Abs => vals[0].abs(),
                    Func::Pos => vals[0].pos(),
                    Func::If => {
                        if vals[0].is_zero() {
                            vals[2].clone()
                        } else {
                            vals[1].clone()
                        }
                    }
                }
            }
        })
    }
}
