//! Expression language for structural equations and agent policies.
//!
//! Equations are small arithmetic/logical formulas over named variables:
//! numeric literals, variable references, unary negation, the four
//! arithmetic operators, comparisons, `and`/`or`/`not`, and a ternary
//! `if(cond, then, else)`.
//!
//! Everything is a real number. Comparisons and logical operators yield
//! `1.0` (true) or `0.0` (false), and any nonzero value counts as true
//! where a condition is expected. Equality (`==`, `!=`) is exact: threshold
//! policies use strict inequalities, so no tolerance is applied.
//!
//! Expressions are immutable after parsing and safe to evaluate
//! concurrently. `if` evaluates its condition and then only the selected
//! branch; all other operators evaluate both operands.

mod parse;

pub use parse::{parse_expression, ParseError};

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Binary arithmetic operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Comparison operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(String),
    Neg(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
}

/// Evaluation failure.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("variable `{0}` is not bound in the evaluation environment")]
    MissingVariable(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("evaluation produced a non-finite value")]
    NonFinite,
}

/// Source of variable values during evaluation.
///
/// Implemented for the usual map types; tests use an instrumented
/// implementation to check which variables are actually read.
pub trait EvalEnv {
    fn lookup(&self, name: &str) -> Option<f64>;
}

impl EvalEnv for std::collections::BTreeMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl EvalEnv for std::collections::HashMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl<E: EvalEnv + ?Sized> EvalEnv for &E {
    fn lookup(&self, name: &str) -> Option<f64> {
        (**self).lookup(name)
    }
}

fn truthy(x: f64) -> bool {
    x != 0.0
}

fn bool_to_real(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Expr {
    /// Evaluates the expression under `env`.
    ///
    /// Deterministic: the same expression and environment always produce
    /// the same bit pattern. Errors on unbound variables, division by
    /// zero, and non-finite intermediate results.
    pub fn evaluate<E: EvalEnv>(&self, env: &E) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Number(n) => *n,
            Expr::Var(name) => env
                .lookup(name)
                .ok_or_else(|| EvalError::MissingVariable(name.clone()))?,
            Expr::Neg(e) => -e.evaluate(env)?,
            Expr::Arith(op, a, b) => {
                let a = a.evaluate(env)?;
                let b = b.evaluate(env)?;
                match op {
                    ArithOp::Add => a + b,
                    ArithOp::Sub => a - b,
                    ArithOp::Mul => a * b,
                    ArithOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                }
            }
            Expr::Cmp(op, a, b) => {
                let a = a.evaluate(env)?;
                let b = b.evaluate(env)?;
                bool_to_real(match op {
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                })
            }
            Expr::And(a, b) => {
                bool_to_real(truthy(a.evaluate(env)?) & truthy(b.evaluate(env)?))
            }
            Expr::Or(a, b) => {
                bool_to_real(truthy(a.evaluate(env)?) | truthy(b.evaluate(env)?))
            }
            Expr::Not(e) => bool_to_real(!truthy(e.evaluate(env)?)),
            Expr::If(cond, then, els) => {
                if truthy(cond.evaluate(env)?) {
                    then.evaluate(env)?
                } else {
                    els.evaluate(env)?
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Set of variable names referenced anywhere in the expression.
    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Number(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(e) | Expr::Not(e) => e.collect_vars(out),
            Expr::Arith(_, a, b) | Expr::Cmp(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::If(c, t, e) => {
                c.collect_vars(out);
                t.collect_vars(out);
                e.collect_vars(out);
            }
        }
    }

    /// Returns a copy with every variable reference rewritten through `f`.
    pub fn rename_vars<F: Fn(&str) -> String + Copy>(&self, f: F) -> Expr {
        match self {
            Expr::Number(n) => Expr::Number(*n),
            Expr::Var(name) => Expr::Var(f(name)),
            Expr::Neg(e) => Expr::Neg(Box::new(e.rename_vars(f))),
            Expr::Not(e) => Expr::Not(Box::new(e.rename_vars(f))),
            Expr::Arith(op, a, b) => Expr::Arith(
                *op,
                Box::new(a.rename_vars(f)),
                Box::new(b.rename_vars(f)),
            ),
            Expr::Cmp(op, a, b) => {
                Expr::Cmp(*op, Box::new(a.rename_vars(f)), Box::new(b.rename_vars(f)))
            }
            Expr::And(a, b) => {
                Expr::And(Box::new(a.rename_vars(f)), Box::new(b.rename_vars(f)))
            }
            Expr::Or(a, b) => Expr::Or(Box::new(a.rename_vars(f)), Box::new(b.rename_vars(f))),
            Expr::If(c, t, e) => Expr::If(
                Box::new(c.rename_vars(f)),
                Box::new(t.rename_vars(f)),
                Box::new(e.rename_vars(f)),
            ),
        }
    }
}

// Precedence levels for printing, loosest to tightest. A child below the
// level its position requires gets parenthesized, so printed text reparses
// to the same tree.
const LVL_OR: u8 = 0;
const LVL_AND: u8 = 1;
const LVL_NOT: u8 = 2;
const LVL_CMP: u8 = 3;
const LVL_ADD: u8 = 4;
const LVL_MUL: u8 = 5;
const LVL_NEG: u8 = 6;
const LVL_ATOM: u8 = 7;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Or(..) => LVL_OR,
        Expr::And(..) => LVL_AND,
        Expr::Not(..) => LVL_NOT,
        Expr::Cmp(..) => LVL_CMP,
        Expr::Arith(ArithOp::Add | ArithOp::Sub, ..) => LVL_ADD,
        Expr::Arith(ArithOp::Mul | ArithOp::Div, ..) => LVL_MUL,
        Expr::Neg(..) => LVL_NEG,
        Expr::Number(_) | Expr::Var(_) | Expr::If(..) => LVL_ATOM,
    }
}

fn write_at(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let lvl = level(e);
    if lvl < min {
        write!(f, "(")?;
        write_at(e, LVL_OR, f)?;
        return write!(f, ")");
    }
    match e {
        Expr::Number(n) => write!(f, "{n}"),
        Expr::Var(name) => write!(f, "{name}"),
        Expr::Neg(inner) => {
            write!(f, "-")?;
            write_at(inner, LVL_NEG, f)
        }
        Expr::Arith(op, a, b) => {
            let (sym, right) = match op {
                ArithOp::Add => ("+", LVL_MUL),
                ArithOp::Sub => ("-", LVL_MUL),
                ArithOp::Mul => ("*", LVL_NEG),
                ArithOp::Div => ("/", LVL_NEG),
            };
            write_at(a, lvl, f)?;
            write!(f, " {sym} ")?;
            write_at(b, right, f)
        }
        Expr::Cmp(op, a, b) => {
            write_at(a, LVL_ADD, f)?;
            write!(f, " {} ", op.symbol())?;
            write_at(b, LVL_ADD, f)
        }
        Expr::And(a, b) => {
            write_at(a, LVL_AND, f)?;
            write!(f, " and ")?;
            write_at(b, LVL_NOT, f)
        }
        Expr::Or(a, b) => {
            write_at(a, LVL_OR, f)?;
            write!(f, " or ")?;
            write_at(b, LVL_AND, f)
        }
        Expr::Not(inner) => {
            write!(f, "not ")?;
            write_at(inner, LVL_CMP, f)
        }
        Expr::If(c, t, els) => {
            write!(f, "if(")?;
            write_at(c, LVL_OR, f)?;
            write!(f, ", ")?;
            write_at(t, LVL_OR, f)?;
            write!(f, ", ")?;
            write_at(els, LVL_OR, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_at(self, LVL_OR, f)
    }
}
