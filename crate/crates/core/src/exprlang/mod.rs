//! Expression language: parsing, printing, symbolic substitution and
//! differentiation, and evaluation over reals or second-order jets.

mod ast;
mod eval;
mod jet;
mod parse;

pub(crate) use ast::{add, div, mul, neg, sub};
pub use ast::{BinOp, Expr, Func};
pub use eval::{Operand, Program};
pub use jet::Jet2;
pub use parse::{parse, ParseError};

use thiserror::Error;

use crate::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("domain error in `{expr}`: {reason}")]
    DomainError { expr: String, reason: &'static str },
    #[error("`{expr}` has no symbolic derivative")]
    NotDifferentiable { expr: String },
}

/// Evaluates `e` in jet arithmetic with variables bound by name.
pub fn eval_jet<T: Scalar>(e: &Expr, env: &[(&str, Jet2<T>)]) -> Result<Jet2<T>, EvalError> {
    let names: Vec<&str> = env.iter().map(|(n, _)| *n).collect();
    let values: Vec<Jet2<T>> = env.iter().map(|(_, v)| v.clone()).collect();
    Program::compile(e, &names)?.eval_jet(&values)
}

/// Value-only evaluation with variables bound by name.
pub fn eval_real<T: Scalar>(e: &Expr, env: &[(&str, T)]) -> Result<T, EvalError> {
    let names: Vec<&str> = env.iter().map(|(n, _)| *n).collect();
    let values: Vec<T> = env.iter().map(|(_, v)| *v).collect();
    Program::compile(e, &names)?.eval_real(&values)
}
