use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

/// Built-in functions. The set is closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Atan2,
    Pow,
    Min,
    Max,
}

impl Func {
    pub const ALL: [Func; 12] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Tanh,
        Func::Atan2,
        Func::Pow,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
            Func::Atan2 => "atan2",
            Func::Pow => "pow",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Atan2 | Func::Pow | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Expression tree.
///
/// `^` binds tighter than unary minus, which binds tighter than `* /`,
/// which bind tighter than `+ -`; `^` is right-associative.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Pi,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Expr {
        Expr::Call(f, args)
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    /// Free variables in sorted order.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Num(_) | Expr::Pi => {}
            Expr::Neg(a) => a.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Pi => 1,
            Expr::Neg(a) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::size).sum::<usize>(),
        }
    }

    /// Replaces every variable found in `bindings` by the bound expression.
    pub fn substitute(&self, bindings: &HashMap<String, Expr>) -> Expr {
        match self {
            Expr::Var(v) => bindings.get(v).cloned().unwrap_or_else(|| self.clone()),
            Expr::Num(_) | Expr::Pi => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(bindings))),
            Expr::Binary(op, a, b) => {
                Expr::binary(*op, a.substitute(bindings), b.substitute(bindings))
            }
            Expr::Call(f, args) => {
                Expr::Call(*f, args.iter().map(|a| a.substitute(bindings)).collect())
            }
        }
    }

    /// Polynomial in its variables: only `+ - *`, unary minus, literals and
    /// non-negative integer literal powers.
    pub fn is_polynomial(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Pi => true,
            Expr::Neg(a) => a.is_polynomial(),
            Expr::Binary(BinOp::Pow, a, b) => {
                matches!(**b, Expr::Num(n) if n >= 0.0 && n.fract() == 0.0) && a.is_polynomial()
            }
            Expr::Binary(BinOp::Div, a, b) => {
                matches!(**b, Expr::Num(n) if n != 0.0) && a.is_polynomial()
            }
            Expr::Binary(_, a, b) => a.is_polynomial() && b.is_polynomial(),
            Expr::Call(Func::Pow, args) => {
                matches!(args[1], Expr::Num(n) if n >= 0.0 && n.fract() == 0.0)
                    && args[0].is_polynomial()
            }
            Expr::Call(..) => false,
        }
    }

    /// Symbolic partial derivative with respect to `var`.
    ///
    /// Zero and unit factors are dropped while building the result so that
    /// repeated differentiation does not blow up the tree; no other
    /// rewriting is performed. `min`/`max` have no closed-form derivative
    /// in this language and are rejected.
    pub fn diff(&self, var: &str) -> Result<Expr, EvalError> {
        if !self.depends_on(var) {
            return Ok(Expr::Num(0.0));
        }
        Ok(match self {
            Expr::Var(v) => Expr::Num(if v == var { 1.0 } else { 0.0 }),
            Expr::Num(_) | Expr::Pi => Expr::Num(0.0),
            Expr::Neg(a) => neg(a.diff(var)?),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.as_ref(), b.as_ref());
                match op {
                    BinOp::Add => add(a.diff(var)?, b.diff(var)?),
                    BinOp::Sub => sub(a.diff(var)?, b.diff(var)?),
                    BinOp::Mul => add(mul(a.diff(var)?, b.clone()), mul(a.clone(), b.diff(var)?)),
                    BinOp::Div => {
                        let da = a.diff(var)?;
                        let db = b.diff(var)?;
                        sub(
                            div(da, b.clone()),
                            div(
                                mul(a.clone(), db),
                                Expr::binary(BinOp::Pow, b.clone(), Expr::Num(2.0)),
                            ),
                        )
                    }
                    BinOp::Pow => diff_pow(a, b, var)?,
                }
            }
            Expr::Call(f, args) => {
                let a = &args[0];
                match f {
                    Func::Sin => mul(Expr::call(Func::Cos, vec![a.clone()]), a.diff(var)?),
                    Func::Cos => neg(mul(Expr::call(Func::Sin, vec![a.clone()]), a.diff(var)?)),
                    Func::Tan => {
                        let t = Expr::call(Func::Tan, vec![a.clone()]);
                        mul(
                            add(Expr::Num(1.0), Expr::binary(BinOp::Pow, t, Expr::Num(2.0))),
                            a.diff(var)?,
                        )
                    }
                    Func::Exp => mul(self.clone(), a.diff(var)?),
                    Func::Log => div(a.diff(var)?, a.clone()),
                    Func::Sqrt => div(a.diff(var)?, mul(Expr::Num(2.0), self.clone())),
                    Func::Abs => mul(div(self.clone(), a.clone()), a.diff(var)?),
                    Func::Tanh => {
                        let t2 = Expr::binary(BinOp::Pow, self.clone(), Expr::Num(2.0));
                        mul(sub(Expr::Num(1.0), t2), a.diff(var)?)
                    }
                    Func::Atan2 => {
                        // atan2(y, x)' = (x y' - y x') / (x^2 + y^2)
                        let (y, x) = (&args[0], &args[1]);
                        let r2 = add(
                            Expr::binary(BinOp::Pow, x.clone(), Expr::Num(2.0)),
                            Expr::binary(BinOp::Pow, y.clone(), Expr::Num(2.0)),
                        );
                        div(
                            sub(mul(x.clone(), y.diff(var)?), mul(y.clone(), x.diff(var)?)),
                            r2,
                        )
                    }
                    Func::Pow => diff_pow(&args[0], &args[1], var)?,
                    Func::Min | Func::Max => {
                        return Err(EvalError::NotDifferentiable {
                            expr: self.to_string(),
                        })
                    }
                }
            }
        })
    }

    fn depends_on(&self, var: &str) -> bool {
        match self {
            Expr::Var(v) => v == var,
            Expr::Num(_) | Expr::Pi => false,
            Expr::Neg(a) => a.depends_on(var),
            Expr::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
            Expr::Call(_, args) => args.iter().any(|a| a.depends_on(var)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Num(v) if v.is_sign_negative() => 3,
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(v) => {
                if v.is_sign_negative() {
                    f.write_str("-")?;
                }
                write_number(f, v.abs())?;
            }
            Expr::Var(name) => f.write_str(name)?,
            Expr::Pi => f.write_str("pi")?,
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.fmt_prec(f, 3)?;
            }
            Expr::Binary(op, a, b) => {
                let (lmin, rmin) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                    BinOp::Pow => (5, 3),
                };
                a.fmt_prec(f, lmin)?;
                match op {
                    BinOp::Pow => f.write_str("^")?,
                    _ => write!(f, " {} ", op.symbol())?,
                }
                b.fmt_prec(f, rmin)?;
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.fmt_prec(f, 0)?;
                }
                f.write_str(")")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    // Both forms are shortest round-trip; scientific only for extreme magnitudes.
    if v != 0.0 && !(1e-4..1e16).contains(&v) {
        write!(f, "{v:?}")
    } else {
        write!(f, "{v}")
    }
}

fn diff_pow(a: &Expr, b: &Expr, var: &str) -> Result<Expr, EvalError> {
    if !b.depends_on(var) {
        // b a^(b-1) a'
        let exponent = match b {
            Expr::Num(n) => Expr::Num(n - 1.0),
            _ => sub(b.clone(), Expr::Num(1.0)),
        };
        let factor = match exponent {
            Expr::Num(0.0) => Expr::Num(1.0),
            Expr::Num(1.0) => a.clone(),
            _ => Expr::binary(BinOp::Pow, a.clone(), exponent),
        };
        return Ok(mul(mul(b.clone(), factor), a.diff(var)?));
    }
    // a^b (b' log a + b a'/a)
    let pow = Expr::binary(BinOp::Pow, a.clone(), b.clone());
    let log_a = Expr::call(Func::Log, vec![a.clone()]);
    Ok(mul(
        pow,
        add(
            mul(b.diff(var)?, log_a),
            div(mul(b.clone(), a.diff(var)?), a.clone()),
        ),
    ))
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        b
    } else if is_num(&b, 0.0) {
        a
    } else {
        Expr::binary(BinOp::Add, a, b)
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 0.0) {
        a
    } else if is_num(&a, 0.0) {
        neg(b)
    } else {
        Expr::binary(BinOp::Sub, a, b)
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        Expr::Num(0.0)
    } else if is_num(&a, 1.0) {
        b
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::binary(BinOp::Mul, a, b)
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        Expr::Num(0.0)
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::binary(BinOp::Div, a, b)
    }
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(0.0) => Expr::Num(0.0),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl std::str::FromStr for Expr {
    type Err = super::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        super::parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let src = String::deserialize(deserializer)?;
        super::parse(&src).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn printer_minimal_parentheses() {
        for src in [
            "x^2 + y",
            "-x^2",
            "(a + b) * c",
            "a - (b - c)",
            "(-x)^2",
            "x^-2",
            "2^3^2",
            "(2^3)^2",
        ] {
            let e = parse(src).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{src} printed as {e}");
        }
        assert_eq!(parse("(a + b) * c").unwrap().to_string(), "(a + b) * c");
        assert_eq!(parse("a * (b * c)").unwrap().to_string(), "a * (b * c)");
        assert_eq!(parse("(x^2)^3").unwrap().to_string(), "(x^2)^3");
    }

    #[test]
    fn substitution_composes() {
        let u = parse("a^2 + b").unwrap();
        let mut env = HashMap::new();
        env.insert("a".to_string(), parse("x + y").unwrap());
        env.insert("b".to_string(), parse("x * y").unwrap());
        assert_eq!(u.substitute(&env), parse("(x + y)^2 + x * y").unwrap());
    }

    #[test]
    fn polynomial_detection() {
        assert!(parse("x^2 - y^2").unwrap().is_polynomial());
        assert!(parse("2 * x * y / 3").unwrap().is_polynomial());
        assert!(!parse("x / y").unwrap().is_polynomial());
        assert!(!parse("exp(x)").unwrap().is_polynomial());
        assert!(!parse("x^0.5").unwrap().is_polynomial());
    }

    #[test]
    fn diff_rejects_min_max() {
        assert!(parse("min(x, 1)").unwrap().diff("x").is_err());
        assert_eq!(
            parse("min(y, 1)").unwrap().diff("x").unwrap(),
            Expr::Num(0.0)
        );
    }
}
