//! Variable binding and evaluation over reals or jets.
//!
//! Both evaluation paths run the same generic interpreter; the real path is
//! the jet path with the derivative bookkeeping dropped, so values agree
//! bit for bit and primitives raise domain errors at the same points.

use super::ast::{BinOp, Expr, Func};
use super::jet::{powi_coefficients, Jet2};
use super::EvalError;
use crate::Scalar;

/// Values the interpreter can compute with.
pub trait Operand<T: Scalar>: Clone {
    /// Constant with the same shape as `proto` (or a shapeless constant).
    fn lift(proto: Option<&Self>, c: T) -> Self;
    fn value(&self) -> T;
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    fn negate(&self) -> Self;
    fn chain1(&self, f: T, df: T, d2f: T) -> Self;
    fn chain2(&self, other: &Self, f: T, d: [T; 2], dd: [T; 3]) -> Self;
}

impl<T: Scalar> Operand<T> for T {
    fn lift(_: Option<&Self>, c: T) -> Self {
        c
    }
    fn value(&self) -> T {
        *self
    }
    fn plus(&self, other: &Self) -> Self {
        *self + *other
    }
    fn minus(&self, other: &Self) -> Self {
        *self - *other
    }
    fn negate(&self) -> Self {
        -*self
    }
    fn chain1(&self, f: T, _: T, _: T) -> Self {
        f
    }
    fn chain2(&self, _: &Self, f: T, _: [T; 2], _: [T; 3]) -> Self {
        f
    }
}

impl<T: Scalar> Operand<T> for Jet2<T> {
    fn lift(proto: Option<&Self>, c: T) -> Self {
        Jet2::constant(c, proto.map_or(0, Jet2::dim))
    }
    fn value(&self) -> T {
        self.value
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn negate(&self) -> Self {
        -self
    }
    fn chain1(&self, f: T, df: T, d2f: T) -> Self {
        Jet2::chain1(self, f, df, d2f)
    }
    fn chain2(&self, other: &Self, f: T, d: [T; 2], dd: [T; 3]) -> Self {
        Jet2::chain2(self, other, f, d, dd)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    /// Power with a flag recording whether the exponent is variable-free.
    Pow(Box<Node>, Box<Node>, bool),
    Call(Func, Vec<Node>),
}

/// An expression with its variables resolved to positions in an ordered
/// variable list.
#[derive(Clone, Debug)]
pub struct Program {
    root: Node,
    names: Vec<String>,
}

impl Program {
    /// Binds `expr` against `names`; fails if a free variable is missing.
    pub fn compile<S: AsRef<str>>(expr: &Expr, names: &[S]) -> Result<Self, EvalError> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        let root = lower(expr, &names)?;
        Ok(Self { root, names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn to_expr(&self) -> Expr {
        raise(&self.root, &self.names)
    }

    pub fn eval<T: Scalar, O: Operand<T>>(&self, env: &[O]) -> Result<O, EvalError> {
        assert_eq!(
            env.len(),
            self.names.len(),
            "environment size does not match binding"
        );
        self.node(&self.root, env)
    }

    pub fn eval_real<T: Scalar>(&self, point: &[T]) -> Result<T, EvalError> {
        self.eval(point)
    }

    pub fn eval_jet<T: Scalar>(&self, env: &[Jet2<T>]) -> Result<Jet2<T>, EvalError> {
        self.eval(env)
    }

    fn domain(&self, node: &Node, reason: &'static str) -> EvalError {
        EvalError::DomainError {
            expr: raise(node, &self.names).to_string(),
            reason,
        }
    }

    fn node<T: Scalar, O: Operand<T>>(&self, node: &Node, env: &[O]) -> Result<O, EvalError> {
        let proto = env.first();
        Ok(match node {
            Node::Num(v) => O::lift(proto, T::lit(*v)),
            Node::Var(i) => env[*i].clone(),
            Node::Neg(a) => self.node(a, env)?.negate(),
            Node::Bin(op, a, b) => {
                let a = self.node(a, env)?;
                let b = self.node(b, env)?;
                let (x, y) = (a.value(), b.value());
                match op {
                    BinOp::Add => a.plus(&b),
                    BinOp::Sub => a.minus(&b),
                    BinOp::Mul => a.chain2(&b, x * y, [y, x], [T::zero(), T::one(), T::zero()]),
                    BinOp::Div => {
                        if y == T::zero() {
                            return Err(self.domain(node, "division by zero"));
                        }
                        let iy = T::one() / y;
                        a.chain2(
                            &b,
                            x / y,
                            [iy, -x * iy * iy],
                            [T::zero(), -iy * iy, T::two() * x * iy * iy * iy],
                        )
                    }
                    BinOp::Pow => unreachable!("lowered to Node::Pow"),
                }
            }
            Node::Pow(a, b, exponent_const) => {
                let base = self.node(a, env)?;
                let exponent = self.node(b, env)?;
                self.power(node, &base, &exponent, *exponent_const)?
            }
            Node::Call(f, args) => {
                let a = self.node(&args[0], env)?;
                let x = a.value();
                match f {
                    Func::Sin => {
                        let (s, c) = std::hint::black_box((x.sin(), x.cos()));
                        a.chain1(s, c, -s)
                    }
                    Func::Cos => {
                        let (s, c) = std::hint::black_box((x.sin(), x.cos()));
                        a.chain1(c, -s, -c)
                    }
                    Func::Tan => {
                        if x.cos() == T::zero() {
                            return Err(self.domain(node, "tan pole"));
                        }
                        let t = x.tan();
                        let sec2 = T::one() + t * t;
                        a.chain1(t, sec2, T::two() * t * sec2)
                    }
                    Func::Exp => {
                        let e = x.exp();
                        a.chain1(e, e, e)
                    }
                    Func::Log => {
                        if !(x > T::zero()) {
                            return Err(self.domain(node, "log of non-positive value"));
                        }
                        a.chain1(x.ln(), T::one() / x, -T::one() / (x * x))
                    }
                    Func::Sqrt => {
                        if !(x > T::zero()) {
                            return Err(self.domain(node, "sqrt of non-positive value"));
                        }
                        let s = x.sqrt();
                        a.chain1(s, T::half() / s, -T::lit(0.25) / (s * x))
                    }
                    Func::Abs => {
                        if x == T::zero() {
                            return Err(self.domain(node, "abs is not differentiable at 0"));
                        }
                        a.chain1(x.abs(), x.signum(), T::zero())
                    }
                    Func::Tanh => {
                        let t = x.tanh();
                        let s = T::one() - t * t;
                        a.chain1(t, s, -T::two() * t * s)
                    }
                    Func::Atan2 => {
                        let b = self.node(&args[1], env)?;
                        let (y, xx) = (x, b.value());
                        let r2 = xx * xx + y * y;
                        if r2 == T::zero() {
                            return Err(self.domain(node, "atan2 at the origin"));
                        }
                        let r4 = r2 * r2;
                        a.chain2(
                            &b,
                            y.atan2(xx),
                            [xx / r2, -y / r2],
                            [
                                -T::two() * xx * y / r4,
                                (y * y - xx * xx) / r4,
                                T::two() * xx * y / r4,
                            ],
                        )
                    }
                    Func::Min | Func::Max => {
                        let b = self.node(&args[1], env)?;
                        let take_a = if *f == Func::Min {
                            x <= b.value()
                        } else {
                            x >= b.value()
                        };
                        if take_a {
                            a
                        } else {
                            b
                        }
                    }
                    Func::Pow => unreachable!("lowered to Node::Pow"),
                }
            }
        })
    }

    fn power<T: Scalar, O: Operand<T>>(
        &self,
        node: &Node,
        base: &O,
        exponent: &O,
        exponent_const: bool,
    ) -> Result<O, EvalError> {
        let (x, p) = (base.value(), exponent.value());
        if exponent_const && p.fract() == T::zero() && p.abs() < T::lit(2147483648.0) {
            let n = p.to_i32().unwrap();
            if n < 0 && x == T::zero() {
                return Err(self.domain(node, "negative power of zero"));
            }
            let (f, df, d2f) = powi_coefficients(x, n);
            return Ok(base.chain1(f, df, d2f));
        }
        if !(x > T::zero()) {
            return Err(self.domain(node, "non-integer power of non-positive base"));
        }
        let f = x.powf(p);
        if exponent_const {
            let one = T::one();
            return Ok(base.chain1(f, p * x.powf(p - one), p * (p - one) * x.powf(p - T::two())));
        }
        let ln = x.ln();
        let xm1 = x.powf(p - T::one());
        Ok(base.chain2(
            exponent,
            f,
            [p * xm1, f * ln],
            [
                p * (p - T::one()) * x.powf(p - T::two()),
                xm1 * (T::one() + p * ln),
                f * ln * ln,
            ],
        ))
    }
}

fn has_vars(node: &Node) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var(_) => true,
        Node::Neg(a) => has_vars(a),
        Node::Bin(_, a, b) | Node::Pow(a, b, _) => has_vars(a) || has_vars(b),
        Node::Call(_, args) => args.iter().any(has_vars),
    }
}

fn lower(e: &Expr, names: &[String]) -> Result<Node, EvalError> {
    Ok(match e {
        Expr::Num(v) => Node::Num(*v),
        Expr::Pi => Node::Num(std::f64::consts::PI),
        Expr::Var(v) => Node::Var(
            names
                .iter()
                .position(|n| n == v)
                .ok_or_else(|| EvalError::UnboundVariable(v.clone()))?,
        ),
        Expr::Neg(a) => Node::Neg(Box::new(lower(a, names)?)),
        Expr::Binary(BinOp::Pow, a, b) => {
            let b = lower(b, names)?;
            let c = !has_vars(&b);
            Node::Pow(Box::new(lower(a, names)?), Box::new(b), c)
        }
        Expr::Binary(op, a, b) => {
            Node::Bin(*op, Box::new(lower(a, names)?), Box::new(lower(b, names)?))
        }
        Expr::Call(Func::Pow, args) => {
            let b = lower(&args[1], names)?;
            let c = !has_vars(&b);
            Node::Pow(Box::new(lower(&args[0], names)?), Box::new(b), c)
        }
        Expr::Call(f, args) => Node::Call(
            *f,
            args.iter()
                .map(|a| lower(a, names))
                .collect::<Result<_, _>>()?,
        ),
    })
}

fn raise(node: &Node, names: &[String]) -> Expr {
    match node {
        Node::Num(v) if *v == std::f64::consts::PI => Expr::Pi,
        Node::Num(v) => Expr::Num(*v),
        Node::Var(i) => Expr::Var(names[*i].clone()),
        Node::Neg(a) => Expr::Neg(Box::new(raise(a, names))),
        Node::Bin(op, a, b) => Expr::binary(*op, raise(a, names), raise(b, names)),
        Node::Pow(a, b, _) => Expr::binary(BinOp::Pow, raise(a, names), raise(b, names)),
        Node::Call(f, args) => Expr::Call(*f, args.iter().map(|a| raise(a, names)).collect()),
    }
}
