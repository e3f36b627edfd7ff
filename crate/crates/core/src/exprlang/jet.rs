//! Second-order jets: value, gradient and Hessian of a scalar with respect
//! to `k` chart coordinates, propagated by truncated Taylor arithmetic.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::Scalar;

/// Degree-2 Taylor coefficients of a scalar in `k` variables.
///
/// The Hessian is stored as a packed upper triangle, so symmetry holds by
/// construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2<T> {
    pub value: T,
    grad: Vec<T>,
    hess: Vec<T>,
}

#[inline]
fn packed(k: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * k - i * (i + 1) / 2 + j
}

impl<T: Scalar> Jet2<T> {
    pub fn constant(value: T, k: usize) -> Self {
        Self {
            value,
            grad: vec![T::zero(); k],
            hess: vec![T::zero(); k * (k + 1) / 2],
        }
    }

    /// Coordinate `i` of `k` seeded at `value`: gradient `eᵢ`, zero Hessian.
    pub fn variable(value: T, i: usize, k: usize) -> Self {
        let mut j = Self::constant(value, k);
        j.grad[i] = T::one();
        j
    }

    /// Seeds all coordinates of a point.
    pub fn seed(point: &[T]) -> Vec<Self> {
        let k = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| Self::variable(v, i, k))
            .collect()
    }

    /// Builds a jet from explicit coefficients; `hess` is read as a full
    /// row-major `k×k` matrix and symmetrized.
    pub fn from_parts(value: T, grad: Vec<T>, hess: &[T]) -> Self {
        let k = grad.len();
        assert_eq!(hess.len(), k * k, "hessian must be k x k");
        let mut out = Self::constant(value, k);
        out.grad = grad;
        for i in 0..k {
            for j in i..k {
                out.hess[packed(k, i, j)] = T::half() * (hess[i * k + j] + hess[j * k + i]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn grad(&self) -> &[T] {
        &self.grad
    }

    pub fn d(&self, i: usize) -> T {
        self.grad[i]
    }

    pub fn hess(&self, i: usize, j: usize) -> T {
        self.hess[packed(self.dim(), i, j)]
    }

    /// Full row-major Hessian.
    pub fn hessian(&self) -> Vec<T> {
        let k = self.dim();
        let mut out = vec![T::zero(); k * k];
        for i in 0..k {
            for j in 0..k {
                out[i * k + j] = self.hess(i, j);
            }
        }
        out
    }

    /// True when every derivative coefficient is zero.
    pub fn is_constant(&self) -> bool {
        self.grad.iter().chain(&self.hess).all(|x| *x == T::zero())
    }

    /// Composition `g ∘ self` for a scalar function with `g = f`, `g' = df`,
    /// `g'' = d2f` at `self.value`.
    pub fn chain1(&self, f: T, df: T, d2f: T) -> Self {
        let k = self.dim();
        let mut out = Self::constant(f, k);
        for i in 0..k {
            out.grad[i] = df * self.grad[i];
        }
        for i in 0..k {
            for j in i..k {
                let p = packed(k, i, j);
                out.hess[p] = df * self.hess[p] + d2f * self.grad[i] * self.grad[j];
            }
        }
        out
    }

    /// Composition `g(self, other)` for a two-argument function, given its
    /// value, gradient `[ga, gb]` and Hessian `[gaa, gab, gbb]`.
    pub fn chain2(&self, other: &Self, f: T, d: [T; 2], dd: [T; 3]) -> Self {
        let k = self.dim();
        assert_eq!(k, other.dim(), "jets over different variable sets");
        let [ga, gb] = d;
        let [gaa, gab, gbb] = dd;
        let mut out = Self::constant(f, k);
        for i in 0..k {
            out.grad[i] = ga * self.grad[i] + gb * other.grad[i];
        }
        for i in 0..k {
            let (ai, bi) = (self.grad[i], other.grad[i]);
            for j in i..k {
                let (aj, bj) = (self.grad[j], other.grad[j]);
                let p = packed(k, i, j);
                out.hess[p] = ga * self.hess[p]
                    + gb * other.hess[p]
                    + gaa * ai * aj
                    + gab * (ai * bj + bi * aj)
                    + gbb * bi * bj;
            }
        }
        out
    }

    fn zip(&self, other: &Self, value: T, op: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.dim(), other.dim(), "jets over different variable sets");
        Self {
            value,
            grad: self
                .grad
                .iter()
                .zip(&other.grad)
                .map(|(&a, &b)| op(a, b))
                .collect(),
            hess: self
                .hess
                .iter()
                .zip(&other.hess)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            value: self.value * s,
            grad: self.grad.iter().map(|&g| g * s).collect(),
            hess: self.hess.iter().map(|&h| h * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: T) -> Self {
        Self {
            value: self.value + s,
            ..self.clone()
        }
    }

    pub fn recip(&self) -> Self {
        let x = self.value;
        let r = T::one() / x;
        self.chain1(r, -r * r, T::two() * r * r * r)
    }

    pub fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain1(s, T::half() / s, -T::lit(0.25) / (s * self.value))
    }

    pub fn ln(&self) -> Self {
        let x = self.value;
        self.chain1(x.ln(), T::one() / x, -T::one() / (x * x))
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain1(e, e, e)
    }

    pub fn powf(&self, p: T) -> Self {
        let x = self.value;
        self.chain1(
            x.powf(p),
            p * x.powf(p - T::one()),
            p * (p - T::one()) * x.powf(p - T::two()),
        )
    }

    pub fn powi(&self, n: i32) -> Self {
        let x = self.value;
        let (f, df, d2f) = powi_coefficients(x, n);
        self.chain1(f, df, d2f)
    }
}

/// `(xⁿ, n xⁿ⁻¹, n(n−1) xⁿ⁻²)` without spurious `0·∞` at `x = 0`.
pub(crate) fn powi_coefficients<T: Scalar>(x: T, n: i32) -> (T, T, T) {
    let nf = T::from_i32(n).unwrap();
    match n {
        0 => (T::one(), T::zero(), T::zero()),
        1 => (x, T::one(), T::zero()),
        2 => (x.powi(2), T::two() * x, T::two()),
        _ => (
            x.powi(n),
            nf * x.powi(n - 1),
            nf * (nf - T::one()) * x.powi(n - 2),
        ),
    }
}

impl<T: Scalar> Add for &Jet2<T> {
    type Output = Jet2<T>;
    fn add(self, rhs: Self) -> Jet2<T> {
        self.zip(rhs, self.value + rhs.value, |a, b| a + b)
    }
}

impl<T: Scalar> Sub for &Jet2<T> {
    type Output = Jet2<T>;
    fn sub(self, rhs: Self) -> Jet2<T> {
        self.zip(rhs, self.value - rhs.value, |a, b| a - b)
    }
}

impl<T: Scalar> Mul for &Jet2<T> {
    type Output = Jet2<T>;
    fn mul(self, rhs: Self) -> Jet2<T> {
        self.chain2(
            rhs,
            self.value * rhs.value,
            [rhs.value, self.value],
            [T::zero(), T::one(), T::zero()],
        )
    }
}

impl<T: Scalar> Div for &Jet2<T> {
    type Output = Jet2<T>;
    fn div(self, rhs: Self) -> Jet2<T> {
        let (a, b) = (self.value, rhs.value);
        let ib = T::one() / b;
        self.chain2(
            rhs,
            a / b,
            [ib, -a * ib * ib],
            [T::zero(), -ib * ib, T::two() * a * ib * ib * ib],
        )
    }
}

impl<T: Scalar> Neg for &Jet2<T> {
    type Output = Jet2<T>;
    fn neg(self) -> Jet2<T> {
        self.scale(-T::one())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl<T: Scalar> $tr for Jet2<T> {
            type Output = Jet2<T>;
            fn $m(self, rhs: Self) -> Jet2<T> {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl<T: Scalar> Neg for Jet2<T> {
    type Output = Jet2<T>;
    fn neg(self) -> Jet2<T> {
        -(&self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let xs = Jet2::seed(&[2.0, 3.0]);
        let p = &xs[0] * &xs[1];
        assert_eq!(p.value, 6.0);
        assert_eq!(p.grad(), &[3.0, 2.0]);
        assert_eq!(p.hess(0, 1), 1.0);
        assert_eq!(p.hess(1, 0), 1.0);
        assert_eq!(p.hess(0, 0), 0.0);
    }

    #[test]
    fn quotient_matches_hand_derivatives() {
        // 2/(1+x^2) at x = 1: value 1, first derivative -1, second 1.
        let x = Jet2::variable(1.0f64, 0, 1);
        let q = &Jet2::constant(2.0, 1) / &(&x * &x).add_scalar(1.0);
        assert_eq!(q.value, 1.0);
        assert!((q.d(0) + 1.0).abs() < 1e-15);
        assert!((q.hess(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn from_parts_symmetrizes() {
        let j = Jet2::from_parts(1.0, vec![0.0, 0.0], &[1.0, 2.0, 4.0, 3.0]);
        assert_eq!(j.hess(0, 1), 3.0);
        assert_eq!(j.hessian(), vec![1.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn single_precision_jets() {
        let x = Jet2::variable(0.5f32, 0, 1);
        let e = x.exp();
        assert!((e.d(0) - 0.5f32.exp()).abs() < 1e-6);
        assert!((e.hess(0, 0) - 0.5f32.exp()).abs() < 1e-6);
    }
}
