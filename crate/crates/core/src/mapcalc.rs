//! Map-level operators: differential, pullback metric, energy density and
//! the tension fields of the harmonic, f-harmonic, F-harmonic and
//! p-harmonic energies, plus the composition law for f-tension.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::exprlang::{add, div, mul, sub, BinOp, Expr, Jet2, Program};
use crate::geometry::{metric_at_side, MetricAtPoint, RiemannianChart};
use crate::linalg::Matrix;
use crate::{Error, Result, Scalar, Side};

/// Serialized form of a map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapDef {
    pub name: String,
    pub source: RiemannianChart,
    pub target: RiemannianChart,
    pub components: Vec<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Expr>,
}

/// A map `φ` between two charts, given by `n` component expressions in
/// the `m` source coordinates, with an optional positive weight `f`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MapDef", into = "MapDef")]
pub struct MapSpec {
    def: MapDef,
    components: Vec<Program>,
    weight: Option<Program>,
    /// `∂ᵢφ^α` at `α * m + i`; absent when a component is not symbolically
    /// differentiable.
    partials: Option<Vec<Expr>>,
    partial_programs: Option<Vec<Program>>,
}

impl TryFrom<MapDef> for MapSpec {
    type Error = Error;

    fn try_from(def: MapDef) -> Result<Self> {
        let n = def.target.dim();
        if def.components.len() != n {
            return Err(Error::Invalid(format!(
                "map `{}` has {} components but target `{}` has dimension {n}",
                def.name,
                def.components.len(),
                def.target.name()
            )));
        }
        let coords = def.source.coords();
        let components = def
            .components
            .iter()
            .map(|c| Program::compile(c, coords))
            .collect::<Result<Vec<_>, _>>()?;
        let weight = def
            .weight
            .as_ref()
            .map(|w| Program::compile(w, coords))
            .transpose()?;
        let partials: Option<Vec<Expr>> = def
            .components
            .iter()
            .flat_map(|c| coords.iter().map(move |x| c.diff(x)))
            .collect::<Result<Vec<_>, _>>()
            .ok();
        let partial_programs = partials
            .as_ref()
            .map(|ps| {
                ps.iter()
                    .map(|e| Program::compile(e, coords))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        Ok(Self {
            def,
            components,
            weight,
            partials,
            partial_programs,
        })
    }
}

impl From<MapSpec> for MapDef {
    fn from(m: MapSpec) -> Self {
        m.def
    }
}

impl MapSpec {
    pub fn new(
        name: &str,
        source: RiemannianChart,
        target: RiemannianChart,
        components: Vec<Expr>,
        weight: Option<Expr>,
    ) -> Result<Self> {
        Self::try_from(MapDef {
            name: name.to_string(),
            source,
            target,
            components,
            weight,
        })
    }

    /// Map from string expressions.
    pub fn parse(
        name: &str,
        source: RiemannianChart,
        target: RiemannianChart,
        components: &[&str],
        weight: Option<&str>,
    ) -> Result<Self> {
        let components = components
            .iter()
            .map(|s| crate::exprlang::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        let weight = weight.map(crate::exprlang::parse).transpose()?;
        Self::new(name, source, target, components, weight)
    }

    pub fn name(&self) -> &str {
        &self.def.name
    }

    pub fn source(&self) -> &RiemannianChart {
        &self.def.source
    }

    pub fn target(&self) -> &RiemannianChart {
        &self.def.target
    }

    pub fn component_exprs(&self) -> &[Expr] {
        &self.def.components
    }

    pub fn weight_expr(&self) -> Option<&Expr> {
        self.def.weight.as_ref()
    }

    pub fn def(&self) -> &MapDef {
        &self.def
    }

    /// Source dimension.
    pub fn m(&self) -> usize {
        self.def.source.dim()
    }

    /// Target dimension.
    pub fn n(&self) -> usize {
        self.def.target.dim()
    }

    /// Same map with another weight.
    pub fn with_weight(&self, weight: Option<Expr>) -> Result<Self> {
        Self::try_from(MapDef {
            weight,
            ..self.def.clone()
        })
    }

    /// Same map with another name.
    pub fn renamed(&self, name: &str) -> Self {
        let mut out = self.clone();
        out.def.name = name.to_string();
        out
    }

    /// Symbolic partial `∂ᵢφ^α`.
    pub fn partial_expr(&self, alpha: usize, i: usize) -> Option<&Expr> {
        self.partials.as_ref().map(|p| &p[alpha * self.m() + i])
    }

    pub(crate) fn partial_programs(&self) -> Option<&[Program]> {
        self.partial_programs.as_deref()
    }

    /// Weight as a jet at `p`.
    pub fn weight_jet<T: Scalar>(&self, p: &[T]) -> Result<Jet2<T>> {
        let w = self
            .weight
            .as_ref()
            .ok_or_else(|| Error::WeightMissing(self.def.name.clone()))?;
        let f = w.eval_jet(&Jet2::seed(p))?;
        if !(f.value > T::zero()) {
            return Err(Error::WeightNotPositive(f.value.as_f64()));
        }
        Ok(f)
    }

    /// Component values `φ(p)`.
    pub fn eval<T: Scalar>(&self, p: &[T]) -> Result<Vec<T>> {
        Ok(self
            .components
            .iter()
            .map(|c| c.eval_real(p))
            .collect::<Result<_, _>>()?)
    }

    /// `ψ∘self` by substituting the components of `self` into those of
    /// `psi`; keeps the weight of `self`.
    pub fn compose(&self, psi: &MapSpec) -> Result<MapSpec> {
        if !same_chart(self.target(), psi.source()) {
            return Err(Error::ChartMismatch {
                expected: self.target().name().to_string(),
                found: psi.source().name().to_string(),
            });
        }
        let bindings: HashMap<String, Expr> = psi
            .source()
            .coords()
            .iter()
            .cloned()
            .zip(self.def.components.iter().cloned())
            .collect();
        let components = psi
            .def
            .components
            .iter()
            .map(|c| c.substitute(&bindings))
            .collect();
        MapSpec::new(
            &format!("{}∘{}", psi.name(), self.name()),
            self.source().clone(),
            psi.target().clone(),
            components,
            self.def.weight.clone(),
        )
    }
}

fn same_chart(a: &RiemannianChart, b: &RiemannianChart) -> bool {
    a.name() == b.name() && a.coords() == b.coords() && a.metric_exprs() == b.metric_exprs()
}

/// First- and second-order data of a map at a point.
#[derive(Clone, Debug)]
pub struct MapJet<T> {
    pub point: Vec<T>,
    pub image: Vec<T>,
    pub components: Vec<Jet2<T>>,
    /// `n×m`, `J[(α, i)] = ∂ᵢφ^α`
    pub jacobian: Matrix<T>,
    /// `∂ᵢ∂ⱼφ^α` at `(α * m + i) * m + j`
    pub hessians: Vec<T>,
    pub source: MetricAtPoint<T>,
    pub target: MetricAtPoint<T>,
}

pub fn map_jet<T: Scalar>(map: &MapSpec, p: &[T]) -> Result<MapJet<T>> {
    let (m, n) = (map.m(), map.n());
    let source = metric_at_side(map.source(), p, Side::Source)?;
    let seeds = Jet2::seed(p);
    let components: Vec<Jet2<T>> = map
        .components
        .iter()
        .map(|c| c.eval_jet(&seeds))
        .collect::<Result<_, _>>()?;
    let image: Vec<T> = components.iter().map(|c| c.value).collect();
    let target = metric_at_side(map.target(), &image, Side::Target)?;
    let jacobian = Matrix::from_fn(n, m, |a, i| components[a].d(i));
    let mut hessians = vec![T::zero(); n * m * m];
    for (a, c) in components.iter().enumerate() {
        for i in 0..m {
            for j in 0..m {
                hessians[(a * m + i) * m + j] = c.hess(i, j);
            }
        }
    }
    Ok(MapJet {
        point: p.to_vec(),
        image,
        components,
        jacobian,
        hessians,
        source,
        target,
    })
}

impl<T: Scalar> MapJet<T> {
    pub fn m(&self) -> usize {
        self.jacobian.cols
    }

    pub fn n(&self) -> usize {
        self.jacobian.rows
    }

    #[inline]
    pub fn h(&self, a: usize, i: usize, j: usize) -> T {
        let m = self.m();
        self.hessians[(a * m + i) * m + j]
    }

    /// `dφ(v)`
    pub fn push(&self, v: &[T]) -> Vec<T> {
        self.jacobian.matvec(v)
    }

    /// `dφ(grad u)` for a scalar jet `u` on the source.
    pub fn push_gradient(&self, u: &Jet2<T>) -> Vec<T> {
        self.push(&self.source.grad(u))
    }

    /// `(φ*h)ᵢⱼ = hαβ ∂ᵢφ^α ∂ⱼφ^β`
    pub fn pullback_metric(&self) -> Matrix<T> {
        self.jacobian
            .transpose()
            .matmul(&self.target.g)
            .matmul(&self.jacobian)
    }

    /// `T^αβ = gⁱʲ ∂ᵢφ^α ∂ⱼφ^β`
    pub fn gradient_gram(&self) -> Matrix<T> {
        self.jacobian
            .matmul(&self.source.g_inv)
            .matmul(&self.jacobian.transpose())
    }

    /// `|dφ|²/2`
    pub fn energy_density(&self) -> T {
        T::half() * self.source.g_inv.frobenius_dot(&self.pullback_metric())
    }

    /// `∇dφ^σ(∂ᵢ, ∂ⱼ)` at `(σ * m + i) * m + j`.
    pub fn second_fundamental_form(&self) -> Vec<T> {
        let (m, n) = (self.m(), self.n());
        let mut out = vec![T::zero(); n * m * m];
        for s in 0..n {
            for i in 0..m {
                for j in i..m {
                    let mut v = self.h(s, i, j);
                    for k in 0..m {
                        v -= self.source.gamma(k, i, j) * self.jacobian[(s, k)];
                    }
                    for a in 0..n {
                        for b in 0..n {
                            v += self.target.gamma(s, a, b)
                                * self.jacobian[(a, i)]
                                * self.jacobian[(b, j)];
                        }
                    }
                    out[(s * m + i) * m + j] = v;
                    out[(s * m + j) * m + i] = v;
                }
            }
        }
        out
    }

    /// `τ(φ) = Tr_g ∇dφ`
    pub fn tension(&self) -> Vec<T> {
        let (m, n) = (self.m(), self.n());
        let b = self.second_fundamental_form();
        (0..n)
            .map(|s| {
                let mut t = T::zero();
                for i in 0..m {
                    for j in 0..m {
                        t += self.source.g_inv[(i, j)] * b[(s * m + i) * m + j];
                    }
                }
                t
            })
            .collect()
    }

    /// `f τ(φ) + dφ(grad f)`
    pub fn f_tension_with(&self, f: &Jet2<T>) -> Vec<T> {
        let tau = self.tension();
        let push = self.push_gradient(f);
        tau.iter()
            .zip(push)
            .map(|(t, d)| f.value * *t + d)
            .collect()
    }

    /// Coordinate gradient `∂ₖ(|dφ|²/2)` by the first-order chain rule.
    pub fn energy_density_gradient(&self) -> Vec<T> {
        let (m, n) = (self.m(), self.n());
        let gi = &self.source.g_inv;
        let jac = &self.jacobian;
        let pull = self.pullback_metric();
        // C = g⁻¹ A g⁻¹, so that ∂ₖgⁱʲ Aᵢⱼ = −∂ₖgₐᵦ Cᵃᵇ.
        let c = gi.matmul(&pull).matmul(gi);
        let gram = self.gradient_gram();
        let hj = self.target.g.matmul(jac);
        (0..m)
            .map(|k| {
                let mut s = T::zero();
                for a in 0..m {
                    for b in 0..m {
                        s -= T::half() * self.source.dg(k, a, b) * c[(a, b)];
                    }
                }
                for g in 0..n {
                    let jg = jac[(g, k)];
                    if jg == T::zero() {
                        continue;
                    }
                    for a in 0..n {
                        for b in 0..n {
                            s += T::half() * self.target.dg(g, a, b) * jg * gram[(a, b)];
                        }
                    }
                }
                for a in 0..n {
                    for i in 0..m {
                        for j in 0..m {
                            s += gi[(i, j)] * self.h(a, k, i) * hj[(a, j)];
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// `|dφ|²` as a jet whose value and gradient are exact; computed by
    /// Gaussian elimination of `g X = φ*h` in jet arithmetic. The Hessian
    /// part is not meaningful.
    pub fn energy_norm_sq_jet(&self) -> Jet2<T> {
        let (m, n) = (self.m(), self.n());
        let zero_h = vec![T::zero(); m * m];
        let g = &self.source;
        let g_jet = |i: usize, j: usize| {
            Jet2::from_parts(
                g.g[(i, j)],
                (0..m).map(|k| g.dg(k, i, j)).collect(),
                &zero_h,
            )
        };
        let d_jet = |a: usize, i: usize| {
            Jet2::from_parts(
                self.jacobian[(a, i)],
                (0..m).map(|k| self.h(a, i, k)).collect(),
                &zero_h,
            )
        };
        let t = &self.target;
        let h_jet = |a: usize, b: usize| {
            let grad = (0..m)
                .map(|k| {
                    (0..n)
                        .map(|c| t.dg(c, a, b) * self.jacobian[(c, k)])
                        .fold(T::zero(), |x, y| x + y)
                })
                .collect();
            Jet2::from_parts(t.g[(a, b)], grad, &zero_h)
        };
        let dj: Vec<Jet2<T>> = (0..n * m).map(|ai| d_jet(ai / m, ai % m)).collect();
        let hj: Vec<Jet2<T>> = (0..n * n).map(|ab| h_jet(ab / n, ab % n)).collect();
        let mut a: Vec<Jet2<T>> = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let mut s = Jet2::constant(T::zero(), m);
                for al in 0..n {
                    for be in 0..n {
                        s = &s + &(&(&hj[al * n + be] * &dj[al * m + i]) * &dj[be * m + j]);
                    }
                }
                a.push(s);
            }
        }
        let mut lhs: Vec<Jet2<T>> = (0..m * m).map(|ij| g_jet(ij / m, ij % m)).collect();
        // Forward elimination on [g | A], then tr(g⁻¹A) by back substitution.
        for col in 0..m {
            for row in col + 1..m {
                let factor = &lhs[row * m + col] / &lhs[col * m + col];
                for k in col..m {
                    let v = &lhs[row * m + k] - &(&factor * &lhs[col * m + k]);
                    lhs[row * m + k] = v;
                }
                for k in 0..m {
                    let v = &a[row * m + k] - &(&factor * &a[col * m + k]);
                    a[row * m + k] = v;
                }
            }
        }
        let mut x: Vec<Jet2<T>> = vec![Jet2::constant(T::zero(), m); m * m];
        for row in (0..m).rev() {
            for k in 0..m {
                let mut v = a[row * m + k].clone();
                for c in row + 1..m {
                    v = &v - &(&lhs[row * m + c] * &x[c * m + k]);
                }
                x[row * m + k] = &v / &lhs[row * m + row];
            }
        }
        (0..m).fold(Jet2::constant(T::zero(), m), |s, i| &s + &x[i * m + i])
    }
}

/// Derivatives of an energy integrand `F` of `|dφ|²/2`.
pub trait EnergyProfile<T> {
    fn d1(&self, t: T) -> T;
    fn d2(&self, t: T) -> T;
}

/// `F(t) = t`: the ordinary Dirichlet energy.
#[derive(Clone, Copy, Debug)]
pub struct IdentityEnergy;

/// `F(t) = (2t)^{p/2}/p`: the p-energy.
#[derive(Clone, Copy, Debug)]
pub struct PowerEnergy(pub f64);

/// `F(t) = eᵗ`: the exponential energy.
#[derive(Clone, Copy, Debug)]
pub struct ExponentialEnergy;

impl<T: Scalar> EnergyProfile<T> for IdentityEnergy {
    fn d1(&self, _: T) -> T {
        T::one()
    }
    fn d2(&self, _: T) -> T {
        T::zero()
    }
}

impl<T: Scalar> EnergyProfile<T> for PowerEnergy {
    fn d1(&self, t: T) -> T {
        (T::two() * t).powf(T::lit(self.0 / 2.0 - 1.0))
    }
    fn d2(&self, t: T) -> T {
        T::lit(self.0 - 2.0) * (T::two() * t).powf(T::lit(self.0 / 2.0 - 2.0))
    }
}

impl<T: Scalar> EnergyProfile<T> for ExponentialEnergy {
    fn d1(&self, t: T) -> T {
        t.exp()
    }
    fn d2(&self, t: T) -> T {
        t.exp()
    }
}

impl<T, A: Fn(T) -> T, B: Fn(T) -> T> EnergyProfile<T> for (A, B) {
    fn d1(&self, t: T) -> T {
        (self.0)(t)
    }
    fn d2(&self, t: T) -> T {
        (self.1)(t)
    }
}

pub fn pullback_metric<T: Scalar>(map: &MapSpec, p: &[T]) -> Result<Matrix<T>> {
    Ok(map_jet(map, p)?.pullback_metric())
}

pub fn energy_density<T: Scalar>(map: &MapSpec, p: &[T]) -> Result<T> {
    Ok(map_jet(map, p)?.energy_density())
}

pub fn tension<T: Scalar>(map: &MapSpec, p: &[T]) -> Result<Vec<T>> {
    Ok(map_jet(map, p)?.tension())
}

/// `τ_f(φ) = fτ(φ) + dφ(grad f)` with the map's own weight.
pub fn f_tension<T: Scalar>(map: &MapSpec, p: &[T]) -> Result<Vec<T>> {
    let f = map.weight_jet(p)?;
    Ok(map_jet(map, p)?.f_tension_with(&f))
}

/// `F'(e)τ(φ) + dφ(grad F'(e))` with `e = |dφ|²/2`.
#[allow(non_snake_case)]
pub fn F_tension<T: Scalar, F: EnergyProfile<T>>(
    map: &MapSpec,
    p: &[T],
    profile: &F,
) -> Result<Vec<T>> {
    let jet = map_jet(map, p)?;
    let e = jet.energy_density();
    let (d1, d2) = (profile.d1(e), profile.d2(e));
    if !d1.is_finite() || !d2.is_finite() {
        return Err(Error::CriticalPoint);
    }
    let grad_e = jet.energy_density_gradient();
    let grad_w: Vec<T> = grad_e.iter().map(|&g| d2 * g).collect();
    let push = jet.push(&jet.source.raise(&grad_w));
    Ok(jet
        .tension()
        .iter()
        .zip(push)
        .map(|(t, d)| d1 * *t + d)
        .collect())
}

/// `|dφ|^{p−2}τ(φ) + dφ(grad |dφ|^{p−2})`.
pub fn p_tension<T: Scalar>(map: &MapSpec, p: &[T], pexp: f64) -> Result<Vec<T>> {
    let jet = map_jet(map, p)?;
    if pexp == 2.0 {
        return Ok(jet.tension());
    }
    let s = jet.energy_norm_sq_jet();
    let half = (pexp - 2.0) / 2.0;
    let smooth_at_zero = half >= 1.0 && half.fract() == 0.0;
    if !(s.value > T::zero()) && !smooth_at_zero {
        return Err(Error::CriticalPoint);
    }
    let w = if smooth_at_zero {
        s.powi(half as i32)
    } else {
        s.powf(T::lit(half))
    };
    Ok(jet.f_tension_with(&w))
}

/// `|dφ|²/2` as an expression in source coordinates.
pub fn energy_density_expr(map: &MapSpec) -> Result<Expr> {
    let (m, n) = (map.m(), map.n());
    let partial = |a: usize, i: usize| {
        map.partial_expr(a, i).cloned().ok_or_else(|| {
            crate::exprlang::EvalError::NotDifferentiable {
                expr: map.component_exprs()[a].to_string(),
            }
        })
    };
    let g_inv = symbolic_inverse(&symmetric_metric(map.source()));
    let bindings: HashMap<String, Expr> = map
        .target()
        .coords()
        .iter()
        .cloned()
        .zip(map.component_exprs().iter().cloned())
        .collect();
    let h: Vec<Vec<Expr>> = symmetric_metric(map.target())
        .iter()
        .map(|row| row.iter().map(|e| e.substitute(&bindings)).collect())
        .collect();
    let mut total = Expr::Num(0.0);
    for i in 0..m {
        for j in 0..m {
            if is_zero(&g_inv[i][j]) {
                continue;
            }
            let mut inner = Expr::Num(0.0);
            for a in 0..n {
                for b in 0..n {
                    if is_zero(&h[a][b]) {
                        continue;
                    }
                    inner = add(
                        inner,
                        mul(h[a][b].clone(), mul(partial(a, i)?, partial(b, j)?)),
                    );
                }
            }
            total = add(total, mul(g_inv[i][j].clone(), inner));
        }
    }
    Ok(mul(Expr::Num(0.5), total))
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 0.0)
}

fn symmetric_metric(chart: &RiemannianChart) -> Vec<Vec<Expr>> {
    let g = chart.metric_exprs();
    let m = g.len();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let (i, j) = (i.min(j), i.max(j));
                    if g[i][j] == g[j][i] {
                        g[i][j].clone()
                    } else {
                        mul(Expr::Num(0.5), add(g[i][j].clone(), g[j][i].clone()))
                    }
                })
                .collect()
        })
        .collect()
}

fn minor(a: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    a.iter()
        .enumerate()
        .filter(|(r, _)| *r != row)
        .map(|(_, v)| {
            v.iter()
                .enumerate()
                .filter(|(c, _)| *c != col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

fn determinant(a: &[Vec<Expr>]) -> Expr {
    match a.len() {
        0 => Expr::Num(1.0),
        1 => a[0][0].clone(),
        len => {
            let mut det = Expr::Num(0.0);
            for c in 0..len {
                if is_zero(&a[0][c]) {
                    continue;
                }
                let term = mul(a[0][c].clone(), determinant(&minor(a, 0, c)));
                det = if c % 2 == 0 {
                    add(det, term)
                } else {
                    sub(det, term)
                };
            }
            det
        }
    }
}

/// Inverse by cofactors; diagonal matrices invert entrywise.
fn symbolic_inverse(a: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
    let m = a.len();
    let diagonal = (0..m).all(|i| (0..m).all(|j| i == j || is_zero(&a[i][j])));
    if diagonal {
        return (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        if i == j {
                            div(Expr::Num(1.0), a[i][i].clone())
                        } else {
                            Expr::Num(0.0)
                        }
                    })
                    .collect()
            })
            .collect();
    }
    let det = determinant(a);
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let cof = determinant(&minor(a, j, i));
                    let cof = if (i + j) % 2 == 0 {
                        cof
                    } else {
                        crate::exprlang::neg(cof)
                    };
                    if is_zero(&cof) {
                        Expr::Num(0.0)
                    } else {
                        div(cof, det.clone())
                    }
                })
                .collect()
        })
        .collect()
}

/// `|dφ|^{p−2}` as an expression.
pub fn p_weight_expr(map: &MapSpec, pexp: f64) -> Result<Expr> {
    let e = energy_density_expr(map)?;
    Ok(Expr::binary(
        BinOp::Pow,
        mul(Expr::Num(2.0), e),
        Expr::Num((pexp - 2.0) / 2.0),
    ))
}

/// Both sides of the composition law for `τ_f(ψ∘φ)`.
#[derive(Clone, Debug)]
pub struct CompositionTension<T> {
    /// `τ_f` of the symbolically composed map.
    pub direct: Vec<T>,
    /// `dψ(τ_f(φ)) + f Tr_g ∇dψ(dφ, dφ)`
    pub decomposed: Vec<T>,
    pub push_term: Vec<T>,
    pub hessian_term: Vec<T>,
}

impl<T: Scalar> CompositionTension<T> {
    pub fn max_abs_difference(&self) -> T {
        self.direct
            .iter()
            .zip(&self.decomposed)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }
}

pub fn composition_f_tension<T: Scalar>(
    phi: &MapSpec,
    psi: &MapSpec,
    p: &[T],
) -> Result<CompositionTension<T>> {
    let composed = phi.compose(psi)?;
    let f = phi.weight_jet(p)?;
    let direct = map_jet(&composed, p)?.f_tension_with(&f);

    let outer = map_jet(phi, p)?;
    let tau_f = outer.f_tension_with(&f);
    let inner = map_jet(psi, &outer.image)?;
    let push_term = inner.push(&tau_f);
    let b = inner.second_fundamental_form();
    let (m, k, q) = (phi.m(), phi.n(), psi.n());
    let jac = &outer.jacobian;
    let g_inv = &outer.source.g_inv;
    let hessian_term: Vec<T> = (0..q)
        .map(|s| {
            let mut acc = T::zero();
            for i in 0..m {
                for j in 0..m {
                    let gij = g_inv[(i, j)];
                    if gij == T::zero() {
                        continue;
                    }
                    for a in 0..k {
                        for c in 0..k {
                            acc += gij * b[(s * k + a) * k + c] * jac[(a, i)] * jac[(c, j)];
                        }
                    }
                }
            }
            f.value * acc
        })
        .collect();
    let decomposed = push_term
        .iter()
        .zip(&hessian_term)
        .map(|(a, b)| *a + *b)
        .collect();
    Ok(CompositionTension {
        direct,
        decomposed,
        push_term,
        hessian_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;

    fn r(n: usize) -> RiemannianChart {
        let names = ["x", "y", "z", "w"];
        RiemannianChart::euclidean(&format!("R{n}"), &names[..n])
    }

    fn r2_target() -> RiemannianChart {
        RiemannianChart::euclidean("R2", &["u", "v"])
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn jet_of_psi() {
        let psi =
            MapSpec::parse("psi", r(3), r2_target(), &["3*x", "x*y"], Some("exp(z)")).unwrap();
        let j = map_jet(&psi, &[1.0, 2.0, 0.0]).unwrap();
        assert_eq!(j.jacobian.data, vec![3.0, 0.0, 0.0, 2.0, 1.0, 0.0]);
        for a in 0..2 {
            for i in 0..3 {
                for k in 0..3 {
                    let expect = if a == 1 && ((i, k) == (0, 1) || (i, k) == (1, 0)) {
                        1.0
                    } else {
                        0.0
                    };
                    assert_eq!(j.h(a, i, k), expect);
                }
            }
        }
        assert_eq!(tension(&psi, &[1.0, 2.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(f_tension(&psi, &[0.3, -0.7, 1.1]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_and_constant_maps() {
        let id = MapSpec::parse(
            "id",
            r(3),
            RiemannianChart::euclidean("S", &["a", "b", "c"]),
            &["x", "y", "z"],
            None,
        )
        .unwrap();
        let j = map_jet(&id, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(j.jacobian, Matrix::identity(3));
        assert!(j.hessians.iter().all(|&h| h == 0.0));
        assert_eq!(j.energy_density(), 1.5);
        assert_eq!(j.pullback_metric(), Matrix::identity(3));
        let c = MapSpec::parse("c", r(3), r2_target(), &["1", "2"], None).unwrap();
        let j = map_jet(&c, &[0.1, 0.2, 0.3]).unwrap();
        assert!(j.jacobian.data.iter().all(|&v| v == 0.0));
        assert_eq!(j.energy_density(), 0.0);
    }

    #[test]
    fn pullback_and_energy_examples() {
        let proj = MapSpec::parse("proj", r(3), r2_target(), &["x", "y"], None).unwrap();
        let pb = pullback_metric(&proj, &[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(pb.data, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let phi = MapSpec::parse("phi", r(3), r2_target(), &["x", "y+z"], None).unwrap();
        assert_eq!(energy_density(&phi, &[0.5, 0.5, 0.5]).unwrap(), 1.5);
    }

    #[test]
    fn f_tension_examples() {
        let proj = MapSpec::parse("proj", r(3), r2_target(), &["x", "y"], Some("exp(z)")).unwrap();
        let phi =
            MapSpec::parse("phi", r(3), r2_target(), &["x", "y+z"], Some("exp(y-z)")).unwrap();
        for p in [[0.1, 0.2, 0.3], [-1.0, 2.0, 0.5]] {
            assert_eq!(f_tension(&proj, &p).unwrap(), vec![0.0, 0.0]);
            assert!(close(&f_tension(&phi, &p).unwrap(), &[0.0, 0.0], 1e-15));
        }
        let nameless = proj.with_weight(None).unwrap();
        assert!(matches!(
            f_tension(&nameless, &[0.0, 0.0, 0.0]),
            Err(Error::WeightMissing(_))
        ));
        let neg = proj.with_weight(Some(parse("z").unwrap())).unwrap();
        assert!(matches!(
            f_tension(&neg, &[0.0, 0.0, -1.0]),
            Err(Error::WeightNotPositive(_))
        ));
    }

    fn curved() -> MapSpec {
        let s2 =
            RiemannianChart::conformally_flat("S2", &["u", "v"], "4/(1+u^2+v^2)^2", None).unwrap();
        MapSpec::parse(
            "curved",
            r(3),
            s2,
            &["x*y + z", "sin(x) - z^2"],
            Some("1 + x^2 + y^2"),
        )
        .unwrap()
    }

    #[test]
    fn constant_weight_scales_tension() {
        let m = curved().with_weight(Some(parse("3").unwrap())).unwrap();
        let p: [f64; 3] = [0.3, -0.4, 0.2];
        let (tf, t) = (f_tension(&m, &p).unwrap(), tension(&m, &p).unwrap());
        for (a, b) in tf.iter().zip(&t) {
            assert!((a - 3.0 * b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0));
        }
    }

    #[test]
    fn identity_profile_and_p2_give_tension() {
        let m = curved();
        let p: [f64; 3] = [0.3, -0.4, 0.2];
        let t = tension(&m, &p).unwrap();
        assert_eq!(F_tension(&m, &p, &IdentityEnergy).unwrap(), t);
        assert_eq!(p_tension(&m, &p, 2.0).unwrap(), t);
    }

    #[test]
    fn power_profiles_agree_three_ways() {
        let m = curved();
        for pexp in [3.0, 4.0, 2.5] {
            let weighted = m
                .with_weight(Some(p_weight_expr(&m, pexp).unwrap()))
                .unwrap();
            for p in [[0.3f64, -0.4, 0.2], [1.1, 0.5, -0.8]] {
                let a = F_tension(&m, &p, &PowerEnergy(pexp)).unwrap();
                let b = p_tension(&m, &p, pexp).unwrap();
                let c = f_tension(&weighted, &p).unwrap();
                let scale = 1.0 + a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
                assert!(close(&a, &b, 1e-12 * scale), "{a:?} {b:?}");
                assert!(close(&a, &c, 1e-12 * scale), "{a:?} {c:?}");
            }
        }
    }

    #[test]
    fn critical_points_are_rejected_only_where_singular() {
        let c = MapSpec::parse("c", r(3), r2_target(), &["1", "2"], Some("1")).unwrap();
        let p = [0.0, 0.0, 0.0];
        assert!(matches!(p_tension(&c, &p, 3.0), Err(Error::CriticalPoint)));
        assert!(matches!(
            F_tension(&c, &p, &PowerEnergy(3.0)),
            Err(Error::CriticalPoint)
        ));
        assert_eq!(p_tension(&c, &p, 4.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(f_tension(&c, &p).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mobius_inversion_is_3_harmonic() {
        let m = MapSpec::parse(
            "inv",
            r(3),
            RiemannianChart::euclidean("R3'", &["a", "b", "c"]),
            &["x/(x^2+y^2+z^2)", "y/(x^2+y^2+z^2)", "z/(x^2+y^2+z^2)"],
            None,
        )
        .unwrap();
        for p in [[0.5f64, 0.1, -0.2], [1.0, 2.0, 0.5], [-0.3, 0.2, 0.4]] {
            let t = p_tension(&m, &p, 3.0).unwrap();
            assert!(t.iter().all(|v| v.abs() < 1e-12), "{t:?}");
            let t2 = tension(&m, &p).unwrap();
            assert!(t2.iter().any(|v| v.abs() > 1e-3));
        }
    }

    #[test]
    fn composition_with_identity() {
        let phi = curved();
        let target = phi.target().clone();
        let id = MapSpec::parse("id", target.clone(), target, &["u", "v"], None).unwrap();
        let p: [f64; 3] = [0.3, -0.4, 0.2];
        let c = composition_f_tension(&phi, &id, &p).unwrap();
        let tf = f_tension(&phi, &p).unwrap();
        assert!(close(&c.direct, &tf, 1e-13));
        assert!(close(&c.decomposed, &tf, 1e-13));
        let wrong = MapSpec::parse("w", r(2), r2_target(), &["x", "y"], None).unwrap();
        assert!(matches!(
            composition_f_tension(&phi, &wrong, &p),
            Err(Error::ChartMismatch { .. })
        ));
    }

    #[test]
    fn symbolic_inverse_matches_numeric() {
        let c = RiemannianChart::parse(
            "c",
            &["x", "y"],
            &[&["2+x^2", "x*y"], &["x*y", "1+y^2"]],
            None,
        )
        .unwrap();
        let inv = symbolic_inverse(&symmetric_metric(&c));
        let p = [0.7, -0.3];
        let m = crate::geometry::metric_at(&c, &p).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = Program::compile(&inv[i][j], c.coords())
                    .unwrap()
                    .eval_real(&p)
                    .unwrap();
                assert!((v - m.g_inv[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn map_json_roundtrip() {
        let m = curved();
        let s = serde_json::to_string(&m).unwrap();
        let back: MapSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back.component_exprs(), m.component_exprs());
        assert_eq!(back.weight_expr(), m.weight_expr());
    }
}
