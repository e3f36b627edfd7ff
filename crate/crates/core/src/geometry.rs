//! Riemannian charts and metric-level operators: inverse metric,
//! Christoffel symbols, gradients, the Laplace–Beltrami operator and the
//! weighted (f-)Laplacian.

use serde::{Deserialize, Serialize};

use crate::exprlang::{BinOp, Expr, Jet2, Program};
use crate::linalg::Matrix;
use crate::{Error, Result, Scalar, Side};

/// Serialized form of a chart.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartDef {
    pub name: String,
    pub coords: Vec<String>,
    pub metric: Vec<Vec<Expr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Expr>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Sampling box, one `[lo, hi]` per coordinate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
}

/// A single coordinate patch with a metric given by expressions.
///
/// The domain predicate, when present, is positive exactly inside the
/// chart. Metric entries `gᵢⱼ` and `gⱼᵢ` are averaged when their
/// expressions differ, so the evaluated metric is symmetric bit for bit.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ChartDef", into = "ChartDef")]
pub struct RiemannianChart {
    def: ChartDef,
    entries: Vec<Program>,
    domain: Option<Program>,
}

impl TryFrom<ChartDef> for RiemannianChart {
    type Error = Error;

    fn try_from(def: ChartDef) -> Result<Self> {
        let m = def.coords.len();
        if m == 0 {
            return Err(Error::Invalid(format!(
                "chart `{}` has no coordinates",
                def.name
            )));
        }
        if def.metric.len() != m || def.metric.iter().any(|row| row.len() != m) {
            return Err(Error::Invalid(format!(
                "chart `{}`: metric must be {m}x{m}",
                def.name
            )));
        }
        if let Some(b) = &def.bounds {
            if b.len() != m || b.iter().any(|[lo, hi]| !(lo < hi)) {
                return Err(Error::Invalid(format!(
                    "chart `{}`: bounds must be {m} increasing pairs",
                    def.name
                )));
            }
        }
        let mut entries = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in i..m {
                let (a, b) = (&def.metric[i][j], &def.metric[j][i]);
                let e = if a == b {
                    a.clone()
                } else {
                    Expr::binary(
                        BinOp::Mul,
                        Expr::Num(0.5),
                        Expr::binary(BinOp::Add, a.clone(), b.clone()),
                    )
                };
                entries.push(Program::compile(&e, &def.coords)?);
            }
        }
        let domain = def
            .domain
            .as_ref()
            .map(|d| Program::compile(d, &def.coords))
            .transpose()?;
        Ok(Self {
            def,
            entries,
            domain,
        })
    }
}

impl From<RiemannianChart> for ChartDef {
    fn from(c: RiemannianChart) -> Self {
        c.def
    }
}

impl RiemannianChart {
    pub fn new(def: ChartDef) -> Result<Self> {
        Self::try_from(def)
    }

    /// Chart from string expressions.
    pub fn parse(
        name: &str,
        coords: &[&str],
        metric: &[&[&str]],
        domain: Option<&str>,
    ) -> Result<Self> {
        let metric = metric
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| crate::exprlang::parse(s))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(ChartDef {
            name: name.to_string(),
            coords: coords.iter().map(|s| s.to_string()).collect(),
            metric,
            domain: domain.map(crate::exprlang::parse).transpose()?,
            description: String::new(),
            bounds: None,
        })
    }

    /// Flat metric on `coords`.
    pub fn euclidean(name: &str, coords: &[&str]) -> Self {
        Self::conformally_flat(name, coords, "1", None).expect("euclidean chart")
    }

    /// Metric `factor · δᵢⱼ`.
    pub fn conformally_flat(
        name: &str,
        coords: &[&str],
        factor: &str,
        domain: Option<&str>,
    ) -> Result<Self> {
        let m = coords.len();
        let factor = crate::exprlang::parse(factor)?;
        let metric = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        if i == j {
                            factor.clone()
                        } else {
                            Expr::Num(0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(ChartDef {
            name: name.to_string(),
            coords: coords.iter().map(|s| s.to_string()).collect(),
            metric,
            domain: domain.map(crate::exprlang::parse).transpose()?,
            description: String::new(),
            bounds: None,
        })
    }

    pub fn with_description(mut self, d: &str) -> Self {
        self.def.description = d.to_string();
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<[f64; 2]>) -> Self {
        assert_eq!(bounds.len(), self.dim());
        self.def.bounds = Some(bounds);
        self
    }

    pub fn name(&self) -> &str {
        &self.def.name
    }

    pub fn coords(&self) -> &[String] {
        &self.def.coords
    }

    pub fn dim(&self) -> usize {
        self.def.coords.len()
    }

    pub fn metric_exprs(&self) -> &[Vec<Expr>] {
        &self.def.metric
    }

    pub fn domain_expr(&self) -> Option<&Expr> {
        self.def.domain.as_ref()
    }

    pub fn description(&self) -> &str {
        &self.def.description
    }

    /// Sampling box; `[-2, 2]` per coordinate when unspecified.
    pub fn bounds(&self) -> Vec<[f64; 2]> {
        self.def
            .bounds
            .clone()
            .unwrap_or_else(|| vec![[-2.0, 2.0]; self.dim()])
    }

    pub fn def(&self) -> &ChartDef {
        &self.def
    }

    /// Value of the domain predicate (`+∞` when the chart has none).
    pub fn domain_value<T: Scalar>(&self, p: &[T]) -> Result<T> {
        match &self.domain {
            Some(d) => Ok(d.eval_real(p)?),
            None => Ok(T::infinity()),
        }
    }

    pub(crate) fn check_domain<T: Scalar>(&self, p: &[T], side: Side) -> Result<()> {
        let v = self.domain_value(p)?;
        if v > T::zero() {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                chart: self.def.name.clone(),
                side,
                value: v.as_f64(),
            })
        }
    }

    fn entry_index(&self, i: usize, j: usize) -> usize {
        let m = self.dim();
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * m - i * (i + 1) / 2 + j
    }

    /// Metric entries evaluated over arbitrary jets (for instance, the
    /// components of a map, which yields the pulled-back target metric as
    /// jets in source coordinates). Returned row-major `m×m`.
    pub fn metric_jets<T: Scalar>(&self, env: &[Jet2<T>]) -> Result<Vec<Jet2<T>>> {
        let m = self.dim();
        let upper: Vec<Jet2<T>> = self
            .entries
            .iter()
            .map(|p| p.eval_jet(env))
            .collect::<Result<_, _>>()?;
        Ok((0..m * m)
            .map(|ij| upper[self.entry_index(ij / m, ij % m)].clone())
            .collect())
    }

    /// `metric · factor`, keeping the domain and sampling box.
    pub fn conformal_scale(&self, factor: &Expr) -> Result<Self> {
        let metric = self
            .def
            .metric
            .iter()
            .map(|row| {
                row.iter()
                    .map(|g| match g {
                        Expr::Num(v) if *v == 0.0 => Expr::Num(0.0),
                        Expr::Num(v) if *v == 1.0 => factor.clone(),
                        _ => Expr::binary(BinOp::Mul, factor.clone(), g.clone()),
                    })
                    .collect()
            })
            .collect();
        Self::new(ChartDef {
            name: format!("{}~scaled", self.def.name),
            metric,
            description: format!("conformal rescaling of {} by {}", self.def.name, factor),
            ..self.def.clone()
        })
    }
}

/// Metric data at a point: `g`, `g⁻¹`, `∂ₖgᵢⱼ` and `Γᵏᵢⱼ`.
#[derive(Clone, Debug)]
pub struct MetricAtPoint<T> {
    pub point: Vec<T>,
    pub g: Matrix<T>,
    pub g_inv: Matrix<T>,
    /// `dg[(k * m + i) * m + j] = ∂ₖ gᵢⱼ`
    pub dg: Vec<T>,
    /// `christoffel[(k * m + i) * m + j] = Γᵏᵢⱼ`
    pub christoffel: Vec<T>,
}

impl<T: Scalar> MetricAtPoint<T> {
    pub fn dim(&self) -> usize {
        self.point.len()
    }

    #[inline]
    pub fn dg(&self, k: usize, i: usize, j: usize) -> T {
        let m = self.dim();
        self.dg[(k * m + i) * m + j]
    }

    #[inline]
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> T {
        let m = self.dim();
        self.christoffel[(k * m + i) * m + j]
    }

    /// `gⁱʲ ωⱼ`
    pub fn raise(&self, covector: &[T]) -> Vec<T> {
        self.g_inv.matvec(covector)
    }

    /// `gᵢⱼ vⁱ wʲ`
    pub fn inner(&self, v: &[T], w: &[T]) -> T {
        let m = self.dim();
        let mut s = T::zero();
        for i in 0..m {
            for j in 0..m {
                s += self.g[(i, j)] * v[i] * w[j];
            }
        }
        s
    }

    /// `gⁱʲ αᵢ βⱼ`
    pub fn inner_covectors(&self, a: &[T], b: &[T]) -> T {
        let m = self.dim();
        let mut s = T::zero();
        for i in 0..m {
            for j in 0..m {
                s += self.g_inv[(i, j)] * a[i] * b[j];
            }
        }
        s
    }

    pub fn norm(&self, v: &[T]) -> T {
        self.inner(v, v).max(T::zero()).sqrt()
    }

    /// Gradient of a scalar jet: `gⁱʲ ∂ⱼu`.
    pub fn grad(&self, u: &Jet2<T>) -> Vec<T> {
        self.raise(u.grad())
    }

    /// Covariant Hessian `∂ᵢ∂ⱼu − Γᵏᵢⱼ ∂ₖu`, row-major.
    pub fn covariant_hessian(&self, u: &Jet2<T>) -> Vec<T> {
        let m = self.dim();
        let mut out = vec![T::zero(); m * m];
        for i in 0..m {
            for j in 0..m {
                let mut s = u.hess(i, j);
                for k in 0..m {
                    s -= self.gamma(k, i, j) * u.d(k);
                }
                out[i * m + j] = s;
            }
        }
        out
    }

    /// Laplace–Beltrami of a scalar jet: `gⁱʲ(∂ᵢ∂ⱼu − Γᵏᵢⱼ∂ₖu)`.
    pub fn laplacian(&self, u: &Jet2<T>) -> T {
        let m = self.dim();
        let hess = self.covariant_hessian(u);
        let mut s = T::zero();
        for i in 0..m {
            for j in 0..m {
                s += self.g_inv[(i, j)] * hess[i * m + j];
            }
        }
        s
    }

    /// Weighted Laplacian `fΔu + g(grad f, grad u)`.
    pub fn f_laplacian(&self, f: &Jet2<T>, u: &Jet2<T>) -> Result<T> {
        if !(f.value > T::zero()) {
            return Err(Error::WeightNotPositive(f.value.as_f64()));
        }
        Ok(f.value * self.laplacian(u) + self.inner_covectors(f.grad(), u.grad()))
    }
}

/// Evaluates the metric of `chart` at `p` together with its first
/// derivatives (from jets) and the Christoffel symbols
/// `Γᵏᵢⱼ = ½ gᵏˡ(∂ᵢgⱼₗ + ∂ⱼgᵢₗ − ∂ₗgᵢⱼ)`.
pub fn metric_at<T: Scalar>(chart: &RiemannianChart, p: &[T]) -> Result<MetricAtPoint<T>> {
    metric_at_side(chart, p, Side::Source)
}

pub(crate) fn metric_at_side<T: Scalar>(
    chart: &RiemannianChart,
    p: &[T],
    side: Side,
) -> Result<MetricAtPoint<T>> {
    let m = chart.dim();
    assert_eq!(
        p.len(),
        m,
        "point dimension does not match chart `{}`",
        chart.name()
    );
    chart.check_domain(p, side)?;
    let jets = chart.metric_jets(&Jet2::seed(p))?;
    let g = Matrix::from_fn(m, m, |i, j| jets[i * m + j].value);
    let g_inv = g.spd_inverse().ok_or_else(|| Error::NotPositiveDefinite {
        chart: chart.name().to_string(),
        point: p.iter().map(|x| x.as_f64()).collect(),
    })?;
    let mut dg = vec![T::zero(); m * m * m];
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                dg[(k * m + i) * m + j] = jets[i * m + j].d(k);
            }
        }
    }
    let d = |k: usize, i: usize, j: usize| dg[(k * m + i) * m + j];
    let mut christoffel = vec![T::zero(); m * m * m];
    for k in 0..m {
        for i in 0..m {
            for j in i..m {
                let mut s = T::zero();
                for l in 0..m {
                    s += g_inv[(k, l)] * (d(i, j, l) + d(j, i, l) - d(l, i, j));
                }
                let v = T::half() * s;
                christoffel[(k * m + i) * m + j] = v;
                christoffel[(k * m + j) * m + i] = v;
            }
        }
    }
    Ok(MetricAtPoint {
        point: p.to_vec(),
        g,
        g_inv,
        dg,
        christoffel,
    })
}

/// Evaluates a scalar expression on the chart as a jet at `p`.
pub fn scalar_jet<T: Scalar>(chart: &RiemannianChart, u: &Expr, p: &[T]) -> Result<Jet2<T>> {
    Ok(Program::compile(u, chart.coords())?.eval_jet(&Jet2::seed(p))?)
}

/// Contravariant gradient `gⁱʲ∂ⱼu`.
pub fn grad_scalar<T: Scalar>(chart: &RiemannianChart, u: &Expr, p: &[T]) -> Result<Vec<T>> {
    let metric = metric_at(chart, p)?;
    Ok(metric.grad(&scalar_jet(chart, u, p)?))
}

pub fn laplace_beltrami<T: Scalar>(chart: &RiemannianChart, u: &Expr, p: &[T]) -> Result<T> {
    let metric = metric_at(chart, p)?;
    Ok(metric.laplacian(&scalar_jet(chart, u, p)?))
}

/// `fΔu + g(grad f, grad u)`; fails with `WeightNotPositive` when `f(p) ≤ 0`.
pub fn f_laplacian<T: Scalar>(chart: &RiemannianChart, f: &Expr, u: &Expr, p: &[T]) -> Result<T> {
    let metric = metric_at(chart, p)?;
    metric.f_laplacian(&scalar_jet(chart, f, p)?, &scalar_jet(chart, u, p)?)
}

/// Chart with metric `factor · g`; `factor` is used as given (callers pass
/// an already-exponentiated conformal factor).
pub fn conformal_scale(chart: &RiemannianChart, factor: &Expr) -> Result<RiemannianChart> {
    chart.conformal_scale(factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;

    fn half_space3() -> RiemannianChart {
        RiemannianChart::conformally_flat("H3", &["x", "y", "z"], "1/z^2", Some("z")).unwrap()
    }

    #[test]
    fn euclidean_is_flat() {
        let e = RiemannianChart::euclidean("R3", &["x", "y", "z"]);
        let m = metric_at(&e, &[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(m.g, Matrix::identity(3));
        assert!(m.christoffel.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn half_space_christoffels() {
        let m = metric_at::<f64>(&half_space3(), &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.g, Matrix::identity(3));
        // Γᶻₓₓ = 1/z, Γˣₓᶻ = −1/z
        assert!((m.gamma(2, 0, 0) - 1.0).abs() < 1e-15);
        assert!((m.gamma(0, 0, 2) + 1.0).abs() < 1e-15);
        assert!((m.gamma(2, 2, 2) + 1.0).abs() < 1e-15);
        assert_eq!(m.gamma(1, 0, 0), 0.0);
    }

    #[test]
    fn round_sphere_chart_at_origin() {
        let s3 =
            RiemannianChart::conformally_flat("S3", &["x", "y", "z"], "4/(1+x^2+y^2+z^2)^2", None)
                .unwrap();
        let m = metric_at(&s3, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.g, Matrix::identity(3).scale(4.0));
        assert!(m.dg.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn gradient_examples() {
        let e = RiemannianChart::euclidean("R3", &["x", "y", "z"]);
        assert_eq!(
            grad_scalar(&e, &parse("z").unwrap(), &[1.0, 2.0, 3.0]).unwrap(),
            vec![0.0, 0.0, 1.0]
        );
        assert_eq!(
            grad_scalar(&e, &parse("x^2+y^2").unwrap(), &[1.0, 2.0, 0.0]).unwrap(),
            vec![2.0, 4.0, 0.0]
        );
        let g = grad_scalar(&half_space3(), &parse("z").unwrap(), &[0.0, 0.0, 2.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 4.0]);
    }

    #[test]
    fn laplacian_examples() {
        let e3 = RiemannianChart::euclidean("R3", &["x", "y", "z"]);
        let r2 = parse("x^2+y^2+z^2").unwrap();
        assert_eq!(laplace_beltrami(&e3, &r2, &[0.1, 0.7, -2.0]).unwrap(), 6.0);
        let e2 = RiemannianChart::euclidean("R2", &["x", "y"]);
        assert_eq!(
            laplace_beltrami(&e2, &parse("x^2-y^2").unwrap(), &[1.3, 0.2]).unwrap(),
            0.0
        );
    }

    #[test]
    fn log_z_on_half_space_is_constant() {
        // Δ log z = z²(−1/z²) − gⁱʲΓᶻᵢⱼ(1/z) = −1 − z²(1/z + 1/z − 1/z)/z = −2
        let u = parse("log(z)").unwrap();
        for p in [[0.0, 0.0, 1.0], [0.4, -1.0, 0.3], [2.0, 1.0, 5.0]] {
            let v: f64 = laplace_beltrami(&half_space3(), &u, &p).unwrap();
            assert!((v + 2.0).abs() < 1e-13, "{v}");
        }
    }

    #[test]
    fn f_laplacian_examples() {
        let e = RiemannianChart::euclidean("R3", &["x", "y", "z"]);
        let f = parse("exp(z)").unwrap();
        let p = [0.2, -0.4, 0.9];
        assert_eq!(f_laplacian(&e, &f, &parse("x").unwrap(), &p).unwrap(), 0.0);
        assert_eq!(
            f_laplacian(&e, &f, &parse("z").unwrap(), &p).unwrap(),
            0.9f64.exp()
        );
        let one = parse("1").unwrap();
        let u = parse("sin(x)*y + z^3").unwrap();
        assert_eq!(
            f_laplacian(&e, &one, &u, &p).unwrap(),
            laplace_beltrami(&e, &u, &p).unwrap()
        );
        assert!(matches!(
            f_laplacian(&e, &parse("z").unwrap(), &u, &[0.0, 0.0, -1.0]),
            Err(Error::WeightNotPositive(_))
        ));
    }

    #[test]
    fn out_of_domain_and_indefinite() {
        assert!(matches!(
            metric_at(&half_space3(), &[0.0, 0.0, -1.0]),
            Err(Error::OutOfDomain { .. })
        ));
        let bad =
            RiemannianChart::parse("bad", &["x", "y"], &[&["1", "2"], &["2", "1"]], None).unwrap();
        assert!(matches!(
            metric_at(&bad, &[0.0, 0.0]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn asymmetric_entries_are_averaged() {
        let c = RiemannianChart::parse("c", &["x", "y"], &[&["2", "x"], &["0.5*x", "2"]], None)
            .unwrap();
        let m = metric_at::<f64>(&c, &[0.4, 0.0]).unwrap();
        assert_eq!(m.g[(0, 1)], m.g[(1, 0)]);
        assert!((m.g[(0, 1)] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn conformal_scale_reproduces_round_sphere() {
        let e = RiemannianChart::euclidean("R3", &["x", "y", "z"]);
        let scaled = conformal_scale(&e, &parse("(2/(1+x^2+y^2+z^2))^2").unwrap()).unwrap();
        let s3 =
            RiemannianChart::conformally_flat("S3", &["x", "y", "z"], "4/(1+x^2+y^2+z^2)^2", None)
                .unwrap();
        let p = [0.3, -0.2, 1.1];
        let (a, b) = (
            metric_at::<f64>(&scaled, &p).unwrap(),
            metric_at::<f64>(&s3, &p).unwrap(),
        );
        for (x, y) in a.g.data.iter().zip(&b.g.data) {
            assert!((x - y).abs() < 1e-15);
        }
        for (x, y) in a.christoffel.iter().zip(&b.christoffel) {
            assert!((x - y).abs() < 1e-14);
        }
        let same = conformal_scale(&e, &parse("1").unwrap()).unwrap();
        assert_eq!(same.metric_exprs(), e.metric_exprs());
    }

    #[test]
    fn chart_json_roundtrip() {
        let c = half_space3().with_bounds(vec![[-1.0, 1.0], [-1.0, 1.0], [0.1, 2.0]]);
        let s = serde_json::to_string(&c).unwrap();
        let back: RiemannianChart = serde_json::from_str(&s).unwrap();
        assert_eq!(back.metric_exprs(), c.metric_exprs());
        assert_eq!(back.bounds(), c.bounds());
    }
}
