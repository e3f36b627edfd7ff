//! Discrete inhomogeneous Heisenberg spin system on a flat 1D or 2D grid:
//! weighted energy, Landau–Lifshitz right-hand side, projected gradient
//! descent to stationary (f-harmonic) fields, and RK4 time stepping.
//!
//! The residual uses the conservative stencil
//! `r_a = Σ_b f_ab (u_b − u_a)/h²` with `f_ab` the edge mean of `f`. It
//! agrees with `fΔu + ∇f·∇u` to second order and is exactly the negative
//! energy gradient divided by the cell volume.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exprlang::{Expr, Program};
use crate::{Error, Result, Scalar};

pub type Vec3<T> = [T; 3];

fn dot<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm<T: Scalar>(a: &Vec3<T>) -> T {
    dot(a, a).sqrt()
}

fn normalized<T: Scalar>(a: &Vec3<T>) -> Vec3<T> {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    /// 1 for a one-dimensional chain.
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    pub fn line(nx: usize, hx: f64) -> Self {
        Self {
            nx,
            ny: 1,
            hx,
            hy: hx,
        }
    }

    pub fn plane(nx: usize, ny: usize, hx: f64, hy: f64) -> Self {
        Self { nx, ny, hx, hy }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn cell_volume(&self) -> f64 {
        if self.dim() == 1 {
            self.hx
        } else {
            self.hx * self.hy
        }
    }

    /// Node coordinates, centered on the origin.
    pub fn coords(&self, node: usize) -> (f64, f64) {
        let (i, j) = (node % self.nx, node / self.nx);
        let x = (i as f64 - (self.nx as f64 - 1.0) / 2.0) * self.hx;
        let y = if self.dim() == 1 {
            0.0
        } else {
            (j as f64 - (self.ny as f64 - 1.0) / 2.0) * self.hy
        };
        (x, y)
    }

    pub fn is_edge_node(&self, node: usize) -> bool {
        let (i, j) = (node % self.nx, node / self.nx);
        i == 0 || i + 1 == self.nx || (self.dim() == 2 && (j == 0 || j + 1 == self.ny))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Nodes flagged `fixed` keep their values.
    Dirichlet,
    Periodic,
}

/// Unit spin field with node weights on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinField<T> {
    pub grid: Grid,
    pub boundary: Boundary,
    pub u: Vec<Vec3<T>>,
    pub f: Vec<T>,
    pub fixed: Vec<bool>,
}

/// One undirected edge with its `f_ab / h²`.
struct Edge<T> {
    a: usize,
    b: usize,
    weight: T,
}

impl<T: Scalar> SpinField<T> {
    /// Normalizes `u` and checks the weights.
    pub fn new(
        grid: Grid,
        boundary: Boundary,
        u: Vec<Vec3<T>>,
        f: Vec<T>,
        fixed: Vec<bool>,
    ) -> Result<Self> {
        let n = grid.len();
        if grid.nx < 2 || u.len() != n || f.len() != n || fixed.len() != n {
            return Err(Error::Invalid(format!(
                "spin field needs {n} nodes and at least two columns"
            )));
        }
        if boundary == Boundary::Periodic && fixed.iter().any(|&x| x) {
            return Err(Error::Invalid(
                "periodic fields cannot have fixed nodes".into(),
            ));
        }
        for (node, &v) in f.iter().enumerate() {
            if !(v > T::zero()) {
                return Err(Error::NonPositiveWeight {
                    node,
                    value: v.as_f64(),
                });
            }
        }
        let mut u = u;
        for (node, v) in u.iter_mut().enumerate() {
            let len = norm(v);
            if !(len > T::zero()) || !len.is_finite() {
                return Err(Error::Invalid(format!(
                    "spin at node {node} cannot be normalized"
                )));
            }
            *v = normalized(v);
        }
        Ok(Self {
            grid,
            boundary,
            u,
            f,
            fixed,
        })
    }

    /// Field from closures of the centered node coordinates; with
    /// Dirichlet boundaries the outer ring of nodes is fixed.
    pub fn from_fn(
        grid: Grid,
        boundary: Boundary,
        u: impl Fn(f64, f64) -> Vec3<T>,
        f: impl Fn(f64, f64) -> T,
    ) -> Result<Self> {
        let n = grid.len();
        let pts: Vec<(f64, f64)> = (0..n).map(|k| grid.coords(k)).collect();
        let fixed = (0..n)
            .map(|k| boundary == Boundary::Dirichlet && grid.is_edge_node(k))
            .collect();
        Self::new(
            grid,
            boundary,
            pts.iter().map(|&(x, y)| u(x, y)).collect(),
            pts.iter().map(|&(x, y)| f(x, y)).collect(),
            fixed,
        )
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    fn edges(&self) -> Vec<Edge<T>> {
        let g = &self.grid;
        let periodic = self.boundary == Boundary::Periodic;
        let (ihx2, ihy2) = (
            T::one() / T::lit(g.hx * g.hx),
            T::one() / T::lit(g.hy * g.hy),
        );
        let mut out = Vec::with_capacity(2 * g.len());
        let mut push = |a: usize, b: usize, ih2: T| {
            out.push(Edge {
                a,
                b,
                weight: T::half() * (self.f[a] + self.f[b]) * ih2,
            });
        };
        for j in 0..g.ny {
            for i in 0..g.nx {
                let a = j * g.nx + i;
                if i + 1 < g.nx {
                    push(a, a + 1, ihx2);
                } else if periodic && g.nx > 2 {
                    push(a, j * g.nx, ihx2);
                }
                if g.dim() == 2 {
                    if j + 1 < g.ny {
                        push(a, a + g.nx, ihy2);
                    } else if periodic && g.ny > 2 {
                        push(a, i, ihy2);
                    }
                }
            }
        }
        out
    }

    /// `½ Σ_edges f_ab |u_b − u_a|²/h² · cell volume`
    pub fn f_energy(&self) -> T {
        energy_of(&self.u, &self.edges(), T::lit(self.grid.cell_volume()))
    }

    /// `r_a = Σ_b f_ab (u_b − u_a)/h²` at every node (fixed nodes included).
    pub fn residual(&self) -> Vec<Vec3<T>> {
        residual_of(&self.u, &self.edges())
    }

    /// `r − (r·u)u` at free nodes, zero at fixed nodes, with the maximum
    /// norm over free nodes.
    pub fn tangential_residual(&self) -> (Vec<Vec3<T>>, T) {
        tangential_of(&self.u, &self.residual(), &self.fixed)
    }

    /// `u × r` at free nodes, zero at fixed nodes.
    pub fn llg_rhs(&self) -> Vec<Vec3<T>> {
        rhs_of(&self.u, &self.residual(), &self.fixed)
    }

    pub fn max_norm_deviation(&self) -> T {
        self.u
            .iter()
            .fold(T::zero(), |m, v| m.max((norm(v) - T::one()).abs()))
    }
}

fn energy_of<T: Scalar>(u: &[Vec3<T>], edges: &[Edge<T>], vol: T) -> T {
    let mut e = T::zero();
    for ed in edges {
        let (a, b) = (&u[ed.a], &u[ed.b]);
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        e += ed.weight * dot(&d, &d);
    }
    T::half() * e * vol
}

/// `E(v) − E(u)` summed edgewise as `w (d_v − d_u)·(d_v + d_u)`, which
/// keeps its relative accuracy when the change is tiny.
fn energy_change<T: Scalar>(u: &[Vec3<T>], v: &[Vec3<T>], edges: &[Edge<T>], vol: T) -> T {
    let mut s = T::zero();
    for ed in edges {
        for c in 0..3 {
            let du = u[ed.b][c] - u[ed.a][c];
            let dv = v[ed.b][c] - v[ed.a][c];
            s += ed.weight * (dv - du) * (dv + du);
        }
    }
    T::half() * s * vol
}

fn residual_of<T: Scalar>(u: &[Vec3<T>], edges: &[Edge<T>]) -> Vec<Vec3<T>> {
    let mut r = vec![[T::zero(); 3]; u.len()];
    for ed in edges {
        for c in 0..3 {
            let d = ed.weight * (u[ed.b][c] - u[ed.a][c]);
            r[ed.a][c] += d;
            r[ed.b][c] -= d;
        }
    }
    r
}

fn tangential_of<T: Scalar>(u: &[Vec3<T>], r: &[Vec3<T>], fixed: &[bool]) -> (Vec<Vec3<T>>, T) {
    let mut max = T::zero();
    let out = u
        .iter()
        .zip(r)
        .zip(fixed)
        .map(|((u, r), &fx)| {
            if fx {
                return [T::zero(); 3];
            }
            let s = dot(r, u);
            let t = [r[0] - s * u[0], r[1] - s * u[1], r[2] - s * u[2]];
            max = max.max(norm(&t));
            t
        })
        .collect();
    (out, max)
}

fn rhs_of<T: Scalar>(u: &[Vec3<T>], r: &[Vec3<T>], fixed: &[bool]) -> Vec<Vec3<T>> {
    u.iter()
        .zip(r)
        .zip(fixed)
        .map(|((u, r), &fx)| if fx { [T::zero(); 3] } else { cross(u, r) })
        .collect()
}

/// One row per iteration: `iter,energy,residual,step`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub residual: f64,
    pub step: f64,
}

impl SolveTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,energy,residual,step\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:e},{:e},{:e}", r.iter, r.energy, r.residual, r.step);
        }
        s
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn is_energy_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].energy <= w[0].energy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Initial step; `h_min²/(4 max f)` when absent.
    pub step0: Option<f64>,
    pub armijo: f64,
    pub shrink: f64,
    /// Step growth after an accepted step.
    pub grow: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            tol: 1e-6,
            step0: None,
            armijo: 1e-4,
            shrink: 0.5,
            grow: 1.5,
        }
    }
}

/// Projected gradient descent `u ← normalize(u + η r_T)` with Armijo
/// backtracking on the energy. Succeeds when `max‖r_T‖ ≤ tol`; returns the
/// last iterate and trace otherwise, so callers check the final residual.
pub fn minimize<T: Scalar>(
    field: &SpinField<T>,
    opts: &MinimizeOptions,
) -> Result<(SpinField<T>, SolveTrace)> {
    for (node, &v) in field.f.iter().enumerate() {
        if !(v > T::zero()) {
            return Err(Error::NonPositiveWeight {
                node,
                value: v.as_f64(),
            });
        }
    }
    let edges = field.edges();
    let vol = T::lit(field.grid.cell_volume());
    let fmax = field.f.iter().fold(T::zero(), |m, v| m.max(*v)).as_f64();
    let hmin = field.grid.hx.min(if field.grid.dim() == 2 {
        field.grid.hy
    } else {
        field.grid.hx
    });
    let mut eta = T::lit(opts.step0.unwrap_or(0.25 * hmin * hmin / fmax));
    let (c, shrink, grow) = (T::lit(opts.armijo), T::lit(opts.shrink), T::lit(opts.grow));
    let mut out = field.clone();
    let mut energy = energy_of(&out.u, &edges, vol);
    let (mut rt, mut rmax) = tangential_of(&out.u, &residual_of(&out.u, &edges), &out.fixed);
    let mut trace = SolveTrace::default();
    trace.rows.push(TraceRow {
        iter: 0,
        energy: energy.as_f64(),
        residual: rmax.as_f64(),
        step: 0.0,
    });
    let mut trial = out.u.clone();
    for iter in 1..=opts.max_iter {
        if rmax <= T::lit(opts.tol) {
            break;
        }
        let slope = vol * rt.iter().fold(T::zero(), |s, v| s + dot(v, v));
        loop {
            for (k, (u, t)) in out.u.iter().zip(&rt).enumerate() {
                trial[k] = normalized(&[u[0] + eta * t[0], u[1] + eta * t[1], u[2] + eta * t[2]]);
            }
            let delta = energy_change(&out.u, &trial, &edges, vol);
            if delta <= -c * eta * slope {
                std::mem::swap(&mut out.u, &mut trial);
                energy += delta;
                break;
            }
            eta *= shrink;
            if eta < T::lit(1e-16) {
                return Err(Error::StepUnderflow(iter));
            }
        }
        (rt, rmax) = tangential_of(&out.u, &residual_of(&out.u, &edges), &out.fixed);
        trace.rows.push(TraceRow {
            iter,
            energy: energy.as_f64(),
            residual: rmax.as_f64(),
            step: eta.as_f64(),
        });
        eta *= grow;
    }
    Ok((out, trace))
}

/// Pre-renormalization norm drift that counts as blow-up.
pub const BLOW_UP_DRIFT: f64 = 0.5;

/// Classical RK4 on `∂u/∂t = u × r(u)` with renormalization after each
/// step. Fails with `BlowUp(step)` on a non-finite value or when a step
/// moves a spin's length by more than [`BLOW_UP_DRIFT`] before
/// renormalization.
pub fn evolve<T: Scalar>(
    field: &SpinField<T>,
    dt: f64,
    steps: usize,
) -> Result<(SpinField<T>, SolveTrace)> {
    let edges = field.edges();
    let vol = T::lit(field.grid.cell_volume());
    let h = T::lit(dt);
    let fixed = &field.fixed;
    let rhs = |u: &[Vec3<T>]| rhs_of(u, &residual_of(u, &edges), fixed);
    let axpy = |u: &[Vec3<T>], k: &[Vec3<T>], s: T| -> Vec<Vec3<T>> {
        u.iter()
            .zip(k)
            .map(|(u, k)| [u[0] + s * k[0], u[1] + s * k[1], u[2] + s * k[2]])
            .collect()
    };
    let mut out = field.clone();
    let mut trace = SolveTrace::default();
    let (_, r0) = tangential_of(&out.u, &residual_of(&out.u, &edges), fixed);
    trace.rows.push(TraceRow {
        iter: 0,
        energy: energy_of(&out.u, &edges, vol).as_f64(),
        residual: r0.as_f64(),
        step: 0.0,
    });
    let sixth = T::one() / T::lit(6.0);
    for step in 1..=steps {
        let k1 = rhs(&out.u);
        let k2 = rhs(&axpy(&out.u, &k1, T::half() * h));
        let k3 = rhs(&axpy(&out.u, &k2, T::half() * h));
        let k4 = rhs(&axpy(&out.u, &k3, h));
        for (k, u) in out.u.iter_mut().enumerate() {
            let mut v = *u;
            for c in 0..3 {
                v[c] += h * sixth * (k1[k][c] + T::two() * (k2[k][c] + k3[k][c]) + k4[k][c]);
            }
            let len = norm(&v);
            if !len.is_finite() || (len - T::one()).abs() > T::lit(BLOW_UP_DRIFT) {
                return Err(Error::BlowUp(step));
            }
            *u = normalized(&v);
        }
        let (_, r) = tangential_of(&out.u, &residual_of(&out.u, &edges), fixed);
        trace.rows.push(TraceRow {
            iter: step,
            energy: energy_of(&out.u, &edges, vol).as_f64(),
            residual: r.as_f64(),
            step: dt,
        });
    }
    Ok((out, trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainShape {
    Square,
    Disk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub nx: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    pub hx: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConfig {
    #[serde(rename = "type")]
    pub kind: Boundary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitConfig {
    /// `"random"` or `"constant"`.
    Named(String),
    /// Three component expressions in `x`, `y`.
    Exprs([Expr; 3]),
}

/// Spin problem description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinConfig {
    pub grid: GridConfig,
    pub domain: DomainShape,
    pub f: Expr,
    pub boundary: BoundaryConfig,
    pub init: InitConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub minimize: MinimizeOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

const NORTH: [f64; 3] = [0.0, 0.0, 1.0];

impl SpinConfig {
    /// A missing `ny` means a line, except on a disk, which is square.
    pub fn grid(&self) -> Grid {
        let ny = match self.domain {
            DomainShape::Disk => self.grid.ny.or(Some(self.grid.nx)),
            DomainShape::Square => self.grid.ny,
        };
        match ny {
            Some(ny) if ny > 1 => Grid::plane(
                self.grid.nx,
                ny,
                self.grid.hx,
                self.grid.hy.unwrap_or(self.grid.hx),
            ),
            _ => Grid::line(self.grid.nx, self.grid.hx),
        }
    }

    /// Builds the initial field. Disk domains fix every node at or beyond
    /// the inscribed circle; square Dirichlet domains fix the outer ring.
    /// A boundary `value` overrides the initial data on fixed nodes.
    pub fn build(&self) -> Result<SpinField<f64>> {
        let grid = self.grid();
        let kind = self.boundary.kind;
        if kind == Boundary::Periodic && self.domain == DomainShape::Disk {
            return Err(Error::Invalid(
                "a disk domain needs a dirichlet boundary".into(),
            ));
        }
        let n = grid.len();
        let pts: Vec<(f64, f64)> = (0..n).map(|k| grid.coords(k)).collect();
        let fixed: Vec<bool> = match (kind, self.domain) {
            (Boundary::Periodic, _) => vec![false; n],
            (Boundary::Dirichlet, DomainShape::Square) => {
                (0..n).map(|k| grid.is_edge_node(k)).collect()
            }
            (Boundary::Dirichlet, DomainShape::Disk) => {
                let rx = grid.hx * (grid.nx as f64 - 1.0) / 2.0;
                let ry = if grid.dim() == 2 {
                    grid.hy * (grid.ny as f64 - 1.0) / 2.0
                } else {
                    rx
                };
                let radius = rx.min(ry);
                pts.iter()
                    .map(|&(x, y)| (x * x + y * y).sqrt() >= radius * (1.0 - 1e-12))
                    .collect()
            }
        };
        let f_prog = Program::compile(&self.f, &["x", "y"])?;
        let f = pts
            .iter()
            .map(|&(x, y)| f_prog.eval_real(&[x, y]))
            .collect::<Result<Vec<f64>, _>>()?;
        let boundary_value = self.boundary.value;
        let mut u: Vec<Vec3<f64>> = match &self.init {
            InitConfig::Named(name) if name == "constant" => {
                vec![boundary_value.unwrap_or(NORTH); n]
            }
            InitConfig::Named(name) if name == "random" => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..n)
                    .map(|_| {
                        let z: f64 = rng.gen_range(-1.0..=1.0);
                        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                        let s = (1.0 - z * z).sqrt();
                        [s * phi.cos(), s * phi.sin(), z]
                    })
                    .collect()
            }
            InitConfig::Named(other) => {
                return Err(Error::Invalid(format!("unknown init `{other}`")))
            }
            InitConfig::Exprs(es) => {
                let progs = es
                    .iter()
                    .map(|e| Program::compile(e, &["x", "y"]))
                    .collect::<Result<Vec<_>, _>>()?;
                pts.iter()
                    .map(|&(x, y)| -> Result<Vec3<f64>> {
                        Ok([
                            progs[0].eval_real(&[x, y])?,
                            progs[1].eval_real(&[x, y])?,
                            progs[2].eval_real(&[x, y])?,
                        ])
                    })
                    .collect::<Result<_>>()?
            }
        };
        if let Some(v) = boundary_value {
            for (k, fx) in fixed.iter().enumerate() {
                if *fx {
                    u[k] = v;
                }
            }
        }
        SpinField::new(grid, kind, u, f, fixed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(u: Vec<Vec3<f64>>, f: Vec<f64>) -> SpinField<f64> {
        let n = u.len();
        let mut fixed = vec![false; n];
        fixed[0] = true;
        fixed[n - 1] = true;
        SpinField::new(Grid::line(n, 1.0), Boundary::Dirichlet, u, f, fixed).unwrap()
    }

    #[test]
    fn three_node_energy() {
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        let s = chain(vec![e1, e2, e1], vec![1.0; 3]);
        assert_eq!(s.f_energy(), 2.0);
        let doubled = chain(vec![e1, e2, e1], vec![2.0; 3]);
        assert_eq!(doubled.f_energy(), 4.0);
    }

    #[test]
    fn constant_field_is_stationary() {
        let s = SpinField::from_fn(
            Grid::plane(5, 4, 0.5, 0.25),
            Boundary::Dirichlet,
            |_, _| [0.0, 0.6, 0.8],
            |x, _| 1.0 + x * x,
        )
        .unwrap();
        assert_eq!(s.f_energy(), 0.0);
        assert!(s.llg_rhs().iter().all(|v| *v == [0.0; 3]));
        assert_eq!(s.tangential_residual().1, 0.0);
        let (out, trace) = minimize(&s, &MinimizeOptions::default()).unwrap();
        assert_eq!(out, s);
        assert_eq!(trace.rows.len(), 1);
        let (out, _) = evolve(&s, 0.01, 5).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn rejects_bad_weights() {
        let r = SpinField::from_fn(
            Grid::line(4, 1.0),
            Boundary::Periodic,
            |_, _| [1.0, 0.0, 0.0],
            |x, _| x,
        );
        assert!(matches!(r, Err(Error::NonPositiveWeight { .. })));
    }

    #[test]
    fn config_builds_disk() {
        let cfg: SpinConfig = serde_json::from_str(
            r#"{"grid":{"nx":9,"ny":9,"hx":0.25},"domain":"disk","f":"2/(1+x^2+y^2)",
                "boundary":{"type":"dirichlet","value":[0,0,1]},"init":"random","seed":3}"#,
        )
        .unwrap();
        let s = cfg.build().unwrap();
        assert_eq!(s.len(), 81);
        assert!(s.fixed[0] && !s.fixed[40]);
        assert_eq!(s.u[0], [0.0, 0.0, 1.0]);
        assert_eq!(s.f[40], 2.0);
        assert!(s.max_norm_deviation() < 1e-15);
        assert_eq!(cfg.build().unwrap(), s);
    }

    #[test]
    fn trace_csv_layout() {
        let t = SolveTrace {
            rows: vec![TraceRow {
                iter: 0,
                energy: 1.5,
                residual: 0.25,
                step: 0.0,
            }],
        };
        assert_eq!(
            t.to_csv(),
            "iter,energy,residual,step\n0,1.5e0,2.5e-1,0e0\n"
        );
    }
}
