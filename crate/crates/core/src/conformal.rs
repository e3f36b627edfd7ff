//! Horizontal weak conformality, dilation, vertical/horizontal splitting,
//! fiber mean curvature and conformal immersions.

use serde::Serialize;

use crate::exprlang::Jet2;
use crate::linalg::{right_singular_system, Matrix};
use crate::mapcalc::{map_jet, MapJet, MapSpec};
use crate::{Error, Result, Scalar};

/// Below `CRITICAL_SCALE · (1 + ‖g⁻¹‖)` the gradient Gram matrix counts as zero.
pub const CRITICAL_SCALE: f64 = 1e-10;
/// Singular values below this fraction of the largest span the kernel.
pub const RANK_THRESHOLD: f64 = 1e-9;

/// Pointwise conformality data for `T^αβ = g(grad φ^α, grad φ^β)` against
/// `λ² h^αβ`.
#[derive(Clone, Debug, Serialize)]
pub struct ConformalityReport<T> {
    pub point: Vec<T>,
    pub image: Vec<T>,
    pub t: Matrix<T>,
    pub h_inv: Matrix<T>,
    pub lambda_sq: T,
    pub hwc_residual: T,
    pub rank: usize,
    /// Singular values of `dφ` in a g-orthonormal frame, descending.
    pub singular_values: Vec<T>,
    /// g-orthonormal basis of `ker dφ`.
    pub vertical_basis: Vec<Vec<T>>,
    /// g-orthonormal basis of its complement.
    pub horizontal_basis: Vec<Vec<T>>,
    pub is_critical: bool,
    /// `T` is too small to fit `λ²` reliably, yet above the critical cut.
    pub is_indeterminate: bool,
    pub is_hwc: bool,
    pub is_submersive: bool,
}

impl<T: Scalar> ConformalityReport<T> {
    /// Second estimator `tr(T h)/n`; agrees with the fit at HWC points.
    pub fn trace_lambda_sq(&self, h: &Matrix<T>) -> T {
        self.t.matmul(h).trace() / T::lit(self.t.rows as f64)
    }
}

impl<T> ConformalityReport<T> {
    pub fn m(&self) -> usize {
        self.point.len()
    }

    pub fn n(&self) -> usize {
        self.image.len()
    }
}

fn sum_sq<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, x| s + *x * *x)
}

/// g-orthonormal frame `E = L⁻ᵀ` for `g = LLᵀ`.
fn orthonormal_frame<T: Scalar>(g: &Matrix<T>) -> Result<Matrix<T>> {
    let l = g
        .cholesky()
        .ok_or_else(|| Error::Invalid("metric lost positive definiteness".into()))?;
    Ok(l.lower_triangular_inverse().transpose())
}

pub(crate) fn report_from_jet<T: Scalar>(jet: &MapJet<T>, tol: T) -> Result<ConformalityReport<T>> {
    let (m, n) = (jet.m(), jet.n());
    let t = jet.gradient_gram();
    let w = jet.target.g_inv.clone();
    let t_norm = t.frobenius_norm();
    let scale = T::one() + jet.source.g_inv.frobenius_norm();
    let is_critical = t_norm < T::lit(CRITICAL_SCALE) * scale;
    let is_indeterminate = !is_critical && t_norm < tol * scale;

    let frame = orthonormal_frame(&jet.source.g)?;
    let (sigma, v) = right_singular_system(&jet.jacobian.matmul(&frame));
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        sigma[b]
            .partial_cmp(&sigma[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let sigma_max = order.first().map(|&j| sigma[j]).unwrap_or(T::zero());
    let cut = T::lit(RANK_THRESHOLD) * sigma_max;
    let (mut horizontal_basis, mut vertical_basis) = (Vec::new(), Vec::new());
    for &j in &order {
        let vec = frame.matvec(&v.column(j));
        if sigma_max > T::zero() && sigma[j] >= cut {
            horizontal_basis.push(vec);
        } else {
            vertical_basis.push(vec);
        }
    }
    let rank = horizontal_basis.len();
    let singular_values = order.iter().map(|&j| sigma[j]).collect();

    let (lambda_sq, hwc_residual) = if is_critical {
        (T::zero(), T::zero())
    } else {
        let lambda_sq = t.frobenius_dot(&w) / w.frobenius_dot(&w);
        (
            lambda_sq,
            t.sub(&w.scale(lambda_sq)).frobenius_norm() / t_norm,
        )
    };
    let is_hwc = is_critical || (hwc_residual <= tol && lambda_sq > T::zero());
    Ok(ConformalityReport {
        point: jet.point.clone(),
        image: jet.image.clone(),
        t,
        h_inv: w,
        lambda_sq,
        hwc_residual,
        rank,
        singular_values,
        vertical_basis,
        horizontal_basis,
        is_critical,
        is_indeterminate,
        is_hwc,
        is_submersive: rank == n,
    })
}

pub fn hwc_test<T: Scalar>(map: &MapSpec, p: &[T], tol: T) -> Result<ConformalityReport<T>> {
    report_from_jet(&map_jet(map, p)?, tol)
}

/// Inverse of a symmetric positive definite matrix of jets by
/// Gauss–Jordan elimination without pivoting.
fn jet_inverse<T: Scalar>(mut a: Vec<Jet2<T>>, m: usize, k: usize) -> Vec<Jet2<T>> {
    let mut inv: Vec<Jet2<T>> = (0..m * m)
        .map(|ij| {
            Jet2::constant(
                if ij / m == ij % m {
                    T::one()
                } else {
                    T::zero()
                },
                k,
            )
        })
        .collect();
    for col in 0..m {
        let pivot = a[col * m + col].recip();
        for c in 0..m {
            a[col * m + c] = &a[col * m + c] * &pivot;
            inv[col * m + c] = &inv[col * m + c] * &pivot;
        }
        for row in 0..m {
            if row == col {
                continue;
            }
            let factor = a[row * m + col].clone();
            for c in 0..m {
                a[row * m + c] = &a[row * m + c] - &(&factor * &a[col * m + c]);
                inv[row * m + c] = &inv[row * m + c] - &(&factor * &inv[col * m + c]);
            }
        }
    }
    inv
}

/// `λ²` as a jet, obtained by running the fit `⟨T, W⟩/⟨W, W⟩` entirely in
/// jet arithmetic, with `∂ᵢφ^α` taken from symbolic partials so that the
/// Hessian is exact.
pub fn dilation_jet<T: Scalar>(map: &MapSpec, p: &[T], tol: T) -> Result<Jet2<T>> {
    let jet = map_jet(map, p)?;
    let report = report_from_jet(&jet, tol)?;
    if !report.is_hwc {
        return Err(Error::NotHwc(report.hwc_residual.as_f64()));
    }
    dilation_jet_unchecked(map, &jet)
}

pub(crate) fn dilation_jet_unchecked<T: Scalar>(map: &MapSpec, jet: &MapJet<T>) -> Result<Jet2<T>> {
    let (m, n) = (map.m(), map.n());
    let partials =
        map.partial_programs()
            .ok_or_else(|| crate::exprlang::EvalError::NotDifferentiable {
                expr: map
                    .component_exprs()
                    .iter()
                    .map(|e| e.to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
            })?;
    let seeds = Jet2::seed(&jet.point);
    let d: Vec<Jet2<T>> = partials
        .iter()
        .map(|pr| pr.eval_jet(&seeds))
        .collect::<Result<_, _>>()?;
    let g_inv = jet_inverse(map.source().metric_jets(&seeds)?, m, m);
    let w = jet_inverse(map.target().metric_jets(&jet.components)?, n, m);
    let zero = Jet2::constant(T::zero(), m);
    let (mut tw, mut ww) = (zero.clone(), zero);
    for a in 0..n {
        for b in 0..n {
            let mut t = Jet2::constant(T::zero(), m);
            for i in 0..m {
                for j in 0..m {
                    t = &t + &(&g_inv[i * m + j] * &(&d[a * m + i] * &d[b * m + j]));
                }
            }
            let wab = &w[a * n + b];
            tw = &tw + &(&t * wab);
            ww = &ww + &(wab * wab);
        }
    }
    Ok(&tw / &ww)
}

#[derive(Clone, Debug, Serialize)]
pub struct HomothetyReport<T> {
    pub is_homothetic: bool,
    pub horiz_grad_norm: T,
}

/// Horizontal part of `grad λ²`, measured in the g-orthonormal horizontal
/// basis.
pub fn horizontal_homothety_test<T: Scalar>(
    map: &MapSpec,
    p: &[T],
    tol: T,
) -> Result<HomothetyReport<T>> {
    let jet = map_jet(map, p)?;
    let report = report_from_jet(&jet, tol)?;
    if !report.is_hwc {
        return Err(Error::NotHwc(report.hwc_residual.as_f64()));
    }
    let l2 = dilation_jet_unchecked(map, &jet)?;
    Ok(homothety_from(&report, &l2, tol))
}

pub(crate) fn homothety_from<T: Scalar>(
    report: &ConformalityReport<T>,
    l2: &Jet2<T>,
    tol: T,
) -> HomothetyReport<T> {
    let dl = l2.grad();
    let comps: Vec<T> = report
        .horizontal_basis
        .iter()
        .map(|x| x.iter().zip(dl).fold(T::zero(), |s, (a, b)| s + *a * *b))
        .collect();
    let horiz_grad_norm = sum_sq(&comps).sqrt();
    HomothetyReport {
        is_homothetic: horiz_grad_norm <= tol * (T::one() + l2.value.abs()),
        horiz_grad_norm,
    }
}

/// Pushforward of the fiber mean curvature.
#[derive(Clone, Debug, Serialize)]
pub struct FiberGeometry<T> {
    pub point: Vec<T>,
    /// `[(2−n) dφ(grad ln λ) − τ(φ)]/(m−n)`
    pub d_phi_mu: Vec<T>,
    /// `−(1/(m−n)) Σ_r Hess φ(U_r, U_r)` over a g-orthonormal vertical
    /// frame; independent of the tension formula.
    pub d_phi_mu_direct: Vec<T>,
    pub grad_ln_lambda_pushforward: Vec<T>,
    /// `‖d_phi_mu‖_h`
    pub minimal_fiber_residual: T,
}

pub fn fiber_geometry<T: Scalar>(map: &MapSpec, p: &[T], tol: T) -> Result<FiberGeometry<T>> {
    let jet = map_jet(map, p)?;
    let report = report_from_jet(&jet, tol)?;
    let l2 = dilation_for_fibers(map, &jet, &report)?;
    Ok(fiber_from(&jet, &report, &l2))
}

fn dilation_for_fibers<T: Scalar>(
    map: &MapSpec,
    jet: &MapJet<T>,
    report: &ConformalityReport<T>,
) -> Result<Jet2<T>> {
    if map.m() == map.n() {
        return Err(Error::EqualDimensions);
    }
    if !report.is_submersive || map.m() < map.n() {
        return Err(Error::NotSubmersive);
    }
    if !report.is_hwc {
        return Err(Error::NotHwc(report.hwc_residual.as_f64()));
    }
    dilation_jet_unchecked(map, jet)
}

pub(crate) fn fiber_from<T: Scalar>(
    jet: &MapJet<T>,
    report: &ConformalityReport<T>,
    l2: &Jet2<T>,
) -> FiberGeometry<T> {
    let (m, n) = (jet.m(), jet.n());
    let codim = T::lit((m - n) as f64);
    let grad_ln_lambda: Vec<T> = jet
        .source
        .grad(l2)
        .iter()
        .map(|g| T::half() * *g / l2.value)
        .collect();
    let grad_ln_lambda_pushforward = jet.push(&grad_ln_lambda);
    let tau = jet.tension();
    let two_minus_n = T::lit(2.0 - n as f64);
    let d_phi_mu: Vec<T> = grad_ln_lambda_pushforward
        .iter()
        .zip(&tau)
        .map(|(g, t)| (two_minus_n * *g - *t) / codim)
        .collect();
    let d_phi_mu_direct = (0..n)
        .map(|a| {
            let mut s = T::zero();
            for u in &report.vertical_basis {
                for i in 0..m {
                    for j in 0..m {
                        let mut hij = jet.h(a, i, j);
                        for k in 0..m {
                            hij -= jet.source.gamma(k, i, j) * jet.jacobian[(a, k)];
                        }
                        s += hij * u[i] * u[j];
                    }
                }
            }
            -s / codim
        })
        .collect();
    let minimal_fiber_residual = jet.target.norm(&d_phi_mu);
    FiberGeometry {
        point: jet.point.clone(),
        d_phi_mu,
        d_phi_mu_direct,
        grad_ln_lambda_pushforward,
        minimal_fiber_residual,
    }
}

/// `τ_f − f[−(m−n) dφ(μ) + dφ(grad ln(fλ^{2−n}))]` with `μ` from the direct
/// fiber route.
#[derive(Clone, Debug, Serialize)]
pub struct TrichotomyCheck<T> {
    pub residual: T,
    pub tau_f_norm: T,
    /// `‖dφ(grad(fλ^{2−n}))‖_h`: zero iff the gradient is vertical.
    pub horizontal_weight_gradient: T,
    pub fiber: FiberGeometry<T>,
}

pub fn trichotomy_check<T: Scalar>(map: &MapSpec, p: &[T], tol: T) -> Result<TrichotomyCheck<T>> {
    let jet = map_jet(map, p)?;
    let report = report_from_jet(&jet, tol)?;
    let l2 = dilation_for_fibers(map, &jet, &report)?;
    let f = map.weight_jet(p)?;
    let fiber = fiber_from(&jet, &report, &l2);
    let (m, n) = (jet.m(), jet.n());
    let codim = T::lit((m - n) as f64);
    let expo = T::lit((2.0 - n as f64) / 2.0);
    let fv = f.value;
    // grad ln(f λ^{2−n}) = grad f / f + (2−n)/2 · grad λ² / λ²
    let dlog: Vec<T> = f
        .grad()
        .iter()
        .zip(l2.grad())
        .map(|(df, dl)| *df / fv + expo * *dl / l2.value)
        .collect();
    let push = jet.push(&jet.source.raise(&dlog));
    let tau_f = jet.f_tension_with(&f);
    let diff: Vec<T> = (0..n)
        .map(|a| tau_f[a] - fv * (-codim * fiber.d_phi_mu_direct[a] + push[a]))
        .collect();
    let weight = fv * l2.value.powf(expo);
    let grad_weight: Vec<T> = push.iter().map(|v| *v * weight).collect();
    Ok(TrichotomyCheck {
        residual: jet.target.norm(&diff),
        tau_f_norm: jet.target.norm(&tau_f),
        horizontal_weight_gradient: jet.target.norm(&grad_weight),
        fiber,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ImmersionReport<T> {
    pub is_conformal_immersion: bool,
    pub lambda_sq: T,
    /// `‖φ*h − λ²g‖/‖g‖`
    pub residual: T,
    pub eta: Vec<T>,
    pub tangential: Vec<T>,
}

/// Splits `τ_f(φ)` (weight 1 when the map has none) into its part tangent
/// to `dφ(TₚM)` and the normal remainder `mλ²f η`.
pub fn conformal_immersion_analysis<T: Scalar>(
    map: &MapSpec,
    p: &[T],
    tol: T,
) -> Result<ImmersionReport<T>> {
    let jet = map_jet(map, p)?;
    let (m, n) = (jet.m(), jet.n());
    if m > n {
        return Err(Error::NotImmersion);
    }
    let frame = orthonormal_frame(&jet.source.g)?;
    let h_half = jet
        .target
        .g
        .cholesky()
        .ok_or_else(|| Error::Invalid("target metric lost positive definiteness".into()))?;
    let (sigma, _) =
        right_singular_system(&h_half.transpose().matmul(&jet.jacobian).matmul(&frame));
    let smax = sigma.iter().fold(T::zero(), |a, b| a.max(*b));
    if smax == T::zero() || sigma.iter().any(|s| *s < T::lit(RANK_THRESHOLD) * smax) {
        return Err(Error::NotImmersion);
    }
    let pull = jet.pullback_metric();
    let g = &jet.source.g;
    let lambda_sq = pull.frobenius_dot(g) / g.frobenius_dot(g);
    let residual = pull.sub(&g.scale(lambda_sq)).frobenius_norm() / g.frobenius_norm();
    let f = match map.weight_expr() {
        Some(_) => map.weight_jet(p)?,
        None => Jet2::constant(T::one(), m),
    };
    let tau_f = jet.f_tension_with(&f);
    let rhs = jet
        .jacobian
        .transpose()
        .matmul(&jet.target.g)
        .matvec(&tau_f);
    let coeff = pull.solve(&rhs).ok_or(Error::NotImmersion)?;
    let tangential = jet.push(&coeff);
    let denom = T::lit(m as f64) * lambda_sq * f.value;
    let eta = tau_f
        .iter()
        .zip(&tangential)
        .map(|(t, s)| (*t - *s) / denom)
        .collect();
    Ok(ImmersionReport {
        is_conformal_immersion: residual <= tol,
        lambda_sq,
        residual,
        eta,
        tangential,
    })
}
